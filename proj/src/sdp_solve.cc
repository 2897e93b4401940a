#include <chrono>
#include <cstdlib>
#include <fstream>

#include <fmt/format.h>

#include "ipm.hpp"
#include "sensact/error.hpp"
#include "sensact/sdp.hpp"

namespace sensact::sdp {

namespace {

using internal::Compiled;
using internal::IpmOptions;
using internal::IpmResult;
using internal::IpmStatus;

bool solver_log_enabled() {
  const char* v = std::getenv("SENSACT_SOLVER_LOG");
  return v != nullptr && *v != '\0' && std::string(v) != "0";
}

Eigen::VectorXd reconstruct(const Compiled& c, const Eigen::VectorXd& y,
                            int num_vars) {
  Eigen::VectorXd x = c.x0;
  if (c.form.m > 0) x += c.Zmap * y;
  return x.head(num_vars);
}

const char* ipm_status_name(IpmStatus s) {
  switch (s) {
    case IpmStatus::kOptimal:
      return "optimal";
    case IpmStatus::kDualInfeasible:
      return "infeasibility certificate";
    case IpmStatus::kStoppedByCallback:
      return "stopped";
    case IpmStatus::kMaxIter:
      return "iteration cap reached";
    case IpmStatus::kStalled:
      return "stalled";
    case IpmStatus::kNumericalFailure:
      return "numerical failure";
  }
  return "?";
}

// Feasibility phase: maximize the common margin t of the strict constraints.
SolveOutcome feasibility_phase(const ConicProblem& problem,
                               const ToleranceSet& tol) {
  SolveOutcome out;
  const Compiled c = internal::compile(problem, /*feasibility_mode=*/true);
  out.stats.presolve_rounds = c.presolve_rounds;
  if (c.infeasible) {
    out.status = SolveStatus::kInfeasible;
    out.note = "presolve: " + c.note;
    return out;
  }
  out.stats.num_free_vars = c.form.m;
  out.stats.num_lp_rows = static_cast<int>(c.form.lp_c.size());
  const int n = problem.num_vars();

  auto accept = [&](const Eigen::VectorXd& y, double t) {
    const internal::SlackCheck sc = internal::dual_slack(c.form, y);
    if (sc.min_block_eig < -1e-12 || sc.min_lp_slack < -1e-10) return false;
    Eigen::VectorXd x = reconstruct(c, y, n);
    ResidualReport rep = residuals(problem, x);
    if (!rep.within(tol)) return false;
    out.values = std::move(x);
    out.residuals = std::move(rep);
    out.margin = t;
    out.status = SolveStatus::kFeasible;
    return true;
  };

  if (c.form.m == 0) {
    Eigen::VectorXd y(0);
    if (!accept(y, 0.0)) {
      out.status = SolveStatus::kInfeasible;
      out.note = "all variables fixed by equalities and a constraint fails";
    }
    return out;
  }

  const int ti = c.margin_index;
  bool early_infeasible = false;
  IpmOptions opts;
  opts.max_iter = tol.max_iter;
  opts.gap_tol = tol.gap_rel;
  opts.verbose = solver_log_enabled();
  opts.callback = [&](const internal::IpmIterate& info) {
    const double t = ti >= 0 ? (*info.y)(ti) : 0.0;
    if (!tol.solve_to_optimality && t > 0.0 && t >= 0.5 * info.pobj) {
      if (accept(*info.y, t)) return true;
    }
    if (info.pinf <= 1e-8 && info.dinf <= 1e-8 &&
        info.pobj + info.duality_correction < -tol.psd_slack) {
      early_infeasible = true;
      return true;
    }
    return false;
  };
  const IpmResult r = internal::run_ipm(c.form, opts);
  out.stats.iterations = r.iterations;
  if (out.status == SolveStatus::kFeasible) return out;

  out.margin = r.dobj;
  if (early_infeasible) {
    out.margin = r.pobj + r.duality_correction;
    out.status = SolveStatus::kInfeasible;
    out.note = fmt::format("largest margin is negative (upper bound {:.3e})",
                           r.pobj + r.duality_correction);
    return out;
  }
  switch (r.status) {
    case IpmStatus::kOptimal: {
      const double t = ti >= 0 ? r.y(ti) : 0.0;
      if (t > tol.psd_slack && accept(r.y, t)) return out;
      if (r.pobj + r.duality_correction < -tol.psd_slack) {
        out.margin = r.pobj + r.duality_correction;
        out.status = SolveStatus::kInfeasible;
        out.note = fmt::format("largest margin is negative ({:.3e})", r.dobj);
      } else {
        out.status = SolveStatus::kInconclusive;
        out.note = fmt::format("largest margin {:.3e} is within tolerance of 0",
                               r.dobj);
      }
      return out;
    }
    case IpmStatus::kDualInfeasible:
      out.status = SolveStatus::kInfeasible;
      out.note = "infeasibility certificate found";
      return out;
    default:
      out.status = SolveStatus::kInconclusive;
      out.note = fmt::format("interior point method: {} (margin estimate {:.3e})",
                             ipm_status_name(r.status), r.dobj);
      return out;
  }
}

// Optimization phase, run only once the problem is known to be feasible.
void optimization_phase(const ConicProblem& problem, const ToleranceSet& tol,
                        SolveOutcome& out) {
  const LinearExpr& obj = *problem.objective();
  out.objective = value_of(obj, out.values);
  out.objective_bound = -std::numeric_limits<double>::infinity();
  const Compiled c = internal::compile(problem, /*feasibility_mode=*/false);
  if (c.infeasible) {
    // The nominal margins have no room left; keep the phase-one point.
    out.note = "optimization presolve: " + c.note;
    return;
  }
  const int n = problem.num_vars();
  if (c.form.m == 0) {
    out.objective_bound = out.objective;
    return;
  }
  IpmOptions opts;
  opts.max_iter = tol.max_iter;
  opts.gap_tol = tol.gap_rel;
  opts.verbose = solver_log_enabled();
  const IpmResult r = internal::run_ipm(c.form, opts);
  out.stats.iterations += r.iterations;
  if (r.status != IpmStatus::kOptimal) {
    out.note = fmt::format("optimization phase: {}", ipm_status_name(r.status));
    return;
  }
  // min c'x = const - max b'y >= const - (pobj + |rp'y|).
  out.objective_bound = c.objective_constant - (r.pobj + r.duality_correction);
  Eigen::VectorXd x = reconstruct(c, r.y, n);
  ResidualReport rep = residuals(problem, x);
  if (rep.within(tol)) {
    out.values = std::move(x);
    out.residuals = std::move(rep);
    out.objective = value_of(obj, out.values);
  }
  out.objective_bound = std::min(out.objective_bound, out.objective);
}

}  // namespace

SolveOutcome InteriorPointBackend::solve(const ConicProblem& problem,
                                         const ToleranceSet& tol) const {
  const auto t0 = std::chrono::steady_clock::now();
  SolveOutcome out = feasibility_phase(problem, tol);
  if (out.status == SolveStatus::kFeasible && problem.objective()) {
    optimization_phase(problem, tol, out);
  }
  out.stats.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

SolveOutcome solve(const ConicProblem& problem, const ToleranceSet& tol) {
  return InteriorPointBackend().solve(problem, tol);
}

SolveOutcome solve(const ConicProblem& problem, const ToleranceSet& tol,
                   const Backend& backend) {
  return backend.solve(problem, tol);
}

bool write_sdpa(const ConicProblem& problem, const std::string& path) {
  const Compiled c = internal::compile(problem, /*feasibility_mode=*/true);
  if (c.infeasible) return false;
  const auto& f = c.form;
  std::ofstream os(path);
  if (!os) throw InputError("cannot open " + path + " for writing");
  // SDPA: minimize c'x s.t. sum_i x_i F_i - F_0 >= 0, here with c = -b,
  // F_0 = -C and F_i = -A_i.
  os << "* equality-reduced feasibility problem; variable "
     << (c.margin_index + 1) << " is the common margin\n";
  const int nlp = static_cast<int>(f.lp_c.size());
  const int nblocks = static_cast<int>(f.blocks.size()) + (nlp > 0 ? 1 : 0);
  os << f.m << "\n" << nblocks << "\n";
  for (const auto& b : f.blocks) os << b.dim << " ";
  if (nlp > 0) os << -nlp;
  os << "\n";
  for (int j = 0; j < f.m; ++j) os << fmt::format("{:.17g} ", -f.b(j));
  os << "\n";
  for (size_t k = 0; k < f.blocks.size(); ++k) {
    const auto& b = f.blocks[k];
    for (int r = 0; r < b.dim; ++r) {
      for (int cc = r; cc < b.dim; ++cc) {
        if (b.C(r, cc) != 0.0) {
          os << fmt::format("0 {} {} {} {:.17g}\n", k + 1, r + 1, cc + 1, -b.C(r, cc));
        }
      }
    }
    std::vector<int> prow, pcol;
    for (int r = 0; r < b.dim; ++r) {
      for (int cc = r; cc < b.dim; ++cc) {
        prow.push_back(r);
        pcol.push_back(cc);
      }
    }
    for (int j = 0; j < b.A.outerSize(); ++j) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(b.A, j); it; ++it) {
        os << fmt::format("{} {} {} {} {:.17g}\n", b.vars[j] + 1, k + 1,
                          prow[it.row()] + 1, pcol[it.row()] + 1, -it.value());
      }
    }
  }
  if (nlp > 0) {
    const int blk = static_cast<int>(f.blocks.size()) + 1;
    for (int i = 0; i < nlp; ++i) {
      if (f.lp_c(i) != 0.0) {
        os << fmt::format("0 {} {} {} {:.17g}\n", blk, i + 1, i + 1, -f.lp_c(i));
      }
    }
    const Eigen::SparseMatrix<double> G = f.lp_G;
    for (int j = 0; j < G.outerSize(); ++j) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(G, j); it; ++it) {
        os << fmt::format("{} {} {} {} {:.17g}\n", j + 1, blk, it.row() + 1,
                          it.row() + 1, -it.value());
      }
    }
  }
  return static_cast<bool>(os);
}

}  // namespace sensact::sdp
