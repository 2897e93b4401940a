#include "sensact/misdp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <queue>

#include <fmt/format.h>
#include <json.hpp>

#include "sensact/error.hpp"

namespace sensact {

using sdp::AffineSymMatrix;
using sdp::LinearExpr;

Eigen::MatrixXd omega_of(const Eigen::MatrixXd& P, const Eigen::MatrixXd& B) {
  if (P.rows() != P.cols() || P.rows() != B.rows()) {
    throw DimensionError("P and B rows", B.rows(), P.rows());
  }
  if (numerical_rank(B) != B.cols()) {
    throw RankDeficiencyError("B is not full column rank");
  }
  return (B.transpose() * B).llt().solve(B.transpose() * P * B);
}

Eigen::MatrixXd xi_of(const Eigen::MatrixXd& P, const Eigen::MatrixXd& B) {
  return P * B - B * omega_of(P, B);
}

namespace {

// lhs <= L * (c0 + sum coef_k * bit_k), written as lhs - L*sum <= L*c0.
void add_big_m(sdp::ConicProblem& p, LinearExpr lhs, double L, double c0,
               std::initializer_list<std::pair<sdp::VarId, double>> bits,
               const std::string& name) {
  for (const auto& [v, c] : bits) lhs.add(v, -L * c);
  p.add_le(std::move(lhs), L * c0, name);
}

LinearExpr var(sdp::VarId v, double c = 1.0) { return LinearExpr().add(v, c); }

LinearExpr diff(sdp::VarId a, sdp::VarId b, double sign) {
  return LinearExpr().add(a, sign).add(b, -sign);
}

}  // namespace

namespace {

struct ModelVars {
  sdp::SymMatrixVar P;
  sdp::MatrixVar N, M, Theta, Omega, Xi;
  std::vector<sdp::VarId> bits;
};

// With `projected` set, N and M are eliminated. N_ij only occurs in
// |Theta_ij - N_ij| <= L1(2 - pi - gamma) and can always equal Theta_ij.
// For blocks of different nodes an M_ab exists iff
// |Omega_ab| <= L2(3 - 2 pi_a); for the same node the M rows impose nothing
// beyond |Omega_ab| <= L2.
void build_problem(const DynNetwork& net, const LogisticConstraint& constraint,
                   const BigMOptions& opts, bool projected, sdp::ConicProblem& p,
                   ModelVars& v) {
  const SofOptions& so = opts.sof;
  const int n = net.nx(), nu = net.nu(), ny = net.ny(), nn = net.num_nodes();
  const Eigen::MatrixXd& A = net.A();
  const Eigen::MatrixXd& B = net.B();
  const Eigen::MatrixXd& C = net.C();

  v.P = p.add_sym_matrix("P", n, so.delta);
  if (!projected) {
    v.N = p.add_matrix("N", nu, ny);
    v.M = p.add_matrix("M", nu, nu);
  }
  v.Theta = p.add_matrix("Theta", nu, ny);
  v.Omega = p.add_matrix("Omega", nu, nu);
  v.Xi = p.add_matrix("Xi", n, nu);
  for (int k = 0; k < nn; ++k) v.bits.push_back(p.add_scalar(fmt::format("pi{}", k + 1)));
  for (int k = 0; k < nn; ++k) {
    v.bits.push_back(p.add_scalar(fmt::format("gamma{}", k + 1)));
  }
  auto pi = [&](int input_channel) { return v.bits[net.node_of_input(input_channel)]; };
  auto gamma = [&](int output_channel) {
    return v.bits[nn + net.node_of_output(output_channel)];
  };

  AffineSymMatrix lyap(n);
  lyap.add_sym_congruence(Eigen::MatrixXd::Identity(n, n), v.P, A);
  lyap.add_congruence(B, v.Theta, C);
  p.add_lmi(std::move(lyap), so.eps, /*strict=*/true, "closed loop");

  AffineSymMatrix scale(n);
  scale.add_var(v.P);
  scale.add_constant(-so.p_upper * Eigen::MatrixXd::Identity(n, n));
  p.add_lmi(std::move(scale), 0.0, /*strict=*/false, "P upper bound");

  // Omega = W P B and Xi = (I - B W) P B with W = (B'B)^{-1} B'.
  const Eigen::MatrixXd W = (B.transpose() * B).llt().solve(B.transpose());
  const Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(n, n) - B * W;
  auto tie = [&](const Eigen::MatrixXd& L, const sdp::MatrixVar& X,
                 const std::string& name) {
    for (int i = 0; i < X.rows(); ++i) {
      for (int j = 0; j < X.cols(); ++j) {
        LinearExpr e;
        e.add(X.id(i, j), -1.0);
        // (L P B)_ij = sum_{k,l} L_ik P_kl B_lj
        for (int k = 0; k < n; ++k) {
          if (L(i, k) == 0.0) continue;
          for (int l = 0; l < n; ++l) {
            if (B(l, j) != 0.0) e.add(v.P.id(k, l), L(i, k) * B(l, j));
          }
        }
        p.add_eq(std::move(e), 0.0, fmt::format("{} ({},{})", name, i, j));
      }
    }
  };
  tie(W, v.Omega, "Omega");
  tie(Q, v.Xi, "Xi");

  const double L1 = opts.L1, L2 = opts.L2, L3 = opts.L3;
  for (int i = 0; i < nu; ++i) {
    for (int j = 0; j < ny; ++j) {
      const auto th = v.Theta.id(i, j);
      const auto pa = pi(i), gb = gamma(j);
      const std::string tag = fmt::format("Theta ({},{})", i, j);
      for (double s : {1.0, -1.0}) {
        add_big_m(p, var(th, s), L1, 0.0, {{pa, 1.0}}, tag);
        add_big_m(p, var(th, s), L1, 0.0, {{gb, 1.0}}, tag);
        if (!projected) {
          add_big_m(p, diff(th, v.N.id(i, j), s), L1, 2.0, {{pa, -1.0}, {gb, -1.0}}, tag);
        }
      }
    }
  }
  for (int i = 0; i < nu; ++i) {
    for (int j = 0; j < nu; ++j) {
      const auto om = v.Omega.id(i, j);
      const auto pa = pi(i), pb = pi(j);
      const std::string tag = fmt::format("M ({},{})", i, j);
      for (double s : {1.0, -1.0}) {
        if (projected) {
          if (pa == pb) {
            add_big_m(p, var(om, s), L2, 1.0, {}, tag);
          } else {
            add_big_m(p, var(om, s), L2, 1.0, {{pa, 1.0}, {pb, -1.0}}, tag);
            add_big_m(p, var(om, s), L2, 3.0, {{pa, -2.0}}, tag);
          }
          continue;
        }
        const auto mv = v.M.id(i, j);
        if (pa == pb) {
          // Same node: the first two rows reduce to plain bounds.
          add_big_m(p, var(mv, s), L2, 1.0, {}, tag);
          add_big_m(p, var(om, s), L2, 1.0, {}, tag);
          add_big_m(p, diff(mv, om, s), L2, 2.0, {{pa, -2.0}}, tag);
        } else {
          add_big_m(p, var(mv, s), L2, 1.0, {{pa, -1.0}, {pb, 1.0}}, tag);
          add_big_m(p, var(om, s), L2, 1.0, {{pa, 1.0}, {pb, -1.0}}, tag);
          add_big_m(p, diff(mv, om, s), L2, 2.0, {{pa, -1.0}, {pb, -1.0}}, tag);
        }
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < nu; ++j) {
      const std::string tag = fmt::format("Xi ({},{})", i, j);
      for (double s : {1.0, -1.0}) {
        add_big_m(p, var(v.Xi.id(i, j), s), L3, 1.0, {{pi(j), -1.0}}, tag);
      }
    }
  }

  for (int k = 0; k < 2 * nn; ++k) {
    p.add_le(var(v.bits[k], -1.0), 0.0, fmt::format("bit {} >= 0", k));
    p.add_le(var(v.bits[k]), 1.0, fmt::format("bit {} <= 1", k));
  }
  const Eigen::MatrixXd& Phi = constraint.Phi();
  for (int r = 0; r < constraint.num_rows(); ++r) {
    LinearExpr e;
    for (int k = 0; k < 2 * nn; ++k) e.add(v.bits[k], Phi(r, k));
    p.add_le(std::move(e), constraint.phi()(r), fmt::format("logistic {}", r));
  }
  p.validate();
}

}  // namespace

BigMModel assemble_bigm(const DynNetwork& net, const LogisticConstraint& constraint,
                        const BigMOptions& opts) {
  if (constraint.num_nodes() != net.num_nodes()) {
    throw DimensionError("constraint node count", net.num_nodes(),
                         constraint.num_nodes());
  }
  if (!(opts.L1 > 0.0) || !(opts.L2 > 0.0) || !(opts.L3 > 0.0)) {
    throw InputError("big-M constants must be positive");
  }
  const SofOptions& so = opts.sof;
  if (!(so.delta > 0.0) || !(so.p_upper > so.delta) || !(so.eps >= 0.0)) {
    throw InputError("invalid margins");
  }
  BigMModel mdl{net, constraint, opts, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}};
  ModelVars full;
  build_problem(net, constraint, opts, false, mdl.problem, full);
  mdl.P = full.P;
  mdl.N = full.N;
  mdl.M = full.M;
  mdl.Theta = full.Theta;
  mdl.Omega = full.Omega;
  mdl.Xi = full.Xi;
  mdl.bits = full.bits;
  ModelVars reduced;
  build_problem(net, constraint, opts, true, mdl.reduced, reduced);
  mdl.reduced_bits = reduced.bits;
  return mdl;
}

const char* to_string(RelaxationStatus s) {
  switch (s) {
    case RelaxationStatus::kFeasible:
      return "feasible";
    case RelaxationStatus::kInfeasible:
      return "infeasible";
    case RelaxationStatus::kInconclusive:
      return "inconclusive";
  }
  return "?";
}

BnbNode root_node(const BigMModel& model) {
  BnbNode node;
  node.fixed.assign(model.num_bits(), -1);
  return node;
}

RelaxationResult solve_relaxation(const BigMModel& model, const BnbNode& node) {
  if (static_cast<int>(node.fixed.size()) != model.num_bits()) {
    throw DimensionError("node bit count", model.num_bits(), node.fixed.size());
  }
  sdp::ConicProblem p = model.use_reduced ? model.reduced : model.problem;
  const std::vector<sdp::VarId>& bits = model.use_reduced ? model.reduced_bits : model.bits;
  int ones = 0;
  bool all_fixed = true;
  LinearExpr objective;
  for (int k = 0; k < model.num_bits(); ++k) {
    const int f = node.fixed[k];
    if (f < 0) {
      all_fixed = false;
      objective.add(bits[k], 1.0);
    } else {
      p.add_eq(var(bits[k]), f, fmt::format("branch bit {}", k));
      ones += f;
    }
  }
  if (!all_fixed) {
    objective.constant = ones;
    p.set_objective(objective);
  }
  const sdp::SolveOutcome out = sdp::solve(p, model.opts.sof.tol);
  RelaxationResult res;
  res.stats = out.stats;
  res.note = out.note;
  if (out.status == sdp::SolveStatus::kInfeasible) {
    res.status = RelaxationStatus::kInfeasible;
    return res;
  }
  if (out.status == sdp::SolveStatus::kInconclusive) {
    res.status = RelaxationStatus::kInconclusive;
    return res;
  }
  res.status = RelaxationStatus::kFeasible;
  res.values = out.values;
  res.bits.resize(model.num_bits());
  for (int k = 0; k < model.num_bits(); ++k) res.bits(k) = out.values(bits[k]);
  if (all_fixed) {
    res.bound = ones;
  } else {
    const double b = std::isfinite(out.objective_bound) ? out.objective_bound : 0.0;
    res.bound = std::max(b, static_cast<double>(ones));
  }
  return res;
}

namespace {

struct QueueEntry {
  int key;    // ceil of the inherited bound
  int depth;
  int seq;
  BnbNode node;
};

struct QueueOrder {
  // Smallest key first, then deepest, then oldest.
  bool operator()(const QueueEntry& a, const QueueEntry& b) const {
    if (a.key != b.key) return a.key > b.key;
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.seq > b.seq;
  }
};

int bound_key(double bound) {
  return static_cast<int>(std::ceil(bound - 1e-6));
}

}  // namespace

BnbResult solve_bnb(const BigMModel& model, const BnbOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  const int nb = model.num_bits();
  const int nn = model.num_nodes();
  BnbResult res;
  res.selection = Selection::all_ones(nn);
  int incumbent = nb + 1;

  SofOptions verify = model.opts.sof;
  verify.n_bound = std::max(verify.n_bound, model.opts.L1);

  auto try_incumbent = [&](const Selection& s) {
    if (count_active(s) >= incumbent || !model.constraint.membership(s)) return false;
    ++res.stats.lmi_checks;
    SofResult r = selection_feasible(model.net, s, verify);
    if (!r.feasible()) return false;
    incumbent = count_active(s);
    res.found = true;
    res.selection = s;
    res.H = incumbent;
    res.certificate = std::move(r.certificate);
    return true;
  };

  if (opts.seed_all_active) try_incumbent(Selection::all_ones(nn));

  std::priority_queue<QueueEntry, std::vector<QueueEntry>, QueueOrder> open;
  int seq = 0;
  int next_id = 1;
  BnbNode root = root_node(model);
  open.push({0, 0, seq++, root});

  auto log_node = [&](const BnbNode& node, const std::string& status, double bound) {
    if (!opts.log) return;
    nlohmann::json j;
    j["node"] = node.id;
    j["parent"] = node.parent;
    j["depth"] = node.depth;
    j["bound"] = bound;
    j["status"] = status;
    j["incumbent"] = res.found ? nlohmann::json(incumbent) : nlohmann::json(nullptr);
    *opts.log << j.dump() << "\n";
  };

  bool capped = false;
  while (!open.empty()) {
    QueueEntry top = open.top();
    open.pop();
    BnbNode& node = top.node;
    if (top.key >= incumbent) {
      ++res.stats.pruned_by_bound;
      continue;
    }
    if (res.stats.nodes >= opts.max_nodes) {
      capped = true;
      open.push(std::move(top));
      break;
    }
    ++res.stats.nodes;
    res.stats.max_depth = std::max(res.stats.max_depth, node.depth);
    const RelaxationResult rel = solve_relaxation(model, node);

    auto finish = [&](const std::string& status, double bound) {
      log_node(node, status, bound);
      res.stats.incumbent_trace.push_back(incumbent);
    };

    if (rel.status != RelaxationStatus::kFeasible) {
      if (rel.status == RelaxationStatus::kInconclusive) {
        ++res.stats.inconclusive;
        finish("inconclusive", node.bound);
      } else {
        ++res.stats.infeasible;
        finish("infeasible", node.bound);
      }
      continue;
    }
    const double bound = std::max(rel.bound, node.bound);
    if (bound_key(bound) >= incumbent) {
      ++res.stats.pruned_by_bound;
      finish("pruned", bound);
      continue;
    }

    // Branching candidate: the most fractional free bit, lowest index on ties.
    int branch = -1;
    double best_dist = std::numeric_limits<double>::infinity();
    bool integral = true;
    for (int k = 0; k < nb; ++k) {
      if (node.fixed[k] >= 0) continue;
      const double v = rel.bits(k);
      const double frac = std::min(std::abs(v), std::abs(1.0 - v));
      if (frac > opts.integrality_tol) integral = false;
      const double dist = std::abs(v - 0.5);
      if (frac > opts.integrality_tol && dist < best_dist) {
        best_dist = dist;
        branch = k;
      }
    }
    if (integral) {
      Selection s(nn);
      for (int k = 0; k < nb; ++k) {
        s.set_bit(k, node.fixed[k] >= 0 ? node.fixed[k] == 1 : rel.bits(k) > 0.5);
      }
      const bool improved = try_incumbent(s);
      if (improved) {
        finish("integral", bound);
        continue;
      }
      if (count_active(s) < incumbent) ++res.stats.spurious_leaves;
      // Not accepted: keep splitting on the first free bit, if any.
      for (int k = 0; k < nb && branch < 0; ++k) {
        if (node.fixed[k] < 0) branch = k;
      }
      if (branch < 0) {
        finish("spurious", bound);
        continue;
      }
    }
    finish("branched", bound);
    for (int v : {0, 1}) {
      BnbNode child;
      child.id = next_id++;
      child.parent = node.id;
      child.depth = node.depth + 1;
      child.fixed = node.fixed;
      child.fixed[branch] = static_cast<std::int8_t>(v);
      child.history = node.history;
      child.history.emplace_back(branch, v);
      child.bound = bound;
      open.push({bound_key(child.bound), child.depth, seq++, std::move(child)});
    }
  }

  res.optimal = !capped;
  double lb = res.found ? incumbent : std::numeric_limits<double>::infinity();
  while (!open.empty()) {
    lb = std::min(lb, open.top().node.bound);
    open.pop();
  }
  res.lower_bound = lb;
  if (capped) {
    res.note = fmt::format("node cap {} reached", opts.max_nodes);
  } else if (!res.found) {
    res.note = "no admissible selection passes the output feedback test";
  }
  res.stats.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

EscalationResult solve_bnb_escalating(const DynNetwork& net,
                                      const LogisticConstraint& constraint,
                                      const BigMOptions& bigm,
                                      const BnbOptions& opts,
                                      std::optional<int> reference_H,
                                      int max_escalations) {
  EscalationResult er;
  er.used = bigm;
  for (int round = 0;; ++round) {
    const BigMModel model = assemble_bigm(net, constraint, er.used);
    er.result = solve_bnb(model, opts);
    er.H_per_run.push_back(er.result.found ? er.result.H : -1);
    const bool agrees = !reference_H || (er.result.found && er.result.H == *reference_H) ||
                        (!er.result.found && *reference_H < 0);
    if (agrees || round >= max_escalations) break;
    er.used.L1 *= 10.0;
    er.used.L2 *= 10.0;
    er.used.L3 *= 10.0;
    ++er.escalations;
  }
  return er;
}

}  // namespace sensact
