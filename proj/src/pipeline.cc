#include "sensact/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "json_util.hpp"
#include "sensact/error.hpp"

namespace sensact {

using nlohmann::json;

const char* to_string(Method m) {
  switch (m) {
    case Method::kMisdp:
      return "misdp";
    case Method::kBsa:
      return "bsa";
    case Method::kHeu:
      return "heu";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  if (name == "misdp") return Method::kMisdp;
  if (name == "bsa") return Method::kBsa;
  if (name == "heu") return Method::kHeu;
  throw InputError("unknown method '" + name + "' (expected misdp, bsa or heu)");
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double closed_loop_abscissa(const DynNetwork& net, const Selection& s,
                            const SofCertificate& cert) {
  const SelectionMatrices sm = build_selection_matrices(s, net);
  return max_real_part(closed_loop_spectrum(net, sm.Pi, sm.Gamma, full_gain(net, cert)));
}

}  // namespace

RunResult run_selection(Method method, const DynNetwork& net,
                        const LogisticConstraint& constraint, const MethodOptions& opts) {
  if (constraint.num_nodes() != net.num_nodes()) {
    throw DimensionError("constraint node count", net.num_nodes(), constraint.num_nodes());
  }
  const auto t0 = std::chrono::steady_clock::now();
  const int nn = net.num_nodes();
  RunResult r;
  r.method = to_string(method);
  r.eps = opts.sof.eps;
  json config = {{"eps", opts.sof.eps},
                 {"delta", opts.sof.delta},
                 {"p_upper", opts.sof.p_upper},
                 {"n_bound", opts.sof.n_bound},
                 {"constraint_fingerprint", fmt::format("{:016x}", constraint.fingerprint())}};
  json stats = json::object();

  Selection best = Selection::all_ones(nn);
  std::optional<SofCertificate> cert;
  int inconclusive = 0;

  switch (method) {
    case Method::kMisdp: {
      BigMOptions b = opts.bigm;
      b.sof = opts.sof;
      b.sof.n_bound = std::max(b.sof.n_bound, b.L1);
      config["L1"] = b.L1;
      config["L2"] = b.L2;
      config["L3"] = b.L3;
      config["max_nodes"] = opts.bnb.max_nodes;
      BnbResult res;
      if (opts.reference_H) {
        config["reference_H"] = *opts.reference_H;
        EscalationResult esc = solve_bnb_escalating(net, constraint, b, opts.bnb,
                                                    opts.reference_H, opts.max_escalations);
        res = std::move(esc.result);
        stats["escalations"] = esc.escalations;
        stats["H_per_run"] = esc.H_per_run;
        stats["L_used"] = {esc.used.L1, esc.used.L2, esc.used.L3};
      } else {
        res = solve_bnb(assemble_bigm(net, constraint, b), opts.bnb);
      }
      stats["nodes"] = res.stats.nodes;
      stats["infeasible_nodes"] = res.stats.infeasible;
      stats["inconclusive_nodes"] = res.stats.inconclusive;
      stats["pruned_by_bound"] = res.stats.pruned_by_bound;
      stats["spurious_leaves"] = res.stats.spurious_leaves;
      stats["max_depth"] = res.stats.max_depth;
      stats["lower_bound"] = res.lower_bound;
      stats["incumbent_trace"] = res.stats.incumbent_trace;
      if (!res.note.empty()) stats["note"] = res.note;
      r.iterations = res.stats.nodes;
      r.lmi_solves = res.stats.nodes + res.stats.lmi_checks;
      r.optimal = res.found && res.optimal;
      inconclusive = res.stats.inconclusive;
      if (res.found) {
        best = res.selection;
        cert = std::move(res.certificate);
      }
      break;
    }
    case Method::kBsa: {
      CandidateSet set = opts.candidates ? *opts.candidates
                                         : build_candidate_set(constraint, nn);
      if (set.num_nodes != nn || set.constraint_fingerprint != constraint.fingerprint()) {
        throw InputError("candidate set was built for a different network or constraint");
      }
      BsaResult res = bsa(net, set, opts.sof);
      stats["candidates"] = set.size();
      stats["inconclusive"] = res.inconclusive;
      json trace = json::array();
      for (const BsaStep& st : res.trace) {
        trace.push_back({{"sigma", st.sigma},
                         {"q", st.q},
                         {"tuple", Selection::from_mask(st.mask, nn).tuple_string()},
                         {"status", to_string(st.status)},
                         {"removed", st.removed}});
      }
      stats["trace"] = std::move(trace);
      r.iterations = res.iterations;
      r.lmi_solves = static_cast<int>(res.trace.size());
      inconclusive = res.inconclusive;
      if (res.improved) {
        best = res.best;
        cert = std::move(res.certificate);
      }
      break;
    }
    case Method::kHeu: {
      config["max_iter"] = opts.heu.max_iter;
      config["max_infeasibility"] = opts.heu.max_infeasibility;
      config["max_random"] = opts.heu.max_random;
      config["seed"] = opts.heu.seed;
      if (opts.heu.wmin) config["wmin"] = *opts.heu.wmin;
      if (opts.heu.wmax) config["wmax"] = *opts.heu.wmax;
      HeuristicResult res = heu(net, constraint, opts.heu, opts.sof);
      const HeuristicStats& hs = res.stats;
      stats["infeasible"] = hs.infeasible;
      stats["inconclusive"] = hs.inconclusive;
      stats["zero_tuples"] = hs.zero_tuples;
      stats["draws"] = hs.draws;
      stats["rejected_draws"] = hs.rejected_draws;
      stats["initial_window"] = {hs.initial_wmin, hs.initial_wmax};
      stats["final_window"] = {hs.final_wmin, hs.final_wmax};
      r.seeds.push_back(opts.heu.seed);
      r.iterations = hs.lmi_solves;
      r.lmi_solves = hs.lmi_solves;
      inconclusive = hs.inconclusive;
      if (res.improved) {
        best = res.best;
        cert = std::move(res.certificate);
      }
      break;
    }
  }

  if (!cert) {
    const Selection all = Selection::all_ones(nn);
    if (constraint.membership(all)) {
      SofResult sr = selection_feasible(net, all, opts.sof);
      ++r.lmi_solves;
      stats["all_active_status"] = to_string(sr.status);
      if (sr.feasible()) {
        best = all;
        cert = std::move(sr.certificate);
      } else if (sr.status == SofStatus::kInconclusive) {
        ++inconclusive;
      }
    } else {
      stats["all_active_status"] = "inadmissible";
    }
  }

  r.selection = best;
  r.H = count_active(best);
  r.improved = cert.has_value() && best != Selection::all_ones(nn);
  if (cert) {
    r.status = kRunStabilizing;
    r.max_real_eig = closed_loop_abscissa(net, best, *cert);
    r.certificate = std::move(cert);
  } else {
    r.status = inconclusive > 0 ? kRunInconclusive : kRunInfeasible;
    r.optimal = false;
  }
  r.config_json = config.dump();
  r.stats_json = stats.dump();
  r.wall_seconds = seconds_since(t0);
  return r;
}

int exit_code_for(const RunResult& r) {
  if (r.status == kRunStabilizing) return 0;
  if (r.status == kRunInconclusive) return 4;
  return 2;
}

VerifyReport verify_result(const DynNetwork& net, const RunResult& r, double psd_tol,
                           double lmi_tol, double eq_tol) {
  VerifyReport rep;
  auto fail = [&](std::string msg) { rep.problems.push_back(std::move(msg)); };
  if (r.selection.num_nodes() != net.num_nodes()) {
    fail(fmt::format("selection has {} nodes, system has {}", r.selection.num_nodes(),
                     net.num_nodes()));
    return rep;
  }
  if (r.H != count_active(r.selection)) {
    fail(fmt::format("H = {} but the selection has {} active bits", r.H,
                     count_active(r.selection)));
  }
  if (!r.certificate) {
    fail("result carries no certificate");
    return rep;
  }
  const SofCertificate& c = *r.certificate;
  const ReducedMatrices red = reduced_matrices(net, r.selection);
  if (red.Bq.cols() != c.M.rows() || red.Cq.rows() != c.N.cols() ||
      c.P.rows() != net.nx() || c.F.rows() != c.M.rows() || c.F.cols() != c.N.cols()) {
    fail(fmt::format(
        "certificate blocks (P {}x{}, M {}x{}, N {}x{}) do not fit the selection "
        "(n_x {}, {} inputs, {} outputs)",
        c.P.rows(), c.P.cols(), c.M.rows(), c.M.cols(), c.N.rows(), c.N.cols(), net.nx(),
        red.Bq.cols(), red.Cq.rows()));
    return rep;
  }
  // Full gain placed on the channels the selection activates.
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(net.nu(), net.ny());
  for (std::size_t i = 0; i < red.input_channels.size(); ++i) {
    for (std::size_t j = 0; j < red.output_channels.size(); ++j) {
      F(red.input_channels[i], red.output_channels[j]) = c.F(i, j);
    }
  }
  const SelectionMatrices sm = build_selection_matrices(r.selection, net);
  const double abscissa = max_real_part(closed_loop_spectrum(net, sm.Pi, sm.Gamma, F));
  rep.max_real_eig = abscissa;

  const CertificateCheck chk = check_certificate(net.A(), red.Bq, red.Cq, c);
  rep.check = chk;
  if (abscissa >= 0.0) {
    fail(fmt::format("closed loop is not stable: max Re eig = {:.6g}", abscissa));
  }
  if (chk.min_eig_P < c.delta - psd_tol) {
    fail(fmt::format("lambda_min(P) = {:.6g} below delta = {:.6g}", chk.min_eig_P, c.delta));
  }
  if (chk.lmi_max_eig > -c.eps + lmi_tol) {
    fail(fmt::format("LMI max eigenvalue {:.6g} exceeds -eps = {:.6g}", chk.lmi_max_eig,
                     -c.eps));
  }
  if (chk.eq_residual > eq_tol) {
    fail(fmt::format("|BM - PB| = {:.6g} exceeds {:.1g}", chk.eq_residual, eq_tol));
  }
  const double n_scale = std::max(1.0, c.N.cwiseAbs().maxCoeff());
  if (chk.gain_residual > eq_tol * n_scale) {
    fail(fmt::format("|MF - N| = {:.6g} exceeds {:.1g}", chk.gain_residual,
                     eq_tol * n_scale));
  }
  rep.pass = rep.problems.empty();
  return rep;
}

// ---------------------------------------------------------------------------
// Benchmarks

namespace {

std::vector<std::uint64_t> seed_list(const json& j) {
  std::vector<std::uint64_t> seeds;
  if (j.contains("seeds")) {
    for (const json& s : j["seeds"]) seeds.push_back(s.get<std::uint64_t>());
  } else {
    seeds.push_back(j.value("seed", std::uint64_t{1}));
  }
  return seeds;
}

template <typename T>
std::optional<T> opt(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<T>();
}

}  // namespace

BenchConfig bench_config_from_json(const std::string& text) {
  const std::string what = "bench config";
  const json j = io_detail::parse(text, what);
  BenchConfig cfg;
  try {
    for (const json& sys : io_detail::field(j, "systems", what)) {
      const std::string kind = io_detail::field(sys, "kind", what).get<std::string>();
      if (kind == "random") {
        RandomNetworkParams p;
        p.num_nodes = io_detail::int_field(sys, "nodes", what);
        p.states_per_node = sys.value("states_per_node", p.states_per_node);
        p.coupling_decay = sys.value("coupling_decay", p.coupling_decay);
        p.instability_shift = sys.value("instability_shift", p.instability_shift);
        for (std::uint64_t seed : seed_list(sys)) {
          p.seed = seed;
          cfg.systems.push_back(
              {fmt::format("random-N{}-s{}", p.num_nodes, seed), seed, gen_random_network(p)});
        }
      } else if (kind == "mass-spring") {
        const int masses = io_detail::int_field(sys, "masses", what);
        const double pert = sys.contains("perturbation")
                                ? sys["perturbation"].get<double>()
                                : default_mass_spring_perturbation(
                                      masses, sys.value("growth_rate", 0.1));
        const std::string sensors = sys.value("sensors", std::string("position"));
        MassSpringSensors ms;
        if (sensors == "position") {
          ms = MassSpringSensors::kPosition;
        } else if (sensors == "position-velocity") {
          ms = MassSpringSensors::kPositionVelocity;
        } else {
          throw InputError(what + ": unknown sensors '" + sensors + "'");
        }
        cfg.systems.push_back(
            {fmt::format("mass-spring-N{}", masses), 0, gen_mass_spring(masses, pert, ms)});
      } else {
        throw InputError(what + ": unknown system kind '" + kind + "'");
      }
    }
    for (const json& m : io_detail::field(j, "methods", what)) {
      cfg.methods.push_back(parse_method(m.get<std::string>()));
    }
    if (j.contains("constraint")) {
      const json& c = j["constraint"];
      StructuredConstraint& s = cfg.constraint;
      s.min_sensors = opt<int>(c, "min_sensors");
      s.max_sensors = opt<int>(c, "max_sensors");
      s.min_actuators = opt<int>(c, "min_actuators");
      s.max_actuators = opt<int>(c, "max_actuators");
      s.min_total = opt<int>(c, "min_total");
      s.max_total = opt<int>(c, "max_total");
    } else {
      cfg.constraint.min_sensors = 1;
      cfg.constraint.min_actuators = 1;
    }
    MethodOptions& mo = cfg.options;
    mo.sof.eps = j.value("eps", mo.sof.eps);
    if (j.contains("heu")) {
      const json& h = j["heu"];
      cfg.heu_randomizations = h.value("randomizations", 1);
      cfg.heu_seed = h.value("seed", std::uint64_t{1});
      mo.heu.max_iter = h.value("max_iter", mo.heu.max_iter);
      mo.heu.max_infeasibility = h.value("max_infeasibility", mo.heu.max_infeasibility);
      mo.heu.max_random = h.value("max_random", mo.heu.max_random);
    }
    if (j.contains("misdp")) {
      const json& m = j["misdp"];
      mo.bigm.L1 = m.value("L1", mo.bigm.L1);
      mo.bigm.L2 = m.value("L2", mo.bigm.L2);
      mo.bigm.L3 = m.value("L3", mo.bigm.L3);
      mo.bnb.max_nodes = m.value("max_nodes", mo.bnb.max_nodes);
    }
    cfg.workers = j.value("workers", 0);
  } catch (const json::exception& e) {
    throw InputError(what + ": " + e.what());
  }
  if (cfg.systems.empty() || cfg.methods.empty()) {
    throw InputError(what + ": needs at least one system and one method");
  }
  if (cfg.heu_randomizations < 1) throw InputError(what + ": randomizations must be >= 1");
  return cfg;
}

BenchReport run_bench(const BenchConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  BenchReport rep;
  for (const BenchSystem& sys : config.systems) {
    for (Method m : config.methods) rep.cells.push_back({sys.label, m, sys.seed, {}, {}});
  }
  const int num_cells = static_cast<int>(rep.cells.size());

  auto run_cell = [&](int idx) {
    BenchCell& cell = rep.cells[idx];
    const BenchSystem& sys = config.systems[idx / config.methods.size()];
    try {
      const LogisticConstraint lc =
          compile_constraint(config.constraint, sys.net.num_nodes());
      const int runs = cell.method == Method::kHeu ? config.heu_randomizations : 1;
      for (int k = 0; k < runs; ++k) {
        MethodOptions mo = config.options;
        mo.heu.seed = config.heu_seed + static_cast<std::uint64_t>(k);
        cell.runs.push_back(run_selection(cell.method, sys.net, lc, mo));
      }
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  };

  int workers = config.workers > 0 ? config.workers
                                   : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, std::max(1, num_cells));
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int i = next++; i < num_cells; i = next++) run_cell(i);
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  rep.wall_seconds = seconds_since(t0);
  return rep;
}

std::vector<CsvRow> BenchReport::csv_rows() const {
  std::vector<CsvRow> rows;
  for (const BenchCell& cell : cells) {
    if (!cell.error.empty()) {
      rows.push_back({to_string(cell.method), cell.seed, -1, std::nullopt, 0.0, 0.0, 0, false});
      continue;
    }
    for (const RunResult& r : cell.runs) {
      const bool ok = r.status == kRunStabilizing;
      rows.push_back({r.method, cell.seed, ok ? r.H : -1, r.max_real_eig, r.eps,
                      r.wall_seconds, r.iterations, r.optimal});
    }
  }
  return rows;
}

std::string BenchReport::csv() const {
  std::string out = csv_header() + "\n";
  for (const CsvRow& row : csv_rows()) out += csv_line(row) + "\n";
  return out;
}

std::string BenchReport::summary_json() const {
  json cells_j = json::array();
  for (const BenchCell& cell : cells) {
    json c = {{"system", cell.system}, {"method", to_string(cell.method)},
              {"seed", cell.seed}, {"runs", cell.runs.size()}};
    if (!cell.error.empty()) c["error"] = cell.error;
    int ok = 0;
    double sum_h = 0.0, sum_t = 0.0;
    std::map<int, int> hist;
    json seeds = json::array();
    for (const RunResult& r : cell.runs) {
      sum_t += r.wall_seconds;
      for (std::uint64_t s : r.seeds) seeds.push_back(s);
      if (r.status != kRunStabilizing) continue;
      ++ok;
      sum_h += r.H;
      ++hist[r.H];
    }
    c["stabilizing"] = ok;
    c["mean_H"] = ok > 0 ? json(sum_h / ok) : json(nullptr);
    c["mean_wall_s"] = cell.runs.empty() ? json(nullptr) : json(sum_t / cell.runs.size());
    json h = json::object();
    for (const auto& [value, count] : hist) h[std::to_string(value)] = count;
    c["H_histogram"] = std::move(h);
    if (!seeds.empty()) c["method_seeds"] = std::move(seeds);
    cells_j.push_back(std::move(c));
  }
  json j = {{"cells", std::move(cells_j)}, {"wall_seconds", wall_seconds}};
  return j.dump(1) + "\n";
}

}  // namespace sensact
