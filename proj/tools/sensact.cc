// Command-line front end: generate systems, select sensors and actuators,
// verify results and run benchmark suites.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "sensact/combsearch.hpp"
#include "sensact/error.hpp"
#include "sensact/io.hpp"
#include "sensact/pipeline.hpp"

namespace sensact {
namespace {

constexpr int kExitInputError = 3;

struct GenerateArgs {
  std::string out;
  bool force = false;
  RandomNetworkParams random;
  int masses = 10;
  double growth_rate = 0.1;
  std::optional<double> perturbation;
  std::string sensors = "position";
};

struct SelectArgs {
  std::string method;
  std::string system;
  std::string constraint;
  std::string out;
  std::string bnb_log;
  std::string candidates;
  std::string save_candidates;
  MethodOptions opts;
  std::optional<int> wmin, wmax, reference_h;
};

struct VerifyArgs {
  std::string system;
  std::string result;
};

struct BenchArgs {
  std::string config;
  std::string csv;
  std::string summary;
  int workers = -1;
};

struct SweepArgs {
  std::string system;
  std::string result;
  std::vector<double> eps = {1e-3, 1e-2, 1e-1};
  std::string out;
};

struct CandidatesArgs {
  std::string system;
  std::string constraint;
  std::string out;
  bool force = false;
};

void refuse_overwrite(const std::string& path, bool force) {
  if (!force && std::filesystem::exists(path)) {
    throw InputError(path + " exists; pass --force to overwrite");
  }
}

LogisticConstraint load_constraint_for(const std::string& path, int num_nodes) {
  if (path.empty()) return at_least_one_each(num_nodes);
  const ConstraintFile cf = load_constraint(path);
  if (cf.num_nodes != num_nodes) {
    throw DimensionError("constraint file N", num_nodes, cf.num_nodes);
  }
  return cf.compile();
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_text_file(path, text);
  }
}

int run_generate_random(const GenerateArgs& a) {
  refuse_overwrite(a.out, a.force);
  const DynNetwork net = gen_random_network(a.random);
  save_system(net, a.out);
  fmt::print("wrote {}: N = {}, n_x = {}, n_u = {}, n_y = {}\n", a.out, net.num_nodes(),
             net.nx(), net.nu(), net.ny());
  return 0;
}

int run_generate_mass_spring(const GenerateArgs& a) {
  refuse_overwrite(a.out, a.force);
  const double pert = a.perturbation
                          ? *a.perturbation
                          : default_mass_spring_perturbation(a.masses, a.growth_rate);
  const MassSpringSensors sensors = a.sensors == "position-velocity"
                                        ? MassSpringSensors::kPositionVelocity
                                        : MassSpringSensors::kPosition;
  const DynNetwork net = gen_mass_spring(a.masses, pert, sensors);
  save_system(net, a.out);
  fmt::print("wrote {}: N = {}, n_x = {}, n_u = {}, n_y = {}\n", a.out, net.num_nodes(),
             net.nx(), net.nu(), net.ny());
  return 0;
}

int run_select(SelectArgs& a) {
  const Method method = parse_method(a.method);
  const DynNetwork net = load_system(a.system);
  const LogisticConstraint lc = load_constraint_for(a.constraint, net.num_nodes());
  MethodOptions& mo = a.opts;
  mo.heu.wmin = a.wmin;
  mo.heu.wmax = a.wmax;
  mo.reference_H = a.reference_h;
  std::ofstream log;
  if (!a.bnb_log.empty()) {
    log.open(a.bnb_log);
    if (!log) throw InputError("cannot open " + a.bnb_log + " for writing");
    mo.bnb.log = &log;
  }
  if (!a.candidates.empty()) mo.candidates = load_candidate_set(a.candidates);
  if (!a.save_candidates.empty()) {
    if (!mo.candidates) mo.candidates = build_candidate_set(lc, net.num_nodes());
    save_candidate_set(*mo.candidates, a.save_candidates);
  }

  const RunResult r = run_selection(method, net, lc, mo);
  if (a.out.empty()) {
    std::cout << result_to_json(r);
  } else {
    save_result(r, a.out);
  }
  const std::string eig = r.max_real_eig ? fmt::format("{:.6g}", *r.max_real_eig) : "n/a";
  fmt::print(stderr, "{}: {} H = {} {} max Re eig = {} ({:.2f} s)\n", r.method, r.status,
             r.H, r.selection.tuple_string(), eig, r.wall_seconds);
  if (r.status != kRunStabilizing) {
    fmt::print(stderr, "no verified stabilizing selection was found{}\n",
               r.status == kRunInconclusive ? " (solver inconclusive)" : "");
  }
  return exit_code_for(r);
}

int run_verify(const VerifyArgs& a) {
  const DynNetwork net = load_system(a.system);
  const RunResult r = load_result(a.result);
  const VerifyReport rep = verify_result(net, r);
  if (rep.max_real_eig) fmt::print("max Re eig = {:.17g}\n", *rep.max_real_eig);
  if (rep.check) {
    fmt::print("lambda_min(P) = {:.6g}, LMI max eig = {:.6g}, |BM - PB| = {:.3g}, "
               "|MF - N| = {:.3g}\n",
               rep.check->min_eig_P, rep.check->lmi_max_eig, rep.check->eq_residual,
               rep.check->gain_residual);
  }
  for (const std::string& p : rep.problems) fmt::print("problem: {}\n", p);
  fmt::print("{}\n", rep.pass ? "PASS" : "FAIL");
  return rep.pass ? 0 : 2;
}

int run_bench_cmd(const BenchArgs& a) {
  BenchConfig cfg = bench_config_from_json(read_text_file(a.config));
  if (a.workers >= 0) cfg.workers = a.workers;
  const BenchReport rep = run_bench(cfg);
  emit(a.csv, rep.csv());
  if (!a.summary.empty()) write_text_file(a.summary, rep.summary_json());
  int failed = 0;
  for (const BenchCell& c : rep.cells) {
    if (!c.error.empty()) {
      ++failed;
      fmt::print(stderr, "{} / {}: {}\n", c.system, to_string(c.method), c.error);
    }
  }
  fmt::print(stderr, "{} cells, {} failed, {:.1f} s\n", rep.cells.size(), failed,
             rep.wall_seconds);
  return 0;
}

int run_sweep(const SweepArgs& a) {
  const DynNetwork net = load_system(a.system);
  const Selection s = a.result.empty() ? Selection::all_ones(net.num_nodes())
                                       : load_result(a.result).selection;
  std::ostringstream os;
  os << "eps,status,maxReEig\n";
  for (const EpsilonPoint& pt : epsilon_sweep(net, s, a.eps)) {
    os << fmt::format("{:.17g},{},{:.17g}\n", pt.eps, to_string(pt.status),
                      pt.max_real_eig);
  }
  emit(a.out, os.str());
  return 0;
}

int run_candidates(const CandidatesArgs& a) {
  refuse_overwrite(a.out, a.force);
  const DynNetwork net = load_system(a.system);
  const LogisticConstraint lc = load_constraint_for(a.constraint, net.num_nodes());
  const CandidateSet set = build_candidate_set(lc, net.num_nodes());
  save_candidate_set(set, a.out);
  fmt::print("wrote {} candidates to {}\n", set.size(), a.out);
  return 0;
}

int main_impl(int argc, char** argv) {
  CLI::App app{"Sensor and actuator selection for static output feedback"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Write a system file");
  generate->require_subcommand(1);
  auto* g_rand = generate->add_subcommand("random", "Spatially embedded random network");
  g_rand->add_option("--nodes", gen.random.num_nodes, "Number of nodes")
      ->capture_default_str();
  g_rand->add_option("--states-per-node", gen.random.states_per_node)->capture_default_str();
  g_rand->add_option("--coupling-decay", gen.random.coupling_decay)->capture_default_str();
  g_rand->add_option("--instability-shift", gen.random.instability_shift,
                     "Spectral abscissa of A")
      ->capture_default_str();
  g_rand->add_option("--seed", gen.random.seed)->capture_default_str();
  g_rand->add_option("-o,--out", gen.out, "Output file")->required();
  g_rand->add_flag("--force", gen.force, "Overwrite an existing file");

  auto* g_ms = generate->add_subcommand("mass-spring", "Chain of masses and springs");
  g_ms->add_option("--masses", gen.masses)->capture_default_str();
  g_ms->add_option("--growth-rate", gen.growth_rate,
                   "Largest open-loop real eigenvalue when --perturbation is not given")
      ->capture_default_str();
  g_ms->add_option("--perturbation", gen.perturbation, "Stiffness perturbation");
  g_ms->add_option("--sensors", gen.sensors)
      ->check(CLI::IsMember({"position", "position-velocity"}))
      ->capture_default_str();
  g_ms->add_option("-o,--out", gen.out, "Output file")->required();
  g_ms->add_flag("--force", gen.force, "Overwrite an existing file");

  SelectArgs sel;
  auto* select = app.add_subcommand("select", "Select sensors and actuators");
  select->add_option("method", sel.method, "misdp, bsa or heu")
      ->required()
      ->check(CLI::IsMember({"misdp", "bsa", "heu"}));
  select->add_option("system", sel.system, "System file")->required();
  select->add_option("--constraint", sel.constraint,
                     "Constraint file (default: at least one sensor and one actuator)");
  select->add_option("-o,--out", sel.out, "Result file (default: stdout)");
  select->add_option("--eps", sel.opts.sof.eps, "Stability margin")->capture_default_str();
  select->add_option("--delta", sel.opts.sof.delta, "Lower bound on P")
      ->capture_default_str();
  select->add_option("--L1", sel.opts.bigm.L1)->capture_default_str();
  select->add_option("--L2", sel.opts.bigm.L2)->capture_default_str();
  select->add_option("--L3", sel.opts.bigm.L3)->capture_default_str();
  select->add_option("--max-nodes", sel.opts.bnb.max_nodes, "Branch-and-bound node cap")
      ->capture_default_str();
  select->add_option("--reference-h", sel.reference_h,
                     "Known optimum; enables big-M escalation on disagreement");
  select->add_option("--bnb-log", sel.bnb_log, "JSON-lines node log");
  select->add_option("--candidates", sel.candidates, "Precomputed candidate set");
  select->add_option("--save-candidates", sel.save_candidates,
                     "Write the candidate set used");
  select->add_option("--max-iter", sel.opts.heu.max_iter)->capture_default_str();
  select->add_option("--max-infeasibility", sel.opts.heu.max_infeasibility)
      ->capture_default_str();
  select->add_option("--max-random", sel.opts.heu.max_random)->capture_default_str();
  select->add_option("--seed", sel.opts.heu.seed, "Heuristic seed")->capture_default_str();
  select->add_option("--wmin", sel.wmin, "Heuristic window lower bound");
  select->add_option("--wmax", sel.wmax, "Heuristic window upper bound");

  VerifyArgs ver;
  auto* verify = app.add_subcommand("verify", "Recheck a result against its system");
  verify->add_option("system", ver.system)->required();
  verify->add_option("result", ver.result)->required();

  BenchArgs ben;
  auto* bench = app.add_subcommand("bench", "Run a benchmark suite");
  bench->add_option("config", ben.config, "Suite file")->required();
  bench->add_option("--csv", ben.csv, "CSV output (default: stdout)");
  bench->add_option("--summary", ben.summary, "JSON summary output");
  bench->add_option("--workers", ben.workers, "Worker threads (0: all cores)");

  SweepArgs swp;
  auto* sweep = app.add_subcommand("sweep", "Closed-loop abscissa against the margin eps");
  sweep->add_option("system", swp.system)->required();
  sweep->add_option("--result", swp.result, "Use this result's selection (default: all)");
  sweep->add_option("--eps", swp.eps, "Margins")->delimiter(',');
  sweep->add_option("-o,--out", swp.out, "CSV output (default: stdout)");

  CandidatesArgs cand;
  auto* candidates =
      app.add_subcommand("candidates", "Enumerate and save the candidate set");
  candidates->add_option("system", cand.system)->required();
  candidates->add_option("--constraint", cand.constraint);
  candidates->add_option("-o,--out", cand.out)->required();
  candidates->add_flag("--force", cand.force);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitInputError;
  }

  if (g_rand->parsed()) return run_generate_random(gen);
  if (g_ms->parsed()) return run_generate_mass_spring(gen);
  if (select->parsed()) return run_select(sel);
  if (verify->parsed()) return run_verify(ver);
  if (bench->parsed()) return run_bench_cmd(ben);
  if (sweep->parsed()) return run_sweep(swp);
  if (candidates->parsed()) return run_candidates(cand);
  return kExitInputError;
}

}  // namespace
}  // namespace sensact

int main(int argc, char** argv) {
  try {
    return sensact::main_impl(argc, argv);
  } catch (const sensact::GainRecoveryError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 4;
  } catch (const sensact::Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return sensact::kExitInputError;
  } catch (const std::exception& e) {
    fmt::print(stderr, "internal error: {}\n", e.what());
    return 1;
  }
}
