#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sensact/combsearch.hpp"
#include "sensact/heuristic.hpp"
#include "sensact/io.hpp"
#include "sensact/misdp.hpp"
#include "sensact/netmodel.hpp"
#include "sensact/sof.hpp"

namespace sensact {

enum class Method { kMisdp, kBsa, kHeu };

const char* to_string(Method m);
/// Accepts "misdp", "bsa" and "heu".
Method parse_method(const std::string& name);

struct MethodOptions {
  SofOptions sof;
  BigMOptions bigm;  // bigm.sof is replaced by `sof`
  BnbOptions bnb;
  /// When set, misdp re-solves with larger big-M constants (at most
  /// max_escalations times) until its H matches.
  std::optional<int> reference_H;
  int max_escalations = 2;
  HeuristicOptions heu;
  /// Precomputed candidate set for bsa; built on the fly otherwise.
  std::optional<CandidateSet> candidates;
};

/// Runs one method and packages its outcome. When the method does not
/// improve on the all-active selection, that selection is tested directly
/// so that a successful run always carries a certificate.
RunResult run_selection(Method method, const DynNetwork& net,
                        const LogisticConstraint& constraint, const MethodOptions& opts);

/// Process exit code for a run: 0 stabilizing, 2 infeasible, 4 inconclusive.
int exit_code_for(const RunResult& r);

struct VerifyReport {
  bool pass = false;
  std::optional<double> max_real_eig;
  std::optional<CertificateCheck> check;
  std::vector<std::string> problems;
};

/// Recomputes Pi, Gamma, the full gain and the closed-loop spectrum from the
/// system matrices and the certificate alone.
VerifyReport verify_result(const DynNetwork& net, const RunResult& r,
                           double psd_tol = 1e-8, double lmi_tol = 1e-6,
                           double eq_tol = 1e-6);

// Benchmark suites. A suite file looks like
//   {"systems": [{"kind": "random", "nodes": 4, "seeds": [1, 2, 3],
//                 "states_per_node": 2, "instability_shift": 0.2},
//                {"kind": "mass-spring", "masses": 4}],
//    "methods": ["misdp", "bsa", "heu"],
//    "constraint": {"min_sensors": 1, "min_actuators": 1},
//    "heu": {"randomizations": 10, "seed": 1, "max_iter": 50,
//            "max_infeasibility": 10, "max_random": 10000},
//    "misdp": {"L1": 1e4, "L2": 5e6, "L3": 5e6, "max_nodes": 1000},
//    "eps": 1e-3, "workers": 0}

struct BenchSystem {
  std::string label;
  std::uint64_t seed = 0;
  DynNetwork net;
};

struct BenchConfig {
  std::vector<BenchSystem> systems;
  std::vector<Method> methods;
  /// Structured constraint without N; compiled per system.
  StructuredConstraint constraint;
  MethodOptions options;
  int heu_randomizations = 1;
  std::uint64_t heu_seed = 1;
  int workers = 0;  // 0 picks the hardware concurrency
};

BenchConfig bench_config_from_json(const std::string& text);

struct BenchCell {
  std::string system;
  Method method = Method::kBsa;
  std::uint64_t seed = 0;
  std::vector<RunResult> runs;  // one per randomization
  std::string error;            // set when the cell failed
};

struct BenchReport {
  std::vector<BenchCell> cells;  // systems x methods, in config order
  double wall_seconds = 0.0;

  std::vector<CsvRow> csv_rows() const;
  std::string csv() const;
  /// Per-cell means of H and wall time, plus the H histogram.
  std::string summary_json() const;
};

BenchReport run_bench(const BenchConfig& config);

}  // namespace sensact
