#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sensact/netmodel.hpp"
#include "sensact/sof.hpp"

namespace sensact {

// System files: {"N", "node_dims": [{"nx","nu","ny"}...], "A", "B", "C",
// "meta"} with dense row-major matrices. Readers revalidate everything by
// constructing a DynNetwork.

std::string system_to_json(const DynNetwork& net);
DynNetwork system_from_json(const std::string& text);
void save_system(const DynNetwork& net, const std::string& path);
DynNetwork load_system(const std::string& path);

// Constraint files hold the structured schema:
//   {"N": 4, "min_sensors": 1, "min_actuators": 1, "max_total": 5,
//    "forced_on": {"actuators": [0], "sensors": []},
//    "forced_off": {"actuators": [], "sensors": [2]},
//    "Phi": [[...]], "phi": [...]}
// Node indices are 0-based. Every field except N is optional.

struct ConstraintFile {
  int num_nodes = 0;
  StructuredConstraint structured;

  LogisticConstraint compile() const { return compile_constraint(structured, num_nodes); }
};

std::string constraint_to_json(const ConstraintFile& c);
ConstraintFile constraint_from_json(const std::string& text);
void save_constraint(const ConstraintFile& c, const std::string& path);
ConstraintFile load_constraint(const std::string& path);

/// Outcome of one selection run, as written by `sensact select`.
struct RunResult {
  std::string method;            // "misdp", "bsa" or "heu"
  std::string status;            // see run_status_*
  Selection selection;
  int H = 0;
  std::optional<double> max_real_eig;
  double eps = 0.0;
  double wall_seconds = 0.0;
  int iterations = 0;            // BnB nodes, BSA or heuristic iterations
  int lmi_solves = 0;
  bool optimal = false;
  bool improved = false;
  std::vector<std::uint64_t> seeds;
  std::optional<SofCertificate> certificate;
  std::string config_json = "{}";  // echo of the options used
  std::string stats_json = "{}";   // method specific counters
};

inline constexpr const char* kRunStabilizing = "stabilizing";
inline constexpr const char* kRunInfeasible = "infeasible";
inline constexpr const char* kRunInconclusive = "inconclusive";

std::string result_to_json(const RunResult& r);
RunResult result_from_json(const std::string& text);
void save_result(const RunResult& r, const std::string& path);
RunResult load_result(const std::string& path);

/// Semantic equality; JSON payloads are compared after parsing.
bool same_result(const RunResult& a, const RunResult& b);

/// One bench table row. Columns are fixed:
/// method,seed,H,maxReEig,eps,wall_s,iters,optimal_flag
struct CsvRow {
  std::string method;
  std::uint64_t seed = 0;
  int H = -1;
  std::optional<double> max_real_eig;
  double eps = 0.0;
  double wall_seconds = 0.0;
  int iterations = 0;
  bool optimal = false;
};

std::string csv_header();
/// Floats carry 17 significant digits; a missing eigenvalue is written as nan.
std::string csv_line(const CsvRow& row);
std::vector<CsvRow> read_csv(std::istream& is);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace sensact
