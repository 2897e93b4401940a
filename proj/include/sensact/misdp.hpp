#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sensact/netmodel.hpp"
#include "sensact/sdp.hpp"
#include "sensact/sof.hpp"

namespace sensact {

struct BigMOptions {
  double L1 = 1e4;
  double L2 = 5e6;
  double L3 = 5e6;
  /// Margins, the P normalization and solver tolerances are shared with the
  /// output feedback test so that fixed-binary relaxations and
  /// selection_feasible decide the same question.
  SofOptions sof;
};

/// Mixed-integer model
///   min sum pi + gamma
///   s.t. A'P + PA + C'Theta'B' + B Theta C <= -eps I,  delta I <= P <= p_upper I,
///        big-M rows tying Theta to (N, pi, gamma), M to (Omega, pi), Xi to pi,
///        Omega = (B'B)^{-1} B'PB,  Xi = (I - B(B'B)^{-1}B') PB,
///        Phi [pi; gamma] <= phi,  pi, gamma in {0, 1}^N.
/// `problem` holds the continuous relaxation (bits in [0, 1]) without an
/// objective.
struct BigMModel {
  DynNetwork net;
  LogisticConstraint constraint;
  BigMOptions opts;

  sdp::ConicProblem problem;
  sdp::SymMatrixVar P;
  sdp::MatrixVar N, M, Theta, Omega, Xi;
  std::vector<sdp::VarId> bits;  // pi_1..pi_N, gamma_1..gamma_N

  /// The same relaxation with N and M projected out exactly (fewer scalars,
  /// same feasible set in the remaining variables).
  sdp::ConicProblem reduced;
  std::vector<sdp::VarId> reduced_bits;
  /// Node relaxations are solved on `reduced` unless this is cleared.
  bool use_reduced = true;

  int num_nodes() const { return net.num_nodes(); }
  int num_bits() const { return static_cast<int>(bits.size()); }
};

BigMModel assemble_bigm(const DynNetwork& net, const LogisticConstraint& constraint,
                        const BigMOptions& opts = {});

/// (B'B)^{-1} B'PB. Throws RankDeficiencyError for rank-deficient B.
Eigen::MatrixXd omega_of(const Eigen::MatrixXd& P, const Eigen::MatrixXd& B);
/// (I - B(B'B)^{-1}B') PB = PB - B omega_of(P, B).
Eigen::MatrixXd xi_of(const Eigen::MatrixXd& P, const Eigen::MatrixXd& B);

/// A search node: fixed bits (-1 free, 0, 1) and the bound inherited from
/// its ancestors.
struct BnbNode {
  int id = 0;
  int parent = -1;
  int depth = 0;
  std::vector<std::int8_t> fixed;
  double bound = 0.0;
  std::vector<std::pair<int, int>> history;  // (bit, value) in branching order
};

BnbNode root_node(const BigMModel& model);

enum class RelaxationStatus { kFeasible, kInfeasible, kInconclusive };

const char* to_string(RelaxationStatus s);

struct RelaxationResult {
  RelaxationStatus status = RelaxationStatus::kInconclusive;
  double bound = 0.0;       // valid lower bound on sum pi + gamma in the subtree
  Eigen::VectorXd bits;     // relaxed bit values (2N), set when feasible
  Eigen::VectorXd values;   // scalars of the solved problem, set when feasible
  sdp::SolveStats stats;
  std::string note;
};

/// Solves the continuous relaxation with the node's bits fixed. With every
/// bit fixed this is a pure feasibility problem and the bound is H(S).
RelaxationResult solve_relaxation(const BigMModel& model, const BnbNode& node);

struct BnbOptions {
  int max_nodes = 1000;
  double integrality_tol = 1e-6;
  /// Seed the incumbent with the all-active selection when it is admissible
  /// and passes the output feedback test.
  bool seed_all_active = true;
  /// One JSON object per evaluated node when set.
  std::ostream* log = nullptr;
};

struct BnbStats {
  int nodes = 0;            // relaxations solved
  int infeasible = 0;
  int inconclusive = 0;
  int pruned_by_bound = 0;
  int spurious_leaves = 0;  // integral big-M points rejected by the LMI test
  int max_depth = 0;
  int lmi_checks = 0;
  double wall_seconds = 0.0;
  /// Incumbent objective after each evaluated node (2N + 1 while none).
  std::vector<int> incumbent_trace;
};

struct BnbResult {
  bool found = false;
  Selection selection;
  std::optional<SofCertificate> certificate;
  int H = 0;
  bool optimal = false;      // search finished within the node cap
  double lower_bound = 0.0;  // on the optimum, from the open nodes
  BnbStats stats;
  std::string note;
};

BnbResult solve_bnb(const BigMModel& model, const BnbOptions& opts = {});

struct EscalationResult {
  BnbResult result;
  BigMOptions used;        // constants of the final run
  int escalations = 0;
  std::vector<int> H_per_run;
};

/// Runs the search, and while an independent optimum `reference_H` is
/// known and disagrees, multiplies L1, L2, L3 by 10 and reruns, at most
/// `max_escalations` times. Without a reference this is a single run.
EscalationResult solve_bnb_escalating(const DynNetwork& net,
                                      const LogisticConstraint& constraint,
                                      const BigMOptions& bigm,
                                      const BnbOptions& opts,
                                      std::optional<int> reference_H,
                                      int max_escalations = 2);

}  // namespace sensact
