#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sensact {

/// Per-node state, input and output dimensions.
struct NodeDims {
  int nx = 0;
  int nu = 0;
  int ny = 0;

  friend bool operator==(const NodeDims&, const NodeDims&) = default;
};

/// Block-structured LTI network  x' = A x + B u,  y = C x.
///
/// B and C are block diagonal with respect to the node partition and are
/// required to have full column / row rank. All invariants are checked on
/// construction; a constructed network is immutable.
class DynNetwork {
 public:
  DynNetwork(std::vector<NodeDims> dims, Eigen::MatrixXd A, Eigen::MatrixXd B,
             Eigen::MatrixXd C, std::string meta_json = "{}");

  int num_nodes() const { return static_cast<int>(dims_.size()); }
  int nx() const { return nx_; }
  int nu() const { return nu_; }
  int ny() const { return ny_; }

  const std::vector<NodeDims>& dims() const { return dims_; }
  const NodeDims& node(int i) const { return dims_.at(i); }
  const Eigen::MatrixXd& A() const { return A_; }
  const Eigen::MatrixXd& B() const { return B_; }
  const Eigen::MatrixXd& C() const { return C_; }
  const std::string& meta_json() const { return meta_json_; }

  int state_offset(int node) const { return state_off_.at(node); }
  int input_offset(int node) const { return input_off_.at(node); }
  int output_offset(int node) const { return output_off_.at(node); }

  /// Node owning scalar input / output channel `k`.
  int node_of_input(int k) const { return input_node_.at(k); }
  int node_of_output(int k) const { return output_node_.at(k); }

  friend bool operator==(const DynNetwork& a, const DynNetwork& b);

 private:
  std::vector<NodeDims> dims_;
  Eigen::MatrixXd A_, B_, C_;
  std::string meta_json_;
  int nx_ = 0, nu_ = 0, ny_ = 0;
  std::vector<int> state_off_, input_off_, output_off_;
  std::vector<int> input_node_, output_node_;
};

/// Activation pattern S = (S_pi, S_gamma): one actuator bit and one sensor
/// bit per node. Bit position k < N is pi_{k+1}; position N + k is
/// gamma_{k+1}.
class Selection {
 public:
  Selection() = default;
  explicit Selection(int num_nodes);
  Selection(std::vector<bool> pi, std::vector<bool> gamma);

  static Selection all_ones(int num_nodes);
  static Selection zeros(int num_nodes);
  /// Builds from the low 2N bits of `mask` (bit k = position k).
  static Selection from_mask(std::uint64_t mask, int num_nodes);
  /// Parses two 0/1 strings of equal length.
  static Selection from_strings(const std::string& pi, const std::string& gamma);

  int num_nodes() const { return n_; }
  int num_bits() const { return 2 * n_; }

  bool pi(int i) const { return bits_.at(i); }
  bool gamma(int i) const { return bits_.at(n_ + i); }
  bool bit(int k) const { return bits_.at(k); }
  void set_pi(int i, bool v) { bits_.at(i) = v; }
  void set_gamma(int i, bool v) { bits_.at(n_ + i) = v; }
  void set_bit(int k, bool v) { bits_.at(k) = v; }

  int num_actuators() const;
  int num_sensors() const;
  bool is_zero() const;

  /// Requires 2N <= 64.
  std::uint64_t to_mask() const;
  std::string pi_string() const;
  std::string gamma_string() const;
  /// "(1,0,0,1)" style tuple over the concatenated bits.
  std::string tuple_string() const;

  friend bool operator==(const Selection&, const Selection&) = default;

 private:
  int n_ = 0;
  std::vector<bool> bits_;
};

/// H(S) = sum_k pi_k + gamma_k.
int count_active(const Selection& s);

struct SelectionMatrices {
  Eigen::MatrixXd Pi;     // n_u x n_u
  Eigen::MatrixXd Gamma;  // n_y x n_y
};

SelectionMatrices build_selection_matrices(const Selection& s,
                                           const DynNetwork& net);

/// Columns of B for active actuators and rows of C for active sensors, in
/// their original order.
struct ReducedMatrices {
  Eigen::MatrixXd Bq;
  Eigen::MatrixXd Cq;
  std::vector<int> input_channels;   // kept scalar input indices
  std::vector<int> output_channels;  // kept scalar output indices
};

ReducedMatrices reduced_matrices(const DynNetwork& net, const Selection& s);

struct Assumption1Report {
  bool stabilizable = false;
  bool detectable = false;
  bool fullrank_B = false;
  bool fullrank_C = false;

  bool all() const {
    return stabilizable && detectable && fullrank_B && fullrank_C;
  }
};

/// PBH tests at every eigenvalue of A with Re >= 0, plus rank checks.
Assumption1Report check_assumption1(const DynNetwork& net);

/// Rank with singular values below rel_tol * sigma_max treated as zero.
int numerical_rank(const Eigen::MatrixXd& M, double rel_tol = 1e-9);

struct RandomNetworkParams {
  int num_nodes = 10;
  int states_per_node = 2;
  double coupling_decay = 1.0;
  double instability_shift = 0.1;
  std::uint64_t seed = 1;
};

/// Spatially embedded random network. Nodes sit uniformly in the unit
/// square; coupling block A_ij has i.i.d. U(-1,1) entries scaled by
/// exp(-coupling_decay * dist(i,j)); diagonal blocks have U(-1,1) entries.
/// The whole A is then shifted along the identity so that its spectral
/// abscissa equals `instability_shift` exactly. Each node has one actuator
/// driving its first state and measures all of its states (C_i = I).
DynNetwork gen_random_network(const RandomNetworkParams& params);

enum class MassSpringSensors {
  kPosition,          // y_i = position of mass i
  kPositionVelocity,  // y_i = (position, velocity)
};

/// Chain of unit masses and springs. Node i carries (position, velocity)
/// of mass i, so A is the interleaved form of
/// [[0, I], [-T + stiffness_perturbation * I, 0]], T = tridiag(-1, 2, -1).
/// One force actuator per mass.
DynNetwork gen_mass_spring(int num_masses, double stiffness_perturbation,
                           MassSpringSensors sensors = MassSpringSensors::kPosition);

/// Stiffness perturbation for which the chain's largest real eigenvalue is
/// `growth_rate`: lambda_min(T) + growth_rate^2.
double default_mass_spring_perturbation(int num_masses, double growth_rate = 0.1);

/// tridiag(-1, 2, -1) of size n.
Eigen::MatrixXd spring_laplacian(int n);

/// Eigenvalues of A + B Pi F Gamma C (F is n_u x n_y).
Eigen::VectorXcd closed_loop_spectrum(const DynNetwork& net,
                                      const Eigen::MatrixXd& Pi,
                                      const Eigen::MatrixXd& Gamma,
                                      const Eigen::MatrixXd& F);

/// Eigenvalues of a general square matrix; throws on non-finite entries.
Eigen::VectorXcd eigenvalues(const Eigen::MatrixXd& M);

double max_real_part(const Eigen::VectorXcd& spectrum);

/// Linear logistic constraint Phi [pi; gamma] <= phi with activation count
/// bounds wmin <= H(S) <= wmax valid for every member.
class LogisticConstraint {
 public:
  /// No rows: every string is a member.
  static LogisticConstraint unconstrained(int num_nodes);

  /// Raw rows. Count bounds are derived by enumeration when N <= 10 and
  /// default to [0, 2N] otherwise unless supplied.
  LogisticConstraint(int num_nodes, Eigen::MatrixXd Phi, Eigen::VectorXd phi,
                     std::optional<int> wmin = std::nullopt,
                     std::optional<int> wmax = std::nullopt);

  int num_nodes() const { return n_; }
  const Eigen::MatrixXd& Phi() const { return Phi_; }
  const Eigen::VectorXd& phi() const { return phi_; }
  int wmin() const { return wmin_; }
  int wmax() const { return wmax_; }
  int num_rows() const { return static_cast<int>(Phi_.rows()); }

  bool membership(const Selection& s) const;
  /// Same test on a 2N-bit mask.
  bool membership(std::uint64_t mask) const;

  /// Stable 64-bit fingerprint of (N, Phi, phi, wmin, wmax).
  std::uint64_t fingerprint() const;

 private:
  int n_ = 0;
  Eigen::MatrixXd Phi_;
  Eigen::VectorXd phi_;
  int wmin_ = 0, wmax_ = 0;
};

/// Human-oriented constraint schema; compiled into Phi / phi rows.
struct StructuredConstraint {
  std::optional<int> min_sensors, max_sensors;
  std::optional<int> min_actuators, max_actuators;
  std::optional<int> min_total, max_total;
  std::vector<int> forced_on_actuators, forced_on_sensors;    // 0-based nodes
  std::vector<int> forced_off_actuators, forced_off_sensors;  // 0-based nodes
  // Extra raw rows appended after the structured ones.
  Eigen::MatrixXd extra_Phi;
  Eigen::VectorXd extra_phi;
};

/// Compiles the schema; wmin/wmax are exact for the structured part.
LogisticConstraint compile_constraint(const StructuredConstraint& sc,
                                      int num_nodes);

/// ">= 1 sensor and >= 1 actuator".
LogisticConstraint at_least_one_each(int num_nodes);

}  // namespace sensact
