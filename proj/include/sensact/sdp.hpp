#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sensact::sdp {

/// Index of a scalar decision variable inside a ConicProblem.
using VarId = int;

struct Term {
  VarId var;
  double coef;
};

/// sum_k coef_k * x_{var_k} + constant.
struct LinearExpr {
  std::vector<Term> terms;
  double constant = 0.0;

  LinearExpr& add(VarId v, double c) {
    if (c != 0.0) terms.push_back({v, c});
    return *this;
  }
};

/// Handle to a symmetric matrix variable; entries (r, c) and (c, r) share
/// one scalar.
class SymMatrixVar {
 public:
  SymMatrixVar() = default;
  SymMatrixVar(VarId first, int dim) : first_(first), dim_(dim) {}
  int dim() const { return dim_; }
  VarId id(int r, int c) const;
  VarId first() const { return first_; }
  int num_scalars() const { return dim_ * (dim_ + 1) / 2; }

 private:
  VarId first_ = 0;
  int dim_ = 0;
};

/// Handle to a dense rectangular matrix variable (row-major scalars).
class MatrixVar {
 public:
  MatrixVar() = default;
  MatrixVar(VarId first, int rows, int cols)
      : first_(first), rows_(rows), cols_(cols) {}
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  VarId id(int r, int c) const { return first_ + r * cols_ + c; }
  VarId first() const { return first_; }
  int num_scalars() const { return rows_ * cols_; }

 private:
  VarId first_ = 0;
  int rows_ = 0, cols_ = 0;
};

/// Symmetric matrix affine in the decision variables:
///   S = constant + sum_e coef_e * x_{var_e} * (E_rc + E_cr) / (1 + [r == c]),
/// i.e. every entry term sets the (r, c) and (c, r) positions together.
class AffineSymMatrix {
 public:
  struct Entry {
    VarId var;
    int row, col;  // row <= col after normalization
    double coef;
  };

  explicit AffineSymMatrix(int dim);

  int dim() const { return dim_; }
  const Eigen::MatrixXd& constant() const { return constant_; }
  const std::vector<Entry>& entries() const { return entries_; }

  AffineSymMatrix& add_constant(const Eigen::MatrixXd& M);
  /// Adds coef * x_v to entry (r, c) and its mirror.
  AffineSymMatrix& add_entry(VarId v, int r, int c, double coef);
  /// Adds coef * X (dims must match).
  AffineSymMatrix& add_var(const SymMatrixVar& X, double coef = 1.0);
  /// Adds coef * (L X R + (L X R)^T) for a symmetric variable X.
  AffineSymMatrix& add_sym_congruence(const Eigen::MatrixXd& L,
                                      const SymMatrixVar& X,
                                      const Eigen::MatrixXd& R,
                                      double coef = 1.0);
  /// Adds coef * (L X R + (L X R)^T) for a rectangular variable X.
  AffineSymMatrix& add_congruence(const Eigen::MatrixXd& L, const MatrixVar& X,
                                  const Eigen::MatrixXd& R, double coef = 1.0);
  /// Adds coef * x_v * I.
  AffineSymMatrix& add_identity(VarId v, double coef = 1.0);

  /// Evaluates S at the given full variable vector.
  Eigen::MatrixXd evaluate(const Eigen::VectorXd& x) const;

 private:
  int dim_;
  Eigen::MatrixXd constant_;
  std::vector<Entry> entries_;
};

/// expr <= -margin * I. Strict constraints are the ones a feasibility solve
/// tries to satisfy with extra room.
struct LmiConstraint {
  AffineSymMatrix expr;
  double margin = 0.0;
  bool strict = false;
  std::string name;
};

/// expr <= rhs (or == rhs).
struct LinearConstraint {
  LinearExpr expr;
  double rhs = 0.0;
  std::string name;
};

/// Semidefinite feasibility / optimization problem over scalar variables
/// grouped into matrix variables.
class ConicProblem {
 public:
  /// With a lower bound delta, adds the strict constraint X >= delta * I.
  SymMatrixVar add_sym_matrix(const std::string& name, int dim,
                              std::optional<double> lower_bound = std::nullopt);
  MatrixVar add_matrix(const std::string& name, int rows, int cols);
  VarId add_scalar(const std::string& name);

  void add_lmi(AffineSymMatrix expr, double margin, bool strict,
               std::string name = {});
  void add_le(LinearExpr expr, double rhs, std::string name = {});
  void add_eq(LinearExpr expr, double rhs, std::string name = {});
  /// Minimize expr. Without an objective solve() only decides feasibility.
  void set_objective(LinearExpr expr);

  int num_vars() const { return static_cast<int>(var_names_.size()); }
  const std::string& var_name(VarId v) const { return var_names_.at(v); }
  const std::vector<LmiConstraint>& lmis() const { return lmis_; }
  const std::vector<LinearConstraint>& inequalities() const { return les_; }
  const std::vector<LinearConstraint>& equalities() const { return eqs_; }
  const std::optional<LinearExpr>& objective() const { return objective_; }

  /// Throws on references to undeclared variables or non-finite data.
  void validate() const;

 private:
  VarId new_vars(const std::string& name, int count);

  std::vector<std::string> var_names_;
  std::vector<LmiConstraint> lmis_;
  std::vector<LinearConstraint> les_;
  std::vector<LinearConstraint> eqs_;
  std::optional<LinearExpr> objective_;
};

struct ToleranceSet {
  double psd_slack = 1e-7;  // allowed violation of each matrix inequality
  double eq_abs = 1e-6;     // allowed |residual| of each equality
  double ineq_abs = 1e-7;   // allowed violation of each scalar inequality
  int max_iter = 500;
  double gap_rel = 1e-8;
  /// Keep iterating a feasibility solve to the maximum attainable margin
  /// instead of stopping at the first comfortably interior point.
  bool solve_to_optimality = false;
};

enum class SolveStatus { kFeasible, kInfeasible, kInconclusive };

const char* to_string(SolveStatus s);

struct ResidualReport {
  /// min over LMIs of lambda_min(-margin I - expr); >= -psd_slack is OK.
  double min_lmi_slack = 0.0;
  std::vector<double> lmi_slack;  // per constraint
  double max_eq_violation = 0.0;
  double max_ineq_violation = 0.0;

  bool within(const ToleranceSet& tol) const;
};

struct SolveStats {
  int iterations = 0;
  double wall_seconds = 0.0;
  int num_free_vars = 0;   // after equality elimination
  int num_lp_rows = 0;
  int presolve_rounds = 0;
};

struct SolveOutcome {
  SolveStatus status = SolveStatus::kInconclusive;
  Eigen::VectorXd values;  // all scalars; empty unless Feasible
  ResidualReport residuals;
  SolveStats stats;
  /// Extra room achieved by the strict constraints in the feasibility
  /// phase (or its best upper estimate when not Feasible).
  double margin = 0.0;
  /// Objective at `values` when an objective is set.
  double objective = 0.0;
  /// Certified lower bound on the optimal objective (minimization).
  double objective_bound = 0.0;
  std::string note;

  bool feasible() const { return status == SolveStatus::kFeasible; }
};

/// Value of a matrix variable in a full variable vector.
Eigen::MatrixXd value_of(const SymMatrixVar& X, const Eigen::VectorXd& values);
Eigen::MatrixXd value_of(const MatrixVar& X, const Eigen::VectorXd& values);
double value_of(const LinearExpr& e, const Eigen::VectorXd& values);

/// Independent recomputation of every constraint residual.
ResidualReport residuals(const ConicProblem& problem,
                         const Eigen::VectorXd& values);

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string name() const = 0;
  virtual SolveOutcome solve(const ConicProblem& problem,
                             const ToleranceSet& tol) const = 0;
};

/// Primal-dual interior point method on the equality-reduced problem.
class InteriorPointBackend : public Backend {
 public:
  std::string name() const override { return "ipm"; }
  SolveOutcome solve(const ConicProblem& problem,
                     const ToleranceSet& tol) const override;
};

/// Solves with the reference interior point backend.
SolveOutcome solve(const ConicProblem& problem, const ToleranceSet& tol = {});
SolveOutcome solve(const ConicProblem& problem, const ToleranceSet& tol,
                   const Backend& backend);

/// Writes the equality-reduced feasibility problem in SDPA sparse format
/// (.dat-s). Returns false when presolve already proved infeasibility.
bool write_sdpa(const ConicProblem& problem, const std::string& path);

}  // namespace sensact::sdp
