#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "sensact/error.hpp"
#include "sensact/sdp.hpp"

namespace sensact::sdp {

VarId SymMatrixVar::id(int r, int c) const {
  if (r < 0 || c < 0 || r >= dim_ || c >= dim_) {
    throw DimensionError("symmetric variable index", dim_, std::max(r, c));
  }
  const int a = std::min(r, c);
  const int b = std::max(r, c);
  return first_ + a * dim_ - a * (a - 1) / 2 + (b - a);
}

// ---------------------------------------------------------------------------
// AffineSymMatrix

AffineSymMatrix::AffineSymMatrix(int dim)
    : dim_(dim), constant_(Eigen::MatrixXd::Zero(dim, dim)) {
  if (dim < 1) throw InputError("matrix inequality needs positive dimension");
}

AffineSymMatrix& AffineSymMatrix::add_constant(const Eigen::MatrixXd& M) {
  if (M.rows() != dim_ || M.cols() != dim_) {
    throw DimensionError("LMI constant size", dim_, M.rows());
  }
  constant_ += 0.5 * (M + M.transpose());
  return *this;
}

AffineSymMatrix& AffineSymMatrix::add_entry(VarId v, int r, int c,
                                            double coef) {
  if (r < 0 || c < 0 || r >= dim_ || c >= dim_) {
    throw DimensionError("LMI entry index", dim_, std::max(r, c));
  }
  if (coef == 0.0) return *this;
  entries_.push_back({v, std::min(r, c), std::max(r, c), coef});
  return *this;
}

AffineSymMatrix& AffineSymMatrix::add_var(const SymMatrixVar& X, double coef) {
  if (X.dim() != dim_) throw DimensionError("LMI variable size", dim_, X.dim());
  for (int r = 0; r < dim_; ++r) {
    for (int c = r; c < dim_; ++c) add_entry(X.id(r, c), r, c, coef);
  }
  return *this;
}

namespace {

struct Nz {
  int i, j;
  double v;
};

std::vector<Nz> nonzeros(const Eigen::MatrixXd& M) {
  std::vector<Nz> out;
  for (int j = 0; j < M.cols(); ++j) {
    for (int i = 0; i < M.rows(); ++i) {
      if (M(i, j) != 0.0) out.push_back({i, j, M(i, j)});
    }
  }
  return out;
}

}  // namespace

AffineSymMatrix& AffineSymMatrix::add_sym_congruence(const Eigen::MatrixXd& L,
                                                     const SymMatrixVar& X,
                                                     const Eigen::MatrixXd& R,
                                                     double coef) {
  if (L.rows() != dim_) throw DimensionError("congruence L rows", dim_, L.rows());
  if (R.cols() != dim_) throw DimensionError("congruence R cols", dim_, R.cols());
  if (L.cols() != X.dim()) throw DimensionError("congruence L cols", X.dim(), L.cols());
  if (R.rows() != X.dim()) throw DimensionError("congruence R rows", X.dim(), R.rows());
  // T = L X R; S += coef (T + T^T). Each scalar term T(p,q) lands on the
  // mirrored pair, or twice on the diagonal.
  for (const Nz& l : nonzeros(L)) {
    for (const Nz& r : nonzeros(R)) {
      const double a = coef * l.v * r.v;
      const int p = l.i, q = r.j;
      add_entry(X.id(l.j, r.i), p, q, p == q ? 2.0 * a : a);
    }
  }
  return *this;
}

AffineSymMatrix& AffineSymMatrix::add_congruence(const Eigen::MatrixXd& L,
                                                 const MatrixVar& X,
                                                 const Eigen::MatrixXd& R,
                                                 double coef) {
  if (L.rows() != dim_) throw DimensionError("congruence L rows", dim_, L.rows());
  if (R.cols() != dim_) throw DimensionError("congruence R cols", dim_, R.cols());
  if (L.cols() != X.rows()) throw DimensionError("congruence L cols", X.rows(), L.cols());
  if (R.rows() != X.cols()) throw DimensionError("congruence R rows", X.cols(), R.rows());
  for (const Nz& l : nonzeros(L)) {
    for (const Nz& r : nonzeros(R)) {
      const double a = coef * l.v * r.v;
      const int p = l.i, q = r.j;
      add_entry(X.id(l.j, r.i), p, q, p == q ? 2.0 * a : a);
    }
  }
  return *this;
}

AffineSymMatrix& AffineSymMatrix::add_identity(VarId v, double coef) {
  for (int r = 0; r < dim_; ++r) add_entry(v, r, r, coef);
  return *this;
}

Eigen::MatrixXd AffineSymMatrix::evaluate(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd S = constant_;
  for (const Entry& e : entries_) {
    const double v = e.coef * x(e.var);
    S(e.row, e.col) += v;
    if (e.row != e.col) S(e.col, e.row) += v;
  }
  return S;
}

// ---------------------------------------------------------------------------
// ConicProblem

VarId ConicProblem::new_vars(const std::string& name, int count) {
  const VarId first = num_vars();
  for (int k = 0; k < count; ++k) var_names_.push_back(name);
  return first;
}

SymMatrixVar ConicProblem::add_sym_matrix(const std::string& name, int dim,
                                          std::optional<double> lower_bound) {
  if (dim < 1) throw InputError("matrix variable needs positive dimension");
  SymMatrixVar X(new_vars(name, dim * (dim + 1) / 2), dim);
  if (lower_bound) {
    AffineSymMatrix e(dim);
    e.add_var(X, -1.0);
    add_lmi(std::move(e), *lower_bound, /*strict=*/true,
            fmt::format("{} lower bound", name));
  }
  return X;
}

MatrixVar ConicProblem::add_matrix(const std::string& name, int rows,
                                   int cols) {
  if (rows < 0 || cols < 0) throw InputError("negative matrix variable size");
  return MatrixVar(new_vars(name, rows * cols), rows, cols);
}

VarId ConicProblem::add_scalar(const std::string& name) {
  return new_vars(name, 1);
}

void ConicProblem::add_lmi(AffineSymMatrix expr, double margin, bool strict,
                           std::string name) {
  lmis_.push_back({std::move(expr), margin, strict, std::move(name)});
}

void ConicProblem::add_le(LinearExpr expr, double rhs, std::string name) {
  les_.push_back({std::move(expr), rhs, std::move(name)});
}

void ConicProblem::add_eq(LinearExpr expr, double rhs, std::string name) {
  eqs_.push_back({std::move(expr), rhs, std::move(name)});
}

void ConicProblem::set_objective(LinearExpr expr) {
  objective_ = std::move(expr);
}

void ConicProblem::validate() const {
  const int n = num_vars();
  auto check_expr = [n](const LinearExpr& e, const std::string& where) {
    if (!std::isfinite(e.constant)) {
      throw InputError(fmt::format("{}: non-finite constant", where));
    }
    for (const Term& t : e.terms) {
      if (t.var < 0 || t.var >= n) {
        throw InputError(fmt::format("{}: undeclared variable {}", where, t.var));
      }
      if (!std::isfinite(t.coef)) {
        throw InputError(fmt::format("{}: non-finite coefficient", where));
      }
    }
  };
  for (const auto& c : les_) {
    check_expr(c.expr, "inequality " + c.name);
    if (!std::isfinite(c.rhs)) throw InputError("inequality " + c.name + ": non-finite rhs");
  }
  for (const auto& c : eqs_) {
    check_expr(c.expr, "equality " + c.name);
    if (!std::isfinite(c.rhs)) throw InputError("equality " + c.name + ": non-finite rhs");
  }
  if (objective_) check_expr(*objective_, "objective");
  for (const auto& l : lmis_) {
    if (!l.expr.constant().allFinite() || !std::isfinite(l.margin)) {
      throw InputError("matrix inequality " + l.name + ": non-finite data");
    }
    for (const auto& e : l.expr.entries()) {
      if (e.var < 0 || e.var >= n) {
        throw InputError(fmt::format("matrix inequality {}: undeclared variable {}",
                                     l.name, e.var));
      }
      if (!std::isfinite(e.coef)) {
        throw InputError("matrix inequality " + l.name + ": non-finite coefficient");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Values and residuals

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kFeasible:
      return "Feasible";
    case SolveStatus::kInfeasible:
      return "Infeasible";
    case SolveStatus::kInconclusive:
      return "Inconclusive";
  }
  return "?";
}

bool ResidualReport::within(const ToleranceSet& tol) const {
  return min_lmi_slack >= -tol.psd_slack && max_eq_violation <= tol.eq_abs &&
         max_ineq_violation <= tol.ineq_abs;
}

Eigen::MatrixXd value_of(const SymMatrixVar& X, const Eigen::VectorXd& v) {
  Eigen::MatrixXd M(X.dim(), X.dim());
  for (int r = 0; r < X.dim(); ++r) {
    for (int c = r; c < X.dim(); ++c) M(r, c) = M(c, r) = v(X.id(r, c));
  }
  return M;
}

Eigen::MatrixXd value_of(const MatrixVar& X, const Eigen::VectorXd& v) {
  Eigen::MatrixXd M(X.rows(), X.cols());
  for (int r = 0; r < X.rows(); ++r) {
    for (int c = 0; c < X.cols(); ++c) M(r, c) = v(X.id(r, c));
  }
  return M;
}

double value_of(const LinearExpr& e, const Eigen::VectorXd& v) {
  double acc = e.constant;
  for (const Term& t : e.terms) acc += t.coef * v(t.var);
  return acc;
}

ResidualReport residuals(const ConicProblem& problem,
                         const Eigen::VectorXd& values) {
  if (values.size() != problem.num_vars()) {
    throw DimensionError("value vector length", problem.num_vars(), values.size());
  }
  ResidualReport rep;
  rep.min_lmi_slack = std::numeric_limits<double>::infinity();
  for (const auto& l : problem.lmis()) {
    const Eigen::MatrixXd S =
        -l.margin * Eigen::MatrixXd::Identity(l.expr.dim(), l.expr.dim()) -
        l.expr.evaluate(values);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
    const double m = es.eigenvalues()(0);
    rep.lmi_slack.push_back(m);
    rep.min_lmi_slack = std::min(rep.min_lmi_slack, m);
  }
  if (problem.lmis().empty()) rep.min_lmi_slack = 0.0;
  for (const auto& c : problem.equalities()) {
    rep.max_eq_violation =
        std::max(rep.max_eq_violation, std::abs(value_of(c.expr, values) - c.rhs));
  }
  for (const auto& c : problem.inequalities()) {
    rep.max_ineq_violation =
        std::max(rep.max_ineq_violation, value_of(c.expr, values) - c.rhs);
  }
  return rep;
}

}  // namespace sensact::sdp
