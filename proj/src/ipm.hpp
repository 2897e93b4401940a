#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "sensact/sdp.hpp"

namespace sensact::sdp::internal {

// One PSD block of the dual-form problem
//   maximize b'y  s.t.  C - sum_j y_j A_j >= 0 (each block),  c - G y >= 0.
// Only variables that touch the block are stored; A holds their upper
// triangles as columns over packed positions (r <= c, row-major).
struct PsdBlock {
  int dim = 0;
  Eigen::MatrixXd C;
  std::vector<int> vars;  // global y index of each column of A
  Eigen::SparseMatrix<double> A;  // packed positions x vars.size()
};

struct DualForm {
  int m = 0;
  Eigen::VectorXd b;
  std::vector<PsdBlock> blocks;
  Eigen::VectorXd lp_c;
  Eigen::SparseMatrix<double, Eigen::RowMajor> lp_G;  // rows x m
};

inline int packed_size(int n) { return n * (n + 1) / 2; }
inline int packed_index(int n, int r, int c) {
  return r * n - r * (r - 1) / 2 + (c - r);
}

// Result of reducing a ConicProblem to DualForm.
struct Compiled {
  bool infeasible = false;
  std::string note;
  DualForm form;
  // x = x0 + Zmap y over the original scalars (plus the margin variable in
  // feasibility mode, stored last).
  Eigen::VectorXd x0;
  Eigen::SparseMatrix<double> Zmap;
  int margin_index = -1;  // position of the margin variable in y, or -1
  int presolve_rounds = 0;
  double objective_constant = 0.0;
};

// In feasibility mode the strict LMIs gain a margin variable t
// (expr + t I <= -margin I), the objective becomes max t and t <= t_cap.
// Otherwise strict LMIs are enforced with their nominal margin and the
// problem objective is minimized.
Compiled compile(const ConicProblem& problem, bool feasibility_mode,
                 double t_cap = 1.0);

enum class IpmStatus {
  kOptimal,
  kDualInfeasible,  // Farkas ray: no y satisfies the constraints
  kStoppedByCallback,
  kMaxIter,
  kStalled,
  kNumericalFailure,
};

struct IpmIterate {
  int iter = 0;
  double pobj = 0.0, dobj = 0.0;
  double pinf = 0.0, dinf = 0.0, relgap = 0.0;
  double duality_correction = 0.0;  // |rp' y|, weak-duality slack
  const Eigen::VectorXd* y = nullptr;
};

struct IpmResult {
  IpmStatus status = IpmStatus::kMaxIter;
  Eigen::VectorXd y;
  double pobj = 0.0, dobj = 0.0;
  double pinf = 0.0, dinf = 0.0, relgap = 0.0;
  double duality_correction = 0.0;
  int iterations = 0;
};

struct IpmOptions {
  int max_iter = 500;
  double gap_tol = 1e-8;
  double feas_tol = 1e-8;
  double step_fraction = 0.95;
  bool verbose = false;
  // Called after every iteration; returning true stops the solve.
  std::function<bool(const IpmIterate&)> callback;
};

IpmResult run_ipm(const DualForm& form, const IpmOptions& opts);

// Smallest eigenvalue of C - A*(y) over all blocks, and the smallest LP slack.
struct SlackCheck {
  double min_block_eig = 0.0;
  double min_lp_slack = 0.0;
};
SlackCheck dual_slack(const DualForm& form, const Eigen::VectorXd& y);

}  // namespace sensact::sdp::internal
