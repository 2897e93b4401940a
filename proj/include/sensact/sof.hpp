#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sensact/netmodel.hpp"
#include "sensact/sdp.hpp"

namespace sensact {

/// Parameters of the static output feedback LMI test
///   A'P + PA + C'N'B' + BNC <= -eps I,   BM = PB,   P >= delta I.
/// The problem is homogeneous in (P, M, N) apart from the margins, so the
/// scale is pinned by P <= p_upper I. With p_upper = 1/2 every certified
/// closed loop has all eigenvalues at or left of -eps.
struct SofOptions {
  double eps = 1e-3;
  double delta = 1e-6;
  double p_upper = 0.5;
  double n_bound = 1e4;   // |N_ij| <= n_bound
  double cond_cap = 1e10; // largest accepted condition number of M
  sdp::ToleranceSet tol;
};

/// Witness that the reduced triple (A, B_q, C_q) is SOF stabilizable.
struct SofCertificate {
  Eigen::MatrixXd P;  // n_x x n_x
  Eigen::MatrixXd M;  // m x m
  Eigen::MatrixXd N;  // m x r
  Eigen::MatrixXd F;  // m x r, F = M^{-1} N
  double eps = 0.0;
  double delta = 0.0;
  int m = 0;
  int r = 0;
  /// Kept scalar input / output channels of the full network (empty when
  /// the certificate was produced for a bare triple).
  std::vector<int> input_channels;
  std::vector<int> output_channels;
  /// Extra room the solver found beyond eps (the common margin t).
  double margin = 0.0;
  /// max Re eig(A + B_q F C_q), computed before the certificate is returned.
  double max_real_eig = 0.0;
};

enum class SofStatus { kFeasible, kInfeasible, kInconclusive };

const char* to_string(SofStatus s);

struct SofResult {
  SofStatus status = SofStatus::kInconclusive;
  std::optional<SofCertificate> certificate;  // set iff kFeasible
  std::string note;
  bool solver_called = false;
  sdp::SolveStats stats;
  /// Margin reported by the solver: achieved room when feasible, an upper
  /// bound (negative) when proven infeasible.
  double margin = 0.0;

  bool feasible() const { return status == SofStatus::kFeasible; }
};

/// Solves the LMI test for (A, B, C). Throws RankDeficiencyError when B is
/// not full column rank or C is not full row rank.
SofResult sof_feasible(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                       const Eigen::MatrixXd& C, const SofOptions& opts = {});

/// Tests S through its reduced triple (A, B_q, C_q). A selection with no
/// actuator or no sensor is reported Infeasible without a solve.
SofResult selection_feasible(const DynNetwork& net, const Selection& s,
                             const SofOptions& opts = {});

/// Solves M F = N by a pivoted LU. Throws GainRecoveryError when the
/// condition number of M exceeds `cond_cap`.
Eigen::MatrixXd recover_gain(const Eigen::MatrixXd& M, const Eigen::MatrixXd& N,
                             double cond_cap = 1e10);

/// M = (B'B)^{-1} B'PB, the unique solution of BM = PB for full column rank B.
Eigen::MatrixXd lemma1_M(const Eigen::MatrixXd& P, const Eigen::MatrixXd& B);

/// Independent recomputation of the certificate invariants.
struct CertificateCheck {
  double min_eig_P = 0.0;
  double lmi_max_eig = 0.0;    // lambda_max(A'P + PA + C'N'B' + BNC)
  double eq_residual = 0.0;    // max |BM - PB|
  double gain_residual = 0.0;  // max |MF - N|
  double max_real_eig = 0.0;   // closed loop

  /// The acceptance thresholds: lambda_min(P) >= delta - psd_tol,
  /// lambda_max(LMI) <= -eps + lmi_tol, |BM - PB| <= eq_tol and a strictly
  /// stable closed loop.
  bool passes(double eps, double delta, double psd_tol = 1e-8,
              double lmi_tol = 1e-6, double eq_tol = 1e-6) const;
};

CertificateCheck check_certificate(const Eigen::MatrixXd& A,
                                   const Eigen::MatrixXd& Bq,
                                   const Eigen::MatrixXd& Cq,
                                   const SofCertificate& cert);

/// Same check for a certificate produced by selection_feasible, rebuilding
/// B_q and C_q from the network.
CertificateCheck check_certificate(const DynNetwork& net, const Selection& s,
                                   const SofCertificate& cert);

/// Full-size gain F (n_u x n_y) with the reduced gain in the active rows
/// and columns and zeros elsewhere.
Eigen::MatrixXd full_gain(const DynNetwork& net, const SofCertificate& cert);

/// Zero-padded full-size (P, M, N) for a reduced certificate.
struct EmbeddedCertificate {
  Eigen::MatrixXd P;  // n_x x n_x
  Eigen::MatrixXd M;  // n_u x n_u
  Eigen::MatrixXd N;  // n_u x n_y
};

EmbeddedCertificate embed_certificate(const DynNetwork& net,
                                      const SofCertificate& cert);

/// Residuals of the selection-masked conditions on an embedded certificate:
///   A'P + PA + C'Gamma N' Pi B' + B Pi N Gamma C <= -eps I,
///   B Pi M = P B Pi,   P >= delta I.
struct EmbeddingCheck {
  double lmi_max_eig = 0.0;
  double eq_residual = 0.0;
  double min_eig_P = 0.0;
};

EmbeddingCheck check_embedding(const DynNetwork& net, const Selection& s,
                               const EmbeddedCertificate& e);

struct EpsilonPoint {
  double eps = 0.0;
  SofStatus status = SofStatus::kInconclusive;
  double max_real_eig = 0.0;  // NaN unless feasible
};

/// Runs the test for each margin in turn; infeasible entries are reported,
/// not thrown.
std::vector<EpsilonPoint> epsilon_sweep(const DynNetwork& net, const Selection& s,
                                        const std::vector<double>& eps_list,
                                        const SofOptions& opts = {});

}  // namespace sensact
