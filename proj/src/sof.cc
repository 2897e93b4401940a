#include "sensact/sof.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "sensact/error.hpp"

namespace sensact {

using sdp::AffineSymMatrix;
using sdp::ConicProblem;
using sdp::LinearExpr;

const char* to_string(SofStatus s) {
  switch (s) {
    case SofStatus::kFeasible:
      return "Feasible";
    case SofStatus::kInfeasible:
      return "Infeasible";
    case SofStatus::kInconclusive:
      return "Inconclusive";
  }
  return "?";
}

namespace {

double min_sym_eig(const Eigen::MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double max_sym_eig(const Eigen::MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(S.rows() - 1);
}

double max_abs(const Eigen::MatrixXd& M) {
  return M.size() == 0 ? 0.0 : M.cwiseAbs().maxCoeff();
}

SofResult solve_triple(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                       const Eigen::MatrixXd& C, const SofOptions& opts) {
  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.cols());
  const int r = static_cast<int>(C.rows());

  ConicProblem prob;
  const sdp::SymMatrixVar P = prob.add_sym_matrix("P", n, opts.delta);
  const sdp::MatrixVar M = prob.add_matrix("M", m, m);
  const sdp::MatrixVar Nv = prob.add_matrix("N", m, r);

  AffineSymMatrix lyap(n);
  lyap.add_sym_congruence(Eigen::MatrixXd::Identity(n, n), P, A);
  lyap.add_congruence(B, Nv, C);
  prob.add_lmi(std::move(lyap), opts.eps, /*strict=*/true, "closed loop");

  AffineSymMatrix scale(n);
  scale.add_var(P);
  scale.add_constant(-opts.p_upper * Eigen::MatrixXd::Identity(n, n));
  prob.add_lmi(std::move(scale), 0.0, /*strict=*/false, "P upper bound");

  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      LinearExpr e;
      for (int k = 0; k < m; ++k) e.add(M.id(k, j), B(i, k));
      for (int k = 0; k < n; ++k) e.add(P.id(i, k), -B(k, j));
      prob.add_eq(std::move(e), 0.0, fmt::format("BM=PB ({},{})", i, j));
    }
  }
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < r; ++j) {
      prob.add_le(LinearExpr().add(Nv.id(i, j), 1.0), opts.n_bound);
      prob.add_le(LinearExpr().add(Nv.id(i, j), -1.0), opts.n_bound);
    }
  }

  const sdp::SolveOutcome out = sdp::solve(prob, opts.tol);
  SofResult res;
  res.solver_called = true;
  res.stats = out.stats;
  res.margin = out.margin;
  res.note = out.note;
  if (out.status == sdp::SolveStatus::kInfeasible) {
    res.status = SofStatus::kInfeasible;
    return res;
  }
  if (out.status == sdp::SolveStatus::kInconclusive) {
    res.status = SofStatus::kInconclusive;
    return res;
  }

  SofCertificate cert;
  cert.P = sdp::value_of(P, out.values);
  cert.M = sdp::value_of(M, out.values);
  cert.N = sdp::value_of(Nv, out.values);
  cert.eps = opts.eps;
  cert.delta = opts.delta;
  cert.m = m;
  cert.r = r;
  cert.margin = out.margin;
  try {
    cert.F = recover_gain(cert.M, cert.N, opts.cond_cap);
  } catch (const GainRecoveryError& e) {
    res.status = SofStatus::kInconclusive;
    res.note = e.what();
    return res;
  }
  const CertificateCheck chk = check_certificate(A, B, C, cert);
  cert.max_real_eig = chk.max_real_eig;
  if (!chk.passes(cert.eps, cert.delta)) {
    res.status = SofStatus::kInconclusive;
    res.note = fmt::format(
        "certificate rejected on recheck: lambda_min(P)={:.3e} "
        "lambda_max(LMI)={:.3e} |BM-PB|={:.3e} max Re={:.3e}",
        chk.min_eig_P, chk.lmi_max_eig, chk.eq_residual, chk.max_real_eig);
    return res;
  }
  res.status = SofStatus::kFeasible;
  res.certificate = std::move(cert);
  return res;
}

}  // namespace

SofResult sof_feasible(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                       const Eigen::MatrixXd& C, const SofOptions& opts) {
  if (A.rows() != A.cols()) throw DimensionError("A must be square", A.rows(), A.cols());
  if (B.rows() != A.rows()) throw DimensionError("B rows", A.rows(), B.rows());
  if (C.cols() != A.rows()) throw DimensionError("C cols", A.rows(), C.cols());
  if (B.cols() == 0 || C.rows() == 0) {
    throw InputError("output feedback test needs at least one input and one output");
  }
  if (!A.allFinite() || !B.allFinite() || !C.allFinite()) {
    throw InputError("non-finite system matrix");
  }
  if (!(opts.eps >= 0.0) || !(opts.delta > 0.0) || !(opts.p_upper > opts.delta) ||
      !(opts.n_bound > 0.0)) {
    throw InputError("invalid output feedback test options");
  }
  if (numerical_rank(B) != B.cols()) {
    throw RankDeficiencyError(fmt::format("B has rank {} < {} columns",
                                          numerical_rank(B), B.cols()));
  }
  if (numerical_rank(C) != C.rows()) {
    throw RankDeficiencyError(fmt::format("C has rank {} < {} rows",
                                          numerical_rank(C), C.rows()));
  }
  return solve_triple(A, B, C, opts);
}

SofResult selection_feasible(const DynNetwork& net, const Selection& s,
                             const SofOptions& opts) {
  if (s.num_nodes() != net.num_nodes()) {
    throw DimensionError("selection length", net.num_nodes(), s.num_nodes());
  }
  if (s.num_actuators() == 0 || s.num_sensors() == 0) {
    SofResult res;
    res.status = SofStatus::kInfeasible;
    res.note = s.num_actuators() == 0 ? "no actuator selected" : "no sensor selected";
    return res;
  }
  const ReducedMatrices red = reduced_matrices(net, s);
  SofResult res = sof_feasible(net.A(), red.Bq, red.Cq, opts);
  if (res.certificate) {
    res.certificate->input_channels = red.input_channels;
    res.certificate->output_channels = red.output_channels;
  }
  return res;
}

Eigen::MatrixXd recover_gain(const Eigen::MatrixXd& M, const Eigen::MatrixXd& N,
                             double cond_cap) {
  if (M.rows() != M.cols()) throw DimensionError("M must be square", M.rows(), M.cols());
  if (N.rows() != M.rows()) throw DimensionError("N rows", M.rows(), N.rows());
  if (!M.allFinite() || !N.allFinite()) {
    throw GainRecoveryError("non-finite M or N", std::numeric_limits<double>::infinity());
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() ? sv(0) : 0.0;
  const double smin = sv.size() ? sv(sv.size() - 1) : 0.0;
  const double cond = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  if (!(cond <= cond_cap)) {
    throw GainRecoveryError(
        fmt::format("M is too badly conditioned (cond {:.3e} > {:.1e})", cond, cond_cap),
        cond);
  }
  return M.fullPivLu().solve(N);
}

Eigen::MatrixXd lemma1_M(const Eigen::MatrixXd& P, const Eigen::MatrixXd& B) {
  if (P.rows() != P.cols() || P.rows() != B.rows()) {
    throw DimensionError("P and B rows", B.rows(), P.rows());
  }
  if (numerical_rank(B) != B.cols()) {
    throw RankDeficiencyError("B is not full column rank");
  }
  const Eigen::MatrixXd BtB = B.transpose() * B;
  return BtB.llt().solve(B.transpose() * P * B);
}

bool CertificateCheck::passes(double eps, double delta, double psd_tol,
                              double lmi_tol, double eq_tol) const {
  return min_eig_P >= delta - psd_tol && lmi_max_eig <= -eps + lmi_tol &&
         eq_residual <= eq_tol && max_real_eig < 0.0;
}

CertificateCheck check_certificate(const Eigen::MatrixXd& A,
                                   const Eigen::MatrixXd& Bq,
                                   const Eigen::MatrixXd& Cq,
                                   const SofCertificate& cert) {
  CertificateCheck chk;
  const Eigen::MatrixXd BNC = Bq * cert.N * Cq;
  const Eigen::MatrixXd L =
      A.transpose() * cert.P + cert.P * A + BNC + BNC.transpose();
  chk.min_eig_P = min_sym_eig(0.5 * (cert.P + cert.P.transpose()));
  chk.lmi_max_eig = max_sym_eig(0.5 * (L + L.transpose()));
  chk.eq_residual = max_abs(Bq * cert.M - cert.P * Bq);
  chk.gain_residual = max_abs(cert.M * cert.F - cert.N);
  chk.max_real_eig = max_real_part(eigenvalues(A + Bq * cert.F * Cq));
  return chk;
}

CertificateCheck check_certificate(const DynNetwork& net, const Selection& s,
                                   const SofCertificate& cert) {
  const ReducedMatrices red = reduced_matrices(net, s);
  if (red.Bq.cols() != cert.m || red.Cq.rows() != cert.r) {
    throw DimensionError("certificate does not match the selection", red.Bq.cols(),
                         cert.m);
  }
  return check_certificate(net.A(), red.Bq, red.Cq, cert);
}

Eigen::MatrixXd full_gain(const DynNetwork& net, const SofCertificate& cert) {
  if (static_cast<int>(cert.input_channels.size()) != cert.m ||
      static_cast<int>(cert.output_channels.size()) != cert.r) {
    throw InputError("certificate carries no channel map");
  }
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(net.nu(), net.ny());
  for (int i = 0; i < cert.m; ++i) {
    for (int j = 0; j < cert.r; ++j) {
      F(cert.input_channels[i], cert.output_channels[j]) = cert.F(i, j);
    }
  }
  return F;
}

EmbeddedCertificate embed_certificate(const DynNetwork& net,
                                      const SofCertificate& cert) {
  if (static_cast<int>(cert.input_channels.size()) != cert.m ||
      static_cast<int>(cert.output_channels.size()) != cert.r) {
    throw InputError("certificate carries no channel map");
  }
  EmbeddedCertificate e;
  e.P = cert.P;
  e.M = Eigen::MatrixXd::Zero(net.nu(), net.nu());
  e.N = Eigen::MatrixXd::Zero(net.nu(), net.ny());
  const auto& in = cert.input_channels;
  const auto& out = cert.output_channels;
  for (int i = 0; i < cert.m; ++i) {
    for (int j = 0; j < cert.m; ++j) e.M(in[i], in[j]) = cert.M(i, j);
    for (int j = 0; j < cert.r; ++j) e.N(in[i], out[j]) = cert.N(i, j);
  }
  return e;
}

EmbeddingCheck check_embedding(const DynNetwork& net, const Selection& s,
                               const EmbeddedCertificate& e) {
  const SelectionMatrices sm = build_selection_matrices(s, net);
  const Eigen::MatrixXd& A = net.A();
  const Eigen::MatrixXd BPi = net.B() * sm.Pi;
  const Eigen::MatrixXd K = BPi * e.N * sm.Gamma * net.C();
  const Eigen::MatrixXd L = A.transpose() * e.P + e.P * A + K + K.transpose();
  EmbeddingCheck chk;
  chk.lmi_max_eig = max_sym_eig(0.5 * (L + L.transpose()));
  chk.eq_residual = max_abs(BPi * e.M - e.P * BPi);
  chk.min_eig_P = min_sym_eig(0.5 * (e.P + e.P.transpose()));
  return chk;
}

std::vector<EpsilonPoint> epsilon_sweep(const DynNetwork& net, const Selection& s,
                                        const std::vector<double>& eps_list,
                                        const SofOptions& opts) {
  std::vector<EpsilonPoint> out;
  out.reserve(eps_list.size());
  for (double eps : eps_list) {
    SofOptions o = opts;
    o.eps = eps;
    const SofResult r = selection_feasible(net, s, o);
    EpsilonPoint pt;
    pt.eps = eps;
    pt.status = r.status;
    pt.max_real_eig = r.certificate ? r.certificate->max_real_eig
                                    : std::numeric_limits<double>::quiet_NaN();
    out.push_back(pt);
  }
  return out;
}

}  // namespace sensact
