#include "sensact/sof.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "sensact/error.hpp"
#include "test_util.hpp"

namespace sensact {
namespace {

using Eigen::MatrixXd;
using test::max_abs;

double min_eig(const MatrixXd& S) {
  return Eigen::SelfAdjointEigenSolver<MatrixXd>(S, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

double max_eig(const MatrixXd& S) { return -min_eig(-S); }

double abscissa(const MatrixXd& M) {
  return M.eigenvalues().real().maxCoeff();
}

// Checks every certificate invariant straight from the matrices.
void expect_valid(const MatrixXd& A, const MatrixXd& B, const MatrixXd& C,
                  const SofCertificate& c) {
  const MatrixXd BNC = B * c.N * C;
  EXPECT_GE(min_eig(c.P), c.delta - 1e-8);
  EXPECT_LE(max_eig(A.transpose() * c.P + c.P * A + BNC + BNC.transpose()), -c.eps + 1e-6);
  EXPECT_LE(max_abs(B * c.M - c.P * B), 1e-6);
  EXPECT_LE(max_abs(c.M * c.F - c.N), 1e-9 * std::max(1.0, max_abs(c.N)));
  EXPECT_LT(abscissa(A + B * c.F * C), 0.0);
  EXPECT_NEAR(abscissa(A + B * c.F * C), c.max_real_eig, 1e-9);
}

TEST(SofFeasibleTest, StableSystem) {
  const MatrixXd A = -MatrixXd::Identity(3, 3);
  const MatrixXd I = MatrixXd::Identity(3, 3);
  const SofResult r = sof_feasible(A, I, I);
  ASSERT_TRUE(r.feasible()) << r.note;
  EXPECT_TRUE(r.solver_called);
  expect_valid(A, I, I, *r.certificate);
}

// BM = PB with B = e2 forces P diagonal, and then the (1,1) entry of
// A'P + PA + BNC + (BNC)' is identically zero, so no margin eps > 0 fits.
// The plant is still stabilizable by u = -k1 x1 - k2 x2; the test is only
// sufficient.
TEST(SofFeasibleTest, DoubleIntegratorWithOneInputIsOutsideTheTest) {
  MatrixXd A(2, 2);
  A << 0, 1, 0, 0;
  MatrixXd B(2, 1);
  B << 0, 1;
  const MatrixXd C = MatrixXd::Identity(2, 2);
  MatrixXd F(1, 2);
  F << -1, -2;
  EXPECT_LT(abscissa(A + B * F * C), 0.0);
  const SofResult r = sof_feasible(A, B, C);
  EXPECT_EQ(r.status, SofStatus::kInfeasible) << r.note;
  EXPECT_LE(r.margin, 0.0);
}

TEST(SofFeasibleTest, DoubleIntegratorWithFullActuation) {
  MatrixXd A(2, 2);
  A << 0, 1, 0, 0;
  const MatrixXd I = MatrixXd::Identity(2, 2);
  const SofResult r = sof_feasible(A, I, I);
  ASSERT_TRUE(r.feasible()) << r.note;
  expect_valid(A, I, I, *r.certificate);
}

TEST(SofFeasibleTest, ScalarUnstablePlant) {
  const MatrixXd one = MatrixXd::Ones(1, 1);
  const SofResult r = sof_feasible(one, one, one);
  ASSERT_TRUE(r.feasible()) << r.note;
  EXPECT_LT(1.0 + r.certificate->F(0, 0), 0.0);
  expect_valid(one, one, one, *r.certificate);
}

TEST(SofFeasibleTest, UncontrollableUnstableModeIsInfeasible) {
  MatrixXd A = MatrixXd::Zero(2, 2);
  A(0, 0) = 1.0;
  A(1, 1) = -1.0;
  MatrixXd B(2, 1);
  B << 0, 1;
  const SofResult r = sof_feasible(A, B, MatrixXd::Identity(2, 2));
  EXPECT_EQ(r.status, SofStatus::kInfeasible) << r.note;
  EXPECT_FALSE(r.certificate.has_value());
}

TEST(SofFeasibleTest, RankDeficiencyIsAnError) {
  const MatrixXd A = -MatrixXd::Identity(2, 2);
  MatrixXd B(2, 2);
  B << 1, 1, 0, 0;
  EXPECT_THROW(sof_feasible(A, B, MatrixXd::Identity(2, 2)), RankDeficiencyError);
  MatrixXd C(2, 2);
  C << 1, 0, 1, 0;
  EXPECT_THROW(sof_feasible(A, MatrixXd::Identity(2, 2), C), RankDeficiencyError);
}

TEST(SelectionFeasibleTest, NoActuatorOrNoSensorSkipsTheSolver) {
  const DynNetwork net = test::scalar_network(MatrixXd::Identity(2, 2));
  for (const auto& [pi, gamma] : {std::pair{"00", "11"}, {"11", "00"}, {"00", "00"}}) {
    const SofResult r = selection_feasible(net, Selection::from_strings(pi, gamma));
    EXPECT_EQ(r.status, SofStatus::kInfeasible);
    EXPECT_FALSE(r.solver_called);
  }
}

// Two decoupled unstable scalar nodes: controlling one node leaves the other
// unstable, while the full selection stabilizes both.
TEST(SelectionFeasibleTest, PartialSelectionInfeasibleLargerOneFeasible) {
  const DynNetwork net = test::scalar_network(MatrixXd::Identity(2, 2));
  const Selection partial = Selection::from_strings("10", "10");
  const Selection crossed = Selection::from_strings("10", "01");
  const Selection full = Selection::all_ones(2);
  EXPECT_EQ(selection_feasible(net, partial).status, SofStatus::kInfeasible);
  EXPECT_EQ(selection_feasible(net, crossed).status, SofStatus::kInfeasible);
  const SofResult r = selection_feasible(net, full);
  ASSERT_TRUE(r.feasible());
  EXPECT_EQ(r.certificate->input_channels, (std::vector<int>{0, 1}));
  EXPECT_EQ(r.certificate->output_channels, (std::vector<int>{0, 1}));
  const CertificateCheck chk = check_certificate(net, full, *r.certificate);
  EXPECT_TRUE(chk.passes(r.certificate->eps, r.certificate->delta));
}

TEST(SelectionFeasibleTest, AllActiveOnSeededNets) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const DynNetwork net = test::random_net(4, seed);
    const Selection all = Selection::all_ones(4);
    const SofResult r = selection_feasible(net, all);
    ASSERT_TRUE(r.feasible()) << "seed " << seed << ": " << r.note;
    const ReducedMatrices red = reduced_matrices(net, all);
    expect_valid(net.A(), red.Bq, red.Cq, *r.certificate);
  }
}

TEST(SelectionFeasibleTest, ReturnedCertificatesHoldOnEveryAdmissibleSelection) {
  const DynNetwork net = test::random_net(2, 4);
  for (std::uint64_t m = 1; m < 16; ++m) {
    const Selection s = Selection::from_mask(m, 2);
    const SofResult r = selection_feasible(net, s);
    if (!r.feasible()) continue;
    const ReducedMatrices red = reduced_matrices(net, s);
    expect_valid(net.A(), red.Bq, red.Cq, *r.certificate);
    const CertificateCheck chk = check_certificate(net, s, *r.certificate);
    EXPECT_TRUE(chk.passes(r.certificate->eps, r.certificate->delta)) << s.tuple_string();
  }
}

TEST(RecoverGainTest, IdentityM) {
  MatrixXd N(2, 3);
  N << 1, 2, 3, 4, 5, 6;
  EXPECT_LE(max_abs(recover_gain(MatrixXd::Identity(2, 2), N) - N), 1e-15);
}

TEST(RecoverGainTest, SolvesGeneralSystem) {
  MatrixXd M(2, 2);
  M << 2, 1, 0.5, 3;
  MatrixXd N(2, 1);
  N << 1, -1;
  const MatrixXd F = recover_gain(M, N);
  EXPECT_LE(max_abs(M * F - N), 1e-14);
}

TEST(RecoverGainTest, IllConditionedMIsRejected) {
  MatrixXd M = MatrixXd::Identity(2, 2);
  M(1, 1) = 1e-12;
  EXPECT_THROW(recover_gain(M, MatrixXd::Ones(2, 1)), GainRecoveryError);
  EXPECT_NO_THROW(recover_gain(M, MatrixXd::Ones(2, 1), 1e13));
  EXPECT_THROW(recover_gain(MatrixXd::Zero(2, 2), MatrixXd::Ones(2, 1)), GainRecoveryError);
}

TEST(Lemma1Test, IdentityCases) {
  EXPECT_LE(max_abs(lemma1_M(MatrixXd::Identity(3, 3), MatrixXd::Identity(3, 3)) -
                    MatrixXd::Identity(3, 3)),
            1e-15);
  MatrixXd B(3, 2);
  B << 1, 0, 2, 1, 0, 3;
  EXPECT_LE(max_abs(lemma1_M(MatrixXd::Identity(3, 3), B) - MatrixXd::Identity(2, 2)), 1e-12);
}

// M from the equality BM = PB is invertible with inverse (B'PB)^{-1} B'B.
TEST(Lemma1Test, InverseIdentityOnRandomPairs) {
  std::mt19937_64 gen(42);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 5;
    const int m = 1 + trial % n;
    MatrixXd B(n, m), G(n, n);
    for (int i = 0; i < B.size(); ++i) B.data()[i] = nd(gen);
    for (int i = 0; i < G.size(); ++i) G.data()[i] = nd(gen);
    const MatrixXd P = G * G.transpose() + 0.1 * MatrixXd::Identity(n, n);
    const MatrixXd M = lemma1_M(P, B);
    // The equality itself holds only when range(PB) lies in range(B); the
    // projected M is still its least squares solution.
    const MatrixXd Mls = B.colPivHouseholderQr().solve(P * B);
    EXPECT_LE(max_abs(M - Mls), 1e-8 * std::max(1.0, max_abs(M)));
    const MatrixXd lhs = M.inverse();
    const MatrixXd rhs = (B.transpose() * P * B).ldlt().solve(B.transpose() * B);
    EXPECT_LE(max_abs(lhs - rhs), 1e-8) << "trial " << trial;
  }
}

TEST(EmbeddingTest, ZeroPaddedCertificateSatisfiesMaskedConditions) {
  const DynNetwork net = test::random_net(3, 2);
  for (std::uint64_t m : {0b111111ull, 0b110011ull, 0b101101ull}) {
    const Selection s = Selection::from_mask(m, 3);
    const SofResult r = selection_feasible(net, s);
    if (!r.feasible()) continue;
    const EmbeddedCertificate e = embed_certificate(net, *r.certificate);
    EXPECT_EQ(e.M.rows(), net.nu());
    EXPECT_EQ(e.N.rows(), net.nu());
    EXPECT_EQ(e.N.cols(), net.ny());
    const EmbeddingCheck chk = check_embedding(net, s, e);
    EXPECT_LE(chk.lmi_max_eig, -r.certificate->eps + 1e-6);
    EXPECT_LE(chk.eq_residual, 1e-6);
    EXPECT_GE(chk.min_eig_P, r.certificate->delta - 1e-8);

    // Oracle: the masked LMI evaluated directly from the padded blocks.
    const auto sm = build_selection_matrices(s, net);
    const MatrixXd BNC = net.B() * sm.Pi * e.N * sm.Gamma * net.C();
    EXPECT_NEAR(max_eig(net.A().transpose() * e.P + e.P * net.A() + BNC + BNC.transpose()),
                chk.lmi_max_eig, 1e-9);
    const MatrixXd F = full_gain(net, *r.certificate);
    EXPECT_LT(max_real_part(closed_loop_spectrum(net, sm.Pi, sm.Gamma, F)), 0.0);
  }
}

TEST(EpsilonSweepTest, BoundHoldsForEveryFeasibleMargin) {
  const DynNetwork net = test::random_net(4, 3);
  const auto pts = epsilon_sweep(net, Selection::all_ones(4), {1e-3, 1e-2, 1e-1, 10.0});
  ASSERT_EQ(pts.size(), 4u);
  EXPECT_EQ(pts[0].status, SofStatus::kFeasible);
  // P <= I/2 caps the achievable decay, so a margin of 10 is out of reach.
  EXPECT_NE(pts[3].status, SofStatus::kFeasible);
  for (const EpsilonPoint& p : pts) {
    if (p.status != SofStatus::kFeasible) {
      EXPECT_TRUE(std::isnan(p.max_real_eig));
      continue;
    }
    EXPECT_LE(p.max_real_eig, -p.eps + 1e-6) << "eps " << p.eps;
  }
}

}  // namespace
}  // namespace sensact
