#include "sensact/heuristic.hpp"

#include <bit>
#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "sensact/error.hpp"
#include "test_util.hpp"

namespace sensact {
namespace {

SofResult status_only(SofStatus s) {
  SofResult r;
  r.status = s;
  return r;
}

FeasibilityOracle always(SofStatus s, int* calls = nullptr) {
  return [s, calls](const Selection&) {
    if (calls) ++*calls;
    return status_only(s);
  };
}

// Deterministic pseudo-random feasibility that is closed under supersets:
// feasible iff the selection covers some "key" set from a fixed list.
FeasibilityOracle covering_oracle(std::vector<std::uint64_t> keys) {
  return [keys = std::move(keys)](const Selection& s) {
    const std::uint64_t m = s.to_mask();
    for (std::uint64_t k : keys) {
      if ((m & k) == k) return status_only(SofStatus::kFeasible);
    }
    return status_only(SofStatus::kInfeasible);
  };
}

TEST(GenCandidateTest, FullCountReturnsAllOnes) {
  const LogisticConstraint lc = LogisticConstraint::unconstrained(3);
  ForbiddenSet Z;
  Rng rng(5);
  int wmin = 0;
  EXPECT_EQ(gen_candidate(6, 3, Z, lc, HeuristicOptions{}, rng, wmin), 0b111111u);
  EXPECT_EQ(wmin, 0);
}

TEST(GenCandidateTest, ExhaustedCountYieldsZeroTupleAndRaisesWmin) {
  const LogisticConstraint lc = LogisticConstraint::unconstrained(2);
  ForbiddenSet Z;
  for (int k = 0; k < 4; ++k) Z.insert(std::uint64_t{1} << k);
  HeuristicOptions opts;
  opts.max_random = 50;
  Rng rng(1);
  int wmin = 1;
  HeuristicStats st;
  EXPECT_EQ(gen_candidate(1, 2, Z, lc, opts, rng, wmin, &st), 0u);
  EXPECT_EQ(wmin, 2);
  EXPECT_EQ(st.draws, 50);
  EXPECT_EQ(st.rejected_draws, 50);
}

TEST(GenCandidateTest, RespectsConstraintAndForbiddenSet) {
  const LogisticConstraint lc = at_least_one_each(3);
  ForbiddenSet Z;
  Z.insert(0b001001);
  Rng rng(9);
  int wmin = 2;
  for (int i = 0; i < 500; ++i) {
    const std::uint64_t s = gen_candidate(2, 3, Z, lc, HeuristicOptions{}, rng, wmin);
    EXPECT_EQ(std::popcount(s), 2);
    EXPECT_TRUE(lc.membership(s));
    EXPECT_FALSE(Z.contains(s));
  }
  EXPECT_EQ(wmin, 2);
}

TEST(GenCandidateTest, SameSeedSameDraws) {
  const LogisticConstraint lc = LogisticConstraint::unconstrained(4);
  ForbiddenSet Z;
  Rng a(77), b(77);
  int wa = 0, wb = 0;
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(gen_candidate(3, 4, Z, lc, HeuristicOptions{}, a, wa),
              gen_candidate(3, 4, Z, lc, HeuristicOptions{}, b, wb));
  }
}

// Chi-square over all C(6, 3) = 20 subsets with 1e5 draws, plus a per-cell
// 5 sigma bound.
TEST(GenCandidateTest, DrawsAreUniformOverSubsets) {
  const LogisticConstraint lc = LogisticConstraint::unconstrained(3);
  ForbiddenSet Z;
  Rng rng(2024);
  int wmin = 0;
  const int draws = 100000;
  std::map<std::uint64_t, int> counts;
  for (int i = 0; i < draws; ++i) {
    ++counts[gen_candidate(3, 3, Z, lc, HeuristicOptions{}, rng, wmin)];
  }
  ASSERT_EQ(counts.size(), 20u);
  const double p = 1.0 / 20.0;
  const double mean = draws * p;
  const double sigma = std::sqrt(draws * p * (1.0 - p));
  double chi2 = 0.0;
  for (const auto& [mask, c] : counts) {
    EXPECT_EQ(std::popcount(mask), 3);
    EXPECT_LE(std::abs(c - mean), 5.0 * sigma) << "mask " << mask;
    chi2 += (c - mean) * (c - mean) / mean;
  }
  // 19 degrees of freedom; 43.8 is the 0.999 quantile.
  EXPECT_LT(chi2, 43.8);
}

TEST(HeuTest, AllFeasibleDescendsByHalving) {
  const LogisticConstraint lc = at_least_one_each(3);  // window [2, 6]
  int calls = 0;
  const HeuristicResult r = heu(lc, HeuristicOptions{}, always(SofStatus::kFeasible, &calls));
  EXPECT_TRUE(r.improved);
  // q = 4, then 3, then 2; after that wmax = 1 < q and the loop exits.
  EXPECT_EQ(count_active(r.best), 2);
  EXPECT_EQ(calls, 3);
  EXPECT_EQ(r.stats.lmi_solves, 3);
  EXPECT_EQ(r.stats.initial_wmin, 2);
  EXPECT_EQ(r.stats.initial_wmax, 6);
  EXPECT_EQ(r.stats.final_wmax, 1);
  const std::vector<std::pair<int, int>> trace = {{2, 3}, {2, 2}, {2, 1}};
  EXPECT_EQ(r.stats.window_trace, trace);
}

TEST(HeuTest, MaxIterOneMeansOneSolve) {
  HeuristicOptions opts;
  opts.max_iter = 1;
  int calls = 0;
  heu(at_least_one_each(4), opts, always(SofStatus::kInfeasible, &calls));
  EXPECT_LE(calls, 1);
  calls = 0;
  heu(at_least_one_each(4), opts, always(SofStatus::kFeasible, &calls));
  EXPECT_LE(calls, 1);
}

TEST(HeuTest, NothingFeasibleKeepsAllOnes) {
  const HeuristicResult r =
      heu(at_least_one_each(3), HeuristicOptions{}, always(SofStatus::kInfeasible));
  EXPECT_FALSE(r.improved);
  EXPECT_EQ(r.best, Selection::all_ones(3));
  EXPECT_LE(r.stats.lmi_solves, 50);
  EXPECT_EQ(r.stats.infeasible, r.stats.lmi_solves);
}

TEST(HeuTest, InconclusiveIsForbiddenAndCounted) {
  const HeuristicResult r =
      heu(at_least_one_each(3), HeuristicOptions{}, always(SofStatus::kInconclusive));
  EXPECT_FALSE(r.improved);
  EXPECT_GT(r.stats.inconclusive, 0);
  EXPECT_EQ(r.stats.infeasible, 0);
}

TEST(HeuTest, WindowNeverReExpandsAndSolvesStayCapped) {
  const std::vector<std::uint64_t> keys = {0b00010001, 0b01000100, 0b00100110};
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    HeuristicOptions opts;
    opts.seed = seed;
    opts.max_infeasibility = 3;
    const HeuristicResult r = heu(at_least_one_each(4), opts, covering_oracle(keys));
    EXPECT_LE(r.stats.lmi_solves, opts.max_iter);
    int lo = r.stats.initial_wmin, hi = r.stats.initial_wmax;
    for (const auto& [wmin, wmax] : r.stats.window_trace) {
      EXPECT_GE(wmin, lo);
      EXPECT_LE(wmax, hi);
      lo = wmin;
      hi = wmax;
    }
    if (r.improved) {
      EXPECT_TRUE(covering_oracle(keys)(r.best).feasible());
      EXPECT_GE(count_active(r.best), r.stats.initial_wmin);
      EXPECT_LE(count_active(r.best), r.stats.initial_wmax);
      // The optimum here is 2 (either two-bit key).
      EXPECT_GE(count_active(r.best), 2);
    }
  }
}

TEST(HeuTest, Deterministic) {
  const std::vector<std::uint64_t> keys = {0b00010001, 0b01100000};
  HeuristicOptions opts;
  opts.seed = 31;
  const HeuristicResult a = heu(at_least_one_each(4), opts, covering_oracle(keys));
  const HeuristicResult b = heu(at_least_one_each(4), opts, covering_oracle(keys));
  EXPECT_EQ(a.best, b.best);
  EXPECT_EQ(a.stats.lmi_solves, b.stats.lmi_solves);
  EXPECT_EQ(a.stats.draws, b.stats.draws);
  EXPECT_EQ(a.stats.window_trace, b.stats.window_trace);
}

TEST(HeuTest, RejectsBadOptions) {
  HeuristicOptions opts;
  opts.max_random = 0;
  EXPECT_THROW(heu(at_least_one_each(2), opts, always(SofStatus::kFeasible)), InputError);
  HeuristicOptions window;
  window.wmin = 3;
  window.wmax = 2;
  EXPECT_THROW(heu(at_least_one_each(2), window, always(SofStatus::kFeasible)), InputError);
}

TEST(HeuTest, ImprovedSelectionsStabilizeOnSeededNet) {
  const DynNetwork net = test::random_net(3, 3);
  const LogisticConstraint lc = at_least_one_each(3);
  const OracleResult oracle = exhaustive_oracle(net, lc);
  ASSERT_TRUE(oracle.found);
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    HeuristicOptions opts;
    opts.seed = seed;
    const HeuristicResult r = heu(net, lc, opts);
    if (!r.improved) continue;
    ASSERT_TRUE(r.certificate.has_value());
    EXPECT_GE(count_active(r.best), oracle.H);
    EXPECT_TRUE(check_certificate(net, r.best, *r.certificate)
                    .passes(r.certificate->eps, r.certificate->delta));
    EXPECT_LT(r.certificate->max_real_eig, 0.0);
  }
}

}  // namespace
}  // namespace sensact
