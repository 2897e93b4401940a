#include "sensact/combsearch.hpp"

#include <algorithm>
#include <bit>
#include <filesystem>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "sensact/error.hpp"
#include "test_util.hpp"

namespace sensact {
namespace {

std::uint64_t tuple(const std::string& bits) {
  std::uint64_t m = 0;
  for (size_t k = 0; k < bits.size(); ++k) {
    if (bits[k] == '1') m |= std::uint64_t{1} << k;
  }
  return m;
}

std::vector<std::string> tuples(const std::vector<std::uint64_t>& masks, int n) {
  std::vector<std::string> out;
  for (std::uint64_t m : masks) out.push_back(Selection::from_mask(m, n).tuple_string());
  return out;
}

LogisticConstraint one_to_three_active() {
  StructuredConstraint sc;
  sc.min_total = 1;
  sc.max_total = 3;
  return compile_constraint(sc, 2);
}

// Answers from a fixed table; everything not listed is infeasible.
FeasibilityOracle table_oracle(std::set<std::uint64_t> feasible, int* calls = nullptr) {
  return [feasible = std::move(feasible), calls](const Selection& s) {
    if (calls) ++*calls;
    SofResult r;
    r.status = feasible.count(s.to_mask()) ? SofStatus::kFeasible : SofStatus::kInfeasible;
    return r;
  };
}

TEST(CandidateSetTest, ReproducesExampleOne) {
  const CandidateSet cs = build_candidate_set(one_to_three_active(), 2);
  const std::vector<std::string> expected = {
      "(1,0,0,0)", "(0,1,0,0)", "(0,0,1,0)", "(0,0,0,1)", "(1,1,0,0)",
      "(1,0,1,0)", "(1,0,0,1)", "(0,1,1,0)", "(0,1,0,1)", "(0,0,1,1)",
      "(1,1,1,0)", "(1,1,0,1)", "(1,0,1,1)", "(0,1,1,1)"};
  EXPECT_EQ(tuples(cs.masks, 2), expected);
  EXPECT_EQ(cs.constraint_fingerprint, one_to_three_active().fingerprint());
}

TEST(CandidateSetTest, UnconstrainedHasAllStrings) {
  const CandidateSet cs = build_candidate_set(LogisticConstraint::unconstrained(2), 2);
  EXPECT_EQ(cs.size(), 16);
  EXPECT_EQ(cs.masks.front(), 0u);
  EXPECT_EQ(cs.masks.back(), 15u);
}

TEST(CandidateSetTest, ForcedActuatorAppearsInEveryMember) {
  StructuredConstraint sc;
  sc.forced_on_actuators = {0};
  const CandidateSet cs = build_candidate_set(compile_constraint(sc, 3), 3);
  EXPECT_EQ(cs.size(), 32);
  for (std::uint64_t m : cs.masks) EXPECT_TRUE(m & 1u);
}

TEST(CandidateSetTest, OnlyOneAdmissibleString) {
  StructuredConstraint sc;
  sc.min_total = 4;
  const CandidateSet cs = build_candidate_set(compile_constraint(sc, 2), 2);
  ASSERT_EQ(cs.size(), 1);
  EXPECT_EQ(cs.masks[0], 15u);
}

// Oracle for the order: by weight, then by the tuple string with '1' first.
TEST(CandidateSetTest, OrderMatchesStringComparison) {
  const int n = 3;
  const CandidateSet cs = build_candidate_set(LogisticConstraint::unconstrained(n), n);
  std::vector<std::uint64_t> expect(64);
  for (std::uint64_t m = 0; m < 64; ++m) expect[m] = m;
  std::sort(expect.begin(), expect.end(), [&](std::uint64_t a, std::uint64_t b) {
    if (std::popcount(a) != std::popcount(b)) return std::popcount(a) < std::popcount(b);
    return Selection::from_mask(a, n).tuple_string() > Selection::from_mask(b, n).tuple_string();
  });
  EXPECT_EQ(cs.masks, expect);
  for (size_t i = 1; i < cs.masks.size(); ++i) {
    EXPECT_TRUE(candidate_before(cs.masks[i - 1], cs.masks[i], n));
    EXPECT_FALSE(candidate_before(cs.masks[i], cs.masks[i - 1], n));
  }
}

TEST(CandidateSetTest, EnumerationCap) {
  EXPECT_THROW(build_candidate_set(LogisticConstraint::unconstrained(13), 13),
               CapExceededError);
  EXPECT_THROW(build_candidate_set(LogisticConstraint::unconstrained(3), 2), DimensionError);
}

TEST(CandidateSetTest, FileRoundTrip) {
  const CandidateSet cs = build_candidate_set(at_least_one_each(3), 3);
  std::stringstream ss;
  write_candidate_set(cs, ss);
  const CandidateSet back = read_candidate_set(ss);
  EXPECT_EQ(back.num_nodes, cs.num_nodes);
  EXPECT_EQ(back.constraint_fingerprint, cs.constraint_fingerprint);
  EXPECT_EQ(back.masks, cs.masks);

  const auto path = std::filesystem::temp_directory_path() / "sensact_candidates_test.txt";
  save_candidate_set(cs, path.string());
  EXPECT_EQ(load_candidate_set(path.string()).masks, cs.masks);
  std::filesystem::remove(path);

  std::stringstream bad("not a candidate file\n");
  EXPECT_THROW(read_candidate_set(bad), InputError);
}

TEST(SubmaskTest, Examples) {
  EXPECT_TRUE(submask(tuple("1001"), tuple("1000")));
  EXPECT_TRUE(submask(tuple("1001"), tuple("0001")));
  EXPECT_TRUE(submask(tuple("1001"), tuple("1001")));
  EXPECT_FALSE(submask(tuple("1001"), tuple("0100")));
  EXPECT_FALSE(submask(tuple("1001"), tuple("1101")));
  EXPECT_TRUE(submask(Selection::from_strings("11", "01"), Selection::from_strings("01", "01")));
}

TEST(BsaTest, ReproducesExampleTwo) {
  const CandidateSet cs = build_candidate_set(one_to_three_active(), 2);
  const BsaResult r = bsa(cs, table_oracle({tuple("0101")}), true);
  ASSERT_GE(r.snapshots.size(), 3u);
  EXPECT_EQ(r.snapshots[0].size(), 14u);
  EXPECT_EQ(r.trace[0].mask, tuple("1001"));
  EXPECT_EQ(r.trace[0].status, SofStatus::kInfeasible);
  EXPECT_EQ(r.trace[0].removed, 3);
  const std::vector<std::string> s2 = {
      "(0,1,0,0)", "(0,0,1,0)", "(1,1,0,0)", "(1,0,1,0)", "(0,1,1,0)", "(0,1,0,1)",
      "(0,0,1,1)", "(1,1,1,0)", "(1,1,0,1)", "(1,0,1,1)", "(0,1,1,1)"};
  EXPECT_EQ(tuples(r.snapshots[1], 2), s2);
  EXPECT_EQ(r.trace[1].mask, tuple("0101"));
  EXPECT_EQ(r.trace[1].status, SofStatus::kFeasible);
  EXPECT_EQ(tuples(r.snapshots[2], 2), (std::vector<std::string>{"(0,1,0,0)", "(0,0,1,0)"}));
  // Both single-bit strings fail, so the search ends on (0,1,0,1).
  EXPECT_EQ(r.best.tuple_string(), "(0,1,0,1)");
  EXPECT_TRUE(r.improved);
  EXPECT_EQ(r.iterations, 4);
}

TEST(BsaTest, NothingFeasibleKeepsAllOnes) {
  const CandidateSet cs = build_candidate_set(one_to_three_active(), 2);
  int calls = 0;
  const BsaResult r = bsa(cs, table_oracle({}, &calls));
  EXPECT_FALSE(r.improved);
  EXPECT_EQ(r.best, Selection::all_ones(2));
  EXPECT_EQ(calls, r.iterations);
}

TEST(BsaTest, SingleCandidate) {
  CandidateSet cs;
  cs.num_nodes = 2;
  cs.masks = {tuple("1111")};
  const BsaResult r = bsa(cs, table_oracle({tuple("1111")}));
  EXPECT_EQ(r.iterations, 1);
  EXPECT_TRUE(r.improved);
}

TEST(BsaTest, EveryIterationShrinksTheSet) {
  const CandidateSet cs = build_candidate_set(LogisticConstraint::unconstrained(3), 3);
  // Feasible iff at least one actuator and one sensor at node 2 or 3.
  std::set<std::uint64_t> feasible;
  for (std::uint64_t m = 0; m < 64; ++m) {
    if ((m & 0b000110) && (m & 0b110000)) feasible.insert(m);
  }
  const BsaResult r = bsa(cs, table_oracle(feasible), true);
  for (const BsaStep& s : r.trace) EXPECT_GE(s.removed, 1);
  for (size_t i = 1; i < r.snapshots.size(); ++i) {
    EXPECT_LT(r.snapshots[i].size(), r.snapshots[i - 1].size());
  }
  // The feasible family is closed under supersets, so the search is exact.
  const OracleResult o = exhaustive_oracle(cs, table_oracle(feasible));
  EXPECT_EQ(count_active(r.best), o.H);
  EXPECT_EQ(o.H, 2);
}

TEST(BsaTest, InconclusiveCountsAsInfeasible) {
  const CandidateSet cs = build_candidate_set(one_to_three_active(), 2);
  FeasibilityOracle oracle = [](const Selection&) {
    SofResult r;
    r.status = SofStatus::kInconclusive;
    return r;
  };
  const BsaResult r = bsa(cs, oracle);
  EXPECT_FALSE(r.improved);
  EXPECT_EQ(r.inconclusive, r.iterations);
}

TEST(PremiseCheckTest, DetectsNonMonotoneTable) {
  const CandidateSet cs = build_candidate_set(one_to_three_active(), 2);
  // (1,0,0,0) feasible but its superset (1,0,0,1) is not.
  const auto oracle = table_oracle({tuple("1000")});
  const MonotonicityReport mono = check_monotonicity(cs, oracle);
  EXPECT_FALSE(mono.holds());
  const BsaResult run = bsa(cs, oracle);
  const MonotonicityReport premise = check_search_premise(run, cs, oracle);
  EXPECT_FALSE(premise.holds());
  bool found = false;
  for (const auto& [bad, good] : premise.violations) {
    found |= bad == tuple("1001") && good == tuple("1000");
  }
  EXPECT_TRUE(found);
}

TEST(PremiseCheckTest, MonotoneTableHolds) {
  const CandidateSet cs = build_candidate_set(one_to_three_active(), 2);
  std::set<std::uint64_t> feasible;
  for (std::uint64_t m : cs.masks) {
    if (submask(m, tuple("0101"))) feasible.insert(m);
  }
  const auto oracle = table_oracle(feasible);
  EXPECT_TRUE(check_monotonicity(cs, oracle).holds());
  EXPECT_TRUE(check_search_premise(bsa(cs, oracle), cs, oracle).holds());
}

TEST(CachedOracleTest, MemoizesBySelection) {
  const DynNetwork net = test::random_net(2, 1);
  CachedOracle oracle(net);
  const Selection s = Selection::all_ones(2);
  const SofResult a = oracle(s);
  const SofResult b = oracle(s);
  EXPECT_EQ(a.status, b.status);
  EXPECT_EQ(oracle.solves(), 1);
  EXPECT_EQ(oracle.hits(), 1);
}

TEST(BsaTest, AgreesWithOracleOnSeededNets) {
  for (std::uint64_t seed : {2, 3}) {
    const DynNetwork net = test::random_net(3, seed);
    const LogisticConstraint lc = at_least_one_each(3);
    const CandidateSet cs = build_candidate_set(lc, 3);
    CachedOracle cache(net);
    const FeasibilityOracle oracle = cache.as_function();
    const OracleResult o = exhaustive_oracle(cs, oracle);
    const BsaResult r = bsa(cs, oracle);
    ASSERT_TRUE(o.found);
    if (check_search_premise(r, cs, oracle).holds()) {
      EXPECT_EQ(count_active(r.best), o.H) << "seed " << seed;
    }
    if (r.certificate) {
      EXPECT_TRUE(check_certificate(net, r.best, *r.certificate)
                      .passes(r.certificate->eps, r.certificate->delta));
    }
  }
}

}  // namespace
}  // namespace sensact
