#include "sensact/pipeline.hpp"

#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "sensact/error.hpp"
#include "test_util.hpp"

namespace sensact {
namespace {

TEST(MethodTest, NamesRoundTrip) {
  for (Method m : {Method::kMisdp, Method::kBsa, Method::kHeu}) {
    EXPECT_EQ(parse_method(to_string(m)), m);
  }
  EXPECT_THROW(parse_method("sdp"), InputError);
}

TEST(RunSelectionTest, AllMethodsVerifyOnSmallNet) {
  const DynNetwork net = test::random_net(3, 3);
  const LogisticConstraint lc = at_least_one_each(3);
  const OracleResult oracle = exhaustive_oracle(net, lc);
  ASSERT_TRUE(oracle.found);
  for (Method m : {Method::kMisdp, Method::kBsa, Method::kHeu}) {
    const RunResult r = run_selection(m, net, lc, MethodOptions{});
    ASSERT_EQ(r.status, kRunStabilizing) << to_string(m);
    EXPECT_EQ(exit_code_for(r), 0);
    EXPECT_EQ(r.method, to_string(m));
    EXPECT_EQ(r.H, count_active(r.selection));
    EXPECT_GE(r.H, oracle.H);
    ASSERT_TRUE(r.max_real_eig.has_value());
    EXPECT_LT(*r.max_real_eig, 0.0);
    const VerifyReport v = verify_result(net, r);
    EXPECT_TRUE(v.pass) << to_string(m);
    EXPECT_TRUE(v.problems.empty());
    // The result file carries everything verify needs.
    EXPECT_TRUE(verify_result(net, result_from_json(result_to_json(r))).pass);
    if (m == Method::kMisdp) EXPECT_TRUE(r.optimal);
    if (m != Method::kMisdp) EXPECT_FALSE(r.optimal);
  }
}

TEST(RunSelectionTest, InfeasibleAllActiveIsReported) {
  // Seed 1 at this size is outside the test even with everything active.
  const DynNetwork net = test::random_net(3, 1);
  ASSERT_FALSE(selection_feasible(net, Selection::all_ones(3)).feasible());
  const RunResult r = run_selection(Method::kHeu, net, at_least_one_each(3), MethodOptions{});
  if (r.status == kRunStabilizing) {
    EXPECT_TRUE(verify_result(net, r).pass);
  } else {
    EXPECT_NE(exit_code_for(r), 0);
    EXPECT_FALSE(r.certificate.has_value());
  }
}

TEST(VerifyTest, TamperedSelectionFails) {
  const DynNetwork net = test::random_net(3, 3);
  const RunResult good = run_selection(Method::kBsa, net, at_least_one_each(3), MethodOptions{});
  ASSERT_TRUE(verify_result(net, good).pass);
  for (int k = 0; k < 6; ++k) {
    RunResult bad = good;
    bad.selection.set_bit(k, !bad.selection.bit(k));
    bad.H = count_active(bad.selection);
    const VerifyReport v = verify_result(net, bad);
    EXPECT_FALSE(v.pass) << "bit " << k;
    EXPECT_FALSE(v.problems.empty());
  }
}

TEST(VerifyTest, ZeroGainOnUnstablePlantFails) {
  const DynNetwork net = test::random_net(2, 1);
  RunResult r = run_selection(Method::kBsa, net, at_least_one_each(2), MethodOptions{});
  ASSERT_TRUE(r.certificate.has_value());
  r.certificate->F.setZero();
  const VerifyReport v = verify_result(net, r);
  EXPECT_FALSE(v.pass);
  ASSERT_TRUE(v.max_real_eig.has_value());
  EXPECT_GT(*v.max_real_eig, 0.0);
}

TEST(VerifyTest, MissingCertificateFails) {
  const DynNetwork net = test::random_net(2, 1);
  RunResult r = run_selection(Method::kBsa, net, at_least_one_each(2), MethodOptions{});
  r.certificate.reset();
  EXPECT_FALSE(verify_result(net, r).pass);
}

TEST(VerifyTest, WrongNetworkFails) {
  const DynNetwork net = test::random_net(2, 1);
  const RunResult r = run_selection(Method::kBsa, net, at_least_one_each(2), MethodOptions{});
  EXPECT_FALSE(verify_result(test::random_net(3, 3), r).pass);
}

TEST(BenchTest, ThreeSeedsTimesThreeMethods) {
  const std::string config = R"({
    "systems": [{"kind": "random", "nodes": 2, "seeds": [1, 3, 6],
                 "instability_shift": 0.2}],
    "methods": ["misdp", "bsa", "heu"],
    "heu": {"randomizations": 4, "seed": 9},
    "workers": 2})";
  const BenchConfig cfg = bench_config_from_json(config);
  ASSERT_EQ(cfg.systems.size(), 3u);
  const BenchReport rep = run_bench(cfg);
  ASSERT_EQ(rep.cells.size(), 9u);
  const std::vector<CsvRow> rows = rep.csv_rows();
  // heu contributes one row per randomization.
  EXPECT_EQ(rows.size(), 3u * (1 + 1 + 4));
  std::stringstream csv(rep.csv());
  EXPECT_EQ(read_csv(csv).size(), rows.size());
  for (const BenchCell& c : rep.cells) EXPECT_TRUE(c.error.empty()) << c.error;
  // Canonical order: system-major, methods in config order.
  EXPECT_EQ(rep.cells[0].method, Method::kMisdp);
  EXPECT_EQ(rep.cells[1].method, Method::kBsa);
  EXPECT_EQ(rep.cells[2].method, Method::kHeu);
  EXPECT_EQ(rep.cells[0].seed, 1u);
  EXPECT_EQ(rep.cells[3].seed, 3u);

  const nlohmann::json summary = nlohmann::json::parse(rep.summary_json());
  ASSERT_TRUE(summary.is_object());
  EXPECT_FALSE(summary.empty());
}

TEST(BenchTest, OutputDoesNotDependOnWorkerCount) {
  const std::string base = R"({
    "systems": [{"kind": "random", "nodes": 2, "seeds": [1, 3]},
                {"kind": "mass-spring", "masses": 2}],
    "methods": ["bsa", "heu"], "heu": {"randomizations": 2}, "workers": )";
  const BenchReport one = run_bench(bench_config_from_json(base + "1}"));
  const BenchReport three = run_bench(bench_config_from_json(base + "3}"));
  ASSERT_EQ(one.cells.size(), three.cells.size());
  for (size_t i = 0; i < one.cells.size(); ++i) {
    ASSERT_EQ(one.cells[i].runs.size(), three.cells[i].runs.size());
    for (size_t k = 0; k < one.cells[i].runs.size(); ++k) {
      EXPECT_EQ(one.cells[i].runs[k].selection, three.cells[i].runs[k].selection);
      EXPECT_EQ(one.cells[i].runs[k].status, three.cells[i].runs[k].status);
    }
  }
}

TEST(BenchTest, RejectsUnknownKinds) {
  EXPECT_THROW(bench_config_from_json(R"({"systems": [{"kind": "ring"}],
                                          "methods": ["bsa"]})"),
               InputError);
  EXPECT_THROW(bench_config_from_json(R"({"systems": [], "methods": ["lp"]})"), InputError);
}

}  // namespace
}  // namespace sensact
