#include "sensact/io.hpp"

#include <cmath>
#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "sensact/error.hpp"
#include "test_util.hpp"

namespace sensact {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  return fs::temp_directory_path() / ("sensact_io_test_" + name);
}

TEST(SystemIoTest, RoundTripIsExact) {
  for (const DynNetwork& net : {test::random_net(4, 3), gen_mass_spring(3, 0.5)}) {
    const DynNetwork back = system_from_json(system_to_json(net));
    EXPECT_TRUE(back == net);
    EXPECT_EQ(back.A(), net.A());  // bitwise, not approximately
    EXPECT_EQ(system_to_json(back), system_to_json(net));
  }
}

TEST(SystemIoTest, FileRoundTrip) {
  const DynNetwork net = test::random_net(3, 1);
  const fs::path p = scratch("system.json");
  save_system(net, p.string());
  EXPECT_TRUE(load_system(p.string()) == net);
  fs::remove(p);
  EXPECT_THROW(load_system(p.string()), InputError);
}

TEST(SystemIoTest, ReaderRevalidates) {
  EXPECT_THROW(system_from_json("{"), InputError);
  EXPECT_THROW(system_from_json("[]"), InputError);
  // B couples node 1 to node 2's input.
  const std::string bad = R"({"N": 2,
    "node_dims": [{"nx": 1, "nu": 1, "ny": 1}, {"nx": 1, "nu": 1, "ny": 1}],
    "A": [[0, 0], [0, 0]], "B": [[1, 1], [0, 1]], "C": [[1, 0], [0, 1]], "meta": {}})";
  EXPECT_THROW(system_from_json(bad), InputError);
  const std::string wrong_n = R"({"N": 3,
    "node_dims": [{"nx": 1, "nu": 1, "ny": 1}],
    "A": [[0]], "B": [[1]], "C": [[1]], "meta": {}})";
  EXPECT_THROW(system_from_json(wrong_n), Error);
}

TEST(ConstraintIoTest, RoundTripAndCompile) {
  ConstraintFile c;
  c.num_nodes = 3;
  c.structured.min_sensors = 1;
  c.structured.max_total = 4;
  c.structured.forced_on_actuators = {0};
  c.structured.forced_off_sensors = {2};
  const ConstraintFile back = constraint_from_json(constraint_to_json(c));
  EXPECT_EQ(back.num_nodes, 3);
  EXPECT_EQ(back.structured.min_sensors, 1);
  EXPECT_FALSE(back.structured.min_actuators.has_value());
  EXPECT_EQ(back.structured.max_total, 4);
  EXPECT_EQ(back.structured.forced_on_actuators, std::vector<int>{0});
  EXPECT_EQ(back.structured.forced_off_sensors, std::vector<int>{2});
  EXPECT_EQ(back.compile().fingerprint(), c.compile().fingerprint());
}

TEST(ConstraintIoTest, RawRowsAndUnknownKeys) {
  const ConstraintFile c =
      constraint_from_json(R"({"N": 2, "Phi": [[-1, -1, 0, 0]], "phi": [-1]})");
  const LogisticConstraint lc = c.compile();
  EXPECT_FALSE(lc.membership(Selection::from_strings("00", "11")));
  EXPECT_TRUE(lc.membership(Selection::from_strings("01", "00")));
  EXPECT_THROW(constraint_from_json(R"({"N": 2, "min_sensor": 1})"), InputError);
  EXPECT_THROW(constraint_from_json(R"({"min_sensors": 1})"), InputError);
}

RunResult sample_result() {
  const DynNetwork net = test::random_net(2, 1);
  const Selection s = Selection::all_ones(2);
  const SofResult r = selection_feasible(net, s);
  EXPECT_TRUE(r.feasible());
  RunResult out;
  out.method = "bsa";
  out.status = kRunStabilizing;
  out.selection = s;
  out.H = 4;
  out.max_real_eig = r.certificate->max_real_eig;
  out.eps = 1e-3;
  out.wall_seconds = 0.1 + 0.2;  // not exactly representable in 17 digits
  out.iterations = 3;
  out.lmi_solves = 3;
  out.improved = true;
  out.seeds = {7, 18446744073709551615ull};
  out.certificate = r.certificate;
  out.config_json = R"({"eps": 0.001})";
  out.stats_json = R"({"inconclusive": 0})";
  return out;
}

TEST(ResultIoTest, RoundTripIsExact) {
  const RunResult r = sample_result();
  const RunResult back = result_from_json(result_to_json(r));
  EXPECT_TRUE(same_result(r, back));
  EXPECT_EQ(back.wall_seconds, 0.1 + 0.2);
  EXPECT_EQ(back.certificate->P, r.certificate->P);
  EXPECT_EQ(result_to_json(back), result_to_json(r));
}

TEST(ResultIoTest, NoCertificateAndNullEigenvalue) {
  RunResult r;
  r.method = "heu";
  r.status = kRunInfeasible;
  r.selection = Selection::all_ones(2);
  r.H = 4;
  const RunResult back = result_from_json(result_to_json(r));
  EXPECT_FALSE(back.max_real_eig.has_value());
  EXPECT_FALSE(back.certificate.has_value());
  EXPECT_TRUE(same_result(r, back));
}

TEST(ResultIoTest, WeightMustMatchSelection) {
  RunResult r = sample_result();
  std::string text = result_to_json(r);
  const auto pos = text.find("\"H\": 4");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 6, "\"H\": 3");
  EXPECT_THROW(result_from_json(text), InputError);
}

TEST(CsvTest, RoundTripWithSeventeenDigits) {
  CsvRow a{"misdp", 3, 5, -0.123456789012345678, 1e-3, 1.0 / 3.0, 12, true};
  CsvRow b{"heu", 4, -1, std::nullopt, 1e-2, 2.5, 0, false};
  const std::string line = csv_line(a);
  EXPECT_NE(line.find("0.33333333333333331"), std::string::npos);
  std::stringstream ss;
  ss << csv_header() << "\n" << line << "\n" << csv_line(b) << "\n";
  const std::vector<CsvRow> rows = read_csv(ss);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].method, "misdp");
  EXPECT_EQ(rows[0].max_real_eig, a.max_real_eig);
  EXPECT_EQ(rows[0].wall_seconds, a.wall_seconds);
  EXPECT_TRUE(rows[0].optimal);
  EXPECT_FALSE(rows[1].max_real_eig.has_value());
  EXPECT_EQ(rows[1].H, -1);
  EXPECT_EQ(csv_header(), "method,seed,H,maxReEig,eps,wall_s,iters,optimal_flag");

  std::stringstream bad("method,seed\n");
  EXPECT_THROW(read_csv(bad), InputError);
}

}  // namespace
}  // namespace sensact
