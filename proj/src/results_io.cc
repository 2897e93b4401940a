#include <cmath>
#include <istream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "json_util.hpp"
#include "sensact/error.hpp"
#include "sensact/io.hpp"

namespace sensact {

using nlohmann::json;
using namespace io_detail;

namespace {

json certificate_to_json(const SofCertificate& c) {
  return {{"P", matrix_to_json(c.P)},
          {"M", matrix_to_json(c.M)},
          {"N", matrix_to_json(c.N)},
          {"F", matrix_to_json(c.F)},
          {"eps", c.eps},
          {"delta", c.delta},
          {"input_channels", c.input_channels},
          {"output_channels", c.output_channels},
          {"margin", c.margin},
          {"max_real_eig", c.max_real_eig}};
}

double number_field(const json& j, const char* key, const std::string& what) {
  const json& v = field(j, key, what);
  if (!v.is_number()) {
    throw InputError(fmt::format("{}: field '{}' must be a number", what, key));
  }
  return v.get<double>();
}

std::vector<int> int_list(const json& j, const char* key, const std::string& what) {
  const json& v = field(j, key, what);
  if (!v.is_array()) throw InputError(fmt::format("{}: '{}' must be an array", what, key));
  std::vector<int> out;
  for (const json& e : v) {
    if (!e.is_number_integer()) {
      throw InputError(fmt::format("{}: '{}' holds a non-integer", what, key));
    }
    out.push_back(e.get<int>());
  }
  return out;
}

SofCertificate certificate_from_json(const json& j) {
  const std::string what = "certificate";
  SofCertificate c;
  c.P = matrix_from_json(field(j, "P", what), "P");
  c.M = matrix_from_json(field(j, "M", what), "M");
  c.N = matrix_from_json(field(j, "N", what), "N");
  c.F = matrix_from_json(field(j, "F", what), "F");
  c.eps = number_field(j, "eps", what);
  c.delta = number_field(j, "delta", what);
  c.input_channels = int_list(j, "input_channels", what);
  c.output_channels = int_list(j, "output_channels", what);
  c.margin = number_field(j, "margin", what);
  c.max_real_eig = number_field(j, "max_real_eig", what);
  c.m = static_cast<int>(c.M.rows());
  c.r = static_cast<int>(c.N.cols());
  if (c.P.rows() != c.P.cols() || c.M.rows() != c.M.cols() || c.N.rows() != c.m ||
      c.F.rows() != c.m || c.F.cols() != c.r) {
    throw InputError("certificate: inconsistent block sizes");
  }
  return c;
}

json object_or_empty(const std::string& text, const std::string& what) {
  json j = parse(text, what);
  if (!j.is_object()) throw InputError(what + " must be a JSON object");
  return j;
}

bool same_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

bool same_certificate(const SofCertificate& a, const SofCertificate& b) {
  return same_matrix(a.P, b.P) && same_matrix(a.M, b.M) && same_matrix(a.N, b.N) &&
         same_matrix(a.F, b.F) && a.eps == b.eps && a.delta == b.delta &&
         a.m == b.m && a.r == b.r && a.input_channels == b.input_channels &&
         a.output_channels == b.output_channels && a.margin == b.margin &&
         a.max_real_eig == b.max_real_eig;
}

}  // namespace

std::string result_to_json(const RunResult& r) {
  json j;
  j["method"] = r.method;
  j["status"] = r.status;
  j["pi"] = r.selection.pi_string();
  j["gamma"] = r.selection.gamma_string();
  j["H"] = r.H;
  j["max_real_eig"] = r.max_real_eig ? json(*r.max_real_eig) : json(nullptr);
  j["eps"] = r.eps;
  j["wall_seconds"] = r.wall_seconds;
  j["iterations"] = r.iterations;
  j["lmi_solves"] = r.lmi_solves;
  j["optimal"] = r.optimal;
  j["improved"] = r.improved;
  j["seeds"] = r.seeds;
  j["config"] = object_or_empty(r.config_json, "result config");
  j["stats"] = object_or_empty(r.stats_json, "result stats");
  j["certificate"] = r.certificate ? certificate_to_json(*r.certificate) : json(nullptr);
  return j.dump(1) + "\n";
}

RunResult result_from_json(const std::string& text) {
  const std::string what = "result file";
  const json j = parse(text, what);
  if (!j.is_object()) throw InputError(what + ": top level must be an object");
  RunResult r;
  auto str = [&](const char* key) {
    const json& v = field(j, key, what);
    if (!v.is_string()) throw InputError(fmt::format("{}: '{}' must be a string", what, key));
    return v.get<std::string>();
  };
  auto flag = [&](const char* key) {
    const json& v = field(j, key, what);
    if (!v.is_boolean()) throw InputError(fmt::format("{}: '{}' must be a boolean", what, key));
    return v.get<bool>();
  };
  r.method = str("method");
  r.status = str("status");
  r.selection = Selection::from_strings(str("pi"), str("gamma"));
  r.H = int_field(j, "H", what);
  if (r.H != count_active(r.selection)) {
    throw InputError(fmt::format("{}: H = {} but the selection has {} active bits", what,
                                 r.H, count_active(r.selection)));
  }
  const json& eig = field(j, "max_real_eig", what);
  if (!eig.is_null()) r.max_real_eig = number_field(j, "max_real_eig", what);
  r.eps = number_field(j, "eps", what);
  r.wall_seconds = number_field(j, "wall_seconds", what);
  r.iterations = int_field(j, "iterations", what);
  r.lmi_solves = int_field(j, "lmi_solves", what);
  r.optimal = flag("optimal");
  r.improved = flag("improved");
  const json& seeds = field(j, "seeds", what);
  if (!seeds.is_array()) throw InputError(what + ": 'seeds' must be an array");
  for (const json& s : seeds) {
    if (!s.is_number_unsigned()) throw InputError(what + ": seeds must be non-negative");
    r.seeds.push_back(s.get<std::uint64_t>());
  }
  if (j.contains("config")) r.config_json = j["config"].dump();
  if (j.contains("stats")) r.stats_json = j["stats"].dump();
  if (j.contains("certificate") && !j["certificate"].is_null()) {
    r.certificate = certificate_from_json(j["certificate"]);
  }
  return r;
}

void save_result(const RunResult& r, const std::string& path) {
  write_text_file(path, result_to_json(r));
}

RunResult load_result(const std::string& path) {
  return result_from_json(read_text_file(path));
}

bool same_result(const RunResult& a, const RunResult& b) {
  if (a.certificate.has_value() != b.certificate.has_value()) return false;
  if (a.certificate && !same_certificate(*a.certificate, *b.certificate)) return false;
  return a.method == b.method && a.status == b.status && a.selection == b.selection &&
         a.H == b.H && a.max_real_eig == b.max_real_eig && a.eps == b.eps &&
         a.wall_seconds == b.wall_seconds && a.iterations == b.iterations &&
         a.lmi_solves == b.lmi_solves && a.optimal == b.optimal &&
         a.improved == b.improved && a.seeds == b.seeds &&
         json::parse(a.config_json) == json::parse(b.config_json) &&
         json::parse(a.stats_json) == json::parse(b.stats_json);
}

std::string csv_header() {
  return "method,seed,H,maxReEig,eps,wall_s,iters,optimal_flag";
}

std::string csv_line(const CsvRow& row) {
  const std::string eig =
      row.max_real_eig ? fmt::format("{:.17g}", *row.max_real_eig) : std::string("nan");
  return fmt::format("{},{},{},{},{:.17g},{:.17g},{},{}", row.method, row.seed, row.H,
                     eig, row.eps, row.wall_seconds, row.iterations,
                     row.optimal ? 1 : 0);
}

std::vector<CsvRow> read_csv(std::istream& is) {
  std::vector<CsvRow> rows;
  std::string line;
  if (!std::getline(is, line) || line != csv_header()) {
    throw InputError("csv: missing or unexpected header");
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) throw InputError("csv: expected 8 columns in '" + line + "'");
    try {
      CsvRow r;
      r.method = cells[0];
      r.seed = std::stoull(cells[1]);
      r.H = std::stoi(cells[2]);
      if (cells[3] != "nan") r.max_real_eig = std::stod(cells[3]);
      r.eps = std::stod(cells[4]);
      r.wall_seconds = std::stod(cells[5]);
      r.iterations = std::stoi(cells[6]);
      r.optimal = cells[7] == "1";
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw InputError("csv: malformed number in '" + line + "'");
    }
  }
  return rows;
}

}  // namespace sensact
