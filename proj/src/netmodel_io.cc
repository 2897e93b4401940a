#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "json_util.hpp"
#include "sensact/error.hpp"
#include "sensact/io.hpp"

namespace sensact {

using nlohmann::json;

namespace io_detail {

json matrix_to_json(const Eigen::MatrixXd& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& name) {
  if (!j.is_array()) throw InputError(name + " must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return Eigen::MatrixXd(0, 0);
  if (!j[0].is_array()) throw InputError(name + " must be an array of rows");
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j[i];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw InputError(fmt::format("{} row {} is ragged", name, i));
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!row[c].is_number()) {
        throw InputError(fmt::format("{}({}, {}) is not a number", name, i, c));
      }
      const double v = row[c].get<double>();
      if (!std::isfinite(v)) {
        throw InputError(fmt::format("{}({}, {}) is not finite", name, i, c));
      }
      M(i, c) = v;
    }
  }
  return M;
}

Eigen::VectorXd vector_from_json(const json& j, const std::string& name) {
  if (!j.is_array()) throw InputError(name + " must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw InputError(fmt::format("{}[{}] is not a number", name, i));
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

json parse(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(what + ": " + e.what());
  }
}

const json& field(const json& j, const char* key, const std::string& what) {
  if (!j.is_object() || !j.contains(key)) {
    throw InputError(fmt::format("{}: missing field '{}'", what, key));
  }
  return j.at(key);
}

int int_field(const json& j, const char* key, const std::string& what) {
  const json& v = field(j, key, what);
  if (!v.is_number_integer()) {
    throw InputError(fmt::format("{}: field '{}' must be an integer", what, key));
  }
  return v.get<int>();
}

}  // namespace io_detail

using namespace io_detail;

std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot open " + path + " for writing");
  os << text;
  if (!os) throw InputError("failed writing " + path);
}

std::string system_to_json(const DynNetwork& net) {
  json j;
  j["N"] = net.num_nodes();
  json dims = json::array();
  for (const NodeDims& d : net.dims()) {
    dims.push_back({{"nx", d.nx}, {"nu", d.nu}, {"ny", d.ny}});
  }
  j["node_dims"] = std::move(dims);
  j["A"] = matrix_to_json(net.A());
  j["B"] = matrix_to_json(net.B());
  j["C"] = matrix_to_json(net.C());
  j["meta"] = parse(net.meta_json(), "system meta");
  return j.dump(1) + "\n";
}

DynNetwork system_from_json(const std::string& text) {
  const std::string what = "system file";
  const json j = parse(text, what);
  if (!j.is_object()) throw InputError(what + ": top level must be an object");
  const int N = int_field(j, "N", what);
  const json& dj = field(j, "node_dims", what);
  if (!dj.is_array()) throw InputError(what + ": node_dims must be an array");
  if (static_cast<int>(dj.size()) != N) {
    throw DimensionError("node_dims length", N, static_cast<long>(dj.size()));
  }
  std::vector<NodeDims> dims;
  for (const json& d : dj) {
    dims.push_back({int_field(d, "nx", what), int_field(d, "nu", what),
                    int_field(d, "ny", what)});
  }
  std::string meta = "{}";
  if (j.contains("meta")) {
    if (!j["meta"].is_object()) throw InputError(what + ": meta must be an object");
    meta = j["meta"].dump();
  }
  return DynNetwork(std::move(dims), matrix_from_json(field(j, "A", what), "A"),
                    matrix_from_json(field(j, "B", what), "B"),
                    matrix_from_json(field(j, "C", what), "C"), std::move(meta));
}

void save_system(const DynNetwork& net, const std::string& path) {
  write_text_file(path, system_to_json(net));
}

DynNetwork load_system(const std::string& path) {
  return system_from_json(read_text_file(path));
}

namespace {

std::optional<int> opt_int(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_number_integer()) {
    throw InputError(fmt::format("constraint file: '{}' must be an integer", key));
  }
  return j[key].get<int>();
}

std::vector<int> index_list(const json& j, const char* group, const char* key) {
  if (!j.contains(group)) return {};
  const json& g = j[group];
  if (!g.is_object()) {
    throw InputError(fmt::format("constraint file: '{}' must be an object", group));
  }
  if (!g.contains(key)) return {};
  const json& list = g[key];
  if (!list.is_array()) {
    throw InputError(fmt::format("constraint file: '{}.{}' must be an array", group, key));
  }
  std::vector<int> out;
  for (const json& v : list) {
    if (!v.is_number_integer()) {
      throw InputError(fmt::format("constraint file: '{}.{}' holds a non-integer", group, key));
    }
    out.push_back(v.get<int>());
  }
  return out;
}

}  // namespace

std::string constraint_to_json(const ConstraintFile& c) {
  const StructuredConstraint& s = c.structured;
  json j;
  j["N"] = c.num_nodes;
  auto put = [&](const char* key, const std::optional<int>& v) {
    if (v) j[key] = *v;
  };
  put("min_sensors", s.min_sensors);
  put("max_sensors", s.max_sensors);
  put("min_actuators", s.min_actuators);
  put("max_actuators", s.max_actuators);
  put("min_total", s.min_total);
  put("max_total", s.max_total);
  if (!s.forced_on_actuators.empty() || !s.forced_on_sensors.empty()) {
    j["forced_on"] = {{"actuators", s.forced_on_actuators},
                      {"sensors", s.forced_on_sensors}};
  }
  if (!s.forced_off_actuators.empty() || !s.forced_off_sensors.empty()) {
    j["forced_off"] = {{"actuators", s.forced_off_actuators},
                       {"sensors", s.forced_off_sensors}};
  }
  if (s.extra_Phi.rows() > 0) {
    j["Phi"] = matrix_to_json(s.extra_Phi);
    j["phi"] = std::vector<double>(s.extra_phi.data(),
                                   s.extra_phi.data() + s.extra_phi.size());
  }
  return j.dump(1) + "\n";
}

ConstraintFile constraint_from_json(const std::string& text) {
  const std::string what = "constraint file";
  const json j = parse(text, what);
  if (!j.is_object()) throw InputError(what + ": top level must be an object");
  static const char* kKnown[] = {"N",         "min_sensors", "max_sensors", "min_actuators",
                                 "max_actuators", "min_total", "max_total", "forced_on",
                                 "forced_off", "Phi",        "phi"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(std::begin(kKnown), std::end(kKnown), key) == std::end(kKnown)) {
      throw InputError(what + ": unknown field '" + key + "'");
    }
  }
  ConstraintFile c;
  c.num_nodes = int_field(j, "N", what);
  if (c.num_nodes < 1) throw InputError(what + ": N must be positive");
  StructuredConstraint& s = c.structured;
  s.min_sensors = opt_int(j, "min_sensors");
  s.max_sensors = opt_int(j, "max_sensors");
  s.min_actuators = opt_int(j, "min_actuators");
  s.max_actuators = opt_int(j, "max_actuators");
  s.min_total = opt_int(j, "min_total");
  s.max_total = opt_int(j, "max_total");
  s.forced_on_actuators = index_list(j, "forced_on", "actuators");
  s.forced_on_sensors = index_list(j, "forced_on", "sensors");
  s.forced_off_actuators = index_list(j, "forced_off", "actuators");
  s.forced_off_sensors = index_list(j, "forced_off", "sensors");
  if (j.contains("Phi") != j.contains("phi")) {
    throw InputError(what + ": Phi and phi must be given together");
  }
  if (j.contains("Phi")) {
    s.extra_Phi = matrix_from_json(j["Phi"], "Phi");
    s.extra_phi = vector_from_json(j["phi"], "phi");
    if (s.extra_Phi.rows() > 0 && s.extra_Phi.cols() != 2 * c.num_nodes) {
      throw DimensionError("Phi columns", 2 * c.num_nodes, s.extra_Phi.cols());
    }
    if (s.extra_phi.size() != s.extra_Phi.rows()) {
      throw DimensionError("phi length", s.extra_Phi.rows(), s.extra_phi.size());
    }
  }
  // Compiling validates ranges and indices.
  (void)c.compile();
  return c;
}

void save_constraint(const ConstraintFile& c, const std::string& path) {
  write_text_file(path, constraint_to_json(c));
}

ConstraintFile load_constraint(const std::string& path) {
  return constraint_from_json(read_text_file(path));
}

}  // namespace sensact
