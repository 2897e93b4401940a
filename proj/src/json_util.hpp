#pragma once

#include <string>

#include <Eigen/Dense>
#include <json.hpp>

namespace sensact::io_detail {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& M);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& name);
Eigen::VectorXd vector_from_json(const nlohmann::json& j, const std::string& name);
nlohmann::json parse(const std::string& text, const std::string& what);
const nlohmann::json& field(const nlohmann::json& j, const char* key,
                            const std::string& what);
int int_field(const nlohmann::json& j, const char* key, const std::string& what);

}  // namespace sensact::io_detail
