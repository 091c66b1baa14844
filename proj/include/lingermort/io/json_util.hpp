#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "lingermort/core/errors.hpp"

namespace lingermort::io {

using json = nlohmann::json;

/// Lossless textual encoding of a double (C99 hexadecimal float).
inline std::string hex_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", value);
  return buf;
}

inline double parse_hex_double(const json& j) {
  if (j.is_number()) return j.get<double>();
  require(j.is_string(), ErrorCode::Schema, "expected a hex-float string");
  const std::string s = j.get<std::string>();
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  require(end != s.c_str() && *end == '\0', ErrorCode::Schema, "bad float '" + s + "'");
  return v;
}

inline json hex_vector(const Eigen::VectorXd& v) {
  json out = json::array();
  for (long i = 0; i < v.size(); ++i) out.push_back(hex_double(v(i)));
  return out;
}

inline json hex_vector(const std::vector<double>& v) {
  json out = json::array();
  for (double d : v) out.push_back(hex_double(d));
  return out;
}

inline Eigen::VectorXd parse_hex_vector(const json& j) {
  require(j.is_array(), ErrorCode::Schema, "expected an array");
  Eigen::VectorXd v(static_cast<long>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<long>(i)) = parse_hex_double(j[i]);
  return v;
}

/// Row-major nested arrays.
inline json hex_matrix(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (long r = 0; r < m.rows(); ++r) out.push_back(hex_vector(Eigen::VectorXd(m.row(r).transpose())));
  return out;
}

inline Eigen::MatrixXd parse_hex_matrix(const json& j) {
  require(j.is_array(), ErrorCode::Schema, "expected a nested array");
  if (j.empty()) return Eigen::MatrixXd();
  const std::size_t cols = j[0].size();
  Eigen::MatrixXd m(static_cast<long>(j.size()), static_cast<long>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    require(j[r].size() == cols, ErrorCode::Schema, "ragged matrix");
    m.row(static_cast<long>(r)) = parse_hex_vector(j[r]).transpose();
  }
  return m;
}

inline const json& field(const json& j, const char* name) {
  require(j.is_object() && j.contains(name), ErrorCode::Schema,
          std::string("missing field '") + name + "'");
  return j.at(name);
}

}  // namespace lingermort::io
