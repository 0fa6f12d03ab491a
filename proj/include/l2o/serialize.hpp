#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstring>
#include <string>

#include <json.hpp>

#include "l2o/errors.hpp"

namespace l2o {

using json = nlohmann::json;

// Bit-exact double transport: the IEEE-754 pattern as 16 lowercase hex
// digits. Used wherever a checkpoint must reload to the identical value.
inline std::string double_to_hex(double value) {
  std::uint64_t bits;
  std::memcpy(&bits, &value, sizeof(bits));
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[bits & 0xf];
    bits >>= 4;
  }
  return out;
}

inline double hex_to_double(const std::string& hex) {
  if (hex.size() != 16) throw ConfigError("hex double: expected 16 hex digits");
  std::uint64_t bits = 0;
  for (char c : hex) {
    bits <<= 4;
    if (c >= '0' && c <= '9') bits |= static_cast<std::uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f') bits |= static_cast<std::uint64_t>(c - 'a' + 10);
    else if (c >= 'A' && c <= 'F') bits |= static_cast<std::uint64_t>(c - 'A' + 10);
    else throw ConfigError("hex double: invalid digit");
  }
  double value;
  std::memcpy(&value, &bits, sizeof(value));
  return value;
}

inline json vector_to_hex_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(double_to_hex(v(i)));
  return out;
}

inline Eigen::VectorXd vector_from_hex_json(const json& j) {
  if (!j.is_array()) throw ConfigError("hex vector: expected an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = hex_to_double(j[i].get<std::string>());
  return v;
}

inline json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline Eigen::VectorXd vector_from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("vector: expected an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

// CSV cell with 17 significant digits (round-trips any double).
inline std::string csv_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

}  // namespace l2o
