// Copyright 2026 The HiFIRec Authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared vocabulary: behavior channels, dense matrix aliases, error types.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hifirec {

enum class Behavior : std::uint8_t { kView = 0, kAdd = 1, kPurchase = 2 };

inline constexpr std::size_t kNumBehaviors = 3;
inline constexpr std::array<Behavior, kNumBehaviors> kAllBehaviors = {
    Behavior::kView, Behavior::kAdd, Behavior::kPurchase};

constexpr std::size_t index_of(Behavior b) { return static_cast<std::size_t>(b); }

constexpr std::string_view behavior_name(Behavior b) {
  switch (b) {
    case Behavior::kView: return "view";
    case Behavior::kAdd: return "add";
    case Behavior::kPurchase: return "purchase";
  }
  return "?";
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::optional<Behavior> parse_behavior(std::string_view label) {
  const std::string lower = to_lower(label);
  for (Behavior b : kAllBehaviors)
    if (lower == behavior_name(b)) return b;
  return std::nullopt;
}

// Row-major so that a user's or item's embedding is a contiguous row.
template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <class T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

using UserId = std::uint32_t;
using ItemId = std::uint32_t;

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class SchemaError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class EmptyDatasetError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

class LookupError : public std::out_of_range {
  using std::out_of_range::out_of_range;
};

// Violated preconditions between modules (shape mismatches, bad layer index).
class ContractError : public std::logic_error {
  using std::logic_error::logic_error;
};

class NonFiniteError : public std::runtime_error {
 public:
  explicit NonFiniteError(const std::string& tensor)
      : std::runtime_error("non-finite values in " + tensor), tensor_(tensor) {}
  const std::string& tensor() const { return tensor_; }

 private:
  std::string tensor_;
};

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, delim)) fields.push_back(field);
  if (!line.empty() && line.back() == delim) fields.emplace_back();
  return fields;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

}  // namespace hifirec
