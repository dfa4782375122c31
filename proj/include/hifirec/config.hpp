// Copyright 2026 The HiFIRec Authors
// SPDX-License-Identifier: Apache-2.0
//
// Training configuration and its flat `key = value` text form.

#pragma once

#include "hifirec/core.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace hifirec {

enum class Activation : std::uint8_t { kIdentity = 0, kRelu = 1, kLeakyRelu = 2, kTanh = 3 };
enum class AggregationMode : std::uint8_t { kMean, kSum, kSymmetric };
enum class NeighborhoodMode : std::uint8_t { kWithout, kPartial, kFull };  // W-NB, P-NB, F-NB
enum class SamplingMode : std::uint8_t { kUniform, kIntensity };          // U-NS, I-NS

inline constexpr double kLeakySlope = 0.2;

template <class T>
T activate(Activation a, T x) {
  switch (a) {
    case Activation::kIdentity: return x;
    case Activation::kRelu: return x > T(0) ? x : T(0);
    case Activation::kLeakyRelu: return x > T(0) ? x : T(kLeakySlope) * x;
    case Activation::kTanh: return std::tanh(x);
  }
  return x;
}

// Derivative expressed through the pre-activation value.
template <class T>
T activate_grad(Activation a, T x) {
  switch (a) {
    case Activation::kIdentity: return T(1);
    case Activation::kRelu: return x > T(0) ? T(1) : T(0);
    case Activation::kLeakyRelu: return x > T(0) ? T(1) : T(kLeakySlope);
    case Activation::kTanh: {
      const T t = std::tanh(x);
      return T(1) - t * t;
    }
  }
  return T(1);
}

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kRelu: return "relu";
    case Activation::kLeakyRelu: return "leaky-relu";
    case Activation::kTanh: return "tanh";
  }
  return "?";
}
inline std::string to_string(AggregationMode m) {
  switch (m) {
    case AggregationMode::kMean: return "mean";
    case AggregationMode::kSum: return "sum";
    case AggregationMode::kSymmetric: return "sym";
  }
  return "?";
}
inline std::string to_string(NeighborhoodMode m) {
  switch (m) {
    case NeighborhoodMode::kWithout: return "W-NB";
    case NeighborhoodMode::kPartial: return "P-NB";
    case NeighborhoodMode::kFull: return "F-NB";
  }
  return "?";
}
inline std::string to_string(SamplingMode m) {
  return m == SamplingMode::kUniform ? "U-NS" : "I-NS";
}

inline Activation parse_activation(const std::string& s) {
  const std::string v = to_lower(s);
  if (v == "identity") return Activation::kIdentity;
  if (v == "relu") return Activation::kRelu;
  if (v == "leaky-relu" || v == "leaky_relu" || v == "leakyrelu") return Activation::kLeakyRelu;
  if (v == "tanh") return Activation::kTanh;
  throw ConfigError("unknown activation '" + s + "'");
}
inline AggregationMode parse_aggregation(const std::string& s) {
  const std::string v = to_lower(s);
  if (v == "mean") return AggregationMode::kMean;
  if (v == "sum") return AggregationMode::kSum;
  if (v == "sym") return AggregationMode::kSymmetric;
  throw ConfigError("unknown aggregation mode '" + s + "'");
}

// Neighborhood structure x negative weighting.
struct VariantSpec {
  NeighborhoodMode neighborhood = NeighborhoodMode::kFull;
  SamplingMode sampling = SamplingMode::kIntensity;

  std::string name() const { return to_string(neighborhood) + "+" + to_string(sampling); }
  friend bool operator==(const VariantSpec&, const VariantSpec&) = default;
};

inline VariantSpec parse_variant(const std::string& text) {
  const std::string v = to_lower(text);
  const auto plus = v.find('+');
  if (plus == std::string::npos || v.find('+', plus + 1) != std::string::npos)
    throw ConfigError("variant must be '<W-NB|P-NB|F-NB>+<U-NS|I-NS>', got '" + text + "'");
  const std::string nb = v.substr(0, plus), ns = v.substr(plus + 1);
  VariantSpec spec;
  if (nb == "w-nb") spec.neighborhood = NeighborhoodMode::kWithout;
  else if (nb == "p-nb") spec.neighborhood = NeighborhoodMode::kPartial;
  else if (nb == "f-nb") spec.neighborhood = NeighborhoodMode::kFull;
  else throw ConfigError("unknown neighborhood mode '" + nb + "'");
  if (ns == "u-ns") spec.sampling = SamplingMode::kUniform;
  else if (ns == "i-ns") spec.sampling = SamplingMode::kIntensity;
  else throw ConfigError("unknown sampling mode '" + ns + "'");
  return spec;
}

// All six ablation cells: W/P/F-NB under U-NS, then under I-NS.
inline std::vector<VariantSpec> all_variants() {
  std::vector<VariantSpec> out;
  for (SamplingMode s : {SamplingMode::kUniform, SamplingMode::kIntensity})
    for (NeighborhoodMode n :
         {NeighborhoodMode::kWithout, NeighborhoodMode::kPartial, NeighborhoodMode::kFull})
      out.push_back({n, s});
  return out;
}

struct TrainConfig {
  std::size_t d = 64;
  std::size_t L = 4;
  std::size_t K = kNumBehaviors;
  double C = 1.0;
  double x = 0.5;
  Behavior k_ref = Behavior::kView;
  // Placeholder multi-task weights for (view, add, purchase); not a tuned value.
  std::array<double, kNumBehaviors> lambda = {1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0};
  double mu = 1e-4;
  double lr = 1e-3;
  std::size_t epochs = 200;
  // Early stopping on validation HR@10; 0 disables it.
  std::size_t patience = 10;
  std::size_t eval_every = 1;
  std::uint64_t seed = 2024;
  Activation activation = Activation::kLeakyRelu;
  AggregationMode acg = AggregationMode::kMean;
  VariantSpec variant;
  std::size_t chunk_size = 16;
  double clip_norm = 5.0;
  double c_pos = 1.0;
  // U-NS negative weight.
  double c_fixed = 0.01;
  bool edge_self_loop = false;
  bool per_layer_wbeh = false;
  bool wint_through_gradient = false;
  bool ref_total_denominator = false;
  bool exclude_valid = false;

  // W-NB drops propagation entirely.
  std::size_t effective_layers() const {
    return variant.neighborhood == NeighborhoodMode::kWithout ? 0 : L;
  }

  void validate() const {
    if (d == 0) throw ConfigError("d must be positive");
    if (K != kNumBehaviors) throw ConfigError("K must be 3 (view, add, purchase)");
    if (!(C > 0.0 && C <= 1.0)) throw ConfigError("C must lie in (0, 1]");
    if (!(x > 0.0 && x < 1.0)) throw ConfigError("x must lie in (0, 1)");
    double lambda_sum = 0.0;
    for (double l : lambda) {
      if (!(l >= 0.0)) throw ConfigError("lambda entries must be non-negative");
      lambda_sum += l;
    }
    if (!(lambda_sum > 0.0)) throw ConfigError("lambda must have a positive sum");
    if (!(mu >= 0.0)) throw ConfigError("mu must be non-negative");
    if (!(lr > 0.0)) throw ConfigError("lr must be positive");
    if (!(c_fixed >= 0.0)) throw ConfigError("c_fixed must be non-negative");
    if (!(c_pos >= C)) throw ConfigError("c_pos must be at least C");
    if (chunk_size == 0) throw ConfigError("chunk_size must be positive");
    if (eval_every == 0) throw ConfigError("eval_every must be positive");
    if (!(clip_norm >= 0.0)) throw ConfigError("clip_norm must be non-negative (0 disables)");
  }
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
    throw ConfigError(key + ": not a number: '" + text + "'");
  return v;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
    throw ConfigError(key + ": not a non-negative integer: '" + text + "'");
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  const std::string v = to_lower(text);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": not a boolean: '" + text + "'");
}

}  // namespace detail

// Ordered list of (key, value-as-text) pairs, identical to what
// write_config emits.
inline std::vector<std::pair<std::string, std::string>> config_entries(const TrainConfig& c) {
  using detail::format_double;
  std::string lambda;
  for (std::size_t k = 0; k < kNumBehaviors; ++k)
    lambda += (k ? "," : "") + format_double(c.lambda[k]);
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  return {
      {"d", std::to_string(c.d)},
      {"L", std::to_string(c.L)},
      {"K", std::to_string(c.K)},
      {"C", format_double(c.C)},
      {"x", format_double(c.x)},
      {"k_ref", std::string(behavior_name(c.k_ref))},
      {"lambda", lambda},
      {"mu", format_double(c.mu)},
      {"lr", format_double(c.lr)},
      {"epochs", std::to_string(c.epochs)},
      {"patience", std::to_string(c.patience)},
      {"eval_every", std::to_string(c.eval_every)},
      {"seed", std::to_string(c.seed)},
      {"activation", to_string(c.activation)},
      {"acg", to_string(c.acg)},
      {"variant", c.variant.name()},
      {"chunk_size", std::to_string(c.chunk_size)},
      {"clip_norm", format_double(c.clip_norm)},
      {"c_pos", format_double(c.c_pos)},
      {"c_fixed", format_double(c.c_fixed)},
      {"edge_self_loop", b(c.edge_self_loop)},
      {"per_layer_wbeh", b(c.per_layer_wbeh)},
      {"wint_through_gradient", b(c.wint_through_gradient)},
      {"ref_total_denominator", b(c.ref_total_denominator)},
      {"exclude_valid", b(c.exclude_valid)},
  };
}

inline void set_config_value(TrainConfig& c, const std::string& key, const std::string& value) {
  using namespace detail;
  if (key == "d") c.d = parse_uint(key, value);
  else if (key == "L") c.L = parse_uint(key, value);
  else if (key == "K") c.K = parse_uint(key, value);
  else if (key == "C") c.C = parse_double(key, value);
  else if (key == "x") c.x = parse_double(key, value);
  else if (key == "k_ref") {
    const auto k = parse_behavior(value);
    if (!k) throw ConfigError("k_ref: unknown behavior '" + value + "'");
    c.k_ref = *k;
  } else if (key == "lambda") {
    const auto parts = split_fields(value, ',');
    if (parts.size() != kNumBehaviors) throw ConfigError("lambda needs three comma-separated values");
    for (std::size_t k = 0; k < kNumBehaviors; ++k) c.lambda[k] = parse_double(key, trim(parts[k]));
  } else if (key == "mu") c.mu = parse_double(key, value);
  else if (key == "lr") c.lr = parse_double(key, value);
  else if (key == "epochs") c.epochs = parse_uint(key, value);
  else if (key == "patience") c.patience = parse_uint(key, value);
  else if (key == "eval_every") c.eval_every = parse_uint(key, value);
  else if (key == "seed") c.seed = parse_uint(key, value);
  else if (key == "activation") c.activation = parse_activation(value);
  else if (key == "acg") c.acg = parse_aggregation(value);
  else if (key == "variant") c.variant = parse_variant(value);
  else if (key == "chunk_size") c.chunk_size = parse_uint(key, value);
  else if (key == "clip_norm") c.clip_norm = parse_double(key, value);
  else if (key == "c_pos") c.c_pos = parse_double(key, value);
  else if (key == "c_fixed") c.c_fixed = parse_double(key, value);
  else if (key == "edge_self_loop") c.edge_self_loop = parse_bool(key, value);
  else if (key == "per_layer_wbeh") c.per_layer_wbeh = parse_bool(key, value);
  else if (key == "wint_through_gradient") c.wint_through_gradient = parse_bool(key, value);
  else if (key == "ref_total_denominator") c.ref_total_denominator = parse_bool(key, value);
  else if (key == "exclude_valid") c.exclude_valid = parse_bool(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

inline void write_config(std::ostream& out, const TrainConfig& c) {
  for (const auto& [k, v] : config_entries(c)) out << k << " = " << v << '\n';
}

inline std::string config_to_string(const TrainConfig& c) {
  std::ostringstream out;
  write_config(out, c);
  return out.str();
}

// Applies every `key = value` line of `in` on top of `base`. Blank lines and
// lines starting with '#' are ignored.
inline TrainConfig read_config(std::istream& in, TrainConfig base = {}) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", line_no);
    set_config_value(base, detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)));
  }
  return base;
}

inline TrainConfig read_config_file(const std::string& path, TrainConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_config(in, base);
}

}  // namespace hifirec
