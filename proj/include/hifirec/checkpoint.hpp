// Copyright 2026 The HiFIRec Authors
// SPDX-License-Identifier: Apache-2.0
//
// Versioned binary checkpoint container.
//
// Layout (all integers little-endian):
//   magic "HFRC" | u32 version | u32 M | u32 N | u32 K | u32 d | u32 L |
//   u32 activation id | u32 array count |
//   per array: u32 name length, name bytes, u32 rank, u64 dims[rank],
//              float32 data (IEEE-754, little-endian), row-major.
//
// Model checkpoints hold exactly P, Q, W_view, W_add, W_purchase, W_beh,
// theta, W_fus, W_int, W_pre. Adam moments go to a sidecar container of the
// same format holding m.<name>, v.<name> and a one-element `step` array.

#pragma once

#include "hifirec/model.hpp"
#include "hifirec/optim.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <string>
#include <vector>

namespace hifirec {

inline constexpr char kCheckpointMagic[4] = {'H', 'F', 'R', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointHeader {
  std::uint32_t version = kCheckpointVersion;
  std::uint32_t num_users = 0;
  std::uint32_t num_items = 0;
  std::uint32_t num_behaviors = kNumBehaviors;
  std::uint32_t dim = 0;
  std::uint32_t layers = 0;
  std::uint32_t activation = 0;

  friend bool operator==(const CheckpointHeader&, const CheckpointHeader&) = default;
};

struct NamedArray {
  std::string name;
  std::vector<std::uint64_t> dims;
  std::vector<float> data;
};

class CheckpointError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}
inline void put_u64(std::ostream& out, std::uint64_t v) {
  put_u32(out, static_cast<std::uint32_t>(v));
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
}
inline std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw CheckpointError("truncated checkpoint");
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
         std::uint32_t(b[3]) << 24;
}
inline std::uint64_t get_u64(std::istream& in) {
  const std::uint64_t lo = get_u32(in);
  return lo | std::uint64_t(get_u32(in)) << 32;
}

}  // namespace detail

inline void write_container(std::ostream& out, const CheckpointHeader& h, const std::vector<NamedArray>& arrays) {
  out.write(kCheckpointMagic, 4);
  for (std::uint32_t v : {h.version, h.num_users, h.num_items, h.num_behaviors, h.dim, h.layers, h.activation})
    detail::put_u32(out, v);
  detail::put_u32(out, static_cast<std::uint32_t>(arrays.size()));
  for (const NamedArray& a : arrays) {
    detail::put_u32(out, static_cast<std::uint32_t>(a.name.size()));
    out.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
    detail::put_u32(out, static_cast<std::uint32_t>(a.dims.size()));
    for (auto dim : a.dims) detail::put_u64(out, dim);
    for (float f : a.data) detail::put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  if (!out) throw CheckpointError("write failed");
}

inline std::pair<CheckpointHeader, std::vector<NamedArray>> read_container(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw CheckpointError("not a checkpoint (bad magic)");
  CheckpointHeader h;
  h.version = detail::get_u32(in);
  if (h.version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(h.version));
  h.num_users = detail::get_u32(in);
  h.num_items = detail::get_u32(in);
  h.num_behaviors = detail::get_u32(in);
  h.dim = detail::get_u32(in);
  h.layers = detail::get_u32(in);
  h.activation = detail::get_u32(in);
  const std::uint32_t count = detail::get_u32(in);
  std::vector<NamedArray> arrays(count);
  for (NamedArray& a : arrays) {
    const std::uint32_t len = detail::get_u32(in);
    if (len > 4096) throw CheckpointError("implausible array name length");
    a.name.resize(len);
    if (!in.read(a.name.data(), len)) throw CheckpointError("truncated checkpoint");
    const std::uint32_t rank = detail::get_u32(in);
    if (rank > 8) throw CheckpointError("implausible array rank");
    std::uint64_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      a.dims.push_back(detail::get_u64(in));
      n *= a.dims.back();
    }
    if (n > (std::uint64_t{1} << 34)) throw CheckpointError("implausible array size");
    a.data.resize(n);
    for (float& f : a.data) f = std::bit_cast<float>(detail::get_u32(in));
  }
  return {h, std::move(arrays)};
}

namespace detail {

inline std::vector<std::uint64_t> tensor_dims(std::string_view name, const ParameterSet<float>& p) {
  const std::uint64_t M = p.num_users(), N = p.num_items(), d = p.dim(), K = kNumBehaviors;
  if (name == "P") return {M, d};
  if (name == "Q") return {N, d};
  if (name == "W_view" || name == "W_add" || name == "W_purchase" || name == "W_int") return {d};
  if (name == "W_beh") {
    if (p.per_layer_beh()) return {static_cast<std::uint64_t>(p.beh.rows()) / (K * d), K, d, d};
    return {K, d, d};
  }
  if (name == "theta") return {static_cast<std::uint64_t>(p.theta.size())};
  if (name == "W_fus") return {d, d};
  if (name == "W_pre") return {K, d};
  throw ContractError("unknown tensor " + std::string(name));
}

inline std::vector<NamedArray> to_arrays(const ParameterSet<float>& p, const std::string& prefix = "") {
  std::vector<NamedArray> arrays;
  p.for_each([&](std::string_view name, const float* data, std::size_t n) {
    arrays.push_back({prefix + std::string(name), tensor_dims(name, p), std::vector<float>(data, data + n)});
  });
  return arrays;
}

// Shapes `p` from the header and the W_beh dims, then fills it from arrays
// named prefix + tensor name.
inline void from_arrays(ParameterSet<float>& p, const CheckpointHeader& h, const std::vector<NamedArray>& arrays,
                        const std::string& prefix) {
  const NamedArray* beh = nullptr;
  for (const auto& a : arrays)
    if (a.name == prefix + "W_beh") beh = &a;
  if (!beh) throw CheckpointError("missing array " + prefix + "W_beh");
  const bool per_layer = beh->dims.size() == 4;
  const Eigen::Index d = h.dim, K = h.num_behaviors;
  p.P.resize(h.num_users, d);
  p.Q.resize(h.num_items, d);
  p.edge.resize(K, d);
  p.beh.resize(static_cast<Eigen::Index>((per_layer ? beh->dims[0] : 1) * K * d), d);
  p.theta.resize(h.layers + 1);
  p.fus.resize(d, d);
  p.intensity.resize(d);
  p.pre.resize(K, d);

  std::set<std::string> seen;
  p.for_each([&](std::string_view name, float* data, std::size_t n) {
    const std::string full = prefix + std::string(name);
    const NamedArray* found = nullptr;
    for (const auto& a : arrays)
      if (a.name == full) found = &a;
    if (!found) throw CheckpointError("missing array " + full);
    if (found->dims != tensor_dims(name, p) || found->data.size() != n)
      throw CheckpointError("shape mismatch for " + full);
    std::copy(found->data.begin(), found->data.end(), data);
    seen.insert(full);
  });
  for (const auto& a : arrays)
    if (a.name.rfind(prefix, 0) == 0 && !seen.count(a.name) && a.name != "step")
      throw CheckpointError("unexpected array " + a.name);
}

}  // namespace detail

inline CheckpointHeader header_for(const ParameterSet<float>& p, Activation activation) {
  CheckpointHeader h;
  h.num_users = static_cast<std::uint32_t>(p.num_users());
  h.num_items = static_cast<std::uint32_t>(p.num_items());
  h.dim = static_cast<std::uint32_t>(p.dim());
  h.layers = static_cast<std::uint32_t>(p.layers());
  h.activation = static_cast<std::uint32_t>(activation);
  return h;
}

inline void save_checkpoint(std::ostream& out, const ParameterSet<float>& p, Activation activation) {
  write_container(out, header_for(p, activation), detail::to_arrays(p));
}

inline void save_checkpoint(const std::string& path, const ParameterSet<float>& p, Activation activation) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open " + path);
  save_checkpoint(out, p, activation);
}

struct Checkpoint {
  CheckpointHeader header;
  ParameterSet<float> params;
  Activation activation() const { return static_cast<Activation>(header.activation); }
};

inline Checkpoint load_checkpoint(std::istream& in) {
  auto [h, arrays] = read_container(in);
  if (h.num_behaviors != kNumBehaviors) throw CheckpointError("checkpoint K must be 3");
  if (h.activation > static_cast<std::uint32_t>(Activation::kTanh)) throw CheckpointError("bad activation id");
  if (arrays.size() != 10) throw CheckpointError("model checkpoint must hold exactly 10 arrays");
  Checkpoint c{h, {}};
  detail::from_arrays(c.params, h, arrays, "");
  return c;
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path);
  return load_checkpoint(in);
}

inline void save_optimizer_state(const std::string& path, const AdamState<float>& s, const ParameterSet<float>& p,
                                 Activation activation) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open " + path);
  auto arrays = detail::to_arrays(s.m, "m.");
  auto v = detail::to_arrays(s.v, "v.");
  arrays.insert(arrays.end(), v.begin(), v.end());
  arrays.push_back({"step", {1}, {static_cast<float>(s.step)}});
  write_container(out, header_for(p, activation), arrays);
}

inline AdamState<float> load_optimizer_state(const std::string& path, double lr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path);
  auto [h, arrays] = read_container(in);
  AdamState<float> s;
  s.lr = lr;
  std::vector<NamedArray> m, v;
  for (auto& a : arrays) {
    if (a.name == "step") s.step = static_cast<std::uint64_t>(a.data.at(0));
    else if (a.name.rfind("m.", 0) == 0) m.push_back(a);
    else if (a.name.rfind("v.", 0) == 0) v.push_back(a);
  }
  detail::from_arrays(s.m, h, m, "m.");
  detail::from_arrays(s.v, h, v, "v.");
  return s;
}

}  // namespace hifirec
