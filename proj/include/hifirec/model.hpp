// Copyright 2026 The HiFIRec Authors
// SPDX-License-Identifier: Apache-2.0
//
// Learnable parameters and the forward pass: layer-wise propagation over
// the behavior graph, softmax cross-layer fusion, behavioral attention
// refinement and per-behavior linear prediction.

#pragma once

#include "hifirec/config.hpp"
#include "hifirec/core.hpp"
#include "hifirec/graph.hpp"

#include <limits>
#include <random>
#include <string_view>
#include <vector>

namespace hifirec {

// Everything the forward pass needs besides parameters and graph.
struct ModelOptions {
  Activation activation = Activation::kLeakyRelu;
  AggregationMode acg = AggregationMode::kMean;
  NeighborhoodMode neighborhood = NeighborhoodMode::kFull;
  bool edge_self_loop = false;

  static ModelOptions from(const TrainConfig& c) {
    return {c.activation, c.acg, c.variant.neighborhood, c.edge_self_loop};
  }
};

template <class T>
struct ParameterSet {
  Mat<T> P;          // M x d
  Mat<T> Q;          // N x d
  Mat<T> edge;       // K x d; rows are W_view, W_add, W_purchase
  Mat<T> beh;        // (B*K*d) x d; B = 1 when shared across layers, else L
  Vec<T> theta;      // L+1 fusion logits
  Mat<T> fus;        // d x d
  Vec<T> intensity;  // d (W_int)
  Mat<T> pre;        // K x d; row k is W_pre^k

  std::size_t num_users() const { return static_cast<std::size_t>(P.rows()); }
  std::size_t num_items() const { return static_cast<std::size_t>(Q.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(P.cols()); }
  std::size_t layers() const { return static_cast<std::size_t>(theta.size()) - 1; }
  bool per_layer_beh() const {
    return static_cast<std::size_t>(beh.rows()) > kNumBehaviors * dim();
  }

  auto beh_block(std::size_t layer, Behavior k) {
    const std::size_t block = (per_layer_beh() ? layer : 0) * kNumBehaviors + index_of(k);
    return beh.middleRows(static_cast<Eigen::Index>(block * dim()), static_cast<Eigen::Index>(dim()));
  }
  auto beh_block(std::size_t layer, Behavior k) const {
    const std::size_t block = (per_layer_beh() ? layer : 0) * kNumBehaviors + index_of(k);
    return beh.middleRows(static_cast<Eigen::Index>(block * dim()), static_cast<Eigen::Index>(dim()));
  }

  // Visits every named tensor as a flat buffer, in checkpoint order.
  template <class F>
  void for_each(F&& f) {
    f(std::string_view("P"), P.data(), static_cast<std::size_t>(P.size()));
    f(std::string_view("Q"), Q.data(), static_cast<std::size_t>(Q.size()));
    f(std::string_view("W_view"), edge.data(), dim());
    f(std::string_view("W_add"), edge.data() + dim(), dim());
    f(std::string_view("W_purchase"), edge.data() + 2 * dim(), dim());
    f(std::string_view("W_beh"), beh.data(), static_cast<std::size_t>(beh.size()));
    f(std::string_view("theta"), theta.data(), static_cast<std::size_t>(theta.size()));
    f(std::string_view("W_fus"), fus.data(), static_cast<std::size_t>(fus.size()));
    f(std::string_view("W_int"), intensity.data(), static_cast<std::size_t>(intensity.size()));
    f(std::string_view("W_pre"), pre.data(), static_cast<std::size_t>(pre.size()));
  }
  template <class F>
  void for_each(F&& f) const {
    const_cast<ParameterSet*>(this)->for_each(
        [&](std::string_view name, T* data, std::size_t n) { f(name, static_cast<const T*>(data), n); });
  }

  ParameterSet zeros_like() const {
    ParameterSet z;
    z.P = Mat<T>::Zero(P.rows(), P.cols());
    z.Q = Mat<T>::Zero(Q.rows(), Q.cols());
    z.edge = Mat<T>::Zero(edge.rows(), edge.cols());
    z.beh = Mat<T>::Zero(beh.rows(), beh.cols());
    z.theta = Vec<T>::Zero(theta.size());
    z.fus = Mat<T>::Zero(fus.rows(), fus.cols());
    z.intensity = Vec<T>::Zero(intensity.size());
    z.pre = Mat<T>::Zero(pre.rows(), pre.cols());
    return z;
  }

  template <class U>
  ParameterSet<U> cast() const {
    return {P.template cast<U>(),     Q.template cast<U>(),   edge.template cast<U>(),
            beh.template cast<U>(),   theta.template cast<U>(), fus.template cast<U>(),
            intensity.template cast<U>(), pre.template cast<U>()};
  }

  std::size_t size() const {
    std::size_t n = 0;
    for_each([&](std::string_view, const T*, std::size_t s) { n += s; });
    return n;
  }

  T squared_norm() const {
    T acc = 0;
    for_each([&](std::string_view, const T* data, std::size_t n) {
      for (std::size_t i = 0; i < n; ++i) acc += data[i] * data[i];
    });
    return acc;
  }

  bool all_finite() const {
    bool ok = true;
    for_each([&](std::string_view, const T* data, std::size_t n) {
      for (std::size_t i = 0; i < n; ++i) ok = ok && std::isfinite(data[i]);
    });
    return ok;
  }

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) {
    return a.P == b.P && a.Q == b.Q && a.edge == b.edge && a.beh == b.beh && a.theta == b.theta &&
           a.fus == b.fus && a.intensity == b.intensity && a.pre == b.pre;
  }
};

// Embeddings ~ N(0, 0.01^2); weight matrices Glorot-uniform; fusion logits
// zero (uniform layer weights); W_int = 1/d.
template <class T>
ParameterSet<T> init_params(std::size_t num_users, std::size_t num_items, std::size_t num_behaviors,
                            std::size_t d, std::size_t layers, std::uint64_t seed,
                            bool per_layer_beh = false) {
  if (num_users == 0 || num_items == 0 || d == 0)
    throw ConfigError("init_params: users, items and d must be positive");
  if (num_behaviors != kNumBehaviors) throw ConfigError("init_params: K must be 3");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.01);
  auto fill_normal = [&](auto& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(normal(rng));
  };
  auto fill_glorot = [&](auto& m, std::size_t fan_in, std::size_t fan_out) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> uniform(-bound, bound);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(uniform(rng));
  };

  const auto D = static_cast<Eigen::Index>(d);
  const std::size_t beh_blocks = (per_layer_beh ? std::max<std::size_t>(layers, 1) : 1) * num_behaviors;
  ParameterSet<T> p;
  p.P.resize(static_cast<Eigen::Index>(num_users), D);
  p.Q.resize(static_cast<Eigen::Index>(num_items), D);
  p.edge.resize(static_cast<Eigen::Index>(num_behaviors), D);
  p.beh.resize(static_cast<Eigen::Index>(beh_blocks * d), D);
  p.fus.resize(D, D);
  p.pre.resize(static_cast<Eigen::Index>(num_behaviors), D);
  fill_normal(p.P);
  fill_normal(p.Q);
  fill_normal(p.edge);
  fill_glorot(p.beh, d, d);
  fill_glorot(p.fus, d, d);
  fill_glorot(p.pre, d, 1);
  p.theta = Vec<T>::Zero(static_cast<Eigen::Index>(layers + 1));
  p.intensity = Vec<T>::Constant(D, T(1) / static_cast<T>(d));
  return p;
}

template <class T>
struct LayerState {
  Mat<T> p;  // M x d
  Mat<T> q;  // N x d
  Mat<T> w;  // K x d, one row per behavior type
};

template <class T>
struct FusedReps {
  Mat<T> p_fused;
  Mat<T> q_fused;
  Mat<T> w_fused;
  Vec<T> alpha;
  Mat<T> p_refined;
  Mat<T> q_refined;
};

template <class T>
LayerState<T> initial_state(const ParameterSet<T>& params) {
  return {params.P, params.Q, params.edge};
}

// Per-edge coefficient of the neighbor message in the node update.
inline double aggregation_coefficient(AggregationMode mode, std::size_t self_degree,
                                      std::size_t other_degree) {
  switch (mode) {
    case AggregationMode::kMean: return 1.0 / static_cast<double>(self_degree);
    case AggregationMode::kSum: return 1.0;
    case AggregationMode::kSymmetric:
      return 1.0 / std::sqrt(static_cast<double>(self_degree) * static_cast<double>(other_degree));
  }
  return 1.0;
}

namespace detail {

// Node update of one side: out[n] = sum over n's edges (m, k) of
// coef * other[m] (.) w[k]; nodes without edges keep their current row.
// Mean aggregation sums first and scales once so that the result does not
// depend on how neighbor ids are labelled when the sum is exact.
template <class T, class NeighborsFn, class DegreeFn, class OtherDegreeFn>
Mat<T> aggregate_side(const Mat<T>& self, const Mat<T>& other, const Mat<T>& w, AggregationMode mode,
                      NeighborsFn&& neighbors, DegreeFn&& degree, OtherDegreeFn&& other_degree) {
  Mat<T> out(self.rows(), self.cols());
  for (Eigen::Index n = 0; n < self.rows(); ++n) {
    const std::size_t deg = degree(static_cast<std::uint32_t>(n));
    if (deg == 0) {
      out.row(n) = self.row(n);
      continue;
    }
    out.row(n).setZero();
    for (Behavior k : kAllBehaviors) {
      const auto wk = w.row(static_cast<Eigen::Index>(index_of(k)));
      for (auto m : neighbors(k, static_cast<std::uint32_t>(n))) {
        if (mode == AggregationMode::kSymmetric) {
          const T c = static_cast<T>(aggregation_coefficient(mode, deg, other_degree(m)));
          out.row(n) += c * other.row(m).cwiseProduct(wk);
        } else {
          out.row(n) += other.row(m).cwiseProduct(wk);
        }
      }
    }
    if (mode == AggregationMode::kMean) out.row(n) *= T(1) / static_cast<T>(deg);
  }
  return out;
}

}  // namespace detail

// Scale s_k applied to W_beh w_k in the type-level edge update.
inline std::array<double, kNumBehaviors> edge_update_scales(const BehaviorGraph& graph,
                                                            bool include_self) {
  std::array<double, kNumBehaviors> s{};
  for (Behavior k : kAllBehaviors) s[index_of(k)] = graph.edge_update_scale(k, include_self);
  return s;
}

// Produces layer l+1 from layer l. `edge_pre`, when given, receives the
// pre-activation of the edge update (K x d).
template <class T>
LayerState<T> propagate_layer(const LayerState<T>& state, const BehaviorGraph& graph,
                              const ParameterSet<T>& params, std::size_t l, const ModelOptions& opts,
                              Mat<T>* edge_pre = nullptr,
                              const std::array<double, kNumBehaviors>* scales = nullptr) {
  if (l >= params.layers())
    throw ContractError("propagate_layer: layer " + std::to_string(l + 1) + " exceeds L = " +
                        std::to_string(params.layers()));
  LayerState<T> next;
  next.p = detail::aggregate_side<T>(
      state.p, state.q, state.w, opts.acg,
      [&](Behavior k, UserId u) { return graph.items_of_user(k, u); },
      [&](UserId u) { return graph.user_degree(u); },
      [&](ItemId v) { return graph.item_degree(v); });
  next.q = detail::aggregate_side<T>(
      state.q, state.p, state.w, opts.acg,
      [&](Behavior k, ItemId v) { return graph.users_of_item(k, v); },
      [&](ItemId v) { return graph.item_degree(v); },
      [&](UserId u) { return graph.user_degree(u); });

  next.w = state.w;
  if (edge_pre) *edge_pre = Mat<T>::Zero(state.w.rows(), state.w.cols());
  if (opts.neighborhood != NeighborhoodMode::kFull) return next;

  const auto s = scales ? *scales : edge_update_scales(graph, opts.edge_self_loop);
  for (Behavior k : kAllBehaviors) {
    const auto row = static_cast<Eigen::Index>(index_of(k));
    if (graph.edge_count(k) == 0) continue;
    const RowVec<T> pre =
        static_cast<T>(s[index_of(k)]) * (params.beh_block(l, k) * state.w.row(row).transpose()).transpose();
    if (edge_pre) edge_pre->row(row) = pre;
    for (Eigen::Index j = 0; j < pre.size(); ++j) next.w(row, j) = activate(opts.activation, pre(j));
  }
  return next;
}

template <class T>
Vec<T> softmax(const Vec<T>& logits) {
  const T m = logits.maxCoeff();
  Vec<T> e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

// Softmax-weighted sum of layer states; fills p/q/w_fused and alpha.
template <class T>
FusedReps<T> fuse_layers(const std::vector<LayerState<T>>& states, const Vec<T>& theta) {
  if (states.empty() || static_cast<Eigen::Index>(states.size()) != theta.size())
    throw ContractError("fuse_layers: need exactly L+1 layer states");
  FusedReps<T> out;
  out.alpha = softmax(theta);
  out.p_fused = out.alpha(0) * states[0].p;
  out.q_fused = out.alpha(0) * states[0].q;
  out.w_fused = out.alpha(0) * states[0].w;
  for (std::size_t l = 1; l < states.size(); ++l) {
    const T a = out.alpha(static_cast<Eigen::Index>(l));
    out.p_fused += a * states[l].p;
    out.q_fused += a * states[l].q;
    out.w_fused += a * states[l].w;
  }
  return out;
}

// Intermediates of the attention refinement kept for the backward pass.
template <class T>
struct RefineTrace {
  Mat<T> user_attention;  // M x K, rows sum to 1 for users with edges
  Mat<T> item_attention;  // N x K
  Mat<T> user_context;    // M x d, w_{e(u)}
  Mat<T> item_context;    // N x d
  Mat<T> user_pre;        // M x d, W_fus (p (.) w_{e(u)}) before activation
  Mat<T> item_pre;
  std::size_t isolated_users = 0;
  std::size_t isolated_items = 0;
};

namespace detail {

// Behavior-type attention of one node. Every edge of type k carries the
// same key w_k, so the softmax over edges collapses to count-weighted
// softmax over types.
template <class T, class Row>
void attention_weights(const Row& node, const Mat<T>& w, const std::array<std::size_t, kNumBehaviors>& counts,
                       T* out) {
  std::size_t total = 0;
  for (auto c : counts) total += c;
  if (total == 0) {
    for (std::size_t k = 0; k < kNumBehaviors; ++k) out[k] = T(0);
    return;
  }
  const T inv_sqrt_d = T(1) / std::sqrt(static_cast<T>(w.cols()));
  std::array<T, kNumBehaviors> logit{};
  T max_logit = -std::numeric_limits<T>::infinity();
  for (std::size_t k = 0; k < kNumBehaviors; ++k) {
    if (!counts[k]) continue;
    logit[k] = node.dot(w.row(static_cast<Eigen::Index>(k))) * inv_sqrt_d;
    max_logit = std::max(max_logit, logit[k]);
  }
  T denom = 0;
  for (std::size_t k = 0; k < kNumBehaviors; ++k) {
    out[k] = counts[k] ? static_cast<T>(counts[k]) * std::exp(logit[k] - max_logit) : T(0);
    denom += out[k];
  }
  for (std::size_t k = 0; k < kNumBehaviors; ++k) out[k] /= denom;
}

template <class T, class CountsFn>
void refine_side(const Mat<T>& nodes, const Mat<T>& w, const Mat<T>& fus, const ModelOptions& opts,
                 CountsFn&& counts_of, Mat<T>& attention, Mat<T>& context, Mat<T>& pre, Mat<T>& refined,
                 std::size_t& isolated) {
  const Eigen::Index n = nodes.rows(), d = nodes.cols();
  attention = Mat<T>::Zero(n, static_cast<Eigen::Index>(kNumBehaviors));
  context.resize(n, d);
  pre.resize(n, d);
  refined.resize(n, d);
  isolated = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto counts = counts_of(static_cast<std::uint32_t>(i));
    // Without behavior context (W-NB, P-NB) the attention is bypassed.
    if (opts.neighborhood != NeighborhoodMode::kFull) {
      context.row(i).setOnes();
    } else {
      attention_weights<T>(nodes.row(i), w, counts, attention.row(i).data());
      context.row(i) = attention.row(i) * w;
      if (attention.row(i).sum() == T(0)) ++isolated;
    }
    const Vec<T> mixed = nodes.row(i).cwiseProduct(context.row(i)).transpose();
    pre.row(i) = (fus * mixed).transpose();
    for (Eigen::Index j = 0; j < d; ++j) refined(i, j) = activate(opts.activation, pre(i, j));
  }
}

}  // namespace detail

// Adds p_refined / q_refined to `fused`; `trace`, when given, receives the
// attention weights and pre-activations.
template <class T>
FusedReps<T> attention_refine(FusedReps<T> fused, const BehaviorGraph& graph,
                              const ParameterSet<T>& params, const ModelOptions& opts,
                              RefineTrace<T>* trace = nullptr) {
  RefineTrace<T> local;
  RefineTrace<T>& t = trace ? *trace : local;
  detail::refine_side<T>(
      fused.p_fused, fused.w_fused, params.fus, opts,
      [&](UserId u) {
        std::array<std::size_t, kNumBehaviors> c{};
        for (Behavior k : kAllBehaviors) c[index_of(k)] = graph.user_degree(k, u);
        return c;
      },
      t.user_attention, t.user_context, t.user_pre, fused.p_refined, t.isolated_users);
  detail::refine_side<T>(
      fused.q_fused, fused.w_fused, params.fus, opts,
      [&](ItemId v) {
        std::array<std::size_t, kNumBehaviors> c{};
        for (Behavior k : kAllBehaviors) c[index_of(k)] = graph.item_degree(k, v);
        return c;
      },
      t.item_attention, t.item_context, t.item_pre, fused.q_refined, t.isolated_items);
  return fused;
}

template <class T>
struct ForwardTrace {
  std::vector<LayerState<T>> layers;  // L+1 states, layers[0] = initial embeddings
  std::vector<Mat<T>> edge_pre;       // L edge-update pre-activations
  std::array<double, kNumBehaviors> edge_scale{};
  FusedReps<T> reps;
  RefineTrace<T> refine;
};

template <class T>
ForwardTrace<T> forward(const ParameterSet<T>& params, const BehaviorGraph& graph,
                        const ModelOptions& opts) {
  if (graph.num_users() != params.num_users() || graph.num_items() != params.num_items())
    throw ContractError("forward: graph and parameter shapes disagree");
  ForwardTrace<T> trace;
  trace.edge_scale = edge_update_scales(graph, opts.edge_self_loop);
  trace.layers.reserve(params.layers() + 1);
  trace.layers.push_back(initial_state(params));
  for (std::size_t l = 0; l < params.layers(); ++l) {
    Mat<T> pre;
    trace.layers.push_back(
        propagate_layer(trace.layers.back(), graph, params, l, opts, &pre, &trace.edge_scale));
    trace.edge_pre.push_back(std::move(pre));
  }
  trace.reps = attention_refine(fuse_layers(trace.layers, params.theta), graph, params, opts,
                                &trace.refine);
  return trace;
}

template <class T>
T predict(UserId u, ItemId v, Behavior k, const FusedReps<T>& refined, const ParameterSet<T>& params) {
  if (u >= refined.p_refined.rows() || v >= refined.q_refined.rows())
    throw LookupError("predict: user or item id out of range");
  const auto h = params.pre.row(static_cast<Eigen::Index>(index_of(k)));
  return (h.cwiseProduct(refined.p_refined.row(u)).cwiseProduct(refined.q_refined.row(v))).sum();
}

// Scores of user u against every item under behavior k.
template <class T>
Vec<T> score_items(UserId u, Behavior k, const FusedReps<T>& refined, const ParameterSet<T>& params) {
  if (u >= refined.p_refined.rows()) throw LookupError("score_items: user id out of range");
  const RowVec<T> hp =
      params.pre.row(static_cast<Eigen::Index>(index_of(k))).cwiseProduct(refined.p_refined.row(u));
  return refined.q_refined * hp.transpose();
}

}  // namespace hifirec
