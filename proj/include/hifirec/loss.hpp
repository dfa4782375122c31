// Copyright 2026 The HiFIRec Authors
// SPDX-License-Identifier: Apache-2.0
//
// Intensity-aware non-sampling loss. Negative weights come from normalized
// item frequencies scaled by a learned intensity score; the weighted squared
// loss over all user-item pairs is evaluated without enumerating negatives
// through the d x d Gram decomposition.

#pragma once

#include "hifirec/config.hpp"
#include "hifirec/core.hpp"
#include "hifirec/dataset.hpp"
#include "hifirec/graph.hpp"
#include "hifirec/model.hpp"

#include <map>
#include <string>
#include <vector>

namespace hifirec {

struct NegativeWeightTable {
  std::array<double, kNumBehaviors> c_pos{1.0, 1.0, 1.0};
  std::array<std::vector<double>, kNumBehaviors> c_neg;
  // Intermediates of the intensity-aware path (empty under U-NS).
  std::array<std::vector<double>, kNumBehaviors> score;   // W_int . q'_v
  std::array<std::vector<double>, kNumBehaviors> f;       // intensity scores
  std::array<std::vector<double>, kNumBehaviors> f_norm;  // reference-scaled scores
  std::array<bool, kNumBehaviors> skipped{};              // behavior with no train interactions
  std::array<bool, kNumBehaviors> fallback{};             // all f_norm zero, uniform C/N used
  std::vector<std::string> warnings;

  std::size_t num_items() const { return c_neg[0].size(); }
  double neg(Behavior k, ItemId v) const { return c_neg[index_of(k)][v]; }
  double pos(Behavior k) const { return c_pos[index_of(k)]; }
};

// f_v = max(W_int . q'_v, 0) * I_v^k / sum_i I_i^k. Zero when behavior k
// has no interactions.
template <class T>
std::vector<double> intensity_scores(const FrequencyTable& freq, const Mat<T>& q_refined,
                                     const Vec<T>& intensity, Behavior k,
                                     std::vector<double>* raw_scores = nullptr) {
  const std::size_t n = freq.num_items();
  if (static_cast<std::size_t>(q_refined.rows()) != n)
    throw ContractError("intensity_scores: item count mismatch");
  std::vector<double> f(n, 0.0);
  if (raw_scores) raw_scores->assign(n, 0.0);
  const double total = static_cast<double>(freq.total(k));
  for (std::size_t v = 0; v < n; ++v) {
    const double s =
        static_cast<double>(q_refined.row(static_cast<Eigen::Index>(v)).dot(intensity.transpose()));
    if (raw_scores) (*raw_scores)[v] = s;
    if (total > 0.0) f[v] = std::max(s, 0.0) * static_cast<double>(freq.count(k, static_cast<ItemId>(v))) / total;
  }
  return f;
}

// f_v^kn = f_v^k * I_v^{k_ref} / sum_i I_i^k (or sum_i I_i^{k_ref} when
// `ref_denominator` is set).
inline std::vector<double> normalize_frequency(const std::vector<double>& f, const FrequencyTable& freq,
                                               Behavior k, Behavior k_ref, bool ref_denominator = false) {
  const double denom = static_cast<double>(ref_denominator ? freq.total(k_ref) : freq.total(k));
  std::vector<double> out(f.size(), 0.0);
  if (denom <= 0.0) return out;
  for (std::size_t v = 0; v < f.size(); ++v)
    out[v] = f[v] * static_cast<double>(freq.count(k_ref, static_cast<ItemId>(v))) / denom;
  return out;
}

struct WeightResult {
  std::vector<double> weights;
  bool fallback = false;
};

// c_v = C * f_v^x / sum_i f_i^x; zero-frequency items get zero weight.
inline WeightResult negative_weights(const std::vector<double>& f_norm, double C, double x) {
  if (!(C > 0.0 && C <= 1.0)) throw ConfigError("negative_weights: C must lie in (0, 1]");
  if (!(x > 0.0 && x < 1.0)) throw ConfigError("negative_weights: x must lie in (0, 1)");
  WeightResult r;
  r.weights.assign(f_norm.size(), 0.0);
  double sum = 0.0;
  for (std::size_t v = 0; v < f_norm.size(); ++v) {
    if (f_norm[v] > 0.0) r.weights[v] = std::pow(f_norm[v], x);
    sum += r.weights[v];
  }
  if (!(sum > 0.0)) {
    r.fallback = true;
    const double u = f_norm.empty() ? 0.0 : C / static_cast<double>(f_norm.size());
    std::fill(r.weights.begin(), r.weights.end(), u);
    return r;
  }
  for (double& w : r.weights) w = C * w / sum;
  return r;
}

inline std::vector<double> uniform_weights(std::size_t num_items, double c_fixed) {
  if (!(c_fixed >= 0.0)) throw ConfigError("uniform_weights: c_fixed must be non-negative");
  return std::vector<double>(num_items, c_fixed);
}

// Weight table for one training step, using the current refined item
// representations as constants.
template <class T>
NegativeWeightTable build_weight_table(const TrainConfig& cfg, const FrequencyTable& freq,
                                       const Mat<T>& q_refined, const Vec<T>& intensity) {
  NegativeWeightTable table;
  const std::size_t n = freq.num_items();
  for (Behavior k : kAllBehaviors) {
    const std::size_t ki = index_of(k);
    table.c_pos[ki] = cfg.c_pos;
    if (cfg.variant.sampling == SamplingMode::kUniform) {
      table.c_neg[ki] = uniform_weights(n, cfg.c_fixed);
      continue;
    }
    if (freq.total(k) == 0) {
      table.skipped[ki] = true;
      table.c_neg[ki].assign(n, 0.0);
      table.warnings.push_back(std::string(behavior_name(k)) + ": no interactions, behavior skipped");
      continue;
    }
    table.f[ki] = intensity_scores(freq, q_refined, intensity, k, &table.score[ki]);
    table.f_norm[ki] = normalize_frequency(table.f[ki], freq, k, cfg.k_ref, cfg.ref_total_denominator);
    auto r = negative_weights(table.f_norm[ki], cfg.C, cfg.x);
    table.c_neg[ki] = std::move(r.weights);
    table.fallback[ki] = r.fallback;
    if (r.fallback)
      table.warnings.push_back(std::string(behavior_name(k)) +
                               ": all normalized frequencies are zero, uniform C/N weights used");
  }
  return table;
}

// Adjoint accumulators for the refined representations and W_pre.
template <class T>
struct RepGradients {
  Mat<T> p_refined;
  Mat<T> q_refined;
  Mat<T> pre;  // K x d
  // dL/dc_v per behavior, filled only when requested.
  std::array<std::vector<double>, kNumBehaviors> c_neg;

  static RepGradients zeros(Eigen::Index users, Eigen::Index items, Eigen::Index d) {
    return {Mat<T>::Zero(users, d), Mat<T>::Zero(items, d),
            Mat<T>::Zero(static_cast<Eigen::Index>(kNumBehaviors), d), {}};
  }
};

namespace detail {

// Sums chunk partials pairwise in chunk-index order.
template <class V>
V tree_reduce(std::vector<V> parts) {
  if (parts.empty()) return V{};
  while (parts.size() > 1) {
    std::vector<V> next;
    next.reserve((parts.size() + 1) / 2);
    for (std::size_t i = 0; i + 1 < parts.size(); i += 2) next.push_back(parts[i] + parts[i + 1]);
    if (parts.size() % 2) next.push_back(parts.back());
    parts = std::move(next);
  }
  return parts.front();
}

template <class T, class RowWeight>
Mat<double> chunked_gram(const Mat<T>& rows, std::size_t chunk, RowWeight&& weight) {
  const Eigen::Index d = rows.cols();
  std::vector<Mat<double>> parts;
  for (Eigen::Index start = 0; start < rows.rows(); start += static_cast<Eigen::Index>(chunk)) {
    const Eigen::Index end = std::min(rows.rows(), start + static_cast<Eigen::Index>(chunk));
    Mat<double> g = Mat<double>::Zero(d, d);
    for (Eigen::Index i = start; i < end; ++i) {
      const double w = weight(i);
      if (w == 0.0) continue;
      const RowVec<double> r = rows.row(i).template cast<double>();
      g.noalias() += w * r.transpose() * r;
    }
    parts.push_back(std::move(g));
  }
  if (parts.empty()) return Mat<double>::Zero(d, d);
  return tree_reduce(std::move(parts));
}

}  // namespace detail

// Whole-data weighted squared loss of behavior k with the constant
// c+ * |E_k| dropped:
//   sum_{(u,v) in E_k} [(c+ - c_v) y^2 - 2 c+ y]
//   + sum_{a,b} h_a h_b (sum_u p'_ua p'_ub)(sum_v c_v q'_va q'_vb).
// When `grad` is non-null, adds `scale` times the loss gradient to it.
template <class T>
double behavior_loss_efficient(const FusedReps<T>& refined, const ParameterSet<T>& params,
                               const BehaviorGraph& graph, const NegativeWeightTable& weights,
                               Behavior k, std::size_t chunk_size = 16, RepGradients<T>* grad = nullptr,
                               double scale = 1.0, bool want_weight_grad = false) {
  const std::size_t ki = index_of(k);
  const Eigen::Index M = refined.p_refined.rows(), N = refined.q_refined.rows();
  const Eigen::Index d = refined.p_refined.cols();
  if (weights.c_neg[ki].size() != static_cast<std::size_t>(N) ||
      graph.num_users() != static_cast<std::size_t>(M) || graph.num_items() != static_cast<std::size_t>(N))
    throw ContractError("behavior_loss_efficient: weight table or graph shape mismatch");
  if (chunk_size == 0) chunk_size = 1;

  const std::vector<double>& c = weights.c_neg[ki];
  const double c_pos = weights.c_pos[ki];
  const RowVec<T> h = params.pre.row(static_cast<Eigen::Index>(ki));

  // Positive-edge term, one partial per user chunk.
  std::vector<double> pos_parts;
  std::vector<RowVec<double>> h_parts;
  if (grad && want_weight_grad) grad->c_neg[ki].assign(static_cast<std::size_t>(N), 0.0);
  for (Eigen::Index start = 0; start < M; start += static_cast<Eigen::Index>(chunk_size)) {
    const Eigen::Index end = std::min(M, start + static_cast<Eigen::Index>(chunk_size));
    double part = 0.0;
    RowVec<double> gh = RowVec<double>::Zero(d);
    for (Eigen::Index u = start; u < end; ++u) {
      const RowVec<T> hp = h.cwiseProduct(refined.p_refined.row(u));
      for (ItemId v : graph.items_of_user(k, static_cast<UserId>(u))) {
        const double y = static_cast<double>(hp.dot(refined.q_refined.row(v)));
        part += (c_pos - c[v]) * y * y - 2.0 * c_pos * y;
        if (!grad) continue;
        const double g = scale * (2.0 * (c_pos - c[v]) * y - 2.0 * c_pos);
        grad->p_refined.row(u) += static_cast<T>(g) * h.cwiseProduct(refined.q_refined.row(v));
        grad->q_refined.row(v) += static_cast<T>(g) * hp;
        gh += g * refined.p_refined.row(u).cwiseProduct(refined.q_refined.row(v)).template cast<double>();
        if (want_weight_grad) grad->c_neg[ki][v] -= scale * y * y;
      }
    }
    pos_parts.push_back(part);
    h_parts.push_back(std::move(gh));
  }
  const double positive = detail::tree_reduce(pos_parts);

  // Whole-data negative term through d x d Gram matrices.
  const Mat<double> gram_p =
      detail::chunked_gram(refined.p_refined, chunk_size, [](Eigen::Index) { return 1.0; });
  const Mat<double> gram_q = detail::chunked_gram(refined.q_refined, chunk_size,
                                                  [&](Eigen::Index v) { return c[static_cast<std::size_t>(v)]; });
  const RowVec<double> hd = h.template cast<double>();
  const Mat<double> hh = hd.transpose() * hd;
  const double negative = (hh.array() * gram_p.array() * gram_q.array()).sum();

  if (grad) {
    RowVec<double> gh = h_parts.empty() ? RowVec<double>::Zero(d) : detail::tree_reduce(h_parts);
    gh += scale * 2.0 * (hd * (gram_p.array() * gram_q.array()).matrix());
    grad->pre.row(static_cast<Eigen::Index>(ki)) += gh.template cast<T>();
    const Mat<T> a_q = (scale * 2.0 * (hh.array() * gram_q.array()).matrix()).template cast<T>();
    const Mat<T> a_p = (scale * 2.0 * (hh.array() * gram_p.array()).matrix()).template cast<T>();
    grad->p_refined.noalias() += refined.p_refined * a_q;
    for (Eigen::Index v = 0; v < N; ++v) {
      const double cv = c[static_cast<std::size_t>(v)];
      if (cv != 0.0) grad->q_refined.row(v) += static_cast<T>(cv) * (refined.q_refined.row(v) * a_p);
      if (want_weight_grad) {
        const RowVec<double> hq = hd.cwiseProduct(refined.q_refined.row(v).template cast<double>());
        grad->c_neg[ki][static_cast<std::size_t>(v)] += scale * (hq * gram_p * hq.transpose())(0, 0);
      }
    }
  }
  return positive + negative;
}

// The constant c+ * |E_k| that behavior_loss_efficient leaves out.
inline double positive_constant(const BehaviorGraph& graph, const NegativeWeightTable& weights, Behavior k) {
  return weights.pos(k) * static_cast<double>(graph.edge_count(k));
}

// Direct double loop over every user-item pair; reference for the
// decomposed form. Constant-adjusted to the same convention.
template <class T>
double naive_loss_oracle(const FusedReps<T>& refined, const ParameterSet<T>& params,
                         const BehaviorGraph& graph, const NegativeWeightTable& weights, Behavior k) {
  const std::size_t M = graph.num_users(), N = graph.num_items();
  if (M * N > 10000) throw ContractError("naive_loss_oracle: instance larger than 10,000 pairs");
  double loss = 0.0;
  for (UserId u = 0; u < M; ++u) {
    for (ItemId v = 0; v < N; ++v) {
      const double y_hat = static_cast<double>(predict(u, v, k, refined, params));
      const bool positive = graph.has_edge(u, v, k);
      const double target = positive ? 1.0 : 0.0;
      const double weight = positive ? weights.pos(k) : weights.neg(k, v);
      loss += weight * (y_hat - target) * (y_hat - target);
    }
  }
  return loss - positive_constant(graph, weights, k);
}

struct LossReport {
  std::array<double, kNumBehaviors> per_behavior{};
  double regularization = 0.0;
  double total = 0.0;
  std::map<std::string, double> grad_norms;
};

template <class T>
LossReport total_loss(const std::array<double, kNumBehaviors>& per_behavior,
                      const std::array<double, kNumBehaviors>& lambda, double mu,
                      const ParameterSet<T>& params) {
  double lambda_sum = 0.0;
  for (double l : lambda) {
    if (l < 0.0) throw ConfigError("total_loss: negative lambda");
    lambda_sum += l;
  }
  if (!(lambda_sum > 0.0)) throw ConfigError("total_loss: lambda must have a positive sum");
  LossReport r;
  r.per_behavior = per_behavior;
  r.regularization = mu * static_cast<double>(params.squared_norm());
  r.total = r.regularization;
  for (std::size_t k = 0; k < kNumBehaviors; ++k) r.total += lambda[k] * per_behavior[k];
  return r;
}

// Chains dL/dc_v back through the intensity-aware weights into q' and
// W_int (only used when the weights are not treated as constants).
template <class T>
void weight_backward(const TrainConfig& cfg, const FrequencyTable& freq, const NegativeWeightTable& table,
                     const std::array<std::vector<double>, kNumBehaviors>& dc, const Mat<T>& q_refined,
                     const Vec<T>& intensity, Mat<T>& grad_q, Vec<T>& grad_intensity) {
  if (cfg.variant.sampling != SamplingMode::kIntensity) return;
  const std::size_t n = freq.num_items();
  for (Behavior k : kAllBehaviors) {
    const std::size_t ki = index_of(k);
    if (table.skipped[ki] || table.fallback[ki] || dc[ki].empty()) continue;
    const auto& c = table.c_neg[ki];
    double g_sum = 0.0;
    for (std::size_t v = 0; v < n; ++v)
      if (table.f_norm[ki][v] > 0.0) g_sum += std::pow(table.f_norm[ki][v], cfg.x);
    double mean_term = 0.0;
    for (std::size_t v = 0; v < n; ++v) mean_term += dc[ki][v] * c[v] / cfg.C;
    const double total_k = static_cast<double>(freq.total(k));
    const double denom = static_cast<double>(cfg.ref_total_denominator ? freq.total(cfg.k_ref) : freq.total(k));
    for (std::size_t v = 0; v < n; ++v) {
      const double fn = table.f_norm[ki][v];
      if (!(fn > 0.0) || !(table.score[ki][v] > 0.0)) continue;
      const double d_g = cfg.C / g_sum * (dc[ki][v] - mean_term);
      const double d_fn = d_g * cfg.x * std::pow(fn, cfg.x - 1.0);
      const double ratio = static_cast<double>(freq.count(k, static_cast<ItemId>(v))) / total_k;
      const double ref = static_cast<double>(freq.count(cfg.k_ref, static_cast<ItemId>(v))) / denom;
      const double d_s = d_fn * ratio * ref;
      const auto row = static_cast<Eigen::Index>(v);
      grad_q.row(row) += static_cast<T>(d_s) * intensity.transpose();
      grad_intensity += static_cast<T>(d_s) * q_refined.row(row).transpose();
    }
  }
}

}  // namespace hifirec
