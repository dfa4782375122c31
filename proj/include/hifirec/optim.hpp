// Copyright 2026 The HiFIRec Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode gradients of the multi-task objective, derived by hand per
// forward operation, plus Adam and a central finite-difference checker.

#pragma once

#include "hifirec/config.hpp"
#include "hifirec/loss.hpp"
#include "hifirec/model.hpp"

#include <random>
#include <span>
#include <string>
#include <vector>

namespace hifirec {

template <class T>
using GradientSet = ParameterSet<T>;

template <class T>
struct NamedTensor {
  std::string_view name;
  std::span<T> data;
};

template <class T>
std::vector<NamedTensor<T>> tensors(ParameterSet<T>& p) {
  std::vector<NamedTensor<T>> out;
  p.for_each([&](std::string_view name, T* data, std::size_t n) { out.push_back({name, {data, n}}); });
  return out;
}

template <class T>
std::vector<NamedTensor<const T>> tensors(const ParameterSet<T>& p) {
  std::vector<NamedTensor<const T>> out;
  p.for_each([&](std::string_view name, const T* data, std::size_t n) { out.push_back({name, {data, n}}); });
  return out;
}

namespace detail {

template <class T, class CountsFn>
void refine_side_backward(const Mat<T>& nodes, const Mat<T>& w, const Mat<T>& fus, const ModelOptions& opts,
                          const Mat<T>& attention, const Mat<T>& context, const Mat<T>& pre,
                          const Mat<T>& grad_refined, CountsFn&& counts_of, Mat<T>& grad_nodes,
                          Mat<T>& grad_w, Mat<T>& grad_fus) {
  const Eigen::Index d = nodes.cols();
  const T inv_sqrt_d = T(1) / std::sqrt(static_cast<T>(d));
  RowVec<T> gz(d);
  for (Eigen::Index i = 0; i < nodes.rows(); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) gz(j) = grad_refined(i, j) * activate_grad(opts.activation, pre(i, j));
    const RowVec<T> mixed = nodes.row(i).cwiseProduct(context.row(i));
    grad_fus.noalias() += gz.transpose() * mixed;
    const RowVec<T> gm = gz * fus;
    grad_nodes.row(i) += gm.cwiseProduct(context.row(i));
    if (opts.neighborhood != NeighborhoodMode::kFull) continue;

    const RowVec<T> gctx = gm.cwiseProduct(nodes.row(i));
    const auto a = attention.row(i);
    grad_w.noalias() += a.transpose() * gctx;
    const auto counts = counts_of(static_cast<std::uint32_t>(i));
    std::size_t total = 0;
    for (auto c : counts) total += c;
    if (total == 0) continue;

    std::array<T, kNumBehaviors> ga{};
    T mean = 0;
    for (std::size_t k = 0; k < kNumBehaviors; ++k) {
      ga[k] = gctx.dot(w.row(static_cast<Eigen::Index>(k)));
      mean += a(static_cast<Eigen::Index>(k)) * ga[k];
    }
    for (std::size_t k = 0; k < kNumBehaviors; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      const T gl = a(kk) * (ga[k] - mean) * inv_sqrt_d;
      if (gl == T(0)) continue;
      grad_nodes.row(i) += gl * w.row(kk);
      grad_w.row(kk) += gl * nodes.row(i);
    }
  }
}

// Adjoint of aggregate_side: routes grad_out[n] to the neighbor rows and
// to the behavior rows.
template <class T, class NeighborsFn, class DegreeFn, class OtherDegreeFn>
void aggregate_side_backward(const Mat<T>& other, const Mat<T>& w, const Mat<T>& grad_out,
                             AggregationMode mode, NeighborsFn&& neighbors, DegreeFn&& degree,
                             OtherDegreeFn&& other_degree, Mat<T>& grad_self, Mat<T>& grad_other,
                             Mat<T>& grad_w) {
  for (Eigen::Index n = 0; n < grad_out.rows(); ++n) {
    const std::size_t deg = degree(static_cast<std::uint32_t>(n));
    if (deg == 0) {
      grad_self.row(n) += grad_out.row(n);
      continue;
    }
    for (Behavior k : kAllBehaviors) {
      const auto kk = static_cast<Eigen::Index>(index_of(k));
      for (auto m : neighbors(k, static_cast<std::uint32_t>(n))) {
        T c = T(1);
        if (mode == AggregationMode::kMean) c = T(1) / static_cast<T>(deg);
        else if (mode == AggregationMode::kSymmetric)
          c = static_cast<T>(aggregation_coefficient(mode, deg, other_degree(m)));
        const RowVec<T> g = c * grad_out.row(n);
        grad_other.row(m) += g.cwiseProduct(w.row(kk));
        grad_w.row(kk) += g.cwiseProduct(other.row(m));
      }
    }
  }
}

}  // namespace detail

// Gradient of sum_k lambda_k L_k + mu ||Theta||^2 given the adjoints of the
// refined representations and W_pre already collected in `rep_grad`.
template <class T>
GradientSet<T> backward(const ParameterSet<T>& params, const BehaviorGraph& graph, const ModelOptions& opts,
                        const ForwardTrace<T>& trace, const RepGradients<T>& rep_grad, double mu) {
  GradientSet<T> g = params.zeros_like();
  g.pre = rep_grad.pre;
  const FusedReps<T>& reps = trace.reps;
  const RefineTrace<T>& rt = trace.refine;

  Mat<T> gp = Mat<T>::Zero(reps.p_fused.rows(), reps.p_fused.cols());
  Mat<T> gq = Mat<T>::Zero(reps.q_fused.rows(), reps.q_fused.cols());
  Mat<T> gw = Mat<T>::Zero(reps.w_fused.rows(), reps.w_fused.cols());
  detail::refine_side_backward<T>(
      reps.p_fused, reps.w_fused, params.fus, opts, rt.user_attention, rt.user_context, rt.user_pre,
      rep_grad.p_refined,
      [&](UserId u) {
        std::array<std::size_t, kNumBehaviors> c{};
        for (Behavior k : kAllBehaviors) c[index_of(k)] = graph.user_degree(k, u);
        return c;
      },
      gp, gw, g.fus);
  detail::refine_side_backward<T>(
      reps.q_fused, reps.w_fused, params.fus, opts, rt.item_attention, rt.item_context, rt.item_pre,
      rep_grad.q_refined,
      [&](ItemId v) {
        std::array<std::size_t, kNumBehaviors> c{};
        for (Behavior k : kAllBehaviors) c[index_of(k)] = graph.item_degree(k, v);
        return c;
      },
      gq, gw, g.fus);

  // Cross-layer fusion.
  const std::size_t L = params.layers();
  const Vec<T>& alpha = reps.alpha;
  std::vector<LayerState<T>> gl(L + 1);
  Vec<T> g_alpha(static_cast<Eigen::Index>(L + 1));
  for (std::size_t l = 0; l <= L; ++l) {
    const auto li = static_cast<Eigen::Index>(l);
    const LayerState<T>& s = trace.layers[l];
    g_alpha(li) = (gp.array() * s.p.array()).sum() + (gq.array() * s.q.array()).sum() +
                  (gw.array() * s.w.array()).sum();
    gl[l].p = alpha(li) * gp;
    gl[l].q = alpha(li) * gq;
    gl[l].w = alpha(li) * gw;
  }
  const T mean_g = alpha.dot(g_alpha);
  g.theta = (alpha.array() * (g_alpha.array() - mean_g)).matrix();

  // Layers, last to first.
  for (std::size_t l = L; l-- > 0;) {
    const LayerState<T>& s = trace.layers[l];
    LayerState<T>& out = gl[l + 1];
    LayerState<T>& in = gl[l];
    detail::aggregate_side_backward<T>(
        s.q, s.w, out.p, opts.acg, [&](Behavior k, UserId u) { return graph.items_of_user(k, u); },
        [&](UserId u) { return graph.user_degree(u); }, [&](ItemId v) { return graph.item_degree(v); },
        in.p, in.q, in.w);
    detail::aggregate_side_backward<T>(
        s.p, s.w, out.q, opts.acg, [&](Behavior k, ItemId v) { return graph.users_of_item(k, v); },
        [&](ItemId v) { return graph.item_degree(v); }, [&](UserId u) { return graph.user_degree(u); },
        in.q, in.p, in.w);
    for (Behavior k : kAllBehaviors) {
      const auto kk = static_cast<Eigen::Index>(index_of(k));
      if (opts.neighborhood != NeighborhoodMode::kFull || graph.edge_count(k) == 0) {
        in.w.row(kk) += out.w.row(kk);
        continue;
      }
      const T scale = static_cast<T>(trace.edge_scale[index_of(k)]);
      RowVec<T> gy(out.w.cols());
      for (Eigen::Index j = 0; j < gy.size(); ++j)
        gy(j) = out.w(kk, j) * activate_grad(opts.activation, trace.edge_pre[l](kk, j));
      g.beh_block(l, k).noalias() += scale * gy.transpose() * s.w.row(kk);
      in.w.row(kk) += scale * gy * params.beh_block(l, k);
    }
  }
  g.P = std::move(gl[0].p);
  g.Q = std::move(gl[0].q);
  g.edge = std::move(gl[0].w);

  if (mu != 0.0) {
    auto gt = tensors(g);
    const auto pt = tensors(params);
    const T two_mu = static_cast<T>(2.0 * mu);
    for (std::size_t t = 0; t < gt.size(); ++t)
      for (std::size_t i = 0; i < gt[t].data.size(); ++i) gt[t].data[i] += two_mu * pt[t].data[i];
  }
  return g;
}

template <class T>
void check_finite(const GradientSet<T>& g, const std::string& what = "gradient") {
  for (const auto& t : tensors(g))
    for (T x : t.data)
      if (!std::isfinite(x)) throw NonFiniteError(what + " " + std::string(t.name));
}

template <class T>
double global_norm(const GradientSet<T>& g) {
  double acc = 0.0;
  for (const auto& t : tensors(g))
    for (T x : t.data) acc += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(acc);
}

// Rescales g so its global L2 norm is at most max_norm (0 disables).
template <class T>
double clip_global_norm(GradientSet<T>& g, double max_norm) {
  const double norm = global_norm(g);
  if (max_norm > 0.0 && norm > max_norm) {
    const T s = static_cast<T>(max_norm / norm);
    for (auto& t : tensors(g))
      for (T& x : t.data) x *= s;
  }
  return norm;
}

template <class T>
struct ObjectiveResult {
  LossReport report;
  GradientSet<T> grad;
  NegativeWeightTable weights;
  ForwardTrace<T> trace;
};

// Forward pass, negative weights, per-behavior losses, multi-task total and
// (optionally) its gradient. Passing `fixed_weights` holds the negative
// weights constant instead of rebuilding them from the current parameters.
template <class T>
ObjectiveResult<T> compute_objective(const ParameterSet<T>& params, const BehaviorGraph& graph,
                                     const FrequencyTable& freq, const TrainConfig& cfg, bool with_grad,
                                     const NegativeWeightTable* fixed_weights = nullptr) {
  const ModelOptions opts = ModelOptions::from(cfg);
  ObjectiveResult<T> r;
  r.trace = forward(params, graph, opts);
  const FusedReps<T>& reps = r.trace.reps;
  r.weights = fixed_weights ? *fixed_weights
                            : build_weight_table(cfg, freq, reps.q_refined, params.intensity);

  const bool weight_grad = with_grad && cfg.wint_through_gradient && !fixed_weights &&
                           cfg.variant.sampling == SamplingMode::kIntensity;
  auto rep_grad = RepGradients<T>::zeros(reps.p_refined.rows(), reps.q_refined.rows(),
                                         reps.p_refined.cols());
  std::array<double, kNumBehaviors> per_behavior{};
  for (Behavior k : kAllBehaviors) {
    const std::size_t ki = index_of(k);
    per_behavior[ki] = behavior_loss_efficient(reps, params, graph, r.weights, k, cfg.chunk_size,
                                               with_grad ? &rep_grad : nullptr, cfg.lambda[ki], weight_grad);
  }
  r.report = total_loss(per_behavior, cfg.lambda, cfg.mu, params);
  if (!with_grad) return r;

  Vec<T> grad_intensity = Vec<T>::Zero(params.intensity.size());
  if (weight_grad)
    weight_backward(cfg, freq, r.weights, rep_grad.c_neg, reps.q_refined, params.intensity,
                    rep_grad.q_refined, grad_intensity);
  r.grad = backward(params, graph, opts, r.trace, rep_grad, cfg.mu);
  r.grad.intensity += grad_intensity;
  for (const auto& t : tensors(r.grad)) {
    double acc = 0.0;
    for (T x : t.data) acc += static_cast<double>(x) * static_cast<double>(x);
    r.report.grad_norms[std::string(t.name)] = std::sqrt(acc);
  }
  return r;
}

template <class T>
struct AdamState {
  ParameterSet<T> m;
  ParameterSet<T> v;
  std::uint64_t step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_params(const ParameterSet<T>& p, double lr) {
    AdamState s;
    s.m = p.zeros_like();
    s.v = p.zeros_like();
    s.lr = lr;
    return s;
  }
};

// Bias-corrected Adam, in place.
template <class T>
void adam_step(ParameterSet<T>& params, const GradientSet<T>& grads, AdamState<T>& state) {
  auto pt = tensors(params);
  const auto gt = tensors(grads);
  auto mt = tensors(state.m);
  auto vt = tensors(state.v);
  if (pt.size() != gt.size()) throw ContractError("adam_step: tensor count mismatch");
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < pt.size(); ++t) {
    if (pt[t].data.size() != gt[t].data.size() || mt[t].data.size() != pt[t].data.size())
      throw ContractError("adam_step: shape mismatch in " + std::string(pt[t].name));
    for (std::size_t i = 0; i < pt[t].data.size(); ++i) {
      const double g = static_cast<double>(gt[t].data[i]);
      const double m = state.beta1 * static_cast<double>(mt[t].data[i]) + (1.0 - state.beta1) * g;
      const double v = state.beta2 * static_cast<double>(vt[t].data[i]) + (1.0 - state.beta2) * g * g;
      mt[t].data[i] = static_cast<T>(m);
      vt[t].data[i] = static_cast<T>(v);
      const double update = state.lr * (m / bc1) / (std::sqrt(v / bc2) + state.eps);
      pt[t].data[i] = static_cast<T>(static_cast<double>(pt[t].data[i]) - update);
    }
  }
}

struct FdFailure {
  std::string tensor;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct FdReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
  std::vector<FdFailure> failures;  // coordinates above the threshold

  bool passed() const { return failures.empty() && checked > 0; }
};

namespace detail {

// Sign pattern of every pre-activation that feeds a piecewise-linear
// activation or clamp; a change between probe points means a kink was
// crossed.
inline std::vector<bool> kink_signature(const ForwardTrace<double>& trace, const NegativeWeightTable& w) {
  std::vector<bool> sig;
  auto push = [&](const Mat<double>& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) sig.push_back(m.data()[i] > 0.0);
  };
  for (const auto& e : trace.edge_pre) push(e);
  push(trace.refine.user_pre);
  push(trace.refine.item_pre);
  for (const auto& s : w.score)
    for (double x : s) sig.push_back(x > 0.0);
  return sig;
}

}  // namespace detail

// Compares analytic gradients with central differences at `samples`
// coordinates spread over all tensors. Runs in double precision.
inline FdReport finite_difference_check(const ParameterSet<double>& params, const BehaviorGraph& graph,
                                        const FrequencyTable& freq, const TrainConfig& cfg,
                                        double eps = 1e-4, std::size_t samples = 200,
                                        double threshold = 1e-3, std::uint64_t seed = 7) {
  if (graph.num_users() > 10 || graph.num_items() > 10)
    throw ContractError("finite_difference_check: instance limited to 10 users x 10 items");
  const auto base = compute_objective(params, graph, freq, cfg, true);
  const NegativeWeightTable* held = cfg.wint_through_gradient ? nullptr : &base.weights;
  const auto base_sig = detail::kink_signature(base.trace, base.weights);

  ParameterSet<double> probe = params;
  auto probe_tensors = tensors(probe);
  const auto grad_tensors = tensors(base.grad);
  std::mt19937_64 rng(seed);
  FdReport report;
  std::size_t attempts = 0;
  while (report.checked < samples && attempts < samples * 20) {
    const std::size_t t = attempts++ % probe_tensors.size();
    auto& tensor = probe_tensors[t];
    std::uniform_int_distribution<std::size_t> pick(0, tensor.data.size() - 1);
    const std::size_t i = pick(rng);
    const double original = tensor.data[i];

    tensor.data[i] = original + eps;
    const auto plus = compute_objective(probe, graph, freq, cfg, false, held);
    tensor.data[i] = original - eps;
    const auto minus = compute_objective(probe, graph, freq, cfg, false, held);
    tensor.data[i] = original;

    if (detail::kink_signature(plus.trace, plus.weights) != base_sig ||
        detail::kink_signature(minus.trace, minus.weights) != base_sig) {
      ++report.skipped_kinks;
      continue;
    }
    const double numeric = (plus.report.total - minus.report.total) / (2.0 * eps);
    const double analytic = grad_tensors[t].data[i];
    const double rel = std::abs(analytic - numeric) / (1.0 + std::abs(analytic));
    report.max_rel_error = std::max(report.max_rel_error, rel);
    ++report.checked;
    if (rel > threshold)
      report.failures.push_back({std::string(tensor.name), i, analytic, numeric, rel});
  }
  return report;
}

}  // namespace hifirec
