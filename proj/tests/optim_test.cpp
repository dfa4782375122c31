// Copyright 2026 The HiFIRec Authors
// SPDX-License-Identifier: Apache-2.0

#include "hifirec/optim.hpp"

#include <gtest/gtest.h>

#include <random>

namespace hifirec {
namespace {

using Triple = std::tuple<Behavior, UserId, ItemId>;

FrequencyTable freq_of(const BehaviorGraph& g) {
  FrequencyTable f;
  for (Behavior k : kAllBehaviors) {
    auto& c = f.counts[index_of(k)];
    c.assign(g.num_items(), 0);
    for (ItemId v = 0; v < g.num_items(); ++v) c[v] = g.item_degree(k, v);
    f.totals[index_of(k)] = g.edge_count(k);
  }
  return f;
}

BehaviorGraph random_graph(std::size_t M, std::size_t N, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(0.4);
  std::vector<Triple> t;
  for (Behavior k : kAllBehaviors)
    for (UserId u = 0; u < M; ++u)
      for (ItemId v = 0; v < N; ++v)
        if (keep(rng)) t.emplace_back(k, u, v);
  return BehaviorGraph(M, N, t);
}

// Larger-than-default embeddings so every term of the loss matters.
ParameterSet<double> test_params(const BehaviorGraph& g, const TrainConfig& cfg, std::uint64_t seed) {
  auto p = init_params<double>(g.num_users(), g.num_items(), 3, cfg.d, cfg.effective_layers(), seed,
                               cfg.per_layer_wbeh);
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> n(0.0, 0.5);
  for (auto* m : {&p.P, &p.Q, &p.edge})
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = n(rng);
  for (Eigen::Index i = 0; i < p.theta.size(); ++i) p.theta(i) = n(rng);
  for (Eigen::Index i = 0; i < p.intensity.size(); ++i) p.intensity(i) = std::abs(n(rng));
  return p;
}

TrainConfig small_config(const std::string& variant, Activation act) {
  TrainConfig c;
  c.d = 4;
  c.L = 2;
  c.mu = 1e-3;
  c.C = 0.5;
  c.activation = act;
  c.variant = parse_variant(variant);
  return c;
}

TEST(FiniteDifference, QuadraticOnlyObjective) {
  // No positives and zero negative weights: only mu ||Theta||^2 remains.
  const BehaviorGraph g(4, 4, std::vector<Triple>{});
  TrainConfig cfg = small_config("F-NB+U-NS", Activation::kIdentity);
  cfg.c_fixed = 0.0;
  cfg.mu = 0.3;
  const auto p = test_params(g, cfg, 1);
  const auto r = finite_difference_check(p, g, freq_of(g), cfg, 1e-4, 200, 1e-10);
  EXPECT_TRUE(r.passed()) << r.max_rel_error;
  EXPECT_LE(r.max_rel_error, 1e-10);
}

TEST(FiniteDifference, IdentityActivationAllVariants) {
  for (const auto& v : all_variants()) {
    const auto g = random_graph(5, 5, 3);
    const auto cfg = small_config(v.name(), Activation::kIdentity);
    const auto p = test_params(g, cfg, 5);
    const auto r = finite_difference_check(p, g, freq_of(g), cfg, 1e-4, 200, 1e-6);
    EXPECT_TRUE(r.passed()) << v.name() << " max " << r.max_rel_error;
    EXPECT_GE(r.checked, 200u);
  }
}

TEST(FiniteDifference, LeakyReluOffKink) {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const auto g = random_graph(6, 5, seed);
    const auto cfg = small_config("F-NB+I-NS", Activation::kLeakyRelu);
    const auto p = test_params(g, cfg, seed);
    const auto r = finite_difference_check(p, g, freq_of(g), cfg, 1e-5, 200, 1e-3);
    EXPECT_TRUE(r.passed()) << "seed " << seed << " max " << r.max_rel_error;
  }
}

TEST(FiniteDifference, OptionalPathsAndAggregations) {
  const auto g = random_graph(5, 5, 21);
  for (int variant = 0; variant < 4; ++variant) {
    auto cfg = small_config("F-NB+I-NS", Activation::kTanh);
    if (variant == 0) cfg.acg = AggregationMode::kSymmetric;
    if (variant == 1) cfg.acg = AggregationMode::kSum;
    if (variant == 2) {
      cfg.per_layer_wbeh = true;
      cfg.edge_self_loop = true;
    }
    if (variant == 3) cfg.wint_through_gradient = true;
    const auto p = test_params(g, cfg, 9);
    const auto r = finite_difference_check(p, g, freq_of(g), cfg, 1e-5, 200, 1e-6);
    EXPECT_TRUE(r.passed()) << "variant " << variant << " max " << r.max_rel_error;
  }
}

TEST(FiniteDifference, RefusesLargeInstances) {
  const BehaviorGraph g(11, 2, std::vector<Triple>{});
  const auto cfg = small_config("F-NB+I-NS", Activation::kIdentity);
  EXPECT_THROW(finite_difference_check(test_params(g, cfg, 1), g, freq_of(g), cfg), ContractError);
}

TEST(Backward, RegularizationOnlyGradientIsTwoMuTheta) {
  const BehaviorGraph g(3, 3, std::vector<Triple>{});
  auto cfg = small_config("F-NB+U-NS", Activation::kLeakyRelu);
  cfg.c_fixed = 0.0;
  cfg.mu = 0.25;
  const auto p = test_params(g, cfg, 4);
  const auto r = compute_objective(p, g, freq_of(g), cfg, true);
  const auto gt = tensors(r.grad);
  const auto pt = tensors(p);
  for (std::size_t t = 0; t < gt.size(); ++t)
    for (std::size_t i = 0; i < gt[t].data.size(); ++i) EXPECT_EQ(gt[t].data[i], 0.5 * pt[t].data[i]);
}

TEST(Backward, PredictionWeightGradientAtZeroHead) {
  const auto g = random_graph(4, 3, 6);
  auto cfg = small_config("F-NB+I-NS", Activation::kLeakyRelu);
  cfg.mu = 0.0;
  cfg.lambda = {0.5, 1.0, 2.0};
  auto p = test_params(g, cfg, 2);
  p.pre.setZero();
  const auto r = compute_objective(p, g, freq_of(g), cfg, true);
  const auto& reps = r.trace.reps;
  for (Behavior k : kAllBehaviors) {
    RowVec<double> expect = RowVec<double>::Zero(cfg.d);
    for (const auto& [kk, u, v] : g.edges())
      if (kk == k) expect += reps.p_refined.row(u).cwiseProduct(reps.q_refined.row(v));
    expect *= -2.0 * cfg.c_pos * cfg.lambda[index_of(k)];
    const auto got = r.grad.pre.row(static_cast<Eigen::Index>(index_of(k)));
    EXPECT_LE((got - expect).norm(), 1e-12 * (1 + expect.norm()));
  }
}

TEST(Backward, DeterministicBitForBit) {
  const auto g = random_graph(8, 7, 30);
  const auto cfg = small_config("F-NB+I-NS", Activation::kLeakyRelu);
  const auto p = test_params(g, cfg, 3);
  const auto a = compute_objective(p, g, freq_of(g), cfg, true);
  const auto b = compute_objective(p, g, freq_of(g), cfg, true);
  EXPECT_TRUE(a.grad == b.grad);
  EXPECT_EQ(a.report.total, b.report.total);
}

TEST(Backward, NonFiniteGradientNamesTensor) {
  const BehaviorGraph g(1, 1, std::vector<Triple>{});
  auto grad = init_params<double>(1, 1, 3, 2, 1, 1).zeros_like();
  grad.fus(1, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    check_finite(grad);
    FAIL() << "expected NonFiniteError";
  } catch (const NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find("W_fus"), std::string::npos);
  }
}

TEST(Clip, GlobalNormRescalesOnlyAboveThreshold) {
  auto g = init_params<double>(2, 2, 3, 2, 1, 1).zeros_like();
  g.P(0, 0) = 3.0;
  g.fus(1, 1) = 4.0;
  EXPECT_DOUBLE_EQ(clip_global_norm(g, 10.0), 5.0);
  EXPECT_DOUBLE_EQ(g.P(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(clip_global_norm(g, 1.0), 5.0);
  EXPECT_NEAR(global_norm(g), 1.0, 1e-15);
  EXPECT_NEAR(g.fus(1, 1), 0.8, 1e-15);
  clip_global_norm(g, 0.0);
  EXPECT_NEAR(global_norm(g), 1.0, 1e-15);
}

struct Scalar {
  ParameterSet<double> params = init_params<double>(1, 1, 3, 1, 0, 1);
  ParameterSet<double> grad = params.zeros_like();
};

TEST(Adam, FirstStepMovesByLearningRate) {
  for (double g : {1e-3, 0.3, -7.0, 1e4}) {
    Scalar s;
    const double before = s.params.P(0, 0);
    auto state = AdamState<double>::for_params(s.params, 0.01);
    s.grad.P(0, 0) = g;
    adam_step(s.params, s.grad, state);
    const double delta = s.params.P(0, 0) - before;
    EXPECT_NEAR(std::abs(delta), 0.01, 0.01 * 1e-2) << g;
    EXPECT_LT(delta * g, 0.0);
    s.grad.P(0, 0) = 2 * g;
    Scalar s2;
    auto state2 = AdamState<double>::for_params(s2.params, 0.01);
    adam_step(s2.params, s.grad, state2);
    EXPECT_NEAR(s2.params.P(0, 0) - before, delta, 1e-6);
  }
}

TEST(Adam, ZeroGradientLeavesParamsAndDecaysMoments) {
  Scalar s;
  auto state = AdamState<double>::for_params(s.params, 0.1);
  state.m.P(0, 0) = 0.5;
  state.v.P(0, 0) = 0.0;
  state.step = 1;
  const auto before = s.params;
  s.params.Q(0, 0) = before.Q(0, 0);
  adam_step(s.params, s.grad, state);
  EXPECT_EQ(s.params.Q, before.Q);
  EXPECT_DOUBLE_EQ(state.m.P(0, 0), 0.45);
  EXPECT_EQ(state.step, 2u);
  EXPECT_EQ(state.m.Q(0, 0), 0.0);
}

TEST(Adam, ThreeStepHandTrace) {
  // Hand recurrence with lr 0.1, grads 1, 1, 1:
  //   m_t = 1 - 0.9^t, v_t = 1 - 0.999^t, so mhat = vhat = 1 each step.
  Scalar s;
  s.params.P(0, 0) = 0.5;
  auto state = AdamState<double>::for_params(s.params, 0.1);
  s.grad.P(0, 0) = 1.0;
  const double step = 0.1 / (1.0 + 1e-8);
  for (int t = 1; t <= 3; ++t) {
    adam_step(s.params, s.grad, state);
    EXPECT_NEAR(s.params.P(0, 0), 0.5 - t * step, 1e-15);
  }
  EXPECT_NEAR(state.m.P(0, 0), 1 - 0.729, 1e-15);
  EXPECT_NEAR(state.v.P(0, 0), 1 - 0.997002999, 1e-15);

  // Varying gradients 2, -1: step 2 m = 0.09*2... written out.
  Scalar r;
  r.params.P(0, 0) = 0.0;
  auto st = AdamState<double>::for_params(r.params, 0.1);
  r.grad.P(0, 0) = 2.0;
  adam_step(r.params, r.grad, st);
  r.grad.P(0, 0) = -1.0;
  adam_step(r.params, r.grad, st);
  const double m2 = 0.9 * 0.2 + 0.1 * -1.0;            // 0.08
  const double v2 = 0.999 * 0.004 + 0.001 * 1.0;       // 0.004996
  const double mhat = m2 / (1 - 0.81), vhat = v2 / (1 - 0.998001);
  const double expect = -0.1 * 2.0 / (2.0 + 1e-8) - 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
  EXPECT_NEAR(r.params.P(0, 0), expect, 1e-14);
}

TEST(Training, TotalLossDecreasesOnSmallData) {
  const auto g = random_graph(50, 50, 77);
  TrainConfig cfg;
  cfg.d = 8;
  cfg.L = 2;
  cfg.lr = 1e-2;
  auto p = init_params<double>(50, 50, 3, cfg.d, cfg.L, 1);
  auto state = AdamState<double>::for_params(p, cfg.lr);
  const auto freq = freq_of(g);
  const double start = compute_objective(p, g, freq, cfg, false).report.total;
  for (int step = 0; step < 200; ++step) {
    auto r = compute_objective(p, g, freq, cfg, true);
    clip_global_norm(r.grad, cfg.clip_norm);
    adam_step(p, r.grad, state);
  }
  EXPECT_LT(compute_objective(p, g, freq, cfg, false).report.total, start);
}

}  // namespace
}  // namespace hifirec
