// Copyright 2026 The HiFIRec Authors
// SPDX-License-Identifier: Apache-2.0

#include "hifirec/model.hpp"

#include <gtest/gtest.h>

#include <numeric>
#include <random>

namespace hifirec {
namespace {

using Triple = std::tuple<Behavior, UserId, ItemId>;

ModelOptions identity_opts(NeighborhoodMode nb = NeighborhoodMode::kFull) {
  ModelOptions o;
  o.activation = Activation::kIdentity;
  o.neighborhood = nb;
  return o;
}

TEST(InitParams, ShapesAndStatistics) {
  const auto p = init_params<double>(300, 200, 3, 32, 2, 7);
  EXPECT_EQ(p.P.rows(), 300);
  EXPECT_EQ(p.Q.rows(), 200);
  EXPECT_EQ(p.edge.rows(), 3);
  EXPECT_EQ(p.beh.rows(), 3 * 32);
  EXPECT_EQ(p.theta.size(), 3);
  EXPECT_EQ(p.theta, Vec<double>::Zero(3));
  EXPECT_TRUE(p.intensity.isApprox(Vec<double>::Constant(32, 1.0 / 32)));

  const double mean = p.P.mean();
  const double sd = std::sqrt((p.P.array() - mean).square().mean());
  EXPECT_NEAR(mean, 0.0, 1e-3);
  EXPECT_NEAR(sd, 0.01, 5e-4);

  const double bound = std::sqrt(6.0 / 64.0);
  EXPECT_LE(p.fus.cwiseAbs().maxCoeff(), bound);
  EXPECT_GT(p.fus.cwiseAbs().maxCoeff(), 0.9 * bound);
  EXPECT_NEAR(p.fus.array().square().mean(), bound * bound / 3.0, 0.1 * bound * bound / 3.0);
}

TEST(InitParams, DeterministicPerSeed) {
  EXPECT_EQ(init_params<double>(10, 8, 3, 4, 2, 5), init_params<double>(10, 8, 3, 4, 2, 5));
  EXPECT_FALSE(init_params<double>(10, 8, 3, 4, 2, 5) == init_params<double>(10, 8, 3, 4, 2, 6));
  EXPECT_THROW(init_params<double>(0, 8, 3, 4, 2, 5), ConfigError);
  EXPECT_THROW(init_params<double>(3, 8, 2, 4, 2, 5), ConfigError);
  const auto per_layer = init_params<double>(3, 8, 3, 4, 2, 5, true);
  EXPECT_EQ(per_layer.beh.rows(), 2 * 3 * 4);
  EXPECT_TRUE(per_layer.per_layer_beh());
}

TEST(Fusion, ZeroLogitsGiveUniformWeights) {
  EXPECT_TRUE(softmax<double>(Vec<double>::Zero(5)).isApprox(Vec<double>::Constant(5, 0.2)));
  Vec<double> logits(2);
  logits << 10, 0;
  const auto a = softmax(logits);
  EXPECT_NEAR(a(0), std::exp(10.0) / (std::exp(10.0) + 1.0), 1e-15);
  EXPECT_NEAR(a.sum(), 1.0, 1e-15);
  logits << 1000, -1000;
  EXPECT_TRUE(softmax(logits).allFinite());
}

TEST(Propagation, SingleEdgeMeanIsElementwiseProduct) {
  const BehaviorGraph g(1, 1, {{Behavior::kView, 0, 0}});
  auto p = init_params<double>(1, 1, 3, 3, 1, 1);
  p.P << 1, 2, 3;
  p.Q << 4, 5, 6;
  p.edge.setZero();
  p.edge.row(0) << 0.5, -1, 2;
  const auto next = propagate_layer(initial_state(p), g, p, 0, identity_opts(NeighborhoodMode::kPartial));
  EXPECT_TRUE(next.p.isApprox((RowVec<double>(3) << 2, -5, 12).finished()));
  EXPECT_TRUE(next.q.isApprox((RowVec<double>(3) << 0.5, -2, 6).finished()));
  EXPECT_EQ(next.w, p.edge);
}

TEST(Propagation, IsolatedNodeKeepsEmbedding) {
  const BehaviorGraph g(2, 2, {{Behavior::kView, 0, 0}});
  const auto p = init_params<double>(2, 2, 3, 4, 1, 3);
  const auto next = propagate_layer(initial_state(p), g, p, 0, identity_opts());
  EXPECT_EQ(next.p.row(1), p.P.row(1));
  EXPECT_EQ(next.q.row(1), p.Q.row(1));
}

TEST(Propagation, ThreeNodeHandComputation) {
  // u0 views i0 and adds i1; u1 views i0.
  const BehaviorGraph g(2, 2, {{Behavior::kView, 0, 0}, {Behavior::kAdd, 0, 1}, {Behavior::kView, 1, 0}});
  auto p = init_params<double>(2, 2, 3, 2, 1, 1);
  p.P << 1, 0, 0, 2;
  p.Q << 3, 1, -1, 4;
  p.edge << 1, 2, 0.5, 0.5, 0, 0;
  p.beh.setIdentity();
  p.beh.middleRows(2, 2) *= 2.0;  // W_beh^add = 2 I
  const auto next = propagate_layer(initial_state(p), g, p, 0, identity_opts());
  // u0: mean of q0*w_view = (3,2) and q1*w_add = (-0.5,2) -> (1.25, 2)
  EXPECT_TRUE(next.p.row(0).isApprox((RowVec<double>(2) << 1.25, 2).finished()));
  EXPECT_TRUE(next.p.row(1).isApprox((RowVec<double>(2) << 3, 2).finished()));
  // i0: mean of p0*w_view=(1,0) and p1*w_view=(0,4)
  EXPECT_TRUE(next.q.row(0).isApprox((RowVec<double>(2) << 0.5, 2).finished()));
  EXPECT_TRUE(next.q.row(1).isApprox((RowVec<double>(2) << 0.5, 0).finished()));
  // view edges each see two adjacent edge slots: scale = mean |N_e| / (deg_u + deg_v).
  const auto s = edge_update_scales(g, false);
  EXPECT_TRUE(next.w.row(0).isApprox(s[0] * p.edge.row(0)));
  EXPECT_TRUE(next.w.row(1).isApprox(2.0 * s[1] * p.edge.row(1)));
  EXPECT_EQ(next.w.row(2), p.edge.row(2));
}

TEST(Propagation, LayerBeyondDepthIsContractError) {
  const BehaviorGraph g(1, 1, {{Behavior::kView, 0, 0}});
  const auto p = init_params<double>(1, 1, 3, 2, 2, 1);
  EXPECT_NO_THROW(propagate_layer(initial_state(p), g, p, 1, ModelOptions{}));
  EXPECT_THROW(propagate_layer(initial_state(p), g, p, 2, ModelOptions{}), ContractError);
}

TEST(Attention, SingletonTypeGetsAllWeight) {
  Mat<double> w(3, 2);
  w << 1, 0, 0, 1, 5, 5;
  RowVec<double> node(2);
  node << 0.3, -0.7;
  std::array<double, 3> a{};
  detail::attention_weights<double>(node, w, {0, 4, 0}, a.data());
  EXPECT_DOUBLE_EQ(a[1], 1.0);
  EXPECT_DOUBLE_EQ(a[0] + a[2], 0.0);
}

TEST(Attention, SymmetricKeysSplitEvenly) {
  Mat<double> w(3, 2);
  w << 1, 0, 0, 1, 0, 0;
  RowVec<double> node(2);
  node << 2, 2;  // equal logits for view and add
  std::array<double, 3> a{};
  detail::attention_weights<double>(node, w, {1, 1, 0}, a.data());
  EXPECT_DOUBLE_EQ(a[0], 0.5);
  EXPECT_DOUBLE_EQ(a[1], 0.5);
  detail::attention_weights<double>(node, w, {3, 1, 0}, a.data());
  EXPECT_DOUBLE_EQ(a[0], 0.75);
}

TEST(Attention, MatchesPerEdgeSoftmax) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 50; ++trial) {
    Mat<double> w(3, 4);
    RowVec<double> node(4);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = n(rng);
    for (Eigen::Index i = 0; i < 4; ++i) node(i) = n(rng);
    const std::array<std::size_t, 3> counts = {static_cast<std::size_t>(trial % 3), 2,
                                               static_cast<std::size_t>(trial % 4)};
    // Enumerate edges one by one.
    std::vector<double> logits;
    std::vector<std::size_t> type;
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t e = 0; e < counts[k]; ++e) {
        logits.push_back(node.dot(w.row(static_cast<Eigen::Index>(k))) / 2.0);
        type.push_back(k);
      }
    double z = 0;
    for (double l : logits) z += std::exp(l);
    std::array<double, 3> expect{};
    for (std::size_t e = 0; e < logits.size(); ++e) expect[type[e]] += std::exp(logits[e]) / z;
    std::array<double, 3> got{};
    detail::attention_weights<double>(node, w, counts, got.data());
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(got[k], expect[k], 1e-12);
  }
}

TEST(Predict, OnesGiveDimension) {
  const BehaviorGraph g(1, 1, {{Behavior::kView, 0, 0}});
  auto p = init_params<double>(1, 1, 3, 5, 0, 1);
  FusedReps<double> reps;
  reps.p_refined = Mat<double>::Ones(1, 5);
  reps.q_refined = Mat<double>::Ones(1, 5);
  p.pre.setOnes();
  EXPECT_DOUBLE_EQ(predict<double>(0, 0, Behavior::kAdd, reps, p), 5.0);
  p.pre.setZero();
  EXPECT_DOUBLE_EQ(predict<double>(0, 0, Behavior::kAdd, reps, p), 0.0);
  EXPECT_THROW(predict<double>(1, 0, Behavior::kAdd, reps, p), LookupError);
}

TEST(Predict, ScoreItemsMatchesPointwise) {
  std::mt19937_64 rng(3);
  std::vector<Triple> triples;
  for (UserId u = 0; u < 6; ++u) triples.emplace_back(Behavior::kView, u, u % 4);
  triples.emplace_back(Behavior::kPurchase, 2, 1);
  const BehaviorGraph g(6, 4, triples);
  const auto p = init_params<double>(6, 4, 3, 8, 2, 11);
  const auto trace = forward(p, g, ModelOptions{});
  for (UserId u = 0; u < 6; ++u)
    for (Behavior k : kAllBehaviors) {
      const auto s = score_items(u, k, trace.reps, p);
      for (ItemId v = 0; v < 4; ++v) EXPECT_NEAR(s(v), predict(u, v, k, trace.reps, p), 1e-15);
    }
}

TEST(Forward, ZeroLayersHandFormula) {
  // With L = 0 the fused rep is the embedding itself; P-NB context is ones.
  const BehaviorGraph g(1, 1, {{Behavior::kView, 0, 0}});
  auto p = init_params<double>(1, 1, 3, 2, 0, 1);
  p.P << 1, -2;
  p.Q << 3, 0.5;
  p.fus << 1, 2, 0, 1;
  p.pre.row(2) << 1, 1;
  const auto t = forward(p, g, identity_opts(NeighborhoodMode::kPartial));
  // p' = W_fus p = (1 - 4, -2) ; q' = (3 + 1, 0.5)
  EXPECT_TRUE(t.reps.p_refined.isApprox((Mat<double>(1, 2) << -3, -2).finished()));
  EXPECT_TRUE(t.reps.q_refined.isApprox((Mat<double>(1, 2) << 4, 0.5).finished()));
  EXPECT_DOUBLE_EQ(predict<double>(0, 0, Behavior::kPurchase, t.reps, p), -12.0 - 1.0);
}

TEST(Forward, FullModeUsesTypeContext) {
  // One type only: attention is 1, context is w_fused of that type.
  const BehaviorGraph g(1, 1, {{Behavior::kAdd, 0, 0}});
  auto p = init_params<double>(1, 1, 3, 2, 0, 1);
  p.P << 1, 2;
  p.edge.row(1) << 3, -1;
  p.fus.setIdentity();
  const auto t = forward(p, g, identity_opts());
  EXPECT_TRUE(t.reps.p_refined.isApprox((Mat<double>(1, 2) << 3, -2).finished()));
  EXPECT_DOUBLE_EQ(t.refine.user_attention(0, 1), 1.0);
  EXPECT_EQ(t.refine.isolated_users, 0u);
}

BehaviorGraph permute_graph(const BehaviorGraph& g, const std::vector<UserId>& pu, const std::vector<ItemId>& pv) {
  std::vector<Triple> t;
  for (const auto& [k, u, v] : g.edges()) t.emplace_back(k, pu[u], pv[v]);
  return BehaviorGraph(g.num_users(), g.num_items(), t);
}

template <class T>
ParameterSet<T> permute_params(const ParameterSet<T>& p, const std::vector<UserId>& pu,
                               const std::vector<ItemId>& pv) {
  ParameterSet<T> q = p;
  for (std::size_t u = 0; u < pu.size(); ++u) q.P.row(pu[u]) = p.P.row(static_cast<Eigen::Index>(u));
  for (std::size_t v = 0; v < pv.size(); ++v) q.Q.row(pv[v]) = p.Q.row(static_cast<Eigen::Index>(v));
  return q;
}

TEST(Forward, PermutationEquivariant) {
  std::mt19937_64 rng(21);
  std::bernoulli_distribution keep(0.3);
  std::vector<Triple> t;
  for (Behavior k : kAllBehaviors)
    for (UserId u = 0; u < 12; ++u)
      for (ItemId v = 0; v < 9; ++v)
        if (keep(rng)) t.emplace_back(k, u, v);
  const BehaviorGraph g(12, 9, t);
  std::vector<UserId> pu(12);
  std::vector<ItemId> pv(9);
  std::iota(pu.begin(), pu.end(), 0u);
  std::iota(pv.begin(), pv.end(), 0u);
  std::shuffle(pu.begin(), pu.end(), rng);
  std::shuffle(pv.begin(), pv.end(), rng);
  const auto p = init_params<double>(12, 9, 3, 6, 3, 8);
  for (AggregationMode acg : {AggregationMode::kMean, AggregationMode::kSymmetric}) {
    ModelOptions opts;
    opts.acg = acg;
    const auto a = forward(p, g, opts);
    const auto b = forward(permute_params(p, pu, pv), permute_graph(g, pu, pv), opts);
    for (UserId u = 0; u < 12; ++u)
      for (ItemId v = 0; v < 9; ++v)
        for (Behavior k : kAllBehaviors)
          EXPECT_NEAR(predict(u, v, k, a.reps, p), predict(pu[u], pv[v], k, b.reps, p), 1e-14);
  }
}

TEST(Forward, PermutationBitIdenticalWhenArithmeticIsExact) {
  // Small integer embeddings and a power-of-two mean keep every sum exact.
  const std::vector<Triple> t = {{Behavior::kView, 0, 0}, {Behavior::kView, 0, 1}, {Behavior::kView, 1, 1},
                                 {Behavior::kView, 1, 0}, {Behavior::kAdd, 2, 1},  {Behavior::kAdd, 2, 0}};
  const BehaviorGraph g(3, 2, t);
  auto p = init_params<double>(3, 2, 3, 2, 1, 1);
  p.P << 1, 2, 3, 4, 5, 6;
  p.Q << 2, -1, 1, 3;
  p.edge << 1, 1, 2, 1, 1, 1;
  p.fus.setIdentity();
  p.pre.setOnes();
  const std::vector<UserId> pu = {2, 0, 1};
  const std::vector<ItemId> pv = {1, 0};
  const auto opts = identity_opts(NeighborhoodMode::kPartial);
  const auto a = forward(p, g, opts);
  const auto b = forward(permute_params(p, pu, pv), permute_graph(g, pu, pv), opts);
  for (UserId u = 0; u < 3; ++u)
    for (ItemId v = 0; v < 2; ++v)
      EXPECT_EQ(predict(u, v, Behavior::kView, a.reps, p), predict(pu[u], pv[v], Behavior::kView, b.reps, p));
}

TEST(Forward, ShapeMismatchIsContractError) {
  const BehaviorGraph g(2, 2, {{Behavior::kView, 0, 0}});
  const auto p = init_params<double>(3, 2, 3, 2, 1, 1);
  EXPECT_THROW(forward(p, g, ModelOptions{}), ContractError);
}

}  // namespace
}  // namespace hifirec
