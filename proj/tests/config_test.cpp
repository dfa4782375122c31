// Copyright 2026 The HiFIRec Authors
// SPDX-License-Identifier: Apache-2.0

#include "hifirec/config.hpp"

#include <gtest/gtest.h>

#include <sstream>

namespace hifirec {
namespace {

TEST(TrainConfig, DefaultsValidate) {
  const TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.d, 64u);
  EXPECT_EQ(c.L, 4u);
  EXPECT_DOUBLE_EQ(c.x, 0.5);
  EXPECT_EQ(c.k_ref, Behavior::kView);
  EXPECT_EQ(c.variant.name(), "F-NB+I-NS");
}

TEST(TrainConfig, RejectsOutOfRangeValues) {
  auto bad = [](auto mutate) {
    TrainConfig c;
    mutate(c);
    return c;
  };
  EXPECT_THROW(bad([](TrainConfig& c) { c.d = 0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.C = 0.0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.C = 1.5; }).validate(), ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.x = 1.0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.x = 0.0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.lambda = {0, 0, 0}; }).validate(), ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.lambda = {1, -0.1, 0}; }).validate(), ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.mu = -1; }).validate(), ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.K = 2; }).validate(), ConfigError);
  EXPECT_NO_THROW(bad([](TrainConfig& c) { c.L = 0; }).validate());
}

TEST(TrainConfig, WithoutNeighborhoodHasNoLayers) {
  TrainConfig c;
  c.variant = parse_variant("W-NB+U-NS");
  EXPECT_EQ(c.effective_layers(), 0u);
  c.variant = parse_variant("p-nb+i-ns");
  EXPECT_EQ(c.effective_layers(), 4u);
}

TEST(Variants, ParseAndCoverFullGrid) {
  EXPECT_EQ(parse_variant("F-NB+I-NS"), (VariantSpec{NeighborhoodMode::kFull, SamplingMode::kIntensity}));
  EXPECT_THROW(parse_variant("F-NB"), ConfigError);
  EXPECT_THROW(parse_variant("F-NB+I-NS+U-NS"), ConfigError);
  EXPECT_THROW(parse_variant("X-NB+I-NS"), ConfigError);
  const auto all = all_variants();
  ASSERT_EQ(all.size(), 6u);
  for (std::size_t i = 0; i < all.size(); ++i)
    for (std::size_t j = i + 1; j < all.size(); ++j) EXPECT_NE(all[i], all[j]);
  for (const auto& v : all) EXPECT_EQ(parse_variant(v.name()), v);
}

TEST(ConfigFile, RoundTripIsExact) {
  TrainConfig c;
  c.C = 0.05;
  c.x = 0.15;
  c.lambda = {0.1, 1.0 / 3.0, 0.7};
  c.mu = 1.0 / 7.0;
  c.lr = 3e-3;
  c.seed = 123456789012345ull;
  c.activation = Activation::kTanh;
  c.acg = AggregationMode::kSymmetric;
  c.variant = parse_variant("P-NB+U-NS");
  c.edge_self_loop = true;
  c.exclude_valid = true;
  c.k_ref = Behavior::kAdd;
  const std::string text = config_to_string(c);
  std::istringstream in(text);
  const TrainConfig back = read_config(in);
  EXPECT_EQ(config_to_string(back), text);
  EXPECT_EQ(back.lambda[1], c.lambda[1]);
  EXPECT_EQ(back.mu, c.mu);
  EXPECT_EQ(back.seed, c.seed);
}

TEST(ConfigFile, KeysMatchFieldNames) {
  const auto entries = config_entries(TrainConfig{});
  std::vector<std::string> keys;
  for (const auto& [k, v] : entries) keys.push_back(k);
  for (const char* expected : {"d", "L", "K", "C", "x", "k_ref", "lambda", "mu", "lr", "epochs", "patience", "seed",
                               "activation", "acg", "variant", "chunk_size"})
    EXPECT_NE(std::find(keys.begin(), keys.end(), expected), keys.end()) << expected;
}

TEST(ConfigFile, CommentsOverridesAndErrors) {
  std::istringstream in("# frozen\n\nlr = 0.5\n  epochs=7  \n");
  TrainConfig base;
  base.seed = 9;
  const auto c = read_config(in, base);
  EXPECT_DOUBLE_EQ(c.lr, 0.5);
  EXPECT_EQ(c.epochs, 7u);
  EXPECT_EQ(c.seed, 9u);

  std::istringstream unknown("learning_rate = 1\n");
  EXPECT_THROW(read_config(unknown), ConfigError);
  std::istringstream no_eq("lr 1\n");
  EXPECT_THROW(read_config(no_eq), ParseError);
  std::istringstream bad_num("lr = fast\n");
  EXPECT_THROW(read_config(bad_num), ConfigError);
  std::istringstream bad_lambda("lambda = 1,2\n");
  EXPECT_THROW(read_config(bad_lambda), ConfigError);
}

TEST(Activation, ValuesAndDerivatives) {
  EXPECT_DOUBLE_EQ(activate(Activation::kLeakyRelu, -2.0), -0.4);
  EXPECT_DOUBLE_EQ(activate(Activation::kLeakyRelu, 3.0), 3.0);
  EXPECT_DOUBLE_EQ(activate_grad(Activation::kLeakyRelu, -2.0), 0.2);
  EXPECT_DOUBLE_EQ(activate(Activation::kRelu, -2.0), 0.0);
  EXPECT_DOUBLE_EQ(activate_grad(Activation::kRelu, 2.0), 1.0);
  EXPECT_DOUBLE_EQ(activate(Activation::kIdentity, -2.0), -2.0);
  EXPECT_DOUBLE_EQ(activate_grad(Activation::kTanh, 0.5), 1.0 - std::tanh(0.5) * std::tanh(0.5));
  for (Activation a : {Activation::kIdentity, Activation::kRelu, Activation::kLeakyRelu, Activation::kTanh})
    EXPECT_EQ(parse_activation(to_string(a)), a);
  for (AggregationMode m : {AggregationMode::kMean, AggregationMode::kSum, AggregationMode::kSymmetric})
    EXPECT_EQ(parse_aggregation(to_string(m)), m);
}

}  // namespace
}  // namespace hifirec
