// Copyright 2026 The HiFIRec Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic multi-behavior logs with planted purchase intent and noisy,
// popularity-driven views.
//
// Each user belongs to one topic and mostly purchases and adds items from
// it. Views mostly land on a small global set of "hot" items that are
// rarely purchased, plus uniform noise and a few on-topic items, so that
// view is the high-frequency, low-intention behavior.

#pragma once

#include "hifirec/dataset.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <vector>

namespace hifirec {

struct SyntheticSpec {
  std::size_t users = 500;
  std::size_t items = 200;
  std::size_t topics = 10;
  std::size_t min_purchases = 6;
  std::size_t max_purchases = 9;
  std::size_t adds_per_user = 4;
  double off_topic_purchase = 0.2;  // purchases drawn from any regular item
  double hot_purchase = 0.05;       // purchases landing on hot items
  std::size_t hot_items = 20;
  double view_ratio = 0.75;        // views among distinct triples
  double hot_view_share = 0.6;     // views landing on hot items
  double topic_view_share = 0.15;  // views landing on the user's topic
  double zipf = 1.0;               // popularity skew inside a topic
  std::uint64_t seed = 2024;
};

namespace detail {

inline std::size_t draw_weighted(std::mt19937_64& rng, const std::vector<double>& cumulative) {
  std::uniform_real_distribution<double> unit(0.0, cumulative.back());
  const double r = unit(rng);
  return static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), r) - cumulative.begin());
}

inline std::vector<double> zipf_cumulative(std::size_t n, double s) {
  std::vector<double> c(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) c[i] = acc += 1.0 / std::pow(static_cast<double>(i + 1), s);
  return c;
}

}  // namespace detail

// Item v belongs to topic v % topics; hot items are the last `hot_items`
// ids and belong to no topic. Labels are the decimal ids.
inline InteractionLog make_synthetic(const SyntheticSpec& spec = {}) {
  if (spec.items <= spec.hot_items || spec.topics == 0 || spec.users == 0)
    throw ConfigError("synthetic: need items > hot_items and at least one topic and user");
  const std::size_t regular = spec.items - spec.hot_items;
  std::vector<std::vector<ItemId>> topic_items(spec.topics);
  for (ItemId v = 0; v < regular; ++v) topic_items[v % spec.topics].push_back(v);
  for (const auto& t : topic_items)
    if (t.size() < spec.max_purchases + spec.adds_per_user)
      throw ConfigError("synthetic: topics too small for the purchase count");

  std::mt19937_64 rng(spec.seed);
  const auto hot_cum = detail::zipf_cumulative(spec.hot_items, spec.zipf);
  InteractionLog log;
  log.num_users = spec.users;
  log.num_items = spec.items;
  for (std::size_t u = 0; u < spec.users; ++u) log.user_labels.push_back(std::to_string(u));
  for (std::size_t v = 0; v < spec.items; ++v) log.item_labels.push_back(std::to_string(v));

  std::uniform_int_distribution<std::size_t> pick_topic(0, spec.topics - 1);
  std::uniform_int_distribution<std::size_t> pick_count(spec.min_purchases, spec.max_purchases);
  std::uniform_int_distribution<ItemId> pick_any(0, static_cast<ItemId>(spec.items - 1));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (std::size_t ui = 0; ui < spec.users; ++ui) {
    const auto u = static_cast<UserId>(ui);
    const auto& pool = topic_items[pick_topic(rng)];
    const auto cum = detail::zipf_cumulative(pool.size(), spec.zipf);

    std::set<ItemId> bought;
    const std::size_t n_buy = pick_count(rng);
    std::uniform_int_distribution<ItemId> pick_regular(0, static_cast<ItemId>(regular - 1));
    while (bought.size() < n_buy) {
      const double r = unit(rng);
      if (r < spec.hot_purchase) bought.insert(static_cast<ItemId>(regular + detail::draw_weighted(rng, hot_cum)));
      else if (r < spec.hot_purchase + spec.off_topic_purchase) bought.insert(pick_regular(rng));
      else bought.insert(pool[detail::draw_weighted(rng, cum)]);
    }
    std::vector<ItemId> purchases(bought.begin(), bought.end());
    std::shuffle(purchases.begin(), purchases.end(), rng);

    std::set<ItemId> added;
    while (added.size() < spec.adds_per_user) added.insert(pool[detail::draw_weighted(rng, cum)]);

    const std::size_t intent = purchases.size() + added.size();
    const auto n_view = static_cast<std::size_t>(
        std::lround(static_cast<double>(intent) * spec.view_ratio / (1.0 - spec.view_ratio)));
    std::set<ItemId> viewed;
    std::size_t guard = 0;
    while (viewed.size() < n_view && guard++ < 100 * n_view) {
      const double r = unit(rng);
      if (r < spec.hot_view_share) viewed.insert(static_cast<ItemId>(regular + detail::draw_weighted(rng, hot_cum)));
      else if (r < spec.hot_view_share + spec.topic_view_share) viewed.insert(pool[detail::draw_weighted(rng, cum)]);
      else viewed.insert(pick_any(rng));
    }

    // Views come first, then adds, then purchases in shuffled order.
    std::int64_t t = static_cast<std::int64_t>(ui) * 1000;
    for (ItemId v : viewed) log.events.push_back({u, v, Behavior::kView, t++});
    for (ItemId v : added) log.events.push_back({u, v, Behavior::kAdd, t++});
    for (ItemId v : purchases) log.events.push_back({u, v, Behavior::kPurchase, t++});
  }
  return log;
}

}  // namespace hifirec
