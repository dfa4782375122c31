// Copyright 2026 The HiFIRec Authors
// SPDX-License-Identifier: Apache-2.0
//
// Full-ranking leave-one-out evaluation of the purchase behavior.

#pragma once

#include "hifirec/graph.hpp"
#include "hifirec/model.hpp"

#include <map>
#include <numeric>
#include <stdexcept>
#include <thread>
#include <vector>

namespace hifirec {

inline constexpr Behavior kTargetBehavior = Behavior::kPurchase;

struct EvalResult {
  std::vector<std::size_t> ks;
  std::vector<double> hr;
  std::vector<double> ndcg;
  std::map<UserId, std::size_t> ranks;  // 1-based rank of the held-out item
  std::size_t users = 0;

  double hr_at(std::size_t k) const { return hr.at(position(k)); }
  double ndcg_at(std::size_t k) const { return ndcg.at(position(k)); }

 private:
  std::size_t position(std::size_t k) const {
    for (std::size_t i = 0; i < ks.size(); ++i)
      if (ks[i] == k) return i;
    throw LookupError("no metric at K = " + std::to_string(k));
  }
};

// Items ranked by descending score; ties by ascending item id. `excluded`
// must be sorted.
template <class T>
std::vector<ItemId> rank_items(const Vec<T>& scores, std::span<const ItemId> excluded) {
  std::vector<ItemId> order;
  order.reserve(static_cast<std::size_t>(scores.size()));
  for (ItemId v = 0; v < scores.size(); ++v)
    if (!std::binary_search(excluded.begin(), excluded.end(), v)) order.push_back(v);
  std::stable_sort(order.begin(), order.end(), [&](ItemId a, ItemId b) { return scores(a) > scores(b); });
  return order;
}

// Ranked candidates of user u for the purchase behavior, train purchases
// removed.
template <class T>
std::vector<ItemId> rank_for_user(UserId u, const FusedReps<T>& refined, const ParameterSet<T>& params,
                                  const BehaviorGraph& train_graph) {
  return rank_items(score_items(u, kTargetBehavior, refined, params),
                    train_graph.items_of_user(kTargetBehavior, u));
}

// Position of `target` in the list rank_items would produce, without
// sorting. `extra_excluded` is an additional item to drop (or none).
template <class T>
std::size_t rank_of_item(const Vec<T>& scores, ItemId target, std::span<const ItemId> excluded,
                         std::optional<ItemId> extra_excluded = std::nullopt) {
  const T s = scores(target);
  std::size_t rank = 1;
  for (ItemId v = 0; v < scores.size(); ++v) {
    if (v == target || (extra_excluded && v == *extra_excluded)) continue;
    if (std::binary_search(excluded.begin(), excluded.end(), v)) continue;
    if (scores(v) > s || (scores(v) == s && v < target)) ++rank;
  }
  return rank;
}

// HR@K and NDCG@K with a single relevant item per user.
inline std::pair<double, double> metrics(std::span<const std::size_t> ranks, std::size_t k) {
  if (ranks.empty()) throw std::domain_error("metrics undefined for an empty user set");
  double hits = 0.0, gain = 0.0;
  for (std::size_t r : ranks) {
    if (r == 0) throw ContractError("ranks are 1-based");
    if (r <= k) {
      hits += 1.0;
      gain += 1.0 / std::log2(static_cast<double>(r) + 1.0);
    }
  }
  const double n = static_cast<double>(ranks.size());
  return {hits / n, gain / n};
}

// Ranks every held-out user against all items not purchased in train.
// Users are split across `threads` workers; results do not depend on it.
template <class T>
EvalResult evaluate(const FusedReps<T>& refined, const ParameterSet<T>& params, const BehaviorGraph& train_graph,
                    const std::map<UserId, ItemId>& held_out, std::vector<std::size_t> ks = {10, 50, 100},
                    const std::map<UserId, ItemId>* also_exclude = nullptr, std::size_t threads = 1) {
  std::vector<std::pair<UserId, ItemId>> cases;
  for (const auto& [u, v] : held_out)
    if (u < train_graph.num_users() && v < train_graph.num_items()) cases.emplace_back(u, v);
  std::vector<std::size_t> ranks(cases.size(), 0);

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto [u, target] = cases[i];
      std::optional<ItemId> extra;
      if (also_exclude) {
        const auto it = also_exclude->find(u);
        if (it != also_exclude->end() && it->second != target) extra = it->second;
      }
      ranks[i] = rank_of_item(score_items(u, kTargetBehavior, refined, params), target,
                              train_graph.items_of_user(kTargetBehavior, u), extra);
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, cases.size()));
  if (threads == 1) {
    work(0, cases.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t per = (cases.size() + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back(work, std::min(cases.size(), t * per), std::min(cases.size(), (t + 1) * per));
    for (auto& th : pool) th.join();
  }

  EvalResult r;
  std::sort(ks.begin(), ks.end());
  r.ks = ks;
  r.users = cases.size();
  for (std::size_t i = 0; i < cases.size(); ++i) r.ranks[cases[i].first] = ranks[i];
  for (std::size_t k : ks) {
    const auto [hr, ndcg] = metrics(ranks, k);
    r.hr.push_back(hr);
    r.ndcg.push_back(ndcg);
  }
  return r;
}

}  // namespace hifirec
