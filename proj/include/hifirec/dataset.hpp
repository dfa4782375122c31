// Copyright 2026 The HiFIRec Authors
// SPDX-License-Identifier: Apache-2.0
//
// Interaction log ingestion, activity filtering, leave-last-out temporal
// splitting and per-behavior item frequencies.

#pragma once

#include "hifirec/core.hpp"

#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

namespace hifirec {

struct Event {
  UserId user = 0;
  ItemId item = 0;
  Behavior behavior = Behavior::kView;
  std::int64_t timestamp = 0;

  friend bool operator==(const Event&, const Event&) = default;
};

struct InteractionLog {
  std::vector<Event> events;
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  // Original identifiers, indexed by the contiguous ids used in `events`.
  std::vector<std::string> user_labels;
  std::vector<std::string> item_labels;

  bool empty() const { return events.empty(); }
  friend bool operator==(const InteractionLog&, const InteractionLog&) = default;
};

// Column layout of a raw log file. Behavior labels are matched
// case-insensitively against `behavior_labels`.
struct Schema {
  std::size_t user_column = 0;
  std::size_t item_column = 1;
  std::size_t behavior_column = 2;
  std::size_t timestamp_column = 3;
  char delimiter = '\t';
  bool has_header = false;
  std::map<std::string, Behavior> behavior_labels = {
      {"view", Behavior::kView}, {"add", Behavior::kAdd}, {"purchase", Behavior::kPurchase}};
};

struct SplitBundle {
  InteractionLog train;
  std::map<UserId, ItemId> valid;
  std::map<UserId, ItemId> test;
  // Users kept in train but left out of evaluation (fewer than two distinct
  // purchased items, or nothing left in train after holding out).
  std::size_t excluded_users = 0;
};

struct FrequencyTable {
  // counts[k][v]: number of distinct users with behavior k on item v.
  std::array<std::vector<std::uint64_t>, kNumBehaviors> counts;
  std::array<std::uint64_t, kNumBehaviors> totals{};

  std::size_t num_items() const { return counts[0].size(); }
  std::uint64_t count(Behavior k, ItemId v) const { return counts[index_of(k)][v]; }
  std::uint64_t total(Behavior k) const { return totals[index_of(k)]; }
};

namespace detail {

// Keeps events whose user and item survive, re-indexing both contiguously
// in increasing order of their previous ids.
inline InteractionLog compact(const InteractionLog& log, const std::vector<bool>& keep_user,
                              const std::vector<bool>& keep_item) {
  std::vector<UserId> user_map(log.num_users, 0);
  std::vector<ItemId> item_map(log.num_items, 0);
  InteractionLog out;
  for (std::size_t u = 0; u < log.num_users; ++u) {
    if (!keep_user[u]) continue;
    user_map[u] = static_cast<UserId>(out.num_users++);
    out.user_labels.push_back(u < log.user_labels.size() ? log.user_labels[u] : std::to_string(u));
  }
  for (std::size_t v = 0; v < log.num_items; ++v) {
    if (!keep_item[v]) continue;
    item_map[v] = static_cast<ItemId>(out.num_items++);
    out.item_labels.push_back(v < log.item_labels.size() ? log.item_labels[v] : std::to_string(v));
  }
  out.events.reserve(log.events.size());
  for (const Event& e : log.events) {
    if (!keep_user[e.user] || !keep_item[e.item]) continue;
    out.events.push_back({user_map[e.user], item_map[e.item], e.behavior, e.timestamp});
  }
  return out;
}

}  // namespace detail

inline InteractionLog load_interactions(std::istream& in, const Schema& schema = {}) {
  InteractionLog log;
  std::unordered_map<std::string, UserId> user_index;
  std::unordered_map<std::string, ItemId> item_index;
  std::map<std::string, Behavior> labels;
  for (const auto& [name, b] : schema.behavior_labels) labels.emplace(to_lower(name), b);

  const std::size_t needed =
      1 + std::max({schema.user_column, schema.item_column, schema.behavior_column,
                    schema.timestamp_column});
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (schema.has_header && line_no == 1) continue;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_fields(line, schema.delimiter);
    if (fields.size() < needed)
      throw ParseError("expected at least " + std::to_string(needed) + " fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    const std::string user = detail::trim(fields[schema.user_column]);
    const std::string item = detail::trim(fields[schema.item_column]);
    const std::string label = to_lower(detail::trim(fields[schema.behavior_column]));
    const std::string ts = detail::trim(fields[schema.timestamp_column]);
    if (user.empty() || item.empty()) throw ParseError("empty user or item id", line_no);

    const auto it = labels.find(label);
    if (it == labels.end())
      throw SchemaError("line " + std::to_string(line_no) + ": unknown behavior label '" + label +
                        "'");
    std::int64_t timestamp = 0;
    try {
      std::size_t pos = 0;
      timestamp = std::stoll(ts, &pos);
      if (pos != ts.size()) throw std::invalid_argument(ts);
    } catch (const std::exception&) {
      throw ParseError("malformed timestamp '" + ts + "'", line_no);
    }

    auto [uit, u_new] = user_index.try_emplace(user, static_cast<UserId>(log.user_labels.size()));
    if (u_new) log.user_labels.push_back(user);
    auto [iit, i_new] = item_index.try_emplace(item, static_cast<ItemId>(log.item_labels.size()));
    if (i_new) log.item_labels.push_back(item);
    log.events.push_back({uit->second, iit->second, it->second, timestamp});
  }
  log.num_users = log.user_labels.size();
  log.num_items = log.item_labels.size();
  return log;
}

inline InteractionLog load_interactions(const std::string& path, const Schema& schema = {}) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return load_interactions(in, schema);
}

// Drops users with at most `min_interactions` events or fewer than
// `min_purchases` purchases, and items with at most `min_interactions`
// events, repeating until nothing changes.
inline InteractionLog filter_activity(const InteractionLog& log, std::size_t min_interactions = 10,
                                      std::size_t min_purchases = 5) {
  InteractionLog current = log;
  for (;;) {
    std::vector<std::size_t> user_events(current.num_users, 0), user_purchases(current.num_users, 0);
    std::vector<std::size_t> item_events(current.num_items, 0);
    for (const Event& e : current.events) {
      ++user_events[e.user];
      ++item_events[e.item];
      if (e.behavior == Behavior::kPurchase) ++user_purchases[e.user];
    }
    std::vector<bool> keep_user(current.num_users), keep_item(current.num_items);
    bool changed = false;
    for (std::size_t u = 0; u < current.num_users; ++u) {
      keep_user[u] = user_events[u] > min_interactions && user_purchases[u] >= min_purchases;
      changed |= !keep_user[u];
    }
    for (std::size_t v = 0; v < current.num_items; ++v) {
      keep_item[v] = item_events[v] > min_interactions;
      changed |= !keep_item[v];
    }
    if (!changed) break;
    current = detail::compact(current, keep_user, keep_item);
    if (current.empty()) break;
  }
  if (current.empty() || current.num_users == 0 || current.num_items == 0)
    throw EmptyDatasetError("activity filter removed every user or item");
  return current;
}

// Latest purchased item of each user goes to test, the second latest to
// valid; all their purchase events leave train. Ties on timestamp put the
// larger item id in the later slot.
inline SplitBundle temporal_split(const InteractionLog& log) {
  SplitBundle bundle;
  bundle.train.num_users = log.num_users;
  bundle.train.num_items = log.num_items;
  bundle.train.user_labels = log.user_labels;
  bundle.train.item_labels = log.item_labels;

  struct PurchaseRecord {
    std::int64_t latest = 0;
    std::size_t events = 0;
  };
  std::vector<std::map<ItemId, PurchaseRecord>> last_purchase(log.num_users);
  std::vector<std::size_t> events_per_user(log.num_users, 0);
  for (const Event& e : log.events) {
    ++events_per_user[e.user];
    if (e.behavior != Behavior::kPurchase) continue;
    auto [it, inserted] = last_purchase[e.user].try_emplace(e.item, PurchaseRecord{e.timestamp, 0});
    it->second.latest = std::max(it->second.latest, e.timestamp);
    ++it->second.events;
  }

  std::vector<std::set<ItemId>> held_out(log.num_users);
  for (std::size_t u = 0; u < log.num_users; ++u) {
    const auto& items = last_purchase[u];
    if (items.size() < 2) {
      if (events_per_user[u] > 0) ++bundle.excluded_users;
      continue;
    }
    std::vector<std::pair<std::int64_t, ItemId>> order;
    order.reserve(items.size());
    for (const auto& [item, rec] : items) order.emplace_back(rec.latest, item);
    std::sort(order.begin(), order.end());
    const ItemId test_item = order[order.size() - 1].second;
    const ItemId valid_item = order[order.size() - 2].second;
    const std::size_t held_events = items.at(test_item).events + items.at(valid_item).events;
    if (held_events == events_per_user[u]) {
      ++bundle.excluded_users;
      continue;
    }
    bundle.test[static_cast<UserId>(u)] = test_item;
    bundle.valid[static_cast<UserId>(u)] = valid_item;
    held_out[u] = {test_item, valid_item};
  }

  bundle.train.events.reserve(log.events.size());
  for (const Event& e : log.events) {
    if (e.behavior == Behavior::kPurchase && held_out[e.user].count(e.item)) continue;
    bundle.train.events.push_back(e);
  }
  return bundle;
}

// Distinct (user, item, behavior) triples, sorted by behavior, user, item.
inline std::vector<std::tuple<Behavior, UserId, ItemId>> distinct_triples(const InteractionLog& log) {
  std::vector<std::tuple<Behavior, UserId, ItemId>> triples;
  triples.reserve(log.events.size());
  for (const Event& e : log.events) triples.emplace_back(e.behavior, e.user, e.item);
  std::sort(triples.begin(), triples.end());
  triples.erase(std::unique(triples.begin(), triples.end()), triples.end());
  return triples;
}

inline FrequencyTable behavior_frequency(const InteractionLog& train) {
  FrequencyTable table;
  for (auto& c : table.counts) c.assign(train.num_items, 0);
  for (const auto& [k, u, v] : distinct_triples(train)) {
    ++table.counts[index_of(k)][v];
    ++table.totals[index_of(k)];
  }
  return table;
}

struct DatasetStats {
  std::size_t users = 0;
  std::size_t items = 0;
  std::array<std::uint64_t, kNumBehaviors> counts{};
  // Share of view triples among all behavior triples.
  double view_ratio = 0.0;
};

inline DatasetStats dataset_stats(const InteractionLog& log) {
  DatasetStats stats;
  stats.users = log.num_users;
  stats.items = log.num_items;
  std::uint64_t total = 0;
  for (const auto& [k, u, v] : distinct_triples(log)) {
    ++stats.counts[index_of(k)];
    ++total;
  }
  stats.view_ratio =
      total ? static_cast<double>(stats.counts[index_of(Behavior::kView)]) / static_cast<double>(total)
            : 0.0;
  return stats;
}

}  // namespace hifirec
