// Copyright 2026 The HiFIRec Authors
// SPDX-License-Identifier: Apache-2.0
//
// Prepared dataset directories and JSON encodings of reports.
//
// A prepared directory holds:
//   train.tsv   user \t item \t behavior \t timestamp   (contiguous ids)
//   valid.tsv   user \t item
//   test.tsv    user \t item
//   freq.tsv    behavior \t item \t count               (nonzero counts only)
//   users.tsv / items.tsv   id \t original label
//   stats.json  users, items, per-behavior counts, view ratio

#pragma once

#include "hifirec/dataset.hpp"
#include "hifirec/eval.hpp"
#include "hifirec/loss.hpp"
#include "hifirec/trainer.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <string>

namespace hifirec {

using json = nlohmann::ordered_json;

inline json stats_json(const DatasetStats& s) {
  json j;
  j["users"] = s.users;
  j["items"] = s.items;
  for (Behavior k : kAllBehaviors) j[std::string(behavior_name(k))] = s.counts[index_of(k)];
  j["view_ratio"] = s.view_ratio;
  return j;
}

inline json metrics_json(const EvalResult& r) {
  json j;
  for (std::size_t i = 0; i < r.ks.size(); ++i) {
    j["HR@" + std::to_string(r.ks[i])] = r.hr[i];
    j["NDCG@" + std::to_string(r.ks[i])] = r.ndcg[i];
  }
  j["users"] = r.users;
  return j;
}

inline json epoch_json(const EpochLog& log) {
  json j;
  j["epoch"] = log.epoch;
  for (Behavior k : kAllBehaviors)
    j["L_" + std::string(behavior_name(k))] = log.loss.per_behavior[index_of(k)];
  j["reg"] = log.loss.regularization;
  j["total"] = log.loss.total;
  j["wall_ms"] = log.wall_ms;
  return j;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}
inline std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  return in;
}

inline std::map<UserId, ItemId> read_pairs(const std::filesystem::path& p, std::size_t users, std::size_t items) {
  auto in = open_in(p);
  std::map<UserId, ItemId> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_fields(line, '\t');
    if (f.size() != 2) throw ParseError(p.filename().string() + ": expected user \\t item", line_no);
    const auto u = static_cast<UserId>(std::stoul(f[0]));
    const auto v = static_cast<ItemId>(std::stoul(f[1]));
    if (u >= users || v >= items) throw ParseError(p.filename().string() + ": id out of range", line_no);
    out[u] = v;
  }
  return out;
}

inline std::vector<std::string> read_labels(const std::filesystem::path& p, std::size_t n) {
  std::vector<std::string> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = std::to_string(i);
  if (!std::filesystem::exists(p)) return labels;
  auto in = open_in(p);
  std::string line;
  while (std::getline(in, line)) {
    const auto f = split_fields(line, '\t');
    if (f.size() == 2) {
      const std::size_t i = std::stoul(f[0]);
      if (i < n) labels[i] = f[1];
    }
  }
  return labels;
}

}  // namespace detail

inline void write_prepared(const std::filesystem::path& dir, const SplitBundle& split, const FrequencyTable& freq,
                           const DatasetStats& stats) {
  std::filesystem::create_directories(dir);
  {
    auto out = detail::open_out(dir / "train.tsv");
    for (const Event& e : split.train.events)
      out << e.user << '\t' << e.item << '\t' << behavior_name(e.behavior) << '\t' << e.timestamp << '\n';
  }
  for (const auto& [name, pairs] : {std::pair{"valid.tsv", &split.valid}, std::pair{"test.tsv", &split.test}}) {
    auto out = detail::open_out(dir / name);
    for (const auto& [u, v] : *pairs) out << u << '\t' << v << '\n';
  }
  {
    auto out = detail::open_out(dir / "freq.tsv");
    for (Behavior k : kAllBehaviors)
      for (std::size_t v = 0; v < freq.num_items(); ++v)
        if (freq.counts[index_of(k)][v]) out << behavior_name(k) << '\t' << v << '\t' << freq.counts[index_of(k)][v] << '\n';
  }
  {
    auto out = detail::open_out(dir / "users.tsv");
    for (std::size_t u = 0; u < split.train.user_labels.size(); ++u) out << u << '\t' << split.train.user_labels[u] << '\n';
  }
  {
    auto out = detail::open_out(dir / "items.tsv");
    for (std::size_t v = 0; v < split.train.item_labels.size(); ++v) out << v << '\t' << split.train.item_labels[v] << '\n';
  }
  json j = stats_json(stats);
  j["eval_users"] = split.test.size();
  j["excluded_users"] = split.excluded_users;
  detail::open_out(dir / "stats.json") << j.dump(2) << '\n';
}

inline ExperimentData read_prepared(const std::filesystem::path& dir) {
  json stats;
  detail::open_in(dir / "stats.json") >> stats;
  const std::size_t users = stats.at("users").get<std::size_t>();
  const std::size_t items = stats.at("items").get<std::size_t>();

  SplitBundle split;
  Schema schema;
  auto in = detail::open_in(dir / "train.tsv");
  // Ids in train.tsv are already contiguous; load by position and restore them.
  InteractionLog raw = load_interactions(in, schema);
  split.train.num_users = users;
  split.train.num_items = items;
  split.train.user_labels = detail::read_labels(dir / "users.tsv", users);
  split.train.item_labels = detail::read_labels(dir / "items.tsv", items);
  split.train.events.reserve(raw.events.size());
  for (const Event& e : raw.events) {
    const auto u = static_cast<UserId>(std::stoul(raw.user_labels[e.user]));
    const auto v = static_cast<ItemId>(std::stoul(raw.item_labels[e.item]));
    if (u >= users || v >= items) throw ParseError("train.tsv: id out of range", 0);
    split.train.events.push_back({u, v, e.behavior, e.timestamp});
  }
  split.valid = detail::read_pairs(dir / "valid.tsv", users, items);
  split.test = detail::read_pairs(dir / "test.tsv", users, items);
  split.excluded_users = stats.value("excluded_users", std::size_t{0});
  return ExperimentData::from_split(std::move(split));
}

// Full preparation pipeline: load, filter, split, count.
inline ExperimentData prepare_dataset(const InteractionLog& raw, std::size_t min_interactions, std::size_t min_purchases,
                                      DatasetStats* stats_out = nullptr) {
  const InteractionLog filtered = filter_activity(raw, min_interactions, min_purchases);
  if (stats_out) *stats_out = dataset_stats(filtered);
  return ExperimentData::from_split(temporal_split(filtered));
}

}  // namespace hifirec
