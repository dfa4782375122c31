// Copyright 2026 The HiFIRec Authors
// SPDX-License-Identifier: Apache-2.0
//
// Heterogeneous user-item-behavior graph built from a binarized train log.

#pragma once

#include "hifirec/core.hpp"
#include "hifirec/dataset.hpp"

#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <tuple>
#include <vector>

namespace hifirec {

// One CSR pair per behavior channel: items_of_user and users_of_item, both
// with neighbor ids in ascending order.
class BehaviorGraph {
 public:
  BehaviorGraph() = default;

  // `triples` must be distinct; order does not matter.
  BehaviorGraph(std::size_t num_users, std::size_t num_items,
                const std::vector<std::tuple<Behavior, UserId, ItemId>>& triples)
      : num_users_(num_users), num_items_(num_items) {
    for (std::size_t k = 0; k < kNumBehaviors; ++k) {
      user_offsets_[k].assign(num_users + 1, 0);
      item_offsets_[k].assign(num_items + 1, 0);
    }
    for (const auto& [b, u, v] : triples) {
      if (u >= num_users || v >= num_items) throw LookupError("edge endpoint out of range");
      ++user_offsets_[index_of(b)][u + 1];
      ++item_offsets_[index_of(b)][v + 1];
    }
    for (std::size_t k = 0; k < kNumBehaviors; ++k) {
      for (std::size_t u = 0; u < num_users; ++u) user_offsets_[k][u + 1] += user_offsets_[k][u];
      for (std::size_t v = 0; v < num_items; ++v) item_offsets_[k][v + 1] += item_offsets_[k][v];
      user_items_[k].resize(user_offsets_[k][num_users]);
      item_users_[k].resize(item_offsets_[k][num_items]);
    }
    auto user_fill = user_offsets_;
    auto item_fill = item_offsets_;
    for (const auto& [b, u, v] : triples) {
      const std::size_t k = index_of(b);
      user_items_[k][user_fill[k][u]++] = v;
      item_users_[k][item_fill[k][v]++] = u;
    }
    for (std::size_t k = 0; k < kNumBehaviors; ++k) {
      for (std::size_t u = 0; u < num_users; ++u)
        std::sort(user_items_[k].begin() + static_cast<std::ptrdiff_t>(user_offsets_[k][u]),
                  user_items_[k].begin() + static_cast<std::ptrdiff_t>(user_offsets_[k][u + 1]));
      for (std::size_t v = 0; v < num_items; ++v)
        std::sort(item_users_[k].begin() + static_cast<std::ptrdiff_t>(item_offsets_[k][v]),
                  item_users_[k].begin() + static_cast<std::ptrdiff_t>(item_offsets_[k][v + 1]));
    }
  }

  std::size_t num_users() const { return num_users_; }
  std::size_t num_items() const { return num_items_; }

  std::span<const ItemId> items_of_user(Behavior k, UserId u) const {
    const auto& off = user_offsets_[index_of(k)];
    return {user_items_[index_of(k)].data() + off[u], off[u + 1] - off[u]};
  }
  std::span<const UserId> users_of_item(Behavior k, ItemId v) const {
    const auto& off = item_offsets_[index_of(k)];
    return {item_users_[index_of(k)].data() + off[v], off[v + 1] - off[v]};
  }

  std::size_t user_degree(Behavior k, UserId u) const {
    return user_offsets_[index_of(k)][u + 1] - user_offsets_[index_of(k)][u];
  }
  std::size_t item_degree(Behavior k, ItemId v) const {
    return item_offsets_[index_of(k)][v + 1] - item_offsets_[index_of(k)][v];
  }
  // Degrees summed over behavior channels.
  std::size_t user_degree(UserId u) const {
    std::size_t d = 0;
    for (Behavior k : kAllBehaviors) d += user_degree(k, u);
    return d;
  }
  std::size_t item_degree(ItemId v) const {
    std::size_t d = 0;
    for (Behavior k : kAllBehaviors) d += item_degree(k, v);
    return d;
  }

  std::size_t edge_count(Behavior k) const { return user_items_[index_of(k)].size(); }
  std::size_t edge_count() const {
    std::size_t n = 0;
    for (Behavior k : kAllBehaviors) n += edge_count(k);
    return n;
  }

  bool has_edge(UserId u, ItemId v, Behavior k) const {
    if (u >= num_users_ || v >= num_items_) return false;
    const auto items = items_of_user(k, u);
    return std::binary_search(items.begin(), items.end(), v);
  }

  // |N_u| + |N_v| of the edge's endpoints within channel k.
  std::size_t edge_neighborhood_size(UserId u, ItemId v, Behavior k) const {
    if (!has_edge(u, v, k))
      throw LookupError("no " + std::string(behavior_name(k)) + " edge (" + std::to_string(u) +
                        ", " + std::to_string(v) + ")");
    return user_degree(k, u) + item_degree(k, v);
  }

  // Other edges of channel k sharing an endpoint with (u, v, k).
  std::size_t adjacent_edge_count(UserId u, ItemId v, Behavior k) const {
    return edge_neighborhood_size(u, v, k) - 2;
  }

  // Mean over the channel's edges of |N_e| / (|N_u| + |N_v|): the scale a
  // type-level edge embedding receives from one edge-update step.
  double edge_update_scale(Behavior k, bool include_self) const {
    const std::size_t edges = edge_count(k);
    if (edges == 0) return 0.0;
    double acc = 0.0;
    for (UserId u = 0; u < num_users_; ++u) {
      const double du = static_cast<double>(user_degree(k, u));
      for (ItemId v : items_of_user(k, u)) {
        const double denom = du + static_cast<double>(item_degree(k, v));
        acc += (denom - (include_self ? 1.0 : 2.0)) / denom;
      }
    }
    return acc / static_cast<double>(edges);
  }

  // Edges sorted by (behavior name, user, item).
  std::vector<std::tuple<Behavior, UserId, ItemId>> edges() const {
    std::vector<std::tuple<Behavior, UserId, ItemId>> out;
    out.reserve(edge_count());
    for (Behavior k : kAllBehaviors)
      for (UserId u = 0; u < num_users_; ++u)
        for (ItemId v : items_of_user(k, u)) out.emplace_back(k, u, v);
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
      return behavior_name(std::get<0>(a)) < behavior_name(std::get<0>(b));
    });
    return out;
  }

  friend bool operator==(const BehaviorGraph&, const BehaviorGraph&) = default;

 private:
  std::size_t num_users_ = 0;
  std::size_t num_items_ = 0;
  std::array<std::vector<std::size_t>, kNumBehaviors> user_offsets_;
  std::array<std::vector<std::size_t>, kNumBehaviors> item_offsets_;
  std::array<std::vector<ItemId>, kNumBehaviors> user_items_;
  std::array<std::vector<UserId>, kNumBehaviors> item_users_;
};

inline BehaviorGraph build_graph(const InteractionLog& train) {
  return BehaviorGraph(train.num_users, train.num_items, distinct_triples(train));
}

// Edge dump: `behavior \t user \t item`, one edge per line.
inline void write_edge_dump(std::ostream& out, const BehaviorGraph& graph) {
  for (const auto& [k, u, v] : graph.edges()) out << behavior_name(k) << '\t' << u << '\t' << v << '\n';
}

inline BehaviorGraph read_edge_dump(std::istream& in, std::size_t num_users, std::size_t num_items) {
  std::vector<std::tuple<Behavior, UserId, ItemId>> triples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_fields(line, '\t');
    if (fields.size() != 3) throw ParseError("edge dump rows have three fields", line_no);
    const auto k = parse_behavior(detail::trim(fields[0]));
    if (!k) throw SchemaError("line " + std::to_string(line_no) + ": unknown behavior");
    try {
      triples.emplace_back(*k, static_cast<UserId>(std::stoul(fields[1])),
                           static_cast<ItemId>(std::stoul(fields[2])));
    } catch (const std::logic_error&) {
      throw ParseError("malformed id", line_no);
    }
  }
  std::sort(triples.begin(), triples.end());
  triples.erase(std::unique(triples.begin(), triples.end()), triples.end());
  return BehaviorGraph(num_users, num_items, triples);
}

}  // namespace hifirec
