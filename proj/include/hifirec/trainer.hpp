// Copyright 2026 The HiFIRec Authors
// SPDX-License-Identifier: Apache-2.0
//
// Full-batch training loop with early stopping on validation HR@10.

#pragma once

#include "hifirec/config.hpp"
#include "hifirec/dataset.hpp"
#include "hifirec/eval.hpp"
#include "hifirec/graph.hpp"
#include "hifirec/loss.hpp"
#include "hifirec/model.hpp"
#include "hifirec/optim.hpp"

#include <chrono>
#include <functional>
#include <optional>
#include <vector>

namespace hifirec {

// Train split plus everything derived from it.
struct ExperimentData {
  SplitBundle split;
  FrequencyTable freq;
  BehaviorGraph graph;

  static ExperimentData from_split(SplitBundle split) {
    ExperimentData d;
    d.freq = behavior_frequency(split.train);
    d.graph = build_graph(split.train);
    d.split = std::move(split);
    return d;
  }
  std::size_t num_users() const { return split.train.num_users; }
  std::size_t num_items() const { return split.train.num_items; }
};

struct EpochLog {
  std::size_t epoch = 0;
  LossReport loss;
  double wall_ms = 0.0;
  double grad_norm = 0.0;
  std::optional<double> valid_hr10;
};

struct TrainResult {
  ParameterSet<float> params;  // best-on-validation when early stopping is on
  AdamState<float> adam;
  std::vector<EpochLog> history;  // entries 0..E; entry E is the loss after the last update
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

template <class T>
FusedReps<T> refined_reps(const ParameterSet<T>& params, const BehaviorGraph& graph, const TrainConfig& cfg) {
  return forward(params, graph, ModelOptions::from(cfg)).reps;
}

inline EvalResult evaluate_split(const ParameterSet<float>& params, const ExperimentData& data,
                                 const TrainConfig& cfg, bool test_split, std::vector<std::size_t> ks = {10, 50, 100},
                                 std::size_t threads = 1) {
  const auto reps = refined_reps(params, data.graph, cfg);
  const auto& held = test_split ? data.split.test : data.split.valid;
  const auto* exclude = (test_split && cfg.exclude_valid) ? &data.split.valid : nullptr;
  return evaluate(reps, params, data.graph, held, std::move(ks), exclude, threads);
}

using EpochCallback = std::function<void(const EpochLog&)>;

// `resume`, when given, continues from existing parameters and Adam state.
inline TrainResult train(const TrainConfig& cfg, const ExperimentData& data, const EpochCallback& on_epoch = {},
                         const std::pair<ParameterSet<float>, AdamState<float>>* resume = nullptr) {
  cfg.validate();
  TrainResult result;
  if (resume) {
    result.params = resume->first;
    result.adam = resume->second;
    result.adam.lr = cfg.lr;
  } else {
    result.params = init_params<float>(data.num_users(), data.num_items(), cfg.K, cfg.d, cfg.effective_layers(),
                                       cfg.seed, cfg.per_layer_wbeh);
    result.adam = AdamState<float>::for_params(result.params, cfg.lr);
  }

  const bool early_stop = cfg.patience > 0 && !data.split.valid.empty();
  double best_hr = -1.0;
  ParameterSet<float> best_params = result.params;
  std::size_t since_best = 0;

  using clock = std::chrono::steady_clock;
  for (std::size_t epoch = 0; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = clock::now();
    const bool last = epoch == cfg.epochs;
    auto obj = compute_objective<float>(result.params, data.graph, data.freq, cfg, !last);
    EpochLog log;
    log.epoch = epoch;
    log.loss = obj.report;
    if (!std::isfinite(log.loss.total)) throw NonFiniteError("loss at epoch " + std::to_string(epoch));
    if (!last) {
      check_finite(obj.grad);
      log.grad_norm = clip_global_norm(obj.grad, cfg.clip_norm);
      adam_step(result.params, obj.grad, result.adam);
      if (!result.params.all_finite()) throw NonFiniteError("parameters after step " + std::to_string(epoch));
    }
    if (early_stop && !last && (epoch + 1) % cfg.eval_every == 0) {
      const double hr = evaluate_split(result.params, data, cfg, false, {10}).hr_at(10);
      log.valid_hr10 = hr;
      if (hr > best_hr) {
        best_hr = hr;
        best_params = result.params;
        result.best_epoch = epoch + 1;
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        result.stopped_early = true;
      }
    }
    log.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    result.history.push_back(log);
    if (on_epoch) on_epoch(log);
    if (result.stopped_early) break;
  }
  if (early_stop) {
    result.params = std::move(best_params);
  } else {
    result.best_epoch = cfg.epochs;
  }
  return result;
}

}  // namespace hifirec
