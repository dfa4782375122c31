// Copyright 2026 The HiFIRec Authors
// SPDX-License-Identifier: Apache-2.0
//
// Ablation variants, the (C, x) sweep and the reference-behavior study.

#pragma once

#include "hifirec/io.hpp"
#include "hifirec/trainer.hpp"

#include <future>
#include <vector>

namespace hifirec {

struct VariantResult {
  VariantSpec spec;
  EvalResult metrics;
  TrainResult training;
};

inline TrainConfig with_variant(TrainConfig cfg, const VariantSpec& spec) {
  cfg.variant = spec;
  return cfg;
}

inline VariantResult run_variant(const VariantSpec& spec, const TrainConfig& cfg, const ExperimentData& data,
                                 const EpochCallback& on_epoch = {}) {
  const TrainConfig run = with_variant(cfg, spec);
  VariantResult r{spec, {}, train(run, data, on_epoch)};
  r.metrics = evaluate_split(r.training.params, data, run, true);
  return r;
}

inline std::vector<VariantResult> run_ablation(const TrainConfig& cfg, const ExperimentData& data,
                                               std::size_t parallel = 1) {
  const auto specs = all_variants();
  std::vector<VariantResult> out(specs.size());
  if (parallel <= 1) {
    for (std::size_t i = 0; i < specs.size(); ++i) out[i] = run_variant(specs[i], cfg, data);
    return out;
  }
  for (std::size_t begin = 0; begin < specs.size(); begin += parallel) {
    std::vector<std::future<VariantResult>> jobs;
    for (std::size_t i = begin; i < std::min(specs.size(), begin + parallel); ++i)
      jobs.push_back(std::async(std::launch::async, [&, i] { return run_variant(specs[i], cfg, data); }));
    for (std::size_t i = 0; i < jobs.size(); ++i) out[begin + i] = jobs[i].get();
  }
  return out;
}

inline json variant_json(const VariantResult& r) {
  json j;
  j["variant"] = r.spec.name();
  j["best_epoch"] = r.training.best_epoch;
  j["metrics"] = metrics_json(r.metrics);
  return j;
}

inline const std::vector<double>& default_c_values() {
  static const std::vector<double> v{0.01, 0.05, 0.1, 0.5, 1.0};
  return v;
}
inline const std::vector<double>& default_x_values() {
  static const std::vector<double> v{0.15, 0.25, 0.5, 0.75, 0.85};
  return v;
}

struct GridCell {
  double C = 0.0;
  double x = 0.0;
  EvalResult metrics;
};

// One training run per (C, x) pair, row-major over C. Cells are independent;
// `parallel` > 1 runs that many at a time.
inline std::vector<GridCell> grid_sweep(const std::vector<double>& c_values, const std::vector<double>& x_values,
                                        const TrainConfig& cfg, const ExperimentData& data,
                                        std::size_t parallel = 1,
                                        const std::function<void(const GridCell&)>& on_cell = {}) {
  std::vector<GridCell> cells;
  for (double c : c_values)
    for (double x : x_values) cells.push_back({c, x, {}});
  auto run_cell = [&](GridCell& cell) {
    TrainConfig run = cfg;
    run.C = cell.C;
    run.x = cell.x;
    cell.metrics = evaluate_split(train(run, data).params, data, run, true);
  };
  const std::size_t width = std::max<std::size_t>(1, parallel);
  for (std::size_t begin = 0; begin < cells.size(); begin += width) {
    const std::size_t end = std::min(cells.size(), begin + width);
    if (width == 1) {
      run_cell(cells[begin]);
    } else {
      std::vector<std::future<void>> jobs;
      for (std::size_t i = begin; i < end; ++i)
        jobs.push_back(std::async(std::launch::async, [&, i] { run_cell(cells[i]); }));
      for (auto& j : jobs) j.get();
    }
    if (on_cell)
      for (std::size_t i = begin; i < end; ++i) on_cell(cells[i]);
  }
  return cells;
}

inline json grid_cell_json(const GridCell& c) {
  json j;
  j["C"] = c.C;
  j["x"] = c.x;
  j["metrics"] = metrics_json(c.metrics);
  return j;
}

struct WeightStats {
  double mean = 0.0;
  double stddev = 0.0;
  double cv = 0.0;  // stddev / mean
  double min = 0.0;
  double max = 0.0;
  std::vector<double> edges;  // histogram bin edges, bins + 1 values
  std::vector<std::size_t> histogram;
};

inline WeightStats weight_stats(const std::vector<double>& w, std::size_t bins = 20) {
  WeightStats s;
  if (w.empty()) return s;
  s.min = *std::min_element(w.begin(), w.end());
  s.max = *std::max_element(w.begin(), w.end());
  double sum = 0.0;
  for (double x : w) sum += x;
  s.mean = sum / static_cast<double>(w.size());
  double sq = 0.0;
  for (double x : w) sq += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(sq / static_cast<double>(w.size()));
  s.cv = s.mean > 0.0 ? s.stddev / s.mean : 0.0;
  bins = std::max<std::size_t>(1, bins);
  s.histogram.assign(bins, 0);
  const double width = (s.max - s.min) / static_cast<double>(bins);
  for (std::size_t b = 0; b <= bins; ++b) s.edges.push_back(s.min + width * static_cast<double>(b));
  for (double x : w) {
    std::size_t b = width > 0.0 ? static_cast<std::size_t>((x - s.min) / width) : 0;
    s.histogram[std::min(b, bins - 1)]++;
  }
  return s;
}

struct ReferenceStudyRow {
  Behavior reference = Behavior::kView;
  std::array<WeightStats, kNumBehaviors> weights;  // final c_v^{k-} per behavior
  std::array<std::vector<double>, kNumBehaviors> raw;
  EvalResult metrics;
};

// Trains once per reference behavior and reports the final negative-weight
// distributions.
inline std::vector<ReferenceStudyRow> reference_behavior_study(const std::vector<Behavior>& references,
                                                               const TrainConfig& cfg, const ExperimentData& data,
                                                               std::size_t bins = 20) {
  std::vector<ReferenceStudyRow> rows;
  for (Behavior ref : references) {
    TrainConfig run = cfg;
    run.k_ref = ref;
    run.variant.sampling = SamplingMode::kIntensity;
    const TrainResult tr = train(run, data);
    const auto reps = refined_reps(tr.params, data.graph, run);
    const NegativeWeightTable table = build_weight_table(run, data.freq, reps.q_refined, tr.params.intensity);
    ReferenceStudyRow row;
    row.reference = ref;
    for (Behavior k : kAllBehaviors) {
      row.raw[index_of(k)] = table.c_neg[index_of(k)];
      row.weights[index_of(k)] = weight_stats(table.c_neg[index_of(k)], bins);
    }
    row.metrics = evaluate_split(tr.params, data, run, true);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json reference_row_json(const ReferenceStudyRow& r) {
  json j;
  j["reference"] = std::string(behavior_name(r.reference));
  json w;
  for (Behavior k : kAllBehaviors) {
    const WeightStats& s = r.weights[index_of(k)];
    w[std::string(behavior_name(k))] = {{"mean", s.mean}, {"std", s.stddev}, {"cv", s.cv},      {"min", s.min},
                                        {"max", s.max},   {"edges", s.edges}, {"counts", s.histogram}};
  }
  j["weights"] = w;
  j["metrics"] = metrics_json(r.metrics);
  return j;
}

}  // namespace hifirec
