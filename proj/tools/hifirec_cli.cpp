// Copyright 2026 The HiFIRec Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line driver: prepare, train, evaluate, ablate, grid, refstudy,
// report, synth. Results go to stdout as JSON lines.

#include "hifirec/hifirec.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace hifirec;

namespace {

// Flags shared by every command that trains.
struct TrainFlags {
  std::string config_file;
  std::vector<std::string> overrides;
  std::optional<double> lr, clip_norm, C, x, mu;
  std::optional<std::size_t> epochs, chunk_size, d, L, patience;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> acg, variant, activation, k_ref;
  bool edge_self_loop = false, per_layer_wbeh = false, wint_through_gradient = false,
       ref_denominator = false, exclude_valid = false;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "key = value config file (a frozen config.txt works)");
    app->add_option("--set", overrides, "extra key=value overrides, applied last");
    app->add_option("--lr", lr, "Adam learning rate");
    app->add_option("--epochs", epochs, "training epochs");
    app->add_option("--clip-norm", clip_norm, "global gradient norm clip (0 disables)");
    app->add_option("--chunk-size", chunk_size, "users per accumulation chunk");
    app->add_option("--acg", acg, "aggregation: mean, sum or sym");
    app->add_option("--variant", variant, "e.g. F-NB+I-NS");
    app->add_option("--activation", activation, "identity, relu, leaky_relu or tanh");
    app->add_option("--k-ref", k_ref, "reference behavior");
    app->add_option("--C", C, "negative weight scale");
    app->add_option("--x", x, "intention confidence exponent");
    app->add_option("--mu", mu, "L2 coefficient");
    app->add_option("--d", d, "embedding dimension");
    app->add_option("--L", L, "propagation layers");
    app->add_option("--patience", patience, "early stopping patience on valid HR@10 (0 disables)");
    app->add_option("--seed", seed, "random seed");
    app->add_flag("--edge-self-loop", edge_self_loop, "count the edge itself in the edge-update scale");
    app->add_flag("--per-layer-wbeh", per_layer_wbeh, "separate W_beh per layer");
    app->add_flag("--wint-through-gradient", wint_through_gradient, "let gradients reach W_int through the weights");
    app->add_flag("--eq10-ref-denominator", ref_denominator,
                  "normalize by the reference behavior total instead of the current one");
    app->add_flag("--exclude-valid", exclude_valid, "drop the validation item from test candidates");
  }

  TrainConfig resolve(TrainConfig base = {}) const {
    TrainConfig c = config_file.empty() ? base : read_config_file(config_file, base);
    auto set = [&](const char* key, const auto& opt) {
      if (!opt) return;
      std::ostringstream s;
      if constexpr (std::is_floating_point_v<std::decay_t<decltype(*opt)>>)
        s << detail::format_double(*opt);
      else
        s << *opt;
      set_config_value(c, key, s.str());
    };
    set("lr", lr);
    set("epochs", epochs);
    set("clip_norm", clip_norm);
    set("chunk_size", chunk_size);
    set("acg", acg);
    set("variant", variant);
    set("activation", activation);
    set("k_ref", k_ref);
    set("C", C);
    set("x", x);
    set("mu", mu);
    set("d", d);
    set("L", L);
    set("patience", patience);
    set("seed", seed);
    if (edge_self_loop) c.edge_self_loop = true;
    if (per_layer_wbeh) c.per_layer_wbeh = true;
    if (wint_through_gradient) c.wint_through_gradient = true;
    if (ref_denominator) c.ref_total_denominator = true;
    if (exclude_valid) c.exclude_valid = true;
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      set_config_value(c, detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)));
    }
    c.validate();
    return c;
  }
};

std::vector<std::size_t> parse_ks(const std::string& text) {
  std::vector<std::size_t> ks;
  for (const auto& f : detail::split_fields(text, ',')) {
    const std::string t = detail::trim(f);
    std::size_t k = 0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), k);
    if (ec != std::errc() || p != t.data() + t.size() || k == 0) throw ConfigError("bad K value '" + t + "'");
    ks.push_back(k);
  }
  if (ks.empty()) throw ConfigError("--k needs at least one value");
  return ks;
}

std::vector<double> parse_doubles(const std::string& text) {
  std::vector<double> out;
  for (const auto& f : detail::split_fields(text, ',')) out.push_back(detail::parse_double("list", detail::trim(f)));
  return out;
}

void emit(const json& j) { std::cout << j.dump() << '\n' << std::flush; }

void write_frozen_config(const fs::path& dir, const TrainConfig& cfg) {
  fs::create_directories(dir);
  auto out = detail::open_out(dir / "config.txt");
  write_config(out, cfg);
}

int run_prepare(const std::string& input, const std::string& out, std::size_t min_inter, std::size_t min_purch) {
  const InteractionLog raw = load_interactions(input);
  const InteractionLog filtered = filter_activity(raw, min_inter, min_purch);
  const DatasetStats stats = dataset_stats(filtered);
  const SplitBundle split = temporal_split(filtered);
  write_prepared(out, split, behavior_frequency(split.train), stats);
  json j = stats_json(stats);
  j["eval_users"] = split.test.size();
  j["excluded_users"] = split.excluded_users;
  emit(j);
  return 0;
}

int run_train(const std::string& data_dir, const std::string& out_dir, const TrainConfig& cfg,
              const std::string& resume_from) {
  const ExperimentData data = read_prepared(data_dir);
  const fs::path out(out_dir);
  write_frozen_config(out, cfg);
  auto loss_log = detail::open_out(out / "loss.jsonl");
  auto on_epoch = [&](const EpochLog& e) {
    const json j = epoch_json(e);
    loss_log << j.dump() << '\n';
    emit(j);
  };
  std::optional<std::pair<ParameterSet<float>, AdamState<float>>> resume;
  if (!resume_from.empty())
    resume.emplace(load_checkpoint(resume_from).params, load_optimizer_state(resume_from + ".adam", cfg.lr));
  const TrainResult r = train(cfg, data, on_epoch, resume ? &*resume : nullptr);
  const std::string model = (out / "model.bin").string();
  save_checkpoint(model, r.params, cfg.activation);
  save_optimizer_state(model + ".adam", r.adam, r.params, cfg.activation);
  json j;
  j["checkpoint"] = model;
  j["best_epoch"] = r.best_epoch;
  j["stopped_early"] = r.stopped_early;
  j["metrics"] = metrics_json(evaluate_split(r.params, data, cfg, true));
  emit(j);
  return 0;
}

int run_evaluate(const std::string& data_dir, const std::string& checkpoint, const std::string& split,
                 const std::string& ks, const TrainFlags& flags) {
  if (split != "valid" && split != "test") throw ConfigError("--split must be valid or test");
  TrainConfig base;
  const fs::path frozen = fs::path(checkpoint).parent_path() / "config.txt";
  if (fs::exists(frozen)) base = read_config_file(frozen.string());
  const TrainConfig cfg = flags.resolve(base);
  const ExperimentData data = read_prepared(data_dir);
  const Checkpoint ck = load_checkpoint(checkpoint);
  if (ck.header.num_users != data.num_users() || ck.header.num_items != data.num_items())
    throw ConfigError("checkpoint shape does not match the prepared data");
  TrainConfig eval_cfg = cfg;
  eval_cfg.activation = ck.activation();
  json j;
  j["split"] = split;
  j["checkpoint"] = checkpoint;
  j["metrics"] = metrics_json(evaluate_split(ck.params, data, eval_cfg, split == "test", parse_ks(ks)));
  emit(j);
  return 0;
}

std::string read_all(std::istream& in) {
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-behavior recommender with intensity-aware non-sampling training"};
  app.require_subcommand(1);

  std::string input, out, data_dir, checkpoint, split = "test", ks = "10,50,100", refs = "view,add,purchase",
                                                 c_list, x_list, resume_from, style = "overall";
  std::size_t min_inter = 10, min_purch = 5, parallel = 1, bins = 20;
  TrainFlags flags;
  SyntheticSpec synth;

  auto* prepare = app.add_subcommand("prepare", "filter, split and count a raw interaction log");
  prepare->add_option("--input", input, "user\\titem\\tbehavior\\ttimestamp file")->required();
  prepare->add_option("--out", out, "output directory")->required();
  prepare->add_option("--min-interactions", min_inter, "minimum interactions per user and item");
  prepare->add_option("--min-purchases", min_purch, "minimum purchases per user");

  auto* train_cmd = app.add_subcommand("train", "train one model and save a checkpoint");
  train_cmd->add_option("--data", data_dir, "prepared directory")->required();
  train_cmd->add_option("--out", out, "run directory")->required();
  train_cmd->add_option("--resume", resume_from, "checkpoint to continue from (reads <file>.adam too)");
  flags.attach(train_cmd);

  auto* eval_cmd = app.add_subcommand("evaluate", "score a checkpoint on valid or test");
  eval_cmd->add_option("--data", data_dir, "prepared directory")->required();
  eval_cmd->add_option("--checkpoint", checkpoint, "model.bin")->required();
  eval_cmd->add_option("--split", split, "valid or test");
  eval_cmd->add_option("--k", ks, "comma-separated cutoffs");
  flags.attach(eval_cmd);

  auto* ablate = app.add_subcommand("ablate", "train and test all six neighborhood x sampling variants");
  ablate->add_option("--data", data_dir, "prepared directory")->required();
  ablate->add_option("--out", out, "directory for the frozen config");
  ablate->add_option("--parallel", parallel, "variants trained concurrently");
  flags.attach(ablate);

  auto* grid = app.add_subcommand("grid", "sweep C and x");
  grid->add_option("--data", data_dir, "prepared directory")->required();
  grid->add_option("--out", out, "directory for the frozen config");
  grid->add_option("--c-values", c_list, "comma-separated C values (default 0.01,0.05,0.1,0.5,1)");
  grid->add_option("--x-values", x_list, "comma-separated x values (default 0.15,0.25,0.5,0.75,0.85)");
  grid->add_option("--parallel", parallel, "cells trained concurrently");
  flags.attach(grid);

  auto* refstudy = app.add_subcommand("refstudy", "negative-weight distributions per reference behavior");
  refstudy->add_option("--data", data_dir, "prepared directory")->required();
  refstudy->add_option("--out", out, "directory for the frozen config");
  refstudy->add_option("--refs", refs, "comma-separated reference behaviors");
  refstudy->add_option("--bins", bins, "histogram bins");
  flags.attach(refstudy);

  auto* report = app.add_subcommand("report", "render JSON-lines results as a table");
  report->add_option("--input", input, "JSON-lines file (stdin when omitted)");
  report->add_option("--style", style, "overall or ablation");

  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic raw log");
  synth_cmd->add_option("--out", out, "output TSV file")->required();
  synth_cmd->add_option("--users", synth.users);
  synth_cmd->add_option("--items", synth.items);
  synth_cmd->add_option("--topics", synth.topics);
  synth_cmd->add_option("--hot-items", synth.hot_items);
  synth_cmd->add_option("--view-ratio", synth.view_ratio);
  synth_cmd->add_option("--seed", synth.seed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*prepare) return run_prepare(input, out, min_inter, min_purch);
    if (*train_cmd) return run_train(data_dir, out, flags.resolve(), resume_from);
    if (*eval_cmd) return run_evaluate(data_dir, checkpoint, split, ks, flags);
    if (*ablate) {
      const TrainConfig cfg = flags.resolve();
      if (!out.empty()) write_frozen_config(out, cfg);
      const ExperimentData data = read_prepared(data_dir);
      for (const auto& r : run_ablation(cfg, data, parallel)) emit(variant_json(r));
      return 0;
    }
    if (*grid) {
      const TrainConfig cfg = flags.resolve();
      if (!out.empty()) write_frozen_config(out, cfg);
      const ExperimentData data = read_prepared(data_dir);
      grid_sweep(c_list.empty() ? default_c_values() : parse_doubles(c_list),
                 x_list.empty() ? default_x_values() : parse_doubles(x_list), cfg, data, parallel,
                 [](const GridCell& c) { emit(grid_cell_json(c)); });
      return 0;
    }
    if (*refstudy) {
      const TrainConfig cfg = flags.resolve();
      if (!out.empty()) write_frozen_config(out, cfg);
      std::vector<Behavior> chosen;
      for (const auto& f : detail::split_fields(refs, ',')) {
        const auto b = parse_behavior(detail::trim(f));
        if (!b) throw ConfigError("unknown behavior '" + f + "'");
        chosen.push_back(*b);
      }
      const ExperimentData data = read_prepared(data_dir);
      for (const auto& row : reference_behavior_study(chosen, cfg, data, bins)) emit(reference_row_json(row));
      return 0;
    }
    if (*report) {
      std::string text;
      if (input.empty()) {
        text = read_all(std::cin);
      } else {
        auto f = detail::open_in(input);
        text = read_all(f);
      }
      std::istringstream in(text);
      std::cout << render_report(read_metric_records(in), parse_report_style(style));
      return 0;
    }
    if (*synth_cmd) {
      const InteractionLog log = make_synthetic(synth);
      auto f = detail::open_out(out);
      for (const Event& e : log.events)
        f << log.user_labels[e.user] << '\t' << log.item_labels[e.item] << '\t' << behavior_name(e.behavior) << '\t'
          << e.timestamp << '\n';
      json j;
      j["events"] = log.events.size();
      j["users"] = log.num_users;
      j["items"] = log.num_items;
      emit(j);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
