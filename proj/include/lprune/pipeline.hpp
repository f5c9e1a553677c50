// Copyright (c) 2026 The lprune Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lprune/bench.hpp"
#include "lprune/checkpoint.hpp"
#include "lprune/data.hpp"
#include "lprune/error.hpp"
#include "lprune/surgeon.hpp"
#include "lprune/trainer.hpp"

namespace lprune {

struct PipelineConfig {
  // Cumulative targets: fraction of the original BN channel count removed after each stage.
  std::vector<double> ratios;
  std::size_t initial_epochs = 20;  // sparsify+finetune before the first cut; 0 starts from g as is
  std::size_t epochs_per_stage = 10;
  TrainConfig train;  // lambda and optimizer settings for every phase
  FoldMethod fold_method = FoldMethod::composed;
  ComposeOptions compose;
  BetaMode beta_mode = BetaMode::discard;
  double abort_floor = 0.0;  // stop when a stage's test top1 falls below this
  TimingOptions timing;

  void validate() const {
    for (std::size_t i = 0; i < ratios.size(); ++i) {
      if (!(ratios[i] >= 0.0) || ratios[i] >= 1.0) throw InvalidArgument("pipeline ratios must be in [0, 1)");
      if (i && ratios[i] <= ratios[i - 1]) throw InvalidArgument("pipeline ratios must be strictly increasing");
    }
    train.validate();
  }

  nlohmann::json to_json() const {
    return {{"ratios", ratios},
            {"initial_epochs", initial_epochs},
            {"epochs_per_stage", epochs_per_stage},
            {"lambda", train.lambda},
            {"lr", train.lr},
            {"momentum", train.momentum},
            {"weight_decay", train.weight_decay},
            {"batch_size", train.batch_size},
            {"seed", train.seed},
            {"fold_method", to_string(fold_method)},
            {"paper_literal_1x1", compose.paper_literal_1x1},
            {"beta_mode", beta_mode == BetaMode::absorb ? "absorb" : "discard"},
            {"abort_floor", abort_floor}};
  }
};

struct PipelineData {
  const data::Dataset& train;
  const data::Dataset& holdout;
  const data::Dataset& test;
};

template <typename T>
struct StageResult {
  MetricsReport report;
  nlohmann::json surgery = nullptr;
  std::vector<EpochStats> epochs;
  const ModelGraph<T>* graph = nullptr;
};

template <typename T>
struct PipelineResult {
  ModelGraph<T> graph;
  std::vector<MetricsReport> reports;
  std::vector<nlohmann::json> surgery;
  bool aborted = false;
  std::string abort_reason;
};

struct PipelineHooks {
  std::function<void(const EpochStats&)> on_epoch;
  std::function<void(const std::string& stage)> on_stage_start;
};

namespace detail {

template <typename T>
std::size_t bn_channel_total(const ModelGraph<T>& g) {
  std::size_t n = 0;
  for (const auto& node : g.nodes) {
    if (node.kind == NodeKind::bn) n += node.bn().channels();
  }
  return n;
}

inline std::string stage_name(double ratio) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "pruned-%.0f%%", 100.0 * ratio);
  return buf;
}

}  // namespace detail

/// Sparsify+finetune, then for each ratio: cut to the cumulative target,
/// fold every single-channel sandwich, and finetune with the penalty still
/// on. Emits one report per stage; the first stage's timing is the baseline.
template <typename T>
PipelineResult<T> iterate_pipeline(ModelGraph<T> g, const PipelineData& d, const PipelineConfig& cfg,
                                   const PipelineHooks& hooks = {},
                                   const std::type_identity_t<std::function<void(const StageResult<T>&)>>& on_stage = {}) {
  cfg.validate();
  PipelineResult<T> res;
  const std::size_t n0 = detail::bn_channel_total(g);
  double baseline_seconds = 0.0;

  auto run_training = [&](ModelGraph<T>& graph, std::size_t epochs, std::vector<EpochStats>& log) {
    if (epochs == 0) return 0.0;
    const auto start = std::chrono::steady_clock::now();
    TrainConfig tc = cfg.train;
    tc.epochs = epochs;
    tc.seed = cfg.train.seed + 7919 * res.reports.size();
    Trainer<T> trainer(graph, tc);
    for (std::size_t e = 0; e < epochs; ++e) {
      log.push_back(trainer.train_epoch(d.train, d.holdout, e));
      if (hooks.on_epoch) hooks.on_epoch(log.back());
    }
    graph.drop_grads();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  auto make_report = [&](const ModelGraph<T>& graph, const std::string& stage, double train_s,
                         double wall_start_s) {
    MetricsReport r;
    r.stage = stage;
    r.top1 = evaluate(graph, d.test, cfg.train.stats).top1;
    r.parameters = graph.count_params();
    r.model_size_bytes = checkpoint_size(graph);
    const Timing t = time_inference(graph, cfg.timing);
    if (res.reports.empty()) baseline_seconds = t.seconds;
    r.seconds_per_batch = t.seconds;
    r.baseline_seconds_per_batch = baseline_seconds;
    r.inference_ratio = baseline_seconds / t.seconds;
    r.timing_batch = cfg.timing.batch;
    r.threads = cfg.timing.threads;
    r.reps = cfg.timing.reps;
    r.train_seconds = train_s;
    r.wall_seconds = wall_start_s;
    r.config = cfg.to_json();
    return r;
  };

  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

  {
    if (hooks.on_stage_start) hooks.on_stage_start("baseline");
    StageResult<T> st;
    const double ts = run_training(g, cfg.initial_epochs, st.epochs);
    g.validate();
    st.report = make_report(g, "baseline", ts, elapsed());
    st.graph = &g;
    res.reports.push_back(st.report);
    if (on_stage) on_stage(st);
  }

  for (double ratio : cfg.ratios) {
    const std::string name = detail::stage_name(ratio);
    if (hooks.on_stage_start) hooks.on_stage_start(name);
    const std::size_t n_cur = detail::bn_channel_total(g);
    const double already = static_cast<double>(n0 - n_cur);
    double r_eff = (ratio * static_cast<double>(n0) - already) / static_cast<double>(n_cur);
    r_eff = std::clamp(r_eff, 0.0, 0.999);

    const double t = select_threshold(g, r_eff);
    const PrunePlan plan = plan_prune(g, t, cfg.beta_mode);
    ModelGraph<T> pruned = apply_prune(g, plan);
    auto [folded, folds] = fold_all(std::move(pruned), cfg.fold_method, cfg.compose);

    StageResult<T> st;
    st.surgery = surgery_report(g, plan, folded, folds);
    st.surgery["stage"] = name;
    st.surgery["target_ratio"] = ratio;
    st.surgery["effective_ratio"] = r_eff;
    const double ts = run_training(folded, cfg.epochs_per_stage, st.epochs);
    folded.validate();
    st.report = make_report(folded, name, ts, elapsed());
    if (st.report.top1 < cfg.abort_floor) {
      res.aborted = true;
      char buf[160];
      std::snprintf(buf, sizeof buf, "stage %s top1 %.4f below abort floor %.4f; keeping previous graph",
                    name.c_str(), st.report.top1, cfg.abort_floor);
      res.abort_reason = buf;
      break;
    }
    g = std::move(folded);
    st.graph = &g;
    res.reports.push_back(st.report);
    res.surgery.push_back(st.surgery);
    if (on_stage) on_stage(st);
  }
  res.graph = std::move(g);
  return res;
}

}  // namespace lprune
