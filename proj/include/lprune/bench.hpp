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
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lprune/blas.hpp"
#include "lprune/checkpoint.hpp"
#include "lprune/error.hpp"
#include "lprune/executor.hpp"
#include "lprune/graph.hpp"

namespace lprune {

struct MetricsReport {
  std::string stage;
  double top1 = 0.0;
  std::size_t parameters = 0;
  std::size_t model_size_bytes = 0;
  double inference_ratio = 1.0;  // baseline seconds / this model's seconds
  double seconds_per_batch = 0.0;
  double baseline_seconds_per_batch = 0.0;
  std::size_t timing_batch = 0;
  int threads = 1;
  std::size_t reps = 0;
  double train_seconds = 0.0;
  double wall_seconds = 0.0;
  nlohmann::json config = nlohmann::json::object();

  nlohmann::json to_json() const {
    return {{"stage", stage},
            {"top1", top1},
            {"parameters", parameters},
            {"model_size_bytes", model_size_bytes},
            {"inference_ratio", inference_ratio},
            {"seconds_per_batch", seconds_per_batch},
            {"baseline_seconds_per_batch", baseline_seconds_per_batch},
            {"timing_batch", timing_batch},
            {"threads", threads},
            {"reps", reps},
            {"train_seconds", train_seconds},
            {"wall_seconds", wall_seconds},
            {"config", config}};
  }

  static MetricsReport from_json(const nlohmann::json& j) {
    MetricsReport r;
    r.stage = j.at("stage").get<std::string>();
    r.top1 = j.at("top1").get<double>();
    r.parameters = j.at("parameters").get<std::size_t>();
    r.model_size_bytes = j.at("model_size_bytes").get<std::size_t>();
    r.inference_ratio = j.at("inference_ratio").get<double>();
    r.seconds_per_batch = j.value("seconds_per_batch", 0.0);
    r.baseline_seconds_per_batch = j.value("baseline_seconds_per_batch", 0.0);
    r.timing_batch = j.value("timing_batch", std::size_t{0});
    r.threads = j.value("threads", 1);
    r.reps = j.value("reps", std::size_t{0});
    r.train_seconds = j.value("train_seconds", 0.0);
    r.wall_seconds = j.value("wall_seconds", 0.0);
    r.config = j.value("config", nlohmann::json::object());
    return r;
  }
};

struct TimingOptions {
  std::size_t batch = 64;
  std::size_t reps = 7;
  std::size_t warmup = 2;
  int threads = 1;
  std::uint64_t seed = 0;
};

struct Timing {
  double seconds = 0.0;  // median seconds per forward batch
  std::vector<double> samples;
  TimingOptions options;
};

/// Median wall-clock time of an infer-mode forward pass on a random batch,
/// after warmup passes, with the BLAS thread count pinned.
template <typename T>
Timing time_inference(const ModelGraph<T>& g, TimingOptions opt = {}) {
  if (opt.reps < 3) throw InvalidArgument("time_inference needs reps >= 3");
  if (opt.warmup < 1) throw InvalidArgument("time_inference needs warmup >= 1");
  if (opt.batch < 1) throw InvalidArgument("time_inference needs batch >= 1");
  const int saved = blas::num_threads();
  blas::set_num_threads(opt.threads);
  Shape s = g.meta.input;
  s.n = opt.batch;
  Tensor<T> x(s, T{0});
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (auto& v : x.data()) v = static_cast<T>(nd(rng));

  Timing t;
  t.options = opt;
  try {
    for (std::size_t i = 0; i < opt.warmup + opt.reps; ++i) {
      const auto start = std::chrono::steady_clock::now();
      const Tensor<T> y = graph_forward(g, x, Mode::infer);
      const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      require_finite(y, "inference output");
      if (i >= opt.warmup) t.samples.push_back(dt);
    }
  } catch (...) {
    blas::set_num_threads(saved);
    throw;
  }
  blas::set_num_threads(saved);
  std::vector<double> sorted = t.samples;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size() / 2;
  t.seconds = sorted.size() % 2 ? sorted[m] : 0.5 * (sorted[m - 1] + sorted[m]);
  return t;
}

inline std::string format_count(std::size_t n) {
  char buf[32];
  if (n >= 1000000) {
    std::snprintf(buf, sizeof buf, "%.2fM", static_cast<double>(n) / 1e6);
  } else if (n >= 1000) {
    std::snprintf(buf, sizeof buf, "%.1fK", static_cast<double>(n) / 1e3);
  } else {
    std::snprintf(buf, sizeof buf, "%zu", n);
  }
  return buf;
}

inline std::string format_bytes(std::size_t n) {
  char buf[32];
  if (n >= (1u << 20)) {
    std::snprintf(buf, sizeof buf, "%.1fMB", static_cast<double>(n) / (1 << 20));
  } else if (n >= 1024) {
    std::snprintf(buf, sizeof buf, "%.1fKB", static_cast<double>(n) / 1024.0);
  } else {
    std::snprintf(buf, sizeof buf, "%zuB", n);
  }
  return buf;
}

inline const char* kReportHeader[] = {"Model", "Top1 (%)", "Parameters", "Model size", "Inference ratio"};

/// Comparison table, one row per report, as a pipe-delimited text table.
inline std::string render_table(const std::vector<MetricsReport>& reports) {
  std::vector<std::vector<std::string>> rows;
  rows.emplace_back(std::begin(kReportHeader), std::end(kReportHeader));
  for (const auto& r : reports) {
    char top1[32], ratio[32];
    std::snprintf(top1, sizeof top1, "%.2f", 100.0 * r.top1);
    std::snprintf(ratio, sizeof ratio, "%.2fx", r.inference_ratio);
    rows.push_back({r.stage, top1, format_count(r.parameters), format_bytes(r.model_size_bytes), ratio});
  }
  std::vector<std::size_t> width(rows.front().size(), 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream os;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      os << (c ? " | " : "") << row[c] << std::string(width[c] - row[c].size(), ' ');
    }
    os << '\n';
  };
  emit(rows.front());
  for (std::size_t c = 0; c < width.size(); ++c) os << (c ? "-|-" : "") << std::string(width[c], '-');
  os << '\n';
  for (std::size_t i = 1; i < rows.size(); ++i) emit(rows[i]);
  return os.str();
}

inline std::string render_csv(const std::vector<MetricsReport>& reports) {
  std::ostringstream os;
  os << "model,top1_percent,parameters,model_size_bytes,inference_ratio\n";
  for (const auto& r : reports) {
    char line[256];
    std::snprintf(line, sizeof line, "%s,%.4f,%zu,%zu,%.6f\n", r.stage.c_str(), 100.0 * r.top1, r.parameters,
                  r.model_size_bytes, r.inference_ratio);
    os << line;
  }
  return os.str();
}

}  // namespace lprune
