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
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lprune/data.hpp"
#include "lprune/error.hpp"
#include "lprune/executor.hpp"
#include "lprune/graph.hpp"
#include "lprune/ops/loss.hpp"
#include "lprune/ops/sgd.hpp"

namespace lprune {

enum class LambdaSchedule { constant, linear_warmup };

struct TrainConfig {
  double lambda = 1e-4;  // weight of the L1 penalty on BN scales
  LambdaSchedule lambda_schedule = LambdaSchedule::constant;
  std::size_t warmup_epochs = 5;  // linear_warmup ramps lambda from 0 over this many epochs
  bool penalty = true;            // false trains without the penalty term at all
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;  // conv and fc tensors only
  std::vector<double> lr_milestones{0.5, 0.75};  // fractions of `epochs`
  double lr_gamma = 0.1;
  std::size_t epochs = 20;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  bool augment = true;
  data::ChannelStats stats = data::kCifar10Stats;

  void validate() const {
    if (!(lambda >= 0.0)) throw InvalidArgument("lambda must be non-negative");
    if (batch_size < 1) throw InvalidArgument("batch_size must be at least 1");
    if (!(lr >= 0.0)) throw InvalidArgument("learning rate must be non-negative");
  }

  double lambda_at(std::size_t epoch) const {
    if (!penalty) return 0.0;
    if (lambda_schedule == LambdaSchedule::linear_warmup && warmup_epochs > 0 && epoch < warmup_epochs) {
      return lambda * static_cast<double>(epoch + 1) / static_cast<double>(warmup_epochs);
    }
    return lambda;
  }

  double lr_at(std::size_t epoch) const {
    double rate = lr;
    for (double m : lr_milestones) {
      if (static_cast<double>(epoch) >= m * static_cast<double>(epochs)) rate *= lr_gamma;
    }
    return rate;
  }
};

/// Sum of |alpha| over every BN channel in the graph.
template <typename T>
double l1_penalty(const ModelGraph<T>& g) {
  double total = 0.0;
  for (const auto& n : g.nodes) {
    if (n.kind != NodeKind::bn) continue;
    for (T a : n.bn().alpha.data()) total += std::abs(static_cast<double>(a));
  }
  return total;
}

/// grad(alpha) += lambda * sign(alpha), with sign(0) = 0.
template <typename T>
void apply_l1_subgradient(ModelGraph<T>& g, double lambda) {
  if (lambda == 0.0) return;
  const T lam = static_cast<T>(lambda);
  for (auto& n : g.nodes) {
    if (n.kind != NodeKind::bn) continue;
    auto& alpha = n.bn().alpha;
    auto grad = alpha.grad();
    for (std::size_t i = 0; i < alpha.numel(); ++i) {
      const T a = alpha[i];
      if (a > T{0}) {
        grad[i] += lam;
      } else if (a < T{0}) {
        grad[i] -= lam;
      }
    }
  }
}

/// Distribution of |alpha| across the network.
struct GammaStats {
  static constexpr std::array<double, 4> kLadder{1e-1, 1e-2, 1e-3, 1e-4};
  // Histogram bin edges for |alpha|; the last bin is open-ended.
  static constexpr std::array<double, 6> kBinEdges{0.0, 1e-4, 1e-3, 1e-2, 1e-1, 1.0};

  struct Layer {
    int node = 0;
    std::string name;
    std::array<std::size_t, kBinEdges.size()> histogram{};
  };

  std::vector<Layer> layers;
  std::vector<double> sorted_abs;
  std::array<std::size_t, kLadder.size()> below{};  // count with |alpha| < kLadder[i]

  std::size_t count_below(double t) const {
    return static_cast<std::size_t>(std::lower_bound(sorted_abs.begin(), sorted_abs.end(), t) -
                                    sorted_abs.begin());
  }
  double median() const {
    if (sorted_abs.empty()) return 0.0;
    const std::size_t m = sorted_abs.size() / 2;
    return sorted_abs.size() % 2 ? sorted_abs[m] : 0.5 * (sorted_abs[m - 1] + sorted_abs[m]);
  }
};

template <typename T>
GammaStats gamma_stats(const ModelGraph<T>& g) {
  GammaStats s;
  for (const auto& n : g.nodes) {
    if (n.kind != NodeKind::bn) continue;
    GammaStats::Layer layer{n.id, n.name, {}};
    for (T a : n.bn().alpha.data()) {
      const double v = std::abs(static_cast<double>(a));
      s.sorted_abs.push_back(v);
      std::size_t bin = 0;
      while (bin + 1 < GammaStats::kBinEdges.size() && v >= GammaStats::kBinEdges[bin + 1]) ++bin;
      ++layer.histogram[bin];
    }
    s.layers.push_back(std::move(layer));
  }
  std::sort(s.sorted_abs.begin(), s.sorted_abs.end());
  for (std::size_t i = 0; i < GammaStats::kLadder.size(); ++i) s.below[i] = s.count_below(GammaStats::kLadder[i]);
  return s;
}

struct EvalResult {
  double loss = 0.0;
  double top1 = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
};

/// Infer-mode cross-entropy and top-1 accuracy over every record of `ds`.
template <typename T>
EvalResult evaluate(const ModelGraph<T>& g, const data::Dataset& ds,
                    const data::ChannelStats& stats = data::kCifar10Stats, std::size_t batch = 250) {
  EvalResult r;
  r.total = ds.size();
  if (ds.size() == 0) return r;
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 unused;
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < ds.size(); start += batch) {
    const std::size_t len = std::min(batch, ds.size() - start);
    auto [x, y] = data::make_batch<T>(ds, std::span<const std::size_t>(idx).subspan(start, len), stats,
                                      false, unused);
    const Tensor<T> logits = graph_forward(g, x, Mode::infer);
    const auto res = softmax_cross_entropy(logits, std::span<const std::int32_t>(y));
    loss_sum += res.loss * static_cast<double>(len);
    r.correct += static_cast<std::size_t>(std::llround(res.top1 * static_cast<double>(len)));
  }
  r.loss = loss_sum / static_cast<double>(ds.size());
  r.top1 = static_cast<double>(r.correct) / static_cast<double>(ds.size());
  return r;
}

struct EpochStats {
  std::size_t epoch = 0;
  double loss_normal = 0.0;  // held-out cross-entropy at epoch end
  double loss_total = 0.0;   // loss_normal + lambda * l1_penalty
  double top1 = 0.0;         // held-out accuracy at epoch end
  double train_loss = 0.0;   // mean training cross-entropy over the epoch
  double lambda = 0.0;
  double lr = 0.0;
  std::size_t steps = 0;
  GammaStats gamma;

  nlohmann::json to_json() const {
    return {{"epoch", epoch},
            {"loss_normal", loss_normal},
            {"loss_total", loss_total},
            {"top1", top1},
            {"gamma_below_1e-2", gamma.below[1]},
            {"gamma_below_1e-3", gamma.below[2]},
            {"train_loss", train_loss},
            {"lambda", lambda},
            {"lr", lr}};
  }
};

/// Minibatch SGD on Loss_normal + lambda * sum|alpha|. Owns the momentum
/// buffers for one graph; construct a new trainer after surgery.
template <typename T>
class Trainer {
 public:
  Trainer(ModelGraph<T>& g, TrainConfig cfg) : g_(g), cfg_(std::move(cfg)), rng_(cfg_.seed) {
    cfg_.validate();
    g_.enable_grads();
    g_.for_each_param([&](auto&, Tensor<T>& t, bool) { velocity_.emplace_back(t.numel(), T{0}); });
  }

  const TrainConfig& config() const noexcept { return cfg_; }
  std::size_t steps() const noexcept { return step_; }

  /// One SGD step on a prepared batch; returns the batch cross-entropy.
  double step(const Tensor<T>& x, std::span<const std::int32_t> y, double lr, double lambda) {
    g_.zero_grads();
    const Tensor<T> logits = graph_forward(g_, x, Mode::train, &cache_);
    const auto loss = softmax_cross_entropy(logits, y);
    if (!std::isfinite(loss.loss)) {
      throw TrainingDivergedError("non-finite loss at step " + std::to_string(step_), step_);
    }
    graph_backward(g_, cache_, loss.logits_grad);
    apply_l1_subgradient(g_, lambda);
    std::size_t k = 0;
    const T m = static_cast<T>(cfg_.momentum);
    const T wd = static_cast<T>(cfg_.weight_decay);
    try {
      g_.for_each_param([&](auto&, Tensor<T>& t, bool is_bn) {
        sgd_step<T>(t.data(), t.grad(), velocity_.at(k++), static_cast<T>(lr), m, is_bn ? T{0} : wd);
      });
    } catch (const NonFiniteError& e) {
      throw TrainingDivergedError(std::string(e.what()) + " at step " + std::to_string(step_), step_);
    }
    ++step_;
    return loss.loss;
  }

  /// One pass over `train` in a seeded shuffled order, then held-out statistics.
  EpochStats train_epoch(const data::Dataset& train, const data::Dataset& holdout, std::size_t epoch) {
    if (train.size() == 0) throw InvalidArgument("training set is empty");
    EpochStats s;
    s.epoch = epoch;
    s.lr = cfg_.lr_at(epoch);
    s.lambda = cfg_.lambda_at(epoch);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng_);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size) {
      const std::size_t len = std::min(cfg_.batch_size, order.size() - start);
      auto [x, y] = data::make_batch<T>(train, std::span<const std::size_t>(order).subspan(start, len),
                                        cfg_.stats, cfg_.augment, rng_);
      loss_sum += step(x, y, s.lr, s.lambda) * static_cast<double>(len);
      seen += len;
      ++s.steps;
    }
    s.train_loss = loss_sum / static_cast<double>(seen);
    const data::Dataset& eval_set = holdout.size() ? holdout : train;
    const EvalResult ev = evaluate(g_, eval_set, cfg_.stats);
    s.loss_normal = ev.loss;
    s.top1 = ev.top1;
    s.loss_total = s.loss_normal + s.lambda * l1_penalty(g_);
    s.gamma = gamma_stats(g_);
    return s;
  }

 private:
  ModelGraph<T>& g_;
  TrainConfig cfg_;
  std::mt19937_64 rng_;
  std::vector<std::vector<T>> velocity_;
  ForwardCache<T> cache_;
  std::size_t step_ = 0;
};

/// Single epoch with a fresh optimizer state.
template <typename T>
EpochStats train_epoch(ModelGraph<T>& g, const data::Dataset& train, const data::Dataset& holdout,
                       const TrainConfig& cfg, std::size_t epoch = 0) {
  Trainer<T> t(g, cfg);
  return t.train_epoch(train, holdout, epoch);
}

}  // namespace lprune
