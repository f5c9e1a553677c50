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
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "lprune/error.hpp"
#include "lprune/ops/activation.hpp"
#include "lprune/ops/linear.hpp"
#include "lprune/tensor.hpp"

namespace lprune {

template <typename T>
struct LossResult {
  double loss = 0.0;       // mean cross-entropy over the batch
  double top1 = 0.0;       // fraction of rows whose argmax equals the label
  Tensor<T> logits_grad;   // dL/dlogits of the mean loss
};

/// Index of the largest logit in a row; ties resolve to the lowest index.
template <typename T>
std::size_t argmax_row(const T* row, std::size_t classes) {
  return static_cast<std::size_t>(std::max_element(row, row + classes) - row);
}

/// Numerically stable softmax cross-entropy over (n, classes, 1, 1) logits.
template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::int32_t> labels) {
  const std::size_t n = logits.shape().n;
  const std::size_t classes = logits.shape().c * logits.shape().h * logits.shape().w;
  if (labels.size() != n) {
    throw ShapeError("got " + std::to_string(labels.size()) + " labels for a batch of " +
                     std::to_string(n));
  }
  LossResult<T> r;
  r.logits_grad = Tensor<T>(logits.shape());
  if (n == 0) return r;
  double total = 0.0;
  std::size_t correct = 0;
  const T inv_n = T{1} / static_cast<T>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::int32_t y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw InvalidArgument("label " + std::to_string(y) + " outside [0, " +
                            std::to_string(classes) + ")");
    }
    const T* row = logits.ptr() + i * classes;
    const std::size_t best = argmax_row(row, classes);
    if (best == static_cast<std::size_t>(y)) ++correct;
    const double mx = static_cast<double>(row[best]);
    double z = 0.0;
    for (std::size_t k = 0; k < classes; ++k) z += std::exp(static_cast<double>(row[k]) - mx);
    const double log_z = mx + std::log(z);
    total += log_z - static_cast<double>(row[y]);
    T* g = r.logits_grad.ptr() + i * classes;
    for (std::size_t k = 0; k < classes; ++k) {
      const double prob = std::exp(static_cast<double>(row[k]) - log_z);
      g[k] = static_cast<T>(prob) * inv_n;
    }
    g[y] -= inv_n;
  }
  r.loss = total / static_cast<double>(n);
  r.top1 = static_cast<double>(correct) / static_cast<double>(n);
  return r;
}

/// Classification head: global average pool, fully-connected layer, softmax
/// cross-entropy. Returns the mean loss and the top-1 fraction.
template <typename T>
LossResult<T> head_forward(const Tensor<T>& features, const LinearParams<T>& fc,
                           std::span<const std::int32_t> labels) {
  return softmax_cross_entropy(linear_forward(avgpool_forward(features), fc), labels);
}

}  // namespace lprune
