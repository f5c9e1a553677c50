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

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "lprune/error.hpp"

namespace lprune {

/// Heavy-ball SGD with L2 weight decay folded into the velocity:
///   v <- momentum * v + grad + weight_decay * param
///   param <- param - lr * v
template <typename T>
void sgd_step(std::span<T> params, std::span<const T> grads, std::span<T> velocity, T lr,
              T momentum, T weight_decay) {
  if (grads.size() != params.size() || velocity.size() != params.size()) {
    throw ShapeError("sgd_step: parameter, gradient and velocity lengths differ (" +
                     std::to_string(params.size()) + ", " + std::to_string(grads.size()) + ", " +
                     std::to_string(velocity.size()) + ")");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const T v = momentum * velocity[i] + grads[i] + weight_decay * params[i];
    const T p = params[i] - lr * v;
    if (!std::isfinite(v) || !std::isfinite(p)) {
      throw NonFiniteError("sgd_step: non-finite update at element " + std::to_string(i));
    }
    velocity[i] = v;
    params[i] = p;
  }
}

}  // namespace lprune
