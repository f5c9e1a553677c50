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
#include <cstddef>

#include "lprune/error.hpp"
#include "lprune/tensor.hpp"

namespace lprune {

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& input) {
  Tensor<T> out(input.shape(), uninitialized);
  const T* x = input.ptr();
  T* y = out.ptr();
  for (std::size_t i = 0; i < input.numel(); ++i) y[i] = std::max(x[i], T{0});
  return out;
}

/// Gradient passes where the forward input was strictly positive.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& out_grad) {
  if (input.shape() != out_grad.shape()) {
    throw ShapeError("relu gradient " + out_grad.shape().str() + " does not match input " +
                     input.shape().str());
  }
  Tensor<T> dx(input.shape(), uninitialized);
  const T* x = input.ptr();
  const T* dy = out_grad.ptr();
  T* d = dx.ptr();
  for (std::size_t i = 0; i < input.numel(); ++i) d[i] = x[i] > T{0} ? dy[i] : T{0};
  return dx;
}

/// Global average pool: (n, c, h, w) -> (n, c, 1, 1).
template <typename T>
Tensor<T> avgpool_forward(const Tensor<T>& input) {
  const Shape s = input.shape();
  if (s.plane() == 0) throw ShapeError("average pool over an empty plane");
  Tensor<T> out(Shape{s.n, s.c, 1, 1});
  const T inv = T{1} / static_cast<T>(s.plane());
  for (std::size_t nc = 0; nc < s.n * s.c; ++nc) {
    const T* x = input.ptr() + nc * s.plane();
    T acc{0};
    for (std::size_t i = 0; i < s.plane(); ++i) acc += x[i];
    out[nc] = acc * inv;
  }
  return out;
}

template <typename T>
Tensor<T> avgpool_backward(const Shape& input_shape, const Tensor<T>& out_grad) {
  if (out_grad.shape() != Shape{input_shape.n, input_shape.c, 1, 1}) {
    throw ShapeError("average pool gradient " + out_grad.shape().str() +
                     " does not match input " + input_shape.str());
  }
  Tensor<T> dx(input_shape, uninitialized);
  const T inv = T{1} / static_cast<T>(input_shape.plane());
  for (std::size_t nc = 0; nc < input_shape.n * input_shape.c; ++nc) {
    const T g = out_grad[nc] * inv;
    T* d = dx.ptr() + nc * input_shape.plane();
    for (std::size_t i = 0; i < input_shape.plane(); ++i) d[i] = g;
  }
  return dx;
}

template <typename T>
Tensor<T> add_forward(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("residual add of " + a.shape().str() + " and " + b.shape().str());
  }
  Tensor<T> out(a.shape(), uninitialized);
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] + b[i];
  return out;
}

}  // namespace lprune
