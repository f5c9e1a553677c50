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

#include <cstddef>
#include <string>

#include "lprune/blas.hpp"
#include "lprune/error.hpp"
#include "lprune/tensor.hpp"

namespace lprune {

/// Fully-connected classifier over flattened (c*h*w) features.
template <typename T>
struct LinearParams {
  Tensor<T> weight;  // (out_features, in_features, 1, 1)
  Tensor<T> bias;    // (out_features, 1, 1, 1)

  std::size_t out_features() const noexcept { return weight.shape().n; }
  std::size_t in_features() const noexcept { return weight.shape().c; }
  std::size_t num_params() const noexcept { return weight.numel() + bias.numel(); }

  template <typename U>
  LinearParams<U> cast() const {
    return LinearParams<U>{weight.template cast<U>(), bias.template cast<U>()};
  }
};

template <typename T>
Shape linear_output_shape(const Shape& in, const LinearParams<T>& p) {
  const std::size_t features = in.c * in.h * in.w;
  if (features != p.in_features()) {
    throw ShapeError("fully-connected input has " + std::to_string(features) +
                     " features but weight " + p.weight.shape().str() + " expects " +
                     std::to_string(p.in_features()));
  }
  if (p.bias.numel() != p.out_features()) {
    throw ShapeError("fully-connected bias length does not match out_features");
  }
  return Shape{in.n, p.out_features(), 1, 1};
}

template <typename T>
Tensor<T> linear_forward(const Tensor<T>& input, const LinearParams<T>& p) {
  const Shape out_shape = linear_output_shape(input.shape(), p);
  Tensor<T> out(out_shape);
  const std::size_t n = input.shape().n;
  const std::size_t k = p.in_features();
  const std::size_t m = p.out_features();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t o = 0; o < m; ++o) out[i * m + o] = p.bias[o];
  }
  blas::gemm<T>(false, true, n, m, k, T{1}, input.ptr(), k, p.weight.ptr(), k, T{1}, out.ptr(), m);
  return out;
}

template <typename T>
void linear_backward(const Tensor<T>& input, LinearParams<T>& p, const Tensor<T>& out_grad,
                     Tensor<T>* input_grad) {
  const Shape out_shape = linear_output_shape(input.shape(), p);
  if (out_grad.shape() != out_shape) {
    throw ShapeError("fully-connected gradient " + out_grad.shape().str() +
                     " does not match output " + out_shape.str());
  }
  const std::size_t n = input.shape().n;
  const std::size_t k = p.in_features();
  const std::size_t m = p.out_features();
  if (p.weight.has_grad()) {
    blas::gemm<T>(true, false, m, k, n, T{1}, out_grad.ptr(), m, input.ptr(), k, T{1},
                  p.weight.grad().data(), k);
  }
  if (p.bias.has_grad()) {
    auto bg = p.bias.grad();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t o = 0; o < m; ++o) bg[o] += out_grad[i * m + o];
    }
  }
  if (input_grad) {
    *input_grad = Tensor<T>(input.shape());
    blas::gemm<T>(false, false, n, k, m, T{1}, out_grad.ptr(), m, p.weight.ptr(), k, T{0},
                  input_grad->ptr(), k);
  }
}

}  // namespace lprune
