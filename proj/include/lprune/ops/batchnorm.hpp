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
#include <string>
#include <vector>

#include "lprune/error.hpp"
#include "lprune/tensor.hpp"

namespace lprune {

enum class Mode { train, infer };

/// Per-channel batch-norm state: y = alpha * (x - mean) / sqrt(var + eps) + beta.
///
/// `select` optionally gathers a subset of the producer's channels before
/// normalizing: output channel k reads input channel select[k]. An empty
/// `select` means the identity mapping. Gathering lets a BN that sits on a
/// shared residual stream be pruned without touching the stream itself.
template <typename T>
struct BNParams {
  Tensor<T> alpha;
  Tensor<T> beta;
  std::vector<T> running_mean;
  std::vector<T> running_var;
  T eps = T(1e-5);
  T momentum = T(0.1);
  std::vector<std::size_t> select;

  static BNParams make(std::size_t channels, T alpha_init = T{1}) {
    BNParams p;
    p.alpha = Tensor<T>::vector(channels, alpha_init);
    p.beta = Tensor<T>::vector(channels, T{0});
    p.running_mean.assign(channels, T{0});
    p.running_var.assign(channels, T{1});
    return p;
  }

  std::size_t channels() const noexcept { return alpha.numel(); }
  std::size_t num_params() const noexcept { return alpha.numel() + beta.numel(); }
  std::size_t input_channel(std::size_t k) const noexcept { return select.empty() ? k : select[k]; }

  void validate() const {
    const std::size_t c = channels();
    if (beta.numel() != c || running_mean.size() != c || running_var.size() != c) {
      throw ShapeError("batch-norm vectors disagree on channel count " + std::to_string(c));
    }
    if (!select.empty() && select.size() != c) {
      throw ShapeError("batch-norm select list has " + std::to_string(select.size()) +
                       " entries for " + std::to_string(c) + " channels");
    }
    if (!(eps > T{0})) throw InvalidArgument("batch-norm eps must be positive");
    for (T v : running_var) {
      if (v < T{0}) throw InvalidArgument("batch-norm running_var must be non-negative");
    }
  }

  template <typename U>
  BNParams<U> cast() const {
    BNParams<U> p;
    p.alpha = alpha.template cast<U>();
    p.beta = beta.template cast<U>();
    p.running_mean.assign(running_mean.begin(), running_mean.end());
    p.running_var.assign(running_var.begin(), running_var.end());
    p.eps = static_cast<U>(eps);
    p.momentum = static_cast<U>(momentum);
    p.select = select;
    return p;
  }
};

/// What batchnorm_backward needs from the forward pass.
template <typename T>
struct BNCache {
  Mode mode = Mode::infer;
  std::vector<T> inv_std;  // per output channel
  Tensor<T> xhat;          // normalized pre-affine values, output shape
};

template <typename T>
Shape batchnorm_output_shape(const Shape& in, const BNParams<T>& p) {
  p.validate();
  if (p.select.empty()) {
    if (in.c != p.channels()) {
      throw ShapeError("batch-norm input has " + std::to_string(in.c) +
                       " channels but parameters hold " + std::to_string(p.channels()));
    }
  } else {
    for (std::size_t s : p.select) {
      if (s >= in.c) {
        throw ShapeError("batch-norm selects channel " + std::to_string(s) + " of a " +
                         std::to_string(in.c) + "-channel input");
      }
    }
  }
  return Shape{in.n, p.channels(), in.h, in.w};
}

namespace detail {

// Reductions over one plane with independent partial sums so the compiler
// can vectorize without reassociation flags.
template <typename T>
T plane_sum(const T* x, std::size_t len) {
  T acc[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= len; i += 8) {
    for (std::size_t l = 0; l < 8; ++l) acc[l] += x[i + l];
  }
  T s{0};
  for (; i < len; ++i) s += x[i];
  for (T a : acc) s += a;
  return s;
}

template <typename T>
T plane_sq_dev(const T* x, std::size_t len, T mean) {
  T acc[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= len; i += 8) {
    for (std::size_t l = 0; l < 8; ++l) {
      const T d = x[i + l] - mean;
      acc[l] += d * d;
    }
  }
  T s{0};
  for (; i < len; ++i) s += (x[i] - mean) * (x[i] - mean);
  for (T a : acc) s += a;
  return s;
}

template <typename T>
T plane_dot(const T* x, const T* y, std::size_t len) {
  T acc[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= len; i += 8) {
    for (std::size_t l = 0; l < 8; ++l) acc[l] += x[i + l] * y[i + l];
  }
  T s{0};
  for (; i < len; ++i) s += x[i] * y[i];
  for (T a : acc) s += a;
  return s;
}

}  // namespace detail

/// Train mode normalizes with biased batch moments and folds them into the
/// running statistics with `p.momentum`; infer mode uses the running values.
template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& input, BNParams<T>& p, Mode mode,
                            BNCache<T>* cache = nullptr) {
  const Shape in = input.shape();
  const Shape out_shape = batchnorm_output_shape(in, p);
  const std::size_t c_out = p.channels();
  const std::size_t plane = in.plane();
  const std::size_t count = in.n * plane;
  Tensor<T> out(out_shape, uninitialized);
  Tensor<T> xhat;
  if (cache) xhat = Tensor<T>(out_shape, uninitialized);
  std::vector<T> inv_std(c_out);

  for (std::size_t k = 0; k < c_out; ++k) {
    const std::size_t src_c = p.input_channel(k);
    T mean{0};
    T var{0};
    if (mode == Mode::train) {
      if (count == 0) throw ShapeError("batch-norm train mode needs a non-empty batch");
      double s = 0.0;
      for (std::size_t n = 0; n < in.n; ++n) {
        s += static_cast<double>(detail::plane_sum(input.ptr() + (n * in.c + src_c) * plane, plane));
      }
      mean = static_cast<T>(s / static_cast<double>(count));
      double sq = 0.0;
      for (std::size_t n = 0; n < in.n; ++n) {
        sq += static_cast<double>(
            detail::plane_sq_dev(input.ptr() + (n * in.c + src_c) * plane, plane, mean));
      }
      var = static_cast<T>(sq / static_cast<double>(count));
      p.running_mean[k] = (T{1} - p.momentum) * p.running_mean[k] + p.momentum * mean;
      p.running_var[k] = (T{1} - p.momentum) * p.running_var[k] + p.momentum * var;
    } else {
      mean = p.running_mean[k];
      var = p.running_var[k];
    }
    const T is = T{1} / std::sqrt(var + p.eps);
    inv_std[k] = is;
    const T a = p.alpha[k];
    const T b = p.beta[k];
    for (std::size_t n = 0; n < in.n; ++n) {
      const T* x = input.ptr() + (n * in.c + src_c) * plane;
      T* y = out.ptr() + (n * c_out + k) * plane;
      if (cache) {
        T* xh = xhat.ptr() + (n * c_out + k) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          xh[i] = (x[i] - mean) * is;
          y[i] = a * xh[i] + b;
        }
      } else {
        for (std::size_t i = 0; i < plane; ++i) y[i] = a * ((x[i] - mean) * is) + b;
      }
    }
  }
  if (cache) {
    cache->mode = mode;
    cache->inv_std = std::move(inv_std);
    cache->xhat = std::move(xhat);
  }
  return out;
}

/// Accumulates dL/dalpha and dL/dbeta, and writes dL/dinput (shape of the
/// forward input; unselected channels receive zero) when requested.
template <typename T>
void batchnorm_backward(const Shape& input_shape, BNParams<T>& p, const BNCache<T>& cache,
                        const Tensor<T>& out_grad, Tensor<T>* input_grad) {
  const Shape out_shape = batchnorm_output_shape(input_shape, p);
  if (out_grad.shape() != out_shape || cache.xhat.shape() != out_shape) {
    throw StateError("batch-norm backward called without a matching forward pass");
  }
  const std::size_t c_out = p.channels();
  const std::size_t plane = input_shape.plane();
  const std::size_t count = input_shape.n * plane;
  const bool want_a = p.alpha.has_grad();
  const bool want_b = p.beta.has_grad();
  if (input_grad) {
    // Every channel is written below unless the BN gathers a subset.
    *input_grad = p.select.empty() ? Tensor<T>(input_shape, uninitialized) : Tensor<T>(input_shape);
  }

  for (std::size_t k = 0; k < c_out; ++k) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (std::size_t n = 0; n < input_shape.n; ++n) {
      const T* dy = out_grad.ptr() + (n * c_out + k) * plane;
      const T* xh = cache.xhat.ptr() + (n * c_out + k) * plane;
      sum_dy += static_cast<double>(detail::plane_sum(dy, plane));
      sum_dy_xhat += static_cast<double>(detail::plane_dot(dy, xh, plane));
    }
    if (want_a) p.alpha.grad()[k] += static_cast<T>(sum_dy_xhat);
    if (want_b) p.beta.grad()[k] += static_cast<T>(sum_dy);
    if (!input_grad) continue;

    const std::size_t dst_c = p.input_channel(k);
    const T scale = p.alpha[k] * cache.inv_std[k];
    const bool overwrite = p.select.empty();
    if (cache.mode == Mode::infer) {
      for (std::size_t n = 0; n < input_shape.n; ++n) {
        const T* dy = out_grad.ptr() + (n * c_out + k) * plane;
        T* dx = input_grad->ptr() + (n * input_shape.c + dst_c) * plane;
        if (overwrite) {
          for (std::size_t i = 0; i < plane; ++i) dx[i] = dy[i] * scale;
        } else {
          for (std::size_t i = 0; i < plane; ++i) dx[i] += dy[i] * scale;
        }
      }
      continue;
    }
    const T mean_dy = static_cast<T>(sum_dy / static_cast<double>(count));
    const T mean_dy_xhat = static_cast<T>(sum_dy_xhat / static_cast<double>(count));
    for (std::size_t n = 0; n < input_shape.n; ++n) {
      const T* dy = out_grad.ptr() + (n * c_out + k) * plane;
      const T* xh = cache.xhat.ptr() + (n * c_out + k) * plane;
      T* dx = input_grad->ptr() + (n * input_shape.c + dst_c) * plane;
      if (overwrite) {
        for (std::size_t i = 0; i < plane; ++i) {
          dx[i] = scale * (dy[i] - mean_dy - xh[i] * mean_dy_xhat);
        }
      } else {
        for (std::size_t i = 0; i < plane; ++i) {
          dx[i] += scale * (dy[i] - mean_dy - xh[i] * mean_dy_xhat);
        }
      }
    }
  }
}

}  // namespace lprune
