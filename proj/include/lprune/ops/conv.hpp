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
#include <optional>
#include <string>
#include <vector>

#include "lprune/blas.hpp"
#include "lprune/error.hpp"
#include "lprune/tensor.hpp"

namespace lprune {

template <typename T>
struct ConvParams {
  Tensor<T> weight;  // (out_channels, in_channels, k_h, k_w)
  std::optional<Tensor<T>> bias;  // (out_channels, 1, 1, 1)
  std::size_t stride = 1;
  std::size_t padding = 0;

  std::size_t out_channels() const noexcept { return weight.shape().n; }
  std::size_t in_channels() const noexcept { return weight.shape().c; }
  std::size_t kernel_h() const noexcept { return weight.shape().h; }
  std::size_t kernel_w() const noexcept { return weight.shape().w; }
  std::size_t num_params() const noexcept {
    return weight.numel() + (bias ? bias->numel() : 0);
  }

  template <typename U>
  ConvParams<U> cast() const {
    ConvParams<U> p;
    p.weight = weight.template cast<U>();
    if (bias) p.bias = bias->template cast<U>();
    p.stride = stride;
    p.padding = padding;
    return p;
  }
};

/// Output extent of one spatial axis; floor semantics, rejects non-positive sizes.
inline std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t pad,
                                   std::size_t stride) {
  if (stride == 0) throw ShapeError("convolution stride must be positive");
  if (in + 2 * pad < kernel) {
    throw ShapeError("convolution kernel " + std::to_string(kernel) +
                     " larger than padded input " + std::to_string(in + 2 * pad));
  }
  return (in + 2 * pad - kernel) / stride + 1;
}

template <typename T>
Shape conv_output_shape(const Shape& in, const ConvParams<T>& p) {
  if (in.c != p.in_channels()) {
    throw ShapeError("conv input has " + std::to_string(in.c) + " channels but weight " +
                     p.weight.shape().str() + " expects " + std::to_string(p.in_channels()));
  }
  if (p.bias && p.bias->numel() != p.out_channels()) {
    throw ShapeError("conv bias length " + std::to_string(p.bias->numel()) +
                     " does not match out_channels " + std::to_string(p.out_channels()));
  }
  return Shape{in.n, p.out_channels(), conv_out_extent(in.h, p.kernel_h(), p.padding, p.stride),
               conv_out_extent(in.w, p.kernel_w(), p.padding, p.stride)};
}

namespace detail {

inline bool is_pointwise(std::size_t kh, std::size_t kw, std::size_t stride, std::size_t pad) {
  return kh == 1 && kw == 1 && stride == 1 && pad == 0;
}

// Unfolds one (c, h, w) image into a (c*kh*kw) x (oh*ow) column matrix.
template <typename T>
void im2col(const T* img, std::size_t c, std::size_t h, std::size_t w, std::size_t kh,
            std::size_t kw, std::size_t stride, std::size_t pad, std::size_t oh, std::size_t ow,
            T* col) {
  const std::size_t plane = oh * ow;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t ky = 0; ky < kh; ++ky) {
      for (std::size_t kx = 0; kx < kw; ++kx) {
        T* row = col + ((ch * kh + ky) * kw + kx) * plane;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                    static_cast<std::ptrdiff_t>(pad);
          T* dst = row + oy * ow;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
            std::fill(dst, dst + ow, T{0});
            continue;
          }
          const T* src = img + (ch * h + static_cast<std::size_t>(iy)) * w;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                      static_cast<std::ptrdiff_t>(pad);
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w))
                          ? T{0}
                          : src[static_cast<std::size_t>(ix)];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters a column matrix back into an image, accumulating.
template <typename T>
void col2im(const T* col, std::size_t c, std::size_t h, std::size_t w, std::size_t kh,
            std::size_t kw, std::size_t stride, std::size_t pad, std::size_t oh, std::size_t ow,
            T* img) {
  const std::size_t plane = oh * ow;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t ky = 0; ky < kh; ++ky) {
      for (std::size_t kx = 0; kx < kw; ++kx) {
        const T* row = col + ((ch * kh + ky) * kw + kx) * plane;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                    static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          T* dst = img + (ch * h + static_cast<std::size_t>(iy)) * w;
          const T* src = row + oy * ow;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                      static_cast<std::ptrdiff_t>(pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(w)) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

/// Cross-correlation via im2col + GEMM. 1x1 stride-1 unpadded convolutions
/// skip the unfold and multiply the input planes directly.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const ConvParams<T>& p) {
  const Shape in = input.shape();
  const Shape out_shape = conv_output_shape(in, p);
  Tensor<T> out(out_shape, uninitialized);
  const std::size_t m = p.out_channels();
  const std::size_t k = p.in_channels() * p.kernel_h() * p.kernel_w();
  const std::size_t plane = out_shape.plane();
  const bool pointwise = detail::is_pointwise(p.kernel_h(), p.kernel_w(), p.stride, p.padding);
  std::vector<T> col(pointwise ? 0 : k * plane);

  for (std::size_t n = 0; n < in.n; ++n) {
    const T* img = input.ptr() + n * in.c * in.plane();
    const T* src = img;
    if (!pointwise) {
      detail::im2col(img, in.c, in.h, in.w, p.kernel_h(), p.kernel_w(), p.stride, p.padding,
                     out_shape.h, out_shape.w, col.data());
      src = col.data();
    }
    T* dst = out.ptr() + n * m * plane;
    blas::gemm<T>(false, false, m, plane, k, T{1}, p.weight.ptr(), k, src, plane, T{0}, dst,
                  plane);
    if (p.bias) {
      for (std::size_t o = 0; o < m; ++o) {
        const T b = (*p.bias)[o];
        T* row = dst + o * plane;
        for (std::size_t i = 0; i < plane; ++i) row[i] += b;
      }
    }
  }
  return out;
}

/// Accumulates dL/dweight and dL/dbias into the parameter gradient buffers
/// (when enabled) and returns dL/dinput if `input_grad` is requested.
template <typename T>
void conv2d_backward(const Tensor<T>& input, ConvParams<T>& p, const Tensor<T>& out_grad,
                     Tensor<T>* input_grad) {
  const Shape in = input.shape();
  const Shape out_shape = conv_output_shape(in, p);
  if (out_grad.shape() != out_shape) {
    throw ShapeError("conv upstream gradient " + out_grad.shape().str() +
                     " does not match output " + out_shape.str());
  }
  const std::size_t m = p.out_channels();
  const std::size_t k = p.in_channels() * p.kernel_h() * p.kernel_w();
  const std::size_t plane = out_shape.plane();
  const bool pointwise = detail::is_pointwise(p.kernel_h(), p.kernel_w(), p.stride, p.padding);
  const bool want_w = p.weight.has_grad();
  const bool want_b = p.bias && p.bias->has_grad();
  std::vector<T> col(pointwise ? 0 : k * plane);
  std::vector<T> dcol(pointwise ? 0 : k * plane);
  if (input_grad) *input_grad = Tensor<T>(in);

  for (std::size_t n = 0; n < in.n; ++n) {
    const T* img = input.ptr() + n * in.c * in.plane();
    const T* dout = out_grad.ptr() + n * m * plane;
    if (want_w) {
      const T* src = img;
      if (!pointwise) {
        detail::im2col(img, in.c, in.h, in.w, p.kernel_h(), p.kernel_w(), p.stride, p.padding,
                       out_shape.h, out_shape.w, col.data());
        src = col.data();
      }
      blas::gemm<T>(false, true, m, k, plane, T{1}, dout, plane, src, plane, T{1},
                    p.weight.grad().data(), k);
    }
    if (want_b) {
      auto bg = p.bias->grad();
      for (std::size_t o = 0; o < m; ++o) {
        T s{0};
        const T* row = dout + o * plane;
        for (std::size_t i = 0; i < plane; ++i) s += row[i];
        bg[o] += s;
      }
    }
    if (input_grad) {
      T* dimg = input_grad->ptr() + n * in.c * in.plane();
      if (pointwise) {
        blas::gemm<T>(true, false, k, plane, m, T{1}, p.weight.ptr(), k, dout, plane, T{0}, dimg,
                      plane);
      } else {
        blas::gemm<T>(true, false, k, plane, m, T{1}, p.weight.ptr(), k, dout, plane, T{0},
                      dcol.data(), plane);
        detail::col2im(dcol.data(), in.c, in.h, in.w, p.kernel_h(), p.kernel_w(), p.stride,
                       p.padding, out_shape.h, out_shape.w, dimg);
      }
    }
  }
}

}  // namespace lprune
