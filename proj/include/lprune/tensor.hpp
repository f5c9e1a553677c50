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
#include <memory>
#include <optional>
#include <type_traits>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lprune/error.hpp"

namespace lprune {

/// Allocator that leaves trivially-constructible elements uninitialized on
/// resize, so kernels that overwrite their output do not pay for a zero fill.
template <typename T, typename A = std::allocator<T>>
class default_init_allocator : public A {
  using traits = std::allocator_traits<A>;

 public:
  template <typename U>
  struct rebind {
    using other = default_init_allocator<U, typename traits::template rebind_alloc<U>>;
  };
  using A::A;

  template <typename U>
  void construct(U* p) noexcept(std::is_nothrow_default_constructible_v<U>) {
    ::new (static_cast<void*>(p)) U;
  }
  template <typename U, typename... Args>
  void construct(U* p, Args&&... args) {
    traits::construct(static_cast<A&>(*this), p, std::forward<Args>(args)...);
  }
};

/// Marker selecting the uninitialized Tensor constructor.
struct uninitialized_t {};
inline constexpr uninitialized_t uninitialized{};

/// (n, c, h, w) extents of a dense 4-D tensor.
struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t numel() const noexcept { return n * c * h * w; }
  std::size_t plane() const noexcept { return h * w; }
  bool operator==(const Shape&) const = default;

  std::string str() const {
    std::ostringstream os;
    os << "(" << n << ", " << c << ", " << h << ", " << w << ")";
    return os.str();
  }
};

/// Dense row-major NCHW tensor with an optional gradient buffer of the same
/// shape. Parameters and activations both use it; 1-D parameter vectors are
/// stored as (len, 1, 1, 1).
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0})
      : shape_(shape), data_(shape.numel(), fill) {}
  /// Storage is left uninitialized; the caller must write every element.
  Tensor(Shape shape, uninitialized_t) : shape_(shape) { data_.resize(shape.numel()); }
  Tensor(Shape shape, const std::vector<T>& values)
      : shape_(shape), data_(values.begin(), values.end()) {
    if (data_.size() != shape_.numel()) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match dims " + shape_.str());
    }
  }

  static Tensor vector(std::size_t len, T fill = T{0}) { return Tensor(Shape{len, 1, 1, 1}, fill); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t numel() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* ptr() noexcept { return data_.data(); }
  const T* ptr() const noexcept { return data_.data(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::size_t offset(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) { return data_[offset(n, c, h, w)]; }
  const T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[offset(n, c, h, w)];
  }

  bool has_grad() const noexcept { return grad_.has_value(); }
  void enable_grad() {
    if (!grad_) grad_.emplace(data_.size(), T{0});
  }
  void drop_grad() noexcept { grad_.reset(); }
  void zero_grad() {
    if (grad_) std::fill(grad_->begin(), grad_->end(), T{0});
  }
  std::span<T> grad() {
    if (!grad_) throw StateError("tensor has no gradient buffer");
    return *grad_;
  }
  std::span<const T> grad() const {
    if (!grad_) throw StateError("tensor has no gradient buffer");
    return *grad_;
  }

  /// Replaces dims without touching storage; the element count must not change.
  void reshape(Shape s) {
    if (s.numel() != data_.size()) {
      throw ShapeError("cannot reshape " + shape_.str() + " to " + s.str());
    }
    shape_ = s;
  }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> t(shape_, uninitialized);
    std::copy(data_.begin(), data_.end(), t.data().begin());
    if (grad_) {
      t.enable_grad();
      std::copy(grad_->begin(), grad_->end(), t.grad().begin());
    }
    return t;
  }

 private:
  Shape shape_{};
  std::vector<T, default_init_allocator<T>> data_;
  std::optional<std::vector<T>> grad_;
};

/// Throws NonFiniteError naming `what` if any element is NaN or Inf.
template <typename T>
void require_finite(const Tensor<T>& t, const std::string& what) {
  if (!t.all_finite()) throw NonFiniteError(what + " produced a non-finite value");
}

}  // namespace lprune
