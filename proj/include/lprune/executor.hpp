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
#include <unordered_map>
#include <vector>

#include "lprune/error.hpp"
#include "lprune/graph.hpp"
#include "lprune/ops/activation.hpp"
#include "lprune/ops/batchnorm.hpp"
#include "lprune/ops/conv.hpp"
#include "lprune/ops/linear.hpp"
#include "lprune/tensor.hpp"

namespace lprune {

/// Activations recorded by graph_forward for graph_backward.
template <typename T>
struct ForwardCache {
  bool valid = false;
  Mode mode = Mode::infer;
  Tensor<T> input;
  std::vector<std::size_t> order;           // node positions in execution order
  std::vector<Tensor<T>> outputs;           // by node position
  std::vector<BNCache<T>> bn;               // by node position (unused for non-BN)
};

namespace detail {

template <typename T>
const Tensor<T>& fetch(const ForwardCache<T>& c, const ModelGraph<T>& g, int id) {
  return id == kGraphInput ? c.input : c.outputs[g.position(id)];
}

template <typename T>
[[noreturn]] void rethrow_at(const LayerNode<T>& n, const std::exception& e) {
  throw ShapeError("node " + std::to_string(n.id) + " (" + n.name + "): " + e.what());
}

}  // namespace detail

/// Runs the graph in dependency order. With a cache, every activation is kept
/// for a later graph_backward; without one, intermediates are released as soon
/// as their last consumer has run.
template <typename T>
Tensor<T> graph_forward(ModelGraph<T>& g, const Tensor<T>& batch, Mode mode,
                        ForwardCache<T>* cache = nullptr) {
  ForwardCache<T> local;
  ForwardCache<T>& c = cache ? *cache : local;
  c.valid = false;
  c.mode = mode;
  c.order = g.topo_order();
  c.outputs.assign(g.nodes.size(), Tensor<T>{});
  c.bn.assign(g.nodes.size(), BNCache<T>{});
  c.input = batch;

  std::vector<std::size_t> pending(g.nodes.size(), 0);
  if (!cache) {
    for (const auto& n : g.nodes) {
      for (int in : n.inputs) {
        if (in != kGraphInput) ++pending[g.position(in)];
      }
    }
  }

  for (std::size_t pos : c.order) {
    auto& n = g.nodes[pos];
    try {
      const Tensor<T>& x = detail::fetch(c, g, n.inputs.at(0));
      switch (n.kind) {
        case NodeKind::conv: c.outputs[pos] = conv2d_forward(x, n.conv()); break;
        case NodeKind::bn:
          c.outputs[pos] = batchnorm_forward(x, n.bn(), mode, cache ? &c.bn[pos] : nullptr);
          break;
        case NodeKind::relu: c.outputs[pos] = relu_forward(x); break;
        case NodeKind::pool: c.outputs[pos] = avgpool_forward(x); break;
        case NodeKind::fc: c.outputs[pos] = linear_forward(x, n.fc()); break;
        case NodeKind::add:
          c.outputs[pos] = add_forward(x, detail::fetch(c, g, n.inputs.at(1)));
          break;
      }
    } catch (const ShapeError& e) {
      detail::rethrow_at(n, e);
    }
    if (!cache) {
      for (int in : n.inputs) {
        if (in == kGraphInput) continue;
        const std::size_t p = g.position(in);
        if (--pending[p] == 0) c.outputs[p] = Tensor<T>{};
      }
    }
  }
  if (g.output == kGraphInput) return batch;
  Tensor<T> out = std::move(c.outputs[g.position(g.output)]);
  if (cache) {
    c.outputs[g.position(g.output)] = out;
    c.valid = true;
  }
  return out;
}

/// Inference-only forward on a const graph; infer mode reads but never writes BN statistics.
template <typename T>
Tensor<T> graph_forward(const ModelGraph<T>& g, const Tensor<T>& batch, Mode mode) {
  if (mode != Mode::infer) throw StateError("train-mode forward needs a mutable graph");
  return graph_forward(const_cast<ModelGraph<T>&>(g), batch, mode, static_cast<ForwardCache<T>*>(nullptr));
}

/// Back-propagates dL/d(output) through the recorded forward pass,
/// accumulating into every parameter whose gradient buffer is enabled.
template <typename T>
void graph_backward(ModelGraph<T>& g, ForwardCache<T>& cache, const Tensor<T>& output_grad,
                    Tensor<T>* input_grad = nullptr) {
  if (!cache.valid || cache.outputs.size() != g.nodes.size()) {
    throw StateError("graph_backward called without a recorded forward pass");
  }
  std::vector<Tensor<T>> grads(g.nodes.size());
  Tensor<T> input_acc;
  auto accumulate = [&](int id, Tensor<T>&& d) {
    Tensor<T>& slot = id == kGraphInput ? input_acc : grads[g.position(id)];
    if (slot.empty()) {
      slot = std::move(d);
    } else {
      for (std::size_t i = 0; i < slot.numel(); ++i) slot[i] += d[i];
    }
  };
  grads[g.position(g.output)] = output_grad;

  for (auto it = cache.order.rbegin(); it != cache.order.rend(); ++it) {
    const std::size_t pos = *it;
    auto& n = g.nodes[pos];
    Tensor<T> dy = std::move(grads[pos]);
    if (dy.empty()) continue;  // node does not influence the output
    const int src = n.inputs.at(0);
    const Tensor<T>& x = detail::fetch(cache, g, src);
    const bool need_dx = src != kGraphInput || input_grad != nullptr;
    switch (n.kind) {
      case NodeKind::conv: {
        Tensor<T> dx;
        conv2d_backward(x, n.conv(), dy, need_dx ? &dx : nullptr);
        if (need_dx) accumulate(src, std::move(dx));
        break;
      }
      case NodeKind::bn: {
        Tensor<T> dx;
        batchnorm_backward(x.shape(), n.bn(), cache.bn[pos], dy, need_dx ? &dx : nullptr);
        if (need_dx) accumulate(src, std::move(dx));
        break;
      }
      case NodeKind::relu: accumulate(src, relu_backward(x, dy)); break;
      case NodeKind::pool: accumulate(src, avgpool_backward(x.shape(), dy)); break;
      case NodeKind::fc: {
        Tensor<T> dx;
        linear_backward(x, n.fc(), dy, need_dx ? &dx : nullptr);
        if (need_dx) accumulate(src, std::move(dx));
        break;
      }
      case NodeKind::add: {
        accumulate(n.inputs[1], Tensor<T>(dy));
        accumulate(src, std::move(dy));
        break;
      }
    }
  }
  if (input_grad) *input_grad = input_acc.empty() ? Tensor<T>(cache.input.shape()) : std::move(input_acc);
}

}  // namespace lprune
