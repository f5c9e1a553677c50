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
#include <cstddef>
#include <functional>
#include <optional>
#include <queue>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "lprune/error.hpp"
#include "lprune/ops/activation.hpp"
#include "lprune/ops/batchnorm.hpp"
#include "lprune/ops/conv.hpp"
#include "lprune/ops/linear.hpp"
#include "lprune/tensor.hpp"

namespace lprune {

enum class NodeKind { conv, bn, relu, add, pool, fc };

inline const char* to_string(NodeKind k) {
  switch (k) {
    case NodeKind::conv: return "conv";
    case NodeKind::bn: return "bn";
    case NodeKind::relu: return "relu";
    case NodeKind::add: return "add";
    case NodeKind::pool: return "pool";
    case NodeKind::fc: return "fc";
  }
  return "?";
}

inline NodeKind node_kind_from_string(const std::string& s) {
  for (NodeKind k : {NodeKind::conv, NodeKind::bn, NodeKind::relu, NodeKind::add, NodeKind::pool,
                     NodeKind::fc}) {
    if (s == to_string(k)) return k;
  }
  throw InvalidArgument("unknown node kind '" + s + "'");
}

/// Pseudo node id naming the graph input tensor.
inline constexpr int kGraphInput = -1;

template <typename T>
struct LayerNode {
  using Params = std::variant<std::monostate, ConvParams<T>, BNParams<T>, LinearParams<T>>;

  int id = 0;
  NodeKind kind = NodeKind::relu;
  std::string name;
  std::vector<int> inputs;
  Params params;
  std::size_t channels = 0;  // output channels, filled in by validate()

  ConvParams<T>& conv() { return std::get<ConvParams<T>>(params); }
  const ConvParams<T>& conv() const { return std::get<ConvParams<T>>(params); }
  BNParams<T>& bn() { return std::get<BNParams<T>>(params); }
  const BNParams<T>& bn() const { return std::get<BNParams<T>>(params); }
  LinearParams<T>& fc() { return std::get<LinearParams<T>>(params); }
  const LinearParams<T>& fc() const { return std::get<LinearParams<T>>(params); }

  /// Trainable element count (weights, biases, alpha, beta).
  std::size_t num_params() const {
    switch (kind) {
      case NodeKind::conv: return conv().num_params();
      case NodeKind::bn: return bn().num_params();
      case NodeKind::fc: return fc().num_params();
      default: return 0;
    }
  }

  /// Element count written to a checkpoint (trainable plus running stats).
  std::size_t num_stored() const {
    return num_params() + (kind == NodeKind::bn ? 2 * bn().channels() : 0);
  }
};

/// One pre-activation bottleneck: BN-ReLU-conv1x1, BN-ReLU-conv3x3, BN-ReLU-conv1x1,
/// added to an identity or 1x1-projection shortcut.
struct ResidualBlock {
  enum class State { intact, composed, removed };

  int id = 0;
  std::size_t stage = 0;
  std::size_t stride = 1;
  int input = kGraphInput;       // node feeding the block
  std::vector<int> branch;       // residual branch node ids in execution order
  int projection = kGraphInput;  // projection conv id, or kGraphInput for identity
  int add = kGraphInput;         // add node id, or kGraphInput once the branch is gone
  State state = State::intact;

  bool has_projection() const noexcept { return projection != kGraphInput; }

  /// Node whose output is the block output.
  int output() const noexcept {
    if (add != kGraphInput) return add;
    if (has_projection()) return projection;
    return input;
  }
};

inline const char* to_string(ResidualBlock::State s) {
  switch (s) {
    case ResidualBlock::State::intact: return "intact";
    case ResidualBlock::State::composed: return "composed";
    case ResidualBlock::State::removed: return "removed";
  }
  return "?";
}

struct GraphMeta {
  std::size_t depth = 0;
  std::size_t classes = 0;
  std::size_t blocks_per_stage = 0;
  std::array<std::size_t, 3> widths{};
  std::size_t expansion = 4;
  Shape input{1, 3, 32, 32};  // n is ignored
};

template <typename T>
struct ModelGraph {
  std::vector<LayerNode<T>> nodes;
  std::vector<ResidualBlock> blocks;
  GraphMeta meta;
  int output = kGraphInput;

  LayerNode<T>& node(int id) { return nodes.at(position(id)); }
  const LayerNode<T>& node(int id) const { return nodes.at(position(id)); }
  bool contains(int id) const { return index_.count(id) != 0; }

  std::size_t position(int id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw InvalidArgument("no node with id " + std::to_string(id));
    return it->second;
  }

  int next_id() const {
    int mx = -1;
    for (const auto& n : nodes) mx = std::max(mx, n.id);
    return mx + 1;
  }

  /// Ids of nodes that read `id`'s output.
  std::vector<int> consumers(int id) const {
    std::vector<int> out;
    for (const auto& n : nodes) {
      for (int in : n.inputs) {
        if (in == id) {
          out.push_back(n.id);
          break;
        }
      }
    }
    return out;
  }

  ResidualBlock& block(int id) {
    for (auto& b : blocks) {
      if (b.id == id) return b;
    }
    throw InvalidArgument("no residual block with id " + std::to_string(id));
  }
  const ResidualBlock& block(int id) const { return const_cast<ModelGraph*>(this)->block(id); }

  /// Rebuilds the id -> position table after nodes were added, removed or reordered.
  void reindex() {
    index_.clear();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (!index_.emplace(nodes[i].id, i).second) {
        throw ShapeError("duplicate node id " + std::to_string(nodes[i].id));
      }
    }
  }

  /// Positions of nodes in a dependency-respecting order. Ties keep list order.
  std::vector<std::size_t> topo_order() const {
    std::vector<std::size_t> indegree(nodes.size(), 0);
    std::vector<std::vector<std::size_t>> users(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      for (int in : nodes[i].inputs) {
        if (in == kGraphInput) continue;
        auto it = index_.find(in);
        if (it == index_.end()) {
          throw ShapeError("node " + std::to_string(nodes[i].id) + " reads unknown node " +
                           std::to_string(in));
        }
        users[it->second].push_back(i);
        ++indegree[i];
      }
    }
    std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (indegree[i] == 0) ready.push(i);
    }
    std::vector<std::size_t> order;
    order.reserve(nodes.size());
    while (!ready.empty()) {
      const std::size_t i = ready.top();
      ready.pop();
      order.push_back(i);
      for (std::size_t u : users[i]) {
        if (--indegree[u] == 0) ready.push(u);
      }
    }
    if (order.size() != nodes.size()) throw ShapeError("graph contains a cycle");
    return order;
  }

  /// Output shape of every node for a single-sample input, keyed by node id.
  /// Throws ShapeError naming the first node whose inputs do not fit.
  std::unordered_map<int, Shape> infer_shapes(Shape input) const {
    std::unordered_map<int, Shape> shapes;
    auto in_shape = [&](int id) { return id == kGraphInput ? input : shapes.at(id); };
    for (std::size_t pos : topo_order()) {
      const auto& n = nodes[pos];
      auto fail = [&](const std::string& why) {
        throw ShapeError("node " + std::to_string(n.id) + " (" + n.name + "): " + why);
      };
      const std::size_t arity = n.kind == NodeKind::add ? 2 : 1;
      if (n.inputs.size() != arity) {
        fail(std::string(to_string(n.kind)) + " expects " + std::to_string(arity) +
             " input(s), has " + std::to_string(n.inputs.size()));
      }
      try {
        const Shape x = in_shape(n.inputs[0]);
        Shape y;
        switch (n.kind) {
          case NodeKind::conv: y = conv_output_shape(x, n.conv()); break;
          case NodeKind::bn: y = batchnorm_output_shape(x, n.bn()); break;
          case NodeKind::relu: y = x; break;
          case NodeKind::pool: y = Shape{x.n, x.c, 1, 1}; break;
          case NodeKind::fc: y = linear_output_shape(x, n.fc()); break;
          case NodeKind::add: {
            const Shape x2 = in_shape(n.inputs[1]);
            if (x != x2) fail("add inputs " + x.str() + " and " + x2.str() + " differ");
            y = x;
            break;
          }
        }
        shapes[n.id] = y;
      } catch (const ShapeError& e) {
        if (std::string(e.what()).rfind("node ", 0) == 0) throw;
        fail(e.what());
      } catch (const std::bad_variant_access&) {
        fail("parameters do not match node kind");
      }
    }
    return shapes;
  }

  /// Checks ids, acyclicity, single output, channel arithmetic along every
  /// edge and the residual block table; refreshes `channels` on every node.
  void validate() {
    reindex();
    if (nodes.empty()) throw ShapeError("graph has no nodes");
    std::vector<int> sinks;
    for (const auto& n : nodes) {
      if (consumers(n.id).empty()) sinks.push_back(n.id);
    }
    if (sinks.size() != 1) {
      throw ShapeError("graph must have exactly one output node, found " +
                       std::to_string(sinks.size()));
    }
    if (sinks.front() != output) {
      throw ShapeError("declared output " + std::to_string(output) + " is not the graph sink " +
                       std::to_string(sinks.front()));
    }
    Shape probe = meta.input;
    probe.n = 1;
    const auto shapes = infer_shapes(probe);
    for (auto& n : nodes) n.channels = shapes.at(n.id).c;

    for (const auto& b : blocks) {
      auto fail = [&](const std::string& why) {
        throw ShapeError("residual block " + std::to_string(b.id) + ": " + why);
      };
      if (b.input != kGraphInput && !contains(b.input)) fail("unknown input node");
      for (int id : b.branch) {
        if (!contains(id)) fail("branch node " + std::to_string(id) + " missing");
      }
      if (b.has_projection()) {
        if (!contains(b.projection) || node(b.projection).kind != NodeKind::conv) {
          fail("projection is not a conv node");
        }
        if (node(b.projection).inputs.front() != b.input) fail("projection does not read block input");
      }
      if (b.add == kGraphInput) {
        if (!b.branch.empty()) fail("branch present without an add node");
        continue;
      }
      if (b.branch.empty()) fail("add node present without a branch");
      if (!contains(b.add) || node(b.add).kind != NodeKind::add) fail("add node missing");
      const auto& add = node(b.add);
      const int shortcut = b.has_projection() ? b.projection : b.input;
      const bool wired = (add.inputs[0] == b.branch.back() && add.inputs[1] == shortcut) ||
                         (add.inputs[1] == b.branch.back() && add.inputs[0] == shortcut);
      if (!wired) fail("branch and shortcut do not both end at the add node");
      const Shape s_branch = shapes.at(b.branch.back());
      const Shape s_short = shortcut == kGraphInput ? probe : shapes.at(shortcut);
      if (s_branch.c != s_short.c) fail("branch and shortcut channel counts differ");
    }
  }

  /// Trainable element count.
  std::size_t count_params() const {
    std::size_t total = 0;
    for (const auto& n : nodes) total += n.num_params();
    return total;
  }

  /// Elements written to a checkpoint (trainable plus BN running statistics).
  std::size_t count_stored() const {
    std::size_t total = 0;
    for (const auto& n : nodes) total += n.num_stored();
    return total;
  }

  /// Visits every trainable tensor. The callback receives the owning node
  /// and whether the tensor is a BN scale or shift.
  template <typename Fn>
  void for_each_param(Fn&& fn) {
    for (auto& n : nodes) {
      switch (n.kind) {
        case NodeKind::conv:
          fn(n, n.conv().weight, false);
          if (n.conv().bias) fn(n, *n.conv().bias, false);
          break;
        case NodeKind::bn:
          fn(n, n.bn().alpha, true);
          fn(n, n.bn().beta, true);
          break;
        case NodeKind::fc:
          fn(n, n.fc().weight, false);
          fn(n, n.fc().bias, false);
          break;
        default: break;
      }
    }
  }

  void enable_grads() {
    for_each_param([](auto&, Tensor<T>& t, bool) { t.enable_grad(); });
  }
  void zero_grads() {
    for_each_param([](auto&, Tensor<T>& t, bool) { t.zero_grad(); });
  }
  void drop_grads() {
    for_each_param([](auto&, Tensor<T>& t, bool) { t.drop_grad(); });
  }

  std::vector<int> bn_ids() const {
    std::vector<int> ids;
    for (const auto& n : nodes) {
      if (n.kind == NodeKind::bn) ids.push_back(n.id);
    }
    return ids;
  }

  template <typename U>
  ModelGraph<U> cast() const {
    ModelGraph<U> g;
    g.blocks = blocks;
    g.meta = meta;
    g.output = output;
    for (const auto& n : nodes) {
      LayerNode<U> m;
      m.id = n.id;
      m.kind = n.kind;
      m.name = n.name;
      m.inputs = n.inputs;
      m.channels = n.channels;
      std::visit(
          [&](const auto& p) {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, std::monostate>) {
              m.params = std::monostate{};
            } else {
              m.params = p.template cast<U>();
            }
          },
          n.params);
      g.nodes.push_back(std::move(m));
    }
    g.reindex();
    return g;
  }

 private:
  std::unordered_map<int, std::size_t> index_;
};

}  // namespace lprune
