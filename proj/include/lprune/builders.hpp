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

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>

#include "lprune/error.hpp"
#include "lprune/graph.hpp"

namespace lprune {

struct InitOptions {
  std::uint64_t seed = 0;
  double alpha_init = 0.5;  // initial BN scale
};

namespace detail {

template <typename T>
class GraphBuilder {
 public:
  GraphBuilder(ModelGraph<T>& g, std::uint64_t seed) : g_(g), rng_(seed) {}

  int conv(int input, std::size_t in, std::size_t out, std::size_t k, std::size_t stride,
           std::size_t pad, std::string name) {
    ConvParams<T> p;
    p.weight = Tensor<T>(Shape{out, in, k, k});
    p.stride = stride;
    p.padding = pad;
    // He-normal over the fan-out, as in the original pre-activation ResNet code.
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(k * k * out)));
    for (auto& v : p.weight.data()) v = static_cast<T>(dist(rng_));
    return push(NodeKind::conv, {input}, std::move(p), std::move(name));
  }

  int bn(int input, std::size_t channels, double alpha_init, std::string name) {
    return push(NodeKind::bn, {input}, BNParams<T>::make(channels, static_cast<T>(alpha_init)),
                std::move(name));
  }

  int relu(int input, std::string name) { return push(NodeKind::relu, {input}, {}, std::move(name)); }
  int pool(int input, std::string name) { return push(NodeKind::pool, {input}, {}, std::move(name)); }
  int add(int a, int b, std::string name) { return push(NodeKind::add, {a, b}, {}, std::move(name)); }

  int fc(int input, std::size_t in, std::size_t out, std::string name) {
    LinearParams<T> p;
    p.weight = Tensor<T>(Shape{out, in, 1, 1});
    p.bias = Tensor<T>::vector(out);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : p.weight.data()) v = static_cast<T>(dist(rng_));
    return push(NodeKind::fc, {input}, std::move(p), std::move(name));
  }

 private:
  int push(NodeKind kind, std::vector<int> inputs, typename LayerNode<T>::Params params,
           std::string name) {
    LayerNode<T> n;
    n.id = static_cast<int>(g_.nodes.size());
    n.kind = kind;
    n.name = std::move(name);
    n.inputs = std::move(inputs);
    n.params = std::move(params);
    g_.nodes.push_back(std::move(n));
    return g_.nodes.back().id;
  }

  ModelGraph<T>& g_;
  std::mt19937_64 rng_;
};

}  // namespace detail

/// Pre-activation bottleneck ResNet for 3x32x32 inputs: a 3x3 stem, three
/// stages of `blocks_per_stage` bottlenecks (bottleneck widths `widths`,
/// expansion 4, stride 2 on the 3x3 conv entering stages 2 and 3), then
/// BN-ReLU, global average pool and a fully-connected classifier.
/// Depth is 9 * blocks_per_stage + 2.
template <typename T = float>
ModelGraph<T> build_mini_resnet(std::size_t blocks_per_stage, std::array<std::size_t, 3> widths,
                                std::size_t classes, InitOptions init = {}) {
  if (blocks_per_stage < 1) throw InvalidArgument("blocks_per_stage must be at least 1");
  for (std::size_t w : widths) {
    if (w == 0) throw InvalidArgument("stage widths must be positive");
  }
  if (classes == 0) throw InvalidArgument("class count must be positive");

  ModelGraph<T> g;
  g.meta.depth = 9 * blocks_per_stage + 2;
  g.meta.classes = classes;
  g.meta.blocks_per_stage = blocks_per_stage;
  g.meta.widths = widths;
  g.meta.expansion = 4;
  g.meta.input = Shape{1, 3, 32, 32};

  detail::GraphBuilder<T> b(g, init.seed);
  const double a0 = init.alpha_init;
  std::size_t in = widths[0];
  int x = b.conv(kGraphInput, 3, in, 3, 1, 1, "stem");

  int block_id = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    const std::size_t w = widths[s];
    const std::size_t out = w * g.meta.expansion;
    for (std::size_t i = 0; i < blocks_per_stage; ++i) {
      const std::size_t stride = (s > 0 && i == 0) ? 2 : 1;
      const std::string p = "s" + std::to_string(s + 1) + ".b" + std::to_string(i) + ".";
      ResidualBlock blk;
      blk.id = block_id++;
      blk.stage = s;
      blk.stride = stride;
      blk.input = x;
      int y = b.bn(x, in, a0, p + "bn1");
      blk.branch.push_back(y);
      blk.branch.push_back(y = b.relu(y, p + "relu1"));
      blk.branch.push_back(y = b.conv(y, in, w, 1, 1, 0, p + "conv1"));
      blk.branch.push_back(y = b.bn(y, w, a0, p + "bn2"));
      blk.branch.push_back(y = b.relu(y, p + "relu2"));
      blk.branch.push_back(y = b.conv(y, w, w, 3, stride, 1, p + "conv2"));
      blk.branch.push_back(y = b.bn(y, w, a0, p + "bn3"));
      blk.branch.push_back(y = b.relu(y, p + "relu3"));
      blk.branch.push_back(y = b.conv(y, w, out, 1, 1, 0, p + "conv3"));
      int shortcut = x;
      if (i == 0) {
        blk.projection = shortcut = b.conv(x, in, out, 1, stride, 0, p + "proj");
      }
      blk.add = x = b.add(y, shortcut, p + "add");
      g.blocks.push_back(std::move(blk));
      in = out;
    }
  }
  int y = b.bn(x, in, a0, "head.bn");
  y = b.relu(y, "head.relu");
  y = b.pool(y, "head.pool");
  g.output = b.fc(y, in, classes, "fc");
  g.validate();
  return g;
}

/// ResNet-164: 18 bottlenecks per stage, widths 16/32/64.
template <typename T = float>
ModelGraph<T> build_resnet164(std::size_t classes = 10, InitOptions init = {}) {
  return build_mini_resnet<T>(18, {16, 32, 64}, classes, init);
}

/// Default desk-scale stand-in: depth 20 (two bottlenecks per stage).
template <typename T = float>
ModelGraph<T> build_desk_resnet(std::size_t classes = 10, InitOptions init = {}) {
  return build_mini_resnet<T>(2, {8, 16, 32}, classes, init);
}

}  // namespace lprune
