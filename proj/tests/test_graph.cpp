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

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "lprune/builders.hpp"
#include "lprune/checkpoint.hpp"
#include "lprune/executor.hpp"
#include "support/oracles.hpp"

using namespace lprune;
namespace fs = std::filesystem;

namespace {

// Closed-form trainable count of a bottleneck net: stem, per-block branch
// convs and BNs, first-block projections, head BN and FC.
std::size_t hand_count(std::size_t blocks, std::array<std::size_t, 3> widths, std::size_t classes) {
  std::size_t total = 3 * widths[0] * 9;
  std::size_t c_in = widths[0];
  for (std::size_t w : widths) {
    for (std::size_t b = 0; b < blocks; ++b) {
      total += 2 * c_in + c_in * w;  // bn1, conv1
      total += 2 * w + w * w * 9;    // bn2, conv2
      total += 2 * w + w * 4 * w;    // bn3, conv3
      if (b == 0) total += c_in * 4 * w;
      c_in = 4 * w;
    }
  }
  return total + 2 * c_in + c_in * classes + classes;
}

fs::path temp_path(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "lprune_graph_tests";
  fs::create_directories(dir);
  return dir / name;
}

Tensor<float> random_input(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return oracle::random_tensor<float>(Shape{n, 3, 32, 32}, rng);
}

std::string with_metadata(const std::string& bytes, const std::function<void(nlohmann::json&)>& edit) {
  const auto meta_len = static_cast<std::size_t>(detail::get_le(bytes, 8, 8));
  auto j = nlohmann::json::parse(bytes.substr(kCheckpointHeaderBytes, meta_len));
  edit(j);
  const std::string meta = j.dump();
  std::string out = bytes.substr(0, 8);
  detail::put_u64(out, meta.size());
  out += meta;
  out += bytes.substr(kCheckpointHeaderBytes + meta_len);
  return out;
}

}  // namespace

TEST(Builders, ResNet164ParameterBudget) {
  const auto g = build_resnet164<float>();
  const std::size_t n = g.count_params();
  EXPECT_GE(n, 1660000u);
  EXPECT_LE(n, 1740000u);
  EXPECT_EQ(n, hand_count(18, {16, 32, 64}, 10));
  EXPECT_EQ(g.blocks.size(), 54u);
  EXPECT_EQ(g.meta.depth, 164u);
}

TEST(Builders, ResNet164ForwardShape) {
  auto g = build_resnet164<float>();
  const auto y = graph_forward(g, random_input(2, 1), Mode::infer);
  EXPECT_EQ(y.shape(), (Shape{2, 10, 1, 1}));
}

TEST(Builders, MiniNetBlocksAndDepth) {
  const auto g = build_mini_resnet<float>(2, {4, 8, 16}, 10);
  EXPECT_EQ(g.blocks.size(), 6u);
  EXPECT_EQ(g.meta.depth, 20u);
  auto copy = g;
  EXPECT_NO_THROW(copy.validate());
}

TEST(Builders, TinyNetMatchesHandCount) {
  // 54 stem + 84 + 156 + 156 per stage + 16 head BN + 27 FC.
  EXPECT_EQ(build_mini_resnet<float>(1, {2, 2, 2}, 3).count_params(), 493u);
  EXPECT_EQ(hand_count(1, {2, 2, 2}, 3), 493u);
  EXPECT_EQ(build_desk_resnet<float>().count_params(), hand_count(2, {8, 16, 32}, 10));
}

TEST(Builders, InvalidConfigsRejected) {
  EXPECT_THROW(build_mini_resnet<float>(0, {4, 8, 16}, 10), InvalidArgument);
  EXPECT_THROW(build_mini_resnet<float>(1, {4, 0, 16}, 10), InvalidArgument);
  EXPECT_THROW(build_mini_resnet<float>(1, {4, 8, 16}, 0), InvalidArgument);
}

TEST(Builders, SameSeedSameWeights) {
  const auto a = build_desk_resnet<float>(10, InitOptions{5});
  const auto b = build_desk_resnet<float>(10, InitOptions{5});
  EXPECT_EQ(serialize_checkpoint(a), serialize_checkpoint(b));
}

TEST(CountParams, SingleNodes) {
  LayerNode<float> conv;
  conv.kind = NodeKind::conv;
  conv.params = ConvParams<float>{Tensor<float>(Shape{16, 3, 3, 3}), std::nullopt, 1, 1};
  EXPECT_EQ(conv.num_params(), 432u);
  LayerNode<float> bn;
  bn.kind = NodeKind::bn;
  bn.params = BNParams<float>::make(16);
  EXPECT_EQ(bn.num_params(), 32u);
  EXPECT_EQ(bn.num_stored(), 64u);
}

TEST(GraphForward, SingleIdentityConv) {
  ModelGraph<float> g;
  g.meta.input = Shape{1, 3, 5, 5};
  LayerNode<float> n;
  n.id = 0;
  n.kind = NodeKind::conv;
  n.name = "id";
  n.inputs = {kGraphInput};
  Tensor<float> w(Shape{3, 3, 1, 1});
  for (std::size_t c = 0; c < 3; ++c) w.at(c, c, 0, 0) = 1.f;
  n.params = ConvParams<float>{w, std::nullopt, 1, 0};
  g.nodes.push_back(n);
  g.output = 0;
  g.validate();
  std::mt19937_64 rng(0);
  const auto x = oracle::random_tensor<float>(Shape{2, 3, 5, 5}, rng);
  const auto y = graph_forward(g, x, Mode::infer);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(GraphForward, InputMismatchNamesNode) {
  auto g = build_desk_resnet<float>();
  try {
    graph_forward(g, Tensor<float>(Shape{1, 4, 32, 32}), Mode::infer);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("node"), std::string::npos);
  }
}

TEST(GraphForward, NodeOrderDoesNotMatter) {
  auto g = build_desk_resnet<float>(10, InitOptions{3});
  std::mt19937_64 rng(3);
  oracle::randomize_bn(g, rng);
  const auto x = random_input(2, 4);
  const auto ref = graph_forward(g, x, Mode::infer);
  for (int trial = 0; trial < 5; ++trial) {
    auto h = g;
    std::shuffle(h.nodes.begin(), h.nodes.end(), rng);
    h.validate();
    const auto y = graph_forward(h, x, Mode::infer);
    for (std::size_t i = 0; i < y.numel(); ++i) ASSERT_EQ(y[i], ref[i]);
  }
}

TEST(GraphForward, DeterministicTrainStep) {
  auto a = build_desk_resnet<float>(10, InitOptions{1});
  auto b = build_desk_resnet<float>(10, InitOptions{1});
  const auto x = random_input(4, 2);
  const auto ya = graph_forward(a, x, Mode::train);
  const auto yb = graph_forward(b, x, Mode::train);
  for (std::size_t i = 0; i < ya.numel(); ++i) ASSERT_EQ(ya[i], yb[i]);
}

TEST(Validate, AcceptsBuilderGraphs) {
  for (std::size_t b : {1u, 2u, 3u}) {
    auto g = build_mini_resnet<float>(b, {4, 8, 16}, 10);
    EXPECT_NO_THROW(g.validate());
  }
}

TEST(Validate, RejectsAnySingleMutatedChannelCount) {
  const auto base = build_mini_resnet<float>(1, {2, 4, 4}, 5);
  std::size_t mutated = 0;
  for (std::size_t pos = 0; pos < base.nodes.size(); ++pos) {
    const auto kind = base.nodes[pos].kind;
    if (kind != NodeKind::conv && kind != NodeKind::bn && kind != NodeKind::fc) continue;
    for (int which = 0; which < 2; ++which) {
      auto g = base;
      auto& n = g.nodes[pos];
      if (kind == NodeKind::conv) {
        Shape s = n.conv().weight.shape();
        (which ? s.n : s.c) += 1;
        n.conv().weight = Tensor<float>(s);
      } else if (kind == NodeKind::bn) {
        if (which) continue;
        n.params = BNParams<float>::make(n.bn().channels() + 1);
      } else {
        Shape s = n.fc().weight.shape();
        if (which) continue;
        s.c += 1;
        n.fc().weight = Tensor<float>(s);
      }
      EXPECT_THROW(g.validate(), ShapeError) << "node " << n.name << " variant " << which;
      ++mutated;
    }
  }
  EXPECT_GT(mutated, 20u);
}

TEST(Validate, RejectsTwoSinks) {
  auto g = build_mini_resnet<float>(1, {2, 2, 2}, 3);
  LayerNode<float> extra;
  extra.id = g.next_id();
  extra.kind = NodeKind::relu;
  extra.inputs = {g.nodes.front().id};
  g.nodes.push_back(extra);
  EXPECT_THROW(g.validate(), ShapeError);
}

TEST(Checkpoint, RoundTripIsByteIdenticalAndForwardExact) {
  auto g = build_desk_resnet<float>(10, InitOptions{7});
  std::mt19937_64 rng(7);
  oracle::randomize_bn(g, rng);
  const auto p1 = temp_path("rt1.lprn"), p2 = temp_path("rt2.lprn");
  save_checkpoint(g, p1);
  auto h = load_checkpoint(p1);
  save_checkpoint(h, p2);
  std::ifstream a(p1, std::ios::binary), b(p2, std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
  EXPECT_EQ(sa, sb);
  const auto x = random_input(2, 8);
  const auto ya = graph_forward(g, x, Mode::infer);
  const auto yb = graph_forward(h, x, Mode::infer);
  for (std::size_t i = 0; i < ya.numel(); ++i) ASSERT_EQ(ya[i], yb[i]);
}

TEST(Checkpoint, SizeIsHeaderMetadataAndFourBytesPerElement) {
  const auto g = build_desk_resnet<float>();
  const std::string bytes = serialize_checkpoint(g);
  const auto meta_len = static_cast<std::size_t>(detail::get_le(bytes, 8, 8));
  EXPECT_EQ(bytes.size(), kCheckpointHeaderBytes + meta_len + 4 * g.count_stored());
  EXPECT_EQ(bytes.substr(0, 4), "LPRN");
  EXPECT_EQ(checkpoint_size(g), bytes.size());
  const auto p = temp_path("size.lprn");
  save_checkpoint(g, p);
  EXPECT_EQ(fs::file_size(p), bytes.size());
}

TEST(Checkpoint, ResNet164SizeTracksStoredElements) {
  const auto g = build_resnet164<float>();
  const std::size_t size = checkpoint_size(g);
  EXPECT_GE(size, 4 * g.count_stored());
  EXPECT_LT(size, 4 * g.count_stored() + 200000);
  EXPECT_GT(size, 6500000u);
  EXPECT_LT(size, 7500000u);
}

TEST(Checkpoint, BadMagicOrVersionIsFormatError) {
  std::string bytes = serialize_checkpoint(build_mini_resnet<float>(1, {2, 2, 2}, 3));
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(parse_checkpoint(bad_magic), CheckpointFormatError);
  std::string bad_version = bytes;
  bad_version[4] = 9;
  EXPECT_THROW(parse_checkpoint(bad_version), CheckpointFormatError);
}

TEST(Checkpoint, ShortFilesAreTruncationErrors) {
  const std::string bytes = serialize_checkpoint(build_mini_resnet<float>(1, {2, 2, 2}, 3));
  EXPECT_THROW(parse_checkpoint(bytes.substr(0, 10)), CheckpointTruncatedError);
  EXPECT_THROW(parse_checkpoint(bytes.substr(0, kCheckpointHeaderBytes + 20)), CheckpointTruncatedError);
  EXPECT_THROW(parse_checkpoint(bytes.substr(0, bytes.size() - 4)), CheckpointTruncatedError);
}

TEST(Checkpoint, TopologyBlobDisagreementIsTopologyError) {
  const std::string bytes = serialize_checkpoint(build_mini_resnet<float>(1, {2, 2, 2}, 3));
  EXPECT_THROW(parse_checkpoint(bytes + std::string(8, '\0')), CheckpointTopologyError);
  const auto miscounted = with_metadata(bytes, [](nlohmann::json& j) {
    j["counters"]["stored_elements"] = j["counters"]["stored_elements"].get<std::size_t>() + 1;
  });
  EXPECT_THROW(parse_checkpoint(miscounted), CheckpointTopologyError);
  const auto rewired = with_metadata(bytes, [](nlohmann::json& j) { j["output"] = 0; });
  EXPECT_THROW(parse_checkpoint(rewired), CheckpointTopologyError);
}

TEST(Checkpoint, ErrorsAreDistinctTypes) {
  const std::string bytes = serialize_checkpoint(build_mini_resnet<float>(1, {2, 2, 2}, 3));
  std::string bad = bytes;
  bad[1] = 'Q';
  try {
    parse_checkpoint(bad);
  } catch (const CheckpointTruncatedError&) {
    FAIL();
  } catch (const CheckpointTopologyError&) {
    FAIL();
  } catch (const CheckpointFormatError&) {
  }
  EXPECT_THROW(load_checkpoint(temp_path("does-not-exist.lprn")), MissingFileError);
}

TEST(Checkpoint, DoubleGraphsStoreAsFloat) {
  auto g = build_mini_resnet<double>(1, {2, 2, 2}, 3);
  const auto h = parse_checkpoint(serialize_checkpoint(g));
  EXPECT_EQ(h.count_params(), g.count_params());
}
