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

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lprune/error.hpp"
#include "lprune/graph.hpp"

// Checkpoint layout (all integers little-endian):
//   "LPRN" | u32 version | u64 metadata length | UTF-8 JSON topology |
//   f32 blobs in node order: conv weight, conv bias, bn alpha, bn beta,
//   bn running_mean, bn running_var, fc weight, fc bias.

namespace lprune {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::size_t kCheckpointHeaderBytes = 4 + 4 + 8;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}
inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}
inline std::uint64_t get_le(std::string_view in, std::size_t at, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  }
  return v;
}

template <typename Range>
void put_f32(std::string& out, const Range& values) {
  for (auto v : values) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

class BlobReader {
 public:
  explicit BlobReader(std::string_view bytes) : bytes_(bytes) {}
  template <typename Range>
  void read(Range&& dst) {
    for (auto& v : dst) {
      v = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(bytes_, pos_, 4)));
      pos_ += 4;
    }
  }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

inline nlohmann::json shape_json(const Shape& s) { return {s.n, s.c, s.h, s.w}; }
inline Shape shape_from_json(const nlohmann::json& j) {
  return Shape{j.at(0).get<std::size_t>(), j.at(1).get<std::size_t>(), j.at(2).get<std::size_t>(),
               j.at(3).get<std::size_t>()};
}

template <typename T>
nlohmann::json topology_json(const ModelGraph<T>& g) {
  using nlohmann::json;
  json nodes = json::array();
  for (const auto& n : g.nodes) {
    json j = {{"id", n.id}, {"kind", to_string(n.kind)}, {"name", n.name},
              {"inputs", n.inputs}, {"channels", n.channels}};
    switch (n.kind) {
      case NodeKind::conv:
        j["conv"] = {{"weight", shape_json(n.conv().weight.shape())},
                     {"bias", n.conv().bias.has_value()},
                     {"stride", n.conv().stride},
                     {"padding", n.conv().padding}};
        break;
      case NodeKind::bn:
        j["bn"] = {{"channels", n.bn().channels()},
                   {"eps", static_cast<double>(n.bn().eps)},
                   {"momentum", static_cast<double>(n.bn().momentum)},
                   {"select", n.bn().select}};
        break;
      case NodeKind::fc:
        j["fc"] = {{"weight", shape_json(n.fc().weight.shape())}};
        break;
      default: break;
    }
    nodes.push_back(std::move(j));
  }
  json blocks = json::array();
  for (const auto& b : g.blocks) {
    blocks.push_back({{"id", b.id}, {"stage", b.stage}, {"stride", b.stride}, {"input", b.input},
                      {"branch", b.branch}, {"projection", b.projection}, {"add", b.add},
                      {"state", to_string(b.state)}});
  }
  return {
      {"format", "lprune-checkpoint"},
      {"meta",
       {{"depth", g.meta.depth},
        {"classes", g.meta.classes},
        {"blocks_per_stage", g.meta.blocks_per_stage},
        {"widths", g.meta.widths},
        {"expansion", g.meta.expansion},
        {"input", {g.meta.input.c, g.meta.input.h, g.meta.input.w}}}},
      {"output", g.output},
      {"nodes", std::move(nodes)},
      {"blocks", std::move(blocks)},
      {"counters", {{"parameters", g.count_params()}, {"stored_elements", g.count_stored()}}}};
}

inline ResidualBlock::State block_state_from_string(const std::string& s) {
  for (auto st : {ResidualBlock::State::intact, ResidualBlock::State::composed,
                  ResidualBlock::State::removed}) {
    if (s == to_string(st)) return st;
  }
  throw InvalidArgument("unknown block state '" + s + "'");
}

inline ModelGraph<float> graph_from_topology(const nlohmann::json& j) {
  ModelGraph<float> g;
  const auto& m = j.at("meta");
  g.meta.depth = m.at("depth").get<std::size_t>();
  g.meta.classes = m.at("classes").get<std::size_t>();
  g.meta.blocks_per_stage = m.at("blocks_per_stage").get<std::size_t>();
  g.meta.widths = m.at("widths").get<std::array<std::size_t, 3>>();
  g.meta.expansion = m.at("expansion").get<std::size_t>();
  const auto in = m.at("input");
  g.meta.input = Shape{1, in.at(0).get<std::size_t>(), in.at(1).get<std::size_t>(),
                       in.at(2).get<std::size_t>()};
  g.output = j.at("output").get<int>();
  for (const auto& jn : j.at("nodes")) {
    LayerNode<float> n;
    n.id = jn.at("id").get<int>();
    n.kind = node_kind_from_string(jn.at("kind").get<std::string>());
    n.name = jn.at("name").get<std::string>();
    n.inputs = jn.at("inputs").get<std::vector<int>>();
    n.channels = jn.at("channels").get<std::size_t>();
    switch (n.kind) {
      case NodeKind::conv: {
        const auto& c = jn.at("conv");
        ConvParams<float> p;
        p.weight = Tensor<float>(shape_from_json(c.at("weight")));
        if (c.at("bias").get<bool>()) p.bias = Tensor<float>::vector(p.weight.shape().n);
        p.stride = c.at("stride").get<std::size_t>();
        p.padding = c.at("padding").get<std::size_t>();
        n.params = std::move(p);
        break;
      }
      case NodeKind::bn: {
        const auto& b = jn.at("bn");
        auto p = BNParams<float>::make(b.at("channels").get<std::size_t>());
        p.eps = static_cast<float>(b.at("eps").get<double>());
        p.momentum = static_cast<float>(b.at("momentum").get<double>());
        p.select = b.at("select").get<std::vector<std::size_t>>();
        n.params = std::move(p);
        break;
      }
      case NodeKind::fc: {
        const Shape w = shape_from_json(jn.at("fc").at("weight"));
        n.params = LinearParams<float>{Tensor<float>(w), Tensor<float>::vector(w.n)};
        break;
      }
      default: break;
    }
    g.nodes.push_back(std::move(n));
  }
  for (const auto& jb : j.at("blocks")) {
    ResidualBlock b;
    b.id = jb.at("id").get<int>();
    b.stage = jb.at("stage").get<std::size_t>();
    b.stride = jb.at("stride").get<std::size_t>();
    b.input = jb.at("input").get<int>();
    b.branch = jb.at("branch").get<std::vector<int>>();
    b.projection = jb.at("projection").get<int>();
    b.add = jb.at("add").get<int>();
    b.state = block_state_from_string(jb.at("state").get<std::string>());
    g.blocks.push_back(std::move(b));
  }
  return g;
}

}  // namespace detail

/// Serializes a graph to the checkpoint byte layout. Parameters are stored
/// as 32-bit floats whatever the in-memory precision.
template <typename T>
std::string serialize_checkpoint(const ModelGraph<T>& g) {
  const std::string meta = detail::topology_json(g).dump();
  std::string out;
  out.reserve(kCheckpointHeaderBytes + meta.size() + 4 * g.count_stored());
  out.append("LPRN", 4);
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u64(out, meta.size());
  out.append(meta);
  for (const auto& n : g.nodes) {
    switch (n.kind) {
      case NodeKind::conv:
        detail::put_f32(out, n.conv().weight.data());
        if (n.conv().bias) detail::put_f32(out, n.conv().bias->data());
        break;
      case NodeKind::bn:
        detail::put_f32(out, n.bn().alpha.data());
        detail::put_f32(out, n.bn().beta.data());
        detail::put_f32(out, n.bn().running_mean);
        detail::put_f32(out, n.bn().running_var);
        break;
      case NodeKind::fc:
        detail::put_f32(out, n.fc().weight.data());
        detail::put_f32(out, n.fc().bias.data());
        break;
      default: break;
    }
  }
  return out;
}

/// Byte size of the checkpoint `g` would produce.
template <typename T>
std::size_t checkpoint_size(const ModelGraph<T>& g) {
  return kCheckpointHeaderBytes + detail::topology_json(g).dump().size() + 4 * g.count_stored();
}

inline ModelGraph<float> parse_checkpoint(std::string_view bytes) {
  if (bytes.size() < kCheckpointHeaderBytes) {
    throw CheckpointTruncatedError("checkpoint shorter than its 16-byte header");
  }
  if (bytes.substr(0, 4) != "LPRN") throw CheckpointFormatError("checkpoint magic is not LPRN");
  const auto version = static_cast<std::uint32_t>(detail::get_le(bytes, 4, 4));
  if (version != kCheckpointVersion) {
    throw CheckpointFormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint64_t meta_len = detail::get_le(bytes, 8, 8);
  if (meta_len > bytes.size() - kCheckpointHeaderBytes) {
    throw CheckpointTruncatedError("checkpoint metadata truncated");
  }
  ModelGraph<float> g;
  std::uint64_t declared_stored = 0;
  try {
    const auto j = nlohmann::json::parse(bytes.substr(kCheckpointHeaderBytes, meta_len));
    g = detail::graph_from_topology(j);
    declared_stored = j.at("counters").at("stored_elements").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointTopologyError(std::string("unreadable checkpoint topology: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw CheckpointTopologyError(std::string("unreadable checkpoint topology: ") + e.what());
  }
  const std::size_t stored = g.count_stored();
  if (stored != declared_stored) {
    throw CheckpointTopologyError("topology describes " + std::to_string(stored) +
                                  " stored elements but its counter says " +
                                  std::to_string(declared_stored));
  }
  const std::size_t blob = bytes.size() - kCheckpointHeaderBytes - meta_len;
  if (blob < 4 * stored) {
    throw CheckpointTruncatedError("checkpoint blob holds " + std::to_string(blob) +
                                   " bytes, topology needs " + std::to_string(4 * stored));
  }
  if (blob > 4 * stored) {
    throw CheckpointTopologyError("checkpoint blob holds " + std::to_string(blob) +
                                  " bytes, topology accounts for only " +
                                  std::to_string(4 * stored));
  }
  detail::BlobReader r(bytes.substr(kCheckpointHeaderBytes + meta_len));
  for (auto& n : g.nodes) {
    switch (n.kind) {
      case NodeKind::conv:
        r.read(n.conv().weight.data());
        if (n.conv().bias) r.read(n.conv().bias->data());
        break;
      case NodeKind::bn:
        r.read(n.bn().alpha.data());
        r.read(n.bn().beta.data());
        r.read(n.bn().running_mean);
        r.read(n.bn().running_var);
        break;
      case NodeKind::fc:
        r.read(n.fc().weight.data());
        r.read(n.fc().bias.data());
        break;
      default: break;
    }
  }
  try {
    g.validate();
  } catch (const Error& e) {
    throw CheckpointTopologyError(std::string("checkpoint topology is inconsistent: ") + e.what());
  }
  return g;
}

template <typename T>
void save_checkpoint(const ModelGraph<T>& g, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(g);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("failed writing " + path.string());
}

inline ModelGraph<float> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw MissingFileError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes);
}

}  // namespace lprune
