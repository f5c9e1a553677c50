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
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lprune/error.hpp"
#include "lprune/graph.hpp"

namespace lprune {

/// Global cutoff on |alpha|: channels with |alpha| < t are pruned. `ratio`
/// is the fraction of all BN channels (pooled across layers) to remove; t is
/// placed midway between the last pruned and first kept order statistic.
template <typename T>
double select_threshold(const ModelGraph<T>& g, double ratio) {
  if (!(ratio >= 0.0) || ratio >= 1.0) {
    throw InvalidArgument("target prune ratio must be in [0, 1), got " + std::to_string(ratio));
  }
  std::vector<double> pooled;
  for (const auto& n : g.nodes) {
    if (n.kind != NodeKind::bn) continue;
    for (T a : n.bn().alpha.data()) pooled.push_back(std::abs(static_cast<double>(a)));
  }
  if (pooled.empty()) throw InvalidArgument("graph has no batch-norm channels to rank");
  std::sort(pooled.begin(), pooled.end());
  const auto k = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(pooled.size())));
  if (k == 0) return std::nextafter(pooled.front(), -std::numeric_limits<double>::infinity());
  return 0.5 * (pooled[k - 1] + pooled[k]);
}

enum class BetaMode { discard, absorb };

struct FoldCandidate {
  int block = 0;
  int bn = 0;  // middle BN left with a single channel
};

struct PrunePlan {
  double threshold = 0.0;
  std::map<int, std::vector<bool>> keep;  // BN node id -> keep mask over its channels
  std::vector<FoldCandidate> fold_candidates;
  std::size_t params_before = 0;
  std::size_t predicted_params = 0;
  BetaMode beta_mode = BetaMode::discard;

  std::size_t kept(int bn) const {
    const auto& m = keep.at(bn);
    return static_cast<std::size_t>(std::count(m.begin(), m.end(), true));
  }
  std::size_t dropped_total() const {
    std::size_t d = 0;
    for (const auto& [id, m] : keep) d += static_cast<std::size_t>(std::count(m.begin(), m.end(), false));
    return d;
  }
};

namespace detail {

/// Where a BN's channel cut lands in the graph.
struct CutSite {
  int bn = 0;
  int producer = kGraphInput;  // conv whose output filters are removed, or none (gather)
  int consumer = kGraphInput;  // conv or fc whose input slice is removed
  NodeKind consumer_kind = NodeKind::conv;
  bool prunable = false;
};

template <typename T>
CutSite cut_site(const ModelGraph<T>& g, int bn_id) {
  CutSite s;
  s.bn = bn_id;
  const auto& bn = g.node(bn_id);
  const int src = bn.inputs.front();
  if (src != kGraphInput && g.node(src).kind == NodeKind::conv && bn.bn().select.empty() &&
      g.consumers(src).size() == 1) {
    s.producer = src;
  }
  int cur = bn_id;
  while (true) {
    const auto users = g.consumers(cur);
    if (users.size() != 1) return s;
    const auto& u = g.node(users.front());
    if (u.kind == NodeKind::relu || u.kind == NodeKind::pool) {
      cur = u.id;
      continue;
    }
    if (u.kind == NodeKind::conv || u.kind == NodeKind::fc) {
      if (u.kind == NodeKind::fc && g.node(u.inputs.front()).kind != NodeKind::pool) return s;
      s.consumer = u.id;
      s.consumer_kind = u.kind;
      s.prunable = true;
    }
    return s;
  }
}

/// conv -> bn -> relu -> conv inside a block branch.
struct Sandwich {
  int conv_a = 0;
  int bn = 0;
  int relu = 0;
  int conv_b = 0;
};

template <typename T>
std::vector<Sandwich> block_sandwiches(const ModelGraph<T>& g, const ResidualBlock& b) {
  std::vector<Sandwich> out;
  for (std::size_t i = 0; i + 3 < b.branch.size(); ++i) {
    const auto& n0 = g.node(b.branch[i]);
    const auto& n1 = g.node(b.branch[i + 1]);
    const auto& n2 = g.node(b.branch[i + 2]);
    const auto& n3 = g.node(b.branch[i + 3]);
    if (n0.kind == NodeKind::conv && n1.kind == NodeKind::bn && n2.kind == NodeKind::relu &&
        n3.kind == NodeKind::conv) {
      out.push_back({n0.id, n1.id, n2.id, n3.id});
    }
  }
  return out;
}

template <typename T>
std::optional<Sandwich> single_channel_sandwich(const ModelGraph<T>& g, const ResidualBlock& b,
                                                int bn = kGraphInput) {
  if (b.state == ResidualBlock::State::removed) return std::nullopt;
  for (const auto& s : block_sandwiches(g, b)) {
    if ((bn == kGraphInput || s.bn == bn) && g.node(s.bn).bn().channels() == 1) return s;
  }
  return std::nullopt;
}

inline std::vector<std::size_t> kept_indices(const std::vector<bool>& mask) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) idx.push_back(i);
  }
  return idx;
}

/// Copies the (dim0, dim1) slices of an (n, c, h, w) tensor listed in `rows` and `cols`.
template <typename T>
Tensor<T> slice_nc(const Tensor<T>& t, const std::vector<std::size_t>& rows,
                   const std::vector<std::size_t>& cols) {
  const Shape s = t.shape();
  Tensor<T> out(Shape{rows.size(), cols.size(), s.h, s.w});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      for (std::size_t y = 0; y < s.h; ++y) {
        for (std::size_t x = 0; x < s.w; ++x) out.at(r, c, y, x) = t.at(rows[r], cols[c], y, x);
      }
    }
  }
  return out;
}

inline std::vector<std::size_t> iota_n(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

template <typename T>
std::vector<T> gather(const std::vector<T>& v, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(v[i]);
  return out;
}

template <typename T>
Tensor<T> gather(const Tensor<T>& v, const std::vector<std::size_t>& idx) {
  Tensor<T> out = Tensor<T>::vector(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) out[k] = v[idx[k]];
  return out;
}

// Constant a dropped channel keeps emitting once alpha is treated as zero.
template <typename T>
T dropped_constant(const BNParams<T>& p, std::size_t c) {
  return std::max(p.beta[c], T{0});
}

}  // namespace detail

/// Keep masks for every BN (|alpha| >= t, at least one channel per BN: the
/// max-|alpha| channel, lowest index on ties), fold candidates, and the
/// parameter count the surgery will produce.
template <typename T>
PrunePlan plan_prune(const ModelGraph<T>& g, double threshold, BetaMode beta_mode = BetaMode::discard) {
  PrunePlan plan;
  plan.threshold = threshold;
  plan.beta_mode = beta_mode;
  plan.params_before = g.count_params();

  for (const auto& n : g.nodes) {
    if (n.kind != NodeKind::bn) continue;
    const auto& alpha = n.bn().alpha;
    std::vector<bool> mask(alpha.numel(), true);
    if (detail::cut_site(g, n.id).prunable) {
      std::size_t best = 0;
      bool any = false;
      for (std::size_t i = 0; i < alpha.numel(); ++i) {
        const double a = std::abs(static_cast<double>(alpha[i]));
        mask[i] = a >= threshold;
        any = any || mask[i];
        if (a > std::abs(static_cast<double>(alpha[best]))) best = i;
      }
      if (!any && !mask.empty()) mask[best] = true;
    }
    plan.keep.emplace(n.id, std::move(mask));
  }

  for (const auto& b : g.blocks) {
    if (b.state == ResidualBlock::State::removed) continue;
    for (const auto& s : detail::block_sandwiches(g, b)) {
      if (plan.kept(s.bn) == 1) {
        plan.fold_candidates.push_back({b.id, s.bn});
        break;
      }
    }
  }

  // Predicted count: every tensor's surviving extents after the cuts.
  std::map<int, std::size_t> out_ch;
  std::map<int, std::size_t> in_ch;
  std::map<int, bool> gains_bias;
  for (const auto& [bn_id, mask] : plan.keep) {
    const auto site = detail::cut_site(g, bn_id);
    if (!site.prunable) continue;
    const std::size_t kept = plan.kept(bn_id);
    if (site.producer != kGraphInput) out_ch[site.producer] = kept;
    in_ch[site.consumer] = kept;
    if (beta_mode == BetaMode::absorb && site.consumer_kind == NodeKind::conv) {
      const auto& p = g.node(bn_id).bn();
      for (std::size_t c = 0; c < mask.size(); ++c) {
        if (!mask[c] && detail::dropped_constant(p, c) != T{0}) gains_bias[site.consumer] = true;
      }
    }
  }
  std::size_t total = 0;
  for (const auto& n : g.nodes) {
    switch (n.kind) {
      case NodeKind::conv: {
        const auto& p = n.conv();
        const std::size_t o = out_ch.count(n.id) ? out_ch[n.id] : p.out_channels();
        const std::size_t i = in_ch.count(n.id) ? in_ch[n.id] : p.in_channels();
        const bool bias = p.bias.has_value() || gains_bias.count(n.id);
        total += o * i * p.kernel_h() * p.kernel_w() + (bias ? o : 0);
        break;
      }
      case NodeKind::bn: total += 2 * plan.kept(n.id); break;
      case NodeKind::fc: {
        const auto& p = n.fc();
        const std::size_t i = in_ch.count(n.id) ? in_ch[n.id] : p.in_features();
        total += p.out_features() * i + p.out_features();
        break;
      }
      default: break;
    }
  }
  plan.predicted_params = total;
  return plan;
}

/// Removes every dropped channel from its BN, from the producing conv's
/// output filters (or from the BN's gather list on a shared stream) and from
/// the consuming conv or fc input slice. Returns a new graph.
template <typename T>
ModelGraph<T> apply_prune(const ModelGraph<T>& g, const PrunePlan& plan) {
  for (const auto& n : g.nodes) {
    if (n.kind != NodeKind::bn) continue;
    auto it = plan.keep.find(n.id);
    if (it == plan.keep.end() || it->second.size() != n.bn().channels()) {
      throw InvalidArgument("prune plan does not match graph at BN node " + std::to_string(n.id));
    }
  }
  if (plan.keep.size() != g.bn_ids().size()) {
    throw InvalidArgument("prune plan names BN nodes absent from the graph");
  }

  ModelGraph<T> out = g;
  std::map<int, std::vector<std::size_t>> out_keep;  // conv id -> kept output filters
  std::map<int, std::vector<std::size_t>> in_keep;   // conv/fc id -> kept input channels

  for (const auto& [bn_id, mask] : plan.keep) {
    const auto site = detail::cut_site(g, bn_id);
    if (!site.prunable) continue;
    const auto kept = detail::kept_indices(mask);
    if (kept.size() == mask.size()) continue;
    auto& bn = out.node(bn_id).bn();

    if (plan.beta_mode == BetaMode::absorb) {
      auto& consumer = out.node(site.consumer);
      for (std::size_t c = 0; c < mask.size(); ++c) {
        if (mask[c]) continue;
        const T r = detail::dropped_constant(bn, c);
        if (r == T{0}) continue;
        if (site.consumer_kind == NodeKind::conv) {
          auto& cp = consumer.conv();
          if (!cp.bias) cp.bias = Tensor<T>::vector(cp.out_channels());
          for (std::size_t o = 0; o < cp.out_channels(); ++o) {
            T taps{0};
            for (std::size_t y = 0; y < cp.kernel_h(); ++y) {
              for (std::size_t x = 0; x < cp.kernel_w(); ++x) taps += cp.weight.at(o, c, y, x);
            }
            (*cp.bias)[o] += taps * r;
          }
        } else {
          auto& fp = consumer.fc();
          for (std::size_t o = 0; o < fp.out_features(); ++o) fp.bias[o] += fp.weight.at(o, c, 0, 0) * r;
        }
      }
    }

    if (site.producer != kGraphInput) {
      out_keep[site.producer] = kept;
    } else {
      std::vector<std::size_t> sel;
      for (std::size_t k : kept) sel.push_back(bn.input_channel(k));
      bn.select = std::move(sel);
    }
    bn.alpha = detail::gather(bn.alpha, kept);
    bn.beta = detail::gather(bn.beta, kept);
    bn.running_mean = detail::gather(bn.running_mean, kept);
    bn.running_var = detail::gather(bn.running_var, kept);
    in_keep[site.consumer] = kept;
  }

  for (auto& n : out.nodes) {
    const bool cut_out = out_keep.count(n.id) != 0;
    const bool cut_in = in_keep.count(n.id) != 0;
    if (!cut_out && !cut_in) continue;
    if (n.kind == NodeKind::conv) {
      auto& p = n.conv();
      const auto rows = cut_out ? out_keep[n.id] : detail::iota_n(p.out_channels());
      const auto cols = cut_in ? in_keep[n.id] : detail::iota_n(p.in_channels());
      p.weight = detail::slice_nc(p.weight, rows, cols);
      if (p.bias) p.bias = detail::gather(*p.bias, rows);
    } else if (n.kind == NodeKind::fc) {
      auto& p = n.fc();
      p.weight = detail::slice_nc(p.weight, detail::iota_n(p.out_features()), in_keep[n.id]);
    }
  }
  out.drop_grads();
  out.validate();
  return out;
}

enum class FoldMethod { zero, composed };

inline const char* to_string(FoldMethod m) { return m == FoldMethod::zero ? "zero" : "composed"; }

inline FoldMethod fold_method_from_string(const std::string& s) {
  if (s == "zero") return FoldMethod::zero;
  if (s == "composed") return FoldMethod::composed;
  throw InvalidArgument("unknown fold method '" + s + "' (expected zero|composed)");
}

struct FoldRecord {
  int block = 0;
  FoldMethod method = FoldMethod::zero;
  std::vector<int> removed;
  int new_conv = kGraphInput;
  std::size_t new_kernel = 0;
  std::int64_t param_delta = 0;  // count_params(before) - count_params(after)

  nlohmann::json to_json() const {
    return {{"block", block},         {"method", to_string(method)},
            {"removed_nodes", removed}, {"new_conv", new_conv},
            {"new_kernel", new_kernel}, {"param_delta", param_delta}};
  }
};

/// Blocks whose branch contains a conv-BN-ReLU-conv sandwich with a one-channel BN.
template <typename T>
std::vector<int> fold_candidates(const ModelGraph<T>& g) {
  std::vector<int> ids;
  for (const auto& b : g.blocks) {
    if (detail::single_channel_sandwich(g, b)) ids.push_back(b.id);
  }
  return ids;
}

namespace detail {

template <typename T>
void rewire(ModelGraph<T>& g, int from, int to) {
  for (auto& n : g.nodes) {
    for (int& in : n.inputs) {
      if (in == from) in = to;
    }
  }
  for (auto& b : g.blocks) {
    if (b.input == from) b.input = to;
  }
  if (g.output == from) g.output = to;
}

template <typename T>
void erase_nodes(ModelGraph<T>& g, const std::vector<int>& ids) {
  std::erase_if(g.nodes, [&](const LayerNode<T>& n) {
    return std::find(ids.begin(), ids.end(), n.id) != ids.end();
  });
  g.reindex();
}

}  // namespace detail

/// Deletes a candidate block's whole residual branch: the block becomes its
/// shortcut (identity, or the projection conv when present).
template <typename T>
std::pair<ModelGraph<T>, FoldRecord> fold_zero_init(const ModelGraph<T>& g, int block_id) {
  const auto& blk = g.block(block_id);
  if (!detail::single_channel_sandwich(g, blk)) {
    throw InvalidArgument("block " + std::to_string(block_id) + " is not a fold candidate");
  }
  ModelGraph<T> out = g;
  auto& b = out.block(block_id);
  FoldRecord rec;
  rec.block = block_id;
  rec.method = FoldMethod::zero;
  rec.removed = b.branch;
  rec.removed.push_back(b.add);
  const int add = b.add;
  const int replacement = b.has_projection() ? b.projection : b.input;
  b.branch.clear();
  b.add = kGraphInput;
  b.state = ResidualBlock::State::removed;
  detail::erase_nodes(out, rec.removed);
  detail::rewire(out, add, replacement);
  out.drop_grads();
  out.validate();
  rec.param_delta = static_cast<std::int64_t>(g.count_params()) - static_cast<std::int64_t>(out.count_params());
  return {std::move(out), rec};
}

struct ComposeOptions {
  bool paper_literal_1x1 = false;  // keep only the composed kernel's center tap
  int sandwich_bn = kGraphInput;   // middle BN of the sandwich to fold; first eligible if unset
};

/// Replaces conv_a -> BN(1 channel) -> ReLU -> conv_b with one convolution
/// equal to their linear composition: kernel k_a + k_b - 1, padding
/// p_a + p_b, weights s * (W_b (*) W_a) with s = alpha / sqrt(var + eps) and
/// a bias carrying the BN shift through conv_b's taps. The ReLU is taken in
/// its linear regime, except when s == 0: the channel is then the constant
/// ReLU(shift), which is folded exactly.
template <typename T>
std::pair<ModelGraph<T>, FoldRecord> fold_composed_init(const ModelGraph<T>& g, int block_id,
                                                        ComposeOptions opt = {}) {
  const auto& blk = g.block(block_id);
  const auto sw = detail::single_channel_sandwich(g, blk, opt.sandwich_bn);
  if (!sw) throw InvalidArgument("block " + std::to_string(block_id) + " is not a fold candidate");
  const auto& a = g.node(sw->conv_a).conv();
  const auto& bn = g.node(sw->bn).bn();
  const auto& b = g.node(sw->conv_b).conv();
  if (a.stride != 1 || b.stride != 1) {
    throw InvalidArgument("block " + std::to_string(block_id) +
                          " folds a strided sandwich; composition is not a single conv, use fold_zero_init");
  }
  if (g.consumers(sw->conv_a).size() != 1 || g.consumers(sw->bn).size() != 1 ||
      g.consumers(sw->relu).size() != 1) {
    throw InvalidArgument("block " + std::to_string(block_id) + " sandwich has side outputs");
  }

  const std::size_t mid = bn.input_channel(0);
  const T s = bn.alpha[0] / std::sqrt(bn.running_var[0] + bn.eps);
  const T shift = bn.beta[0] - s * bn.running_mean[0];
  const T pre_const = s * (a.bias ? (*a.bias)[mid] : T{0}) + shift;
  const T constant = s == T{0} ? std::max(pre_const, T{0}) : pre_const;

  const std::size_t cin = a.in_channels();
  const std::size_t cout = b.out_channels();
  const std::size_t ka_h = a.kernel_h(), ka_w = a.kernel_w();
  const std::size_t kb_h = b.kernel_h(), kb_w = b.kernel_w();
  const std::size_t kh = ka_h + kb_h - 1, kw = ka_w + kb_w - 1;

  Tensor<T> w(Shape{cout, cin, kh, kw});
  Tensor<T> bias = Tensor<T>::vector(cout);
  for (std::size_t o = 0; o < cout; ++o) {
    T taps{0};
    for (std::size_t qy = 0; qy < kb_h; ++qy) {
      for (std::size_t qx = 0; qx < kb_w; ++qx) {
        const T wb = b.weight.at(o, 0, qy, qx);
        taps += wb;
        if (s == T{0}) continue;
        for (std::size_t i = 0; i < cin; ++i) {
          for (std::size_t ry = 0; ry < ka_h; ++ry) {
            for (std::size_t rx = 0; rx < ka_w; ++rx) {
              w.at(o, i, qy + ry, qx + rx) += s * wb * a.weight.at(mid, i, ry, rx);
            }
          }
        }
      }
    }
    bias[o] = (b.bias ? (*b.bias)[o] : T{0}) + taps * constant;
  }

  ConvParams<T> bridge;
  bridge.stride = 1;
  if (opt.paper_literal_1x1) {
    Tensor<T> center(Shape{cout, cin, 1, 1});
    for (std::size_t o = 0; o < cout; ++o) {
      for (std::size_t i = 0; i < cin; ++i) center.at(o, i, 0, 0) = w.at(o, i, (kh - 1) / 2, (kw - 1) / 2);
    }
    bridge.weight = std::move(center);
    bridge.padding = 0;
  } else {
    bridge.weight = std::move(w);
    bridge.padding = a.padding + b.padding;
  }
  bridge.bias = std::move(bias);

  ModelGraph<T> out = g;
  const int new_id = out.next_id();
  LayerNode<T> node;
  node.id = new_id;
  node.kind = NodeKind::conv;
  node.name = out.node(sw->conv_a).name + "+bridge";
  node.inputs = out.node(sw->conv_a).inputs;
  node.params = std::move(bridge);
  const std::size_t insert_at = out.position(sw->conv_a);
  out.nodes.insert(out.nodes.begin() + static_cast<std::ptrdiff_t>(insert_at), std::move(node));
  out.reindex();

  FoldRecord rec;
  rec.block = block_id;
  rec.method = FoldMethod::composed;
  rec.removed = {sw->conv_a, sw->bn, sw->relu, sw->conv_b};
  rec.new_conv = new_id;
  rec.new_kernel = opt.paper_literal_1x1 ? 1 : kh;

  detail::rewire(out, sw->conv_b, new_id);
  detail::erase_nodes(out, rec.removed);
  auto& ob = out.block(block_id);
  std::vector<int> branch;
  for (int id : ob.branch) {
    if (id == sw->conv_a) {
      branch.push_back(new_id);
    } else if (std::find(rec.removed.begin(), rec.removed.end(), id) == rec.removed.end()) {
      branch.push_back(id);
    }
  }
  ob.branch = std::move(branch);
  ob.state = ResidualBlock::State::composed;
  out.drop_grads();
  out.validate();
  rec.param_delta = static_cast<std::int64_t>(g.count_params()) - static_cast<std::int64_t>(out.count_params());
  return {std::move(out), rec};
}

/// Folds every candidate block. Composed folds fall back to zero-init for
/// strided sandwiches. A composed fold can leave a new single-channel
/// sandwich behind (both middle BNs at one channel), so this repeats until
/// no candidate remains.
template <typename T>
std::pair<ModelGraph<T>, std::vector<FoldRecord>> fold_all(ModelGraph<T> g, FoldMethod method,
                                                            ComposeOptions opt = {}) {
  std::vector<FoldRecord> records;
  for (auto ids = fold_candidates(g); !ids.empty(); ids = fold_candidates(g)) {
    const int id = ids.front();
    const auto sw = detail::single_channel_sandwich(g, g.block(id));
    const bool strided = g.node(sw->conv_a).conv().stride != 1 || g.node(sw->conv_b).conv().stride != 1;
    auto [next, rec] = (method == FoldMethod::composed && !strided) ? fold_composed_init(g, id, opt)
                                                                    : fold_zero_init(g, id);
    g = std::move(next);
    records.push_back(std::move(rec));
  }
  return {std::move(g), std::move(records)};
}

/// Surgery report: threshold, per-BN kept/dropped counts, folds and parameter totals.
template <typename T>
nlohmann::json surgery_report(const ModelGraph<T>& before, const PrunePlan& plan,
                              const ModelGraph<T>& after, const std::vector<FoldRecord>& folds) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& [id, mask] : plan.keep) {
    const std::size_t kept = plan.kept(id);
    layers.push_back({{"node", id}, {"name", before.node(id).name}, {"kept", kept},
                      {"dropped", mask.size() - kept}});
  }
  nlohmann::json fr = nlohmann::json::array();
  for (const auto& f : folds) fr.push_back(f.to_json());
  nlohmann::json cands = nlohmann::json::array();
  for (const auto& c : plan.fold_candidates) cands.push_back({{"block", c.block}, {"bn", c.bn}});
  return {{"threshold", plan.threshold},
          {"beta_mode", plan.beta_mode == BetaMode::absorb ? "absorb" : "discard"},
          {"layers", std::move(layers)},
          {"fold_candidates", std::move(cands)},
          {"folds", std::move(fr)},
          {"channels_dropped", plan.dropped_total()},
          {"params_before", before.count_params()},
          {"params_predicted", plan.predicted_params},
          {"params_after", after.count_params()}};
}

}  // namespace lprune
