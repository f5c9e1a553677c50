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
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lprune/error.hpp"
#include "lprune/tensor.hpp"

namespace lprune::data {

inline constexpr std::size_t kClasses = 10;
inline constexpr std::size_t kImageSide = 32;
inline constexpr std::size_t kImageBytes = 3 * kImageSide * kImageSide;  // R, G, B planes
inline constexpr std::size_t kRecordBytes = 1 + kImageBytes;
inline constexpr std::size_t kRecordsPerFile = 10000;
inline constexpr std::size_t kBatchFileBytes = kRecordBytes * kRecordsPerFile;  // 30,730,000

inline const std::array<const char*, 5> kTrainFiles = {
    "data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin", "data_batch_4.bin",
    "data_batch_5.bin"};
inline constexpr const char* kTestFile = "test_batch.bin";

enum class Split { train, test };

/// Images are stored as 8-bit channel-major planes, one 3072-byte record each.
struct Dataset {
  std::vector<std::uint8_t> images;
  std::vector<std::int32_t> labels;
  Split split = Split::train;
  std::vector<std::string> sources;
  std::uint64_t subset_seed = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const std::uint8_t> image(std::size_t i) const {
    return {images.data() + i * kImageBytes, kImageBytes};
  }

  /// Copy of the records at `indices`, in the given order.
  Dataset select(std::span<const std::size_t> indices) const {
    Dataset out;
    out.split = split;
    out.sources = sources;
    out.subset_seed = subset_seed;
    out.images.resize(indices.size() * kImageBytes);
    out.labels.resize(indices.size());
    for (std::size_t k = 0; k < indices.size(); ++k) {
      const auto src = image(indices[k]);
      std::copy(src.begin(), src.end(), out.images.begin() + k * kImageBytes);
      out.labels[k] = labels[indices[k]];
    }
    return out;
  }

  std::array<std::size_t, kClasses> class_counts() const {
    std::array<std::size_t, kClasses> counts{};
    for (auto y : labels) ++counts.at(static_cast<std::size_t>(y));
    return counts;
  }
};

/// Parses one CIFAR-10 binary batch file (10,000 records of 1 label byte + 3072 pixel bytes).
inline void read_batch_file(const std::filesystem::path& path, Dataset& into) {
  if (!std::filesystem::exists(path)) throw MissingFileError("missing CIFAR-10 file " + path.string());
  const auto size = std::filesystem::file_size(path);
  if (size != kBatchFileBytes) {
    throw FileLengthError(path.string() + " has " + std::to_string(size) + " bytes, expected " +
                          std::to_string(kBatchFileBytes));
  }
  std::ifstream f(path, std::ios::binary);
  if (!f) throw MissingFileError("cannot open " + path.string());
  std::vector<std::uint8_t> raw(kBatchFileBytes);
  f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!f) throw FileLengthError("short read on " + path.string());
  const std::size_t base = into.labels.size();
  into.labels.resize(base + kRecordsPerFile);
  into.images.resize((base + kRecordsPerFile) * kImageBytes);
  for (std::size_t r = 0; r < kRecordsPerFile; ++r) {
    const std::uint8_t* rec = raw.data() + r * kRecordBytes;
    if (rec[0] >= kClasses) {
      throw InvalidArgument(path.string() + ": record " + std::to_string(r) + " has label " +
                            std::to_string(rec[0]));
    }
    into.labels[base + r] = rec[0];
    std::copy(rec + 1, rec + kRecordBytes, into.images.begin() + (base + r) * kImageBytes);
  }
  into.sources.push_back(path.filename().string());
}

/// Loads the five training batches and the test batch from `dir`.
inline std::pair<Dataset, Dataset> load_cifar10(const std::filesystem::path& dir) {
  Dataset train;
  train.split = Split::train;
  for (const char* name : kTrainFiles) read_batch_file(dir / name, train);
  Dataset test;
  test.split = Split::test;
  read_batch_file(dir / kTestFile, test);
  return {std::move(train), std::move(test)};
}

/// Writes `ds` as CIFAR-10 binary records. The caller keeps file sizes valid
/// by passing exactly 10,000 records per file.
inline void write_batch_file(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const char label = static_cast<char>(ds.labels[i]);
    f.write(&label, 1);
    f.write(reinterpret_cast<const char*>(ds.image(i).data()), kImageBytes);
  }
  if (!f) throw Error("failed writing " + path.string());
}

/// Synthetic 10-class images with CIFAR geometry. A class is one of five
/// mirror-symmetric patterns (horizontal stripes, vertical stripes, rings,
/// checkerboard, diagonal cross-hatch) in one of two tint families, drawn as a
/// windowed patch at a jittered position over a random background with pixel
/// noise. Horizontal flips map every class to itself.
inline Dataset synthesize(std::size_t n, std::uint64_t seed, Split split) {
  constexpr double kPi = 3.14159265358979323846;
  Dataset ds;
  ds.split = split;
  ds.sources.push_back("synthetic");
  ds.subset_seed = seed;
  ds.labels.resize(n);
  ds.images.resize(n * kImageBytes);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto cls = static_cast<std::int32_t>(i % kClasses);
    ds.labels[i] = cls;
    const int pattern = cls % 5;
    const int family = cls / 5;
    const double freq = (3.0 + 0.3 * gauss(rng)) / 32.0;
    const double phase = 2.0 * kPi * u01(rng);
    const double cx = 16.0 + 3.0 * gauss(rng);
    const double cy = 16.0 + 3.0 * gauss(rng);
    const double radius = 10.0 + 3.0 * u01(rng);
    const double amp = 50.0 + 40.0 * u01(rng);
    std::array<double, 3> tint{};
    for (std::size_t ch = 0; ch < 3; ++ch) {
      const double base = family == 0 ? (ch == 0 ? 1.0 : ch == 1 ? 0.55 : 0.15)
                                      : (ch == 0 ? 0.15 : ch == 1 ? 0.55 : 1.0);
      tint[ch] = std::clamp(base + 0.15 * gauss(rng), 0.0, 1.2);
    }
    std::array<double, 3> bg{};
    const double grey = 70.0 + 110.0 * u01(rng);
    for (auto& b : bg) b = grey + 15.0 * gauss(rng);
    std::uint8_t* img = ds.images.data() + i * kImageBytes;
    for (std::size_t y = 0; y < kImageSide; ++y) {
      for (std::size_t x = 0; x < kImageSide; ++x) {
        const double dx = static_cast<double>(x) - cx;
        const double dy = static_cast<double>(y) - cy;
        const double window = std::exp(-(dx * dx + dy * dy) / (radius * radius));
        const double w = 2.0 * kPi * freq;
        double wave = 0.0;
        switch (pattern) {
          case 0: wave = std::sin(w * dy + phase); break;
          case 1: wave = std::sin(w * dx + phase); break;
          case 2: wave = std::sin(w * std::sqrt(dx * dx + dy * dy) + phase); break;
          case 3: wave = std::sin(w * dx + phase) * std::sin(w * dy + phase) * 1.6; break;
          default: wave = 0.5 * (std::sin(w * (dx + dy) * 0.7071 + phase) + std::sin(w * (dy - dx) * 0.7071 + phase)); break;
        }
        for (std::size_t ch = 0; ch < 3; ++ch) {
          const double v = bg[ch] + amp * tint[ch] * wave * window + 18.0 * gauss(rng);
          img[(ch * kImageSide + y) * kImageSide + x] =
              static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
        }
      }
    }
  }
  // Interleave classes pseudo-randomly so files do not cycle 0..9.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  Dataset shuffled = ds.select(order);
  shuffled.sources = ds.sources;
  return shuffled;
}

/// Writes a full-size synthetic CIFAR-10 directory (5 train files + 1 test
/// file, 10,000 records each) for network-free runs.
inline void write_fixture(const std::filesystem::path& dir, std::uint64_t seed = 0) {
  std::filesystem::create_directories(dir);
  for (std::size_t f = 0; f < kTrainFiles.size(); ++f) {
    write_batch_file(dir / kTrainFiles[f], synthesize(kRecordsPerFile, seed * 16 + f, Split::train));
  }
  write_batch_file(dir / kTestFile, synthesize(kRecordsPerFile, seed * 16 + 15, Split::test));
}

/// Crop offset within the 40x40 zero-padded image, plus a horizontal flip.
struct AugmentParams {
  std::size_t dx = 4;
  std::size_t dy = 4;
  bool flip = false;
};

inline constexpr std::size_t kAugmentPad = 4;

template <typename Rng>
AugmentParams draw_augment(Rng& rng) {
  std::uniform_int_distribution<std::size_t> offset(0, 2 * kAugmentPad);
  std::bernoulli_distribution coin(0.5);
  AugmentParams a;
  a.dx = offset(rng);
  a.dy = offset(rng);
  a.flip = coin(rng);
  return a;
}

/// Zero-pads by 4, crops 32x32 at (dx, dy) and optionally mirrors horizontally.
inline std::vector<std::uint8_t> augment(std::span<const std::uint8_t> image, const AugmentParams& a) {
  if (image.size() != kImageBytes) throw ShapeError("augment expects a 3x32x32 image");
  if (a.dx > 2 * kAugmentPad || a.dy > 2 * kAugmentPad) {
    throw InvalidArgument("crop offset outside the padded image");
  }
  std::vector<std::uint8_t> out(kImageBytes, 0);
  const auto side = static_cast<std::ptrdiff_t>(kImageSide);
  for (std::size_t ch = 0; ch < 3; ++ch) {
    for (std::ptrdiff_t y = 0; y < side; ++y) {
      const std::ptrdiff_t sy = y + static_cast<std::ptrdiff_t>(a.dy) - kAugmentPad;
      if (sy < 0 || sy >= side) continue;
      for (std::ptrdiff_t x = 0; x < side; ++x) {
        const std::ptrdiff_t ox = a.flip ? side - 1 - x : x;
        const std::ptrdiff_t sx = ox + static_cast<std::ptrdiff_t>(a.dx) - kAugmentPad;
        if (sx < 0 || sx >= side) continue;
        out[(ch * kImageSide + static_cast<std::size_t>(y)) * kImageSide + static_cast<std::size_t>(x)] =
            image[(ch * kImageSide + static_cast<std::size_t>(sy)) * kImageSide + static_cast<std::size_t>(sx)];
      }
    }
  }
  return out;
}

template <typename Rng>
std::vector<std::uint8_t> random_augment(std::span<const std::uint8_t> image, Rng& rng) {
  return augment(image, draw_augment(rng));
}

struct ChannelStats {
  std::array<double, 3> mean;
  std::array<double, 3> std;
};

/// Per-channel statistics of the CIFAR-10 training set on the [0, 1] scale.
inline constexpr ChannelStats kCifar10Stats{{0.4914, 0.4822, 0.4465}, {0.2470, 0.2435, 0.2616}};

/// Per-channel mean and (population) standard deviation of `ds` on the [0, 1] scale.
inline ChannelStats channel_stats(const Dataset& ds) {
  ChannelStats s{};
  const std::size_t plane = kImageSide * kImageSide;
  for (std::size_t ch = 0; ch < 3; ++ch) {
    double sum = 0.0;
    double sq = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const std::uint8_t* p = ds.images.data() + i * kImageBytes + ch * plane;
      for (std::size_t k = 0; k < plane; ++k) {
        const double v = p[k] / 255.0;
        sum += v;
        sq += v * v;
      }
    }
    const double count = static_cast<double>(ds.size() * plane);
    s.mean[ch] = sum / count;
    s.std[ch] = std::sqrt(std::max(0.0, sq / count - s.mean[ch] * s.mean[ch]));
  }
  return s;
}

/// Writes (x / 255 - mean_c) / std_c for one image into `dst` (3072 values).
template <typename T>
void normalize_into(std::span<const std::uint8_t> image, const ChannelStats& stats, T* dst) {
  const std::size_t plane = kImageSide * kImageSide;
  for (std::size_t ch = 0; ch < 3; ++ch) {
    const double scale = 1.0 / (255.0 * stats.std[ch]);
    const double shift = stats.mean[ch] / stats.std[ch];
    for (std::size_t k = 0; k < plane; ++k) {
      dst[ch * plane + k] = static_cast<T>(image[ch * plane + k] * scale - shift);
    }
  }
}

template <typename T = float>
Tensor<T> normalize(std::span<const std::uint8_t> image, const ChannelStats& stats = kCifar10Stats) {
  if (image.size() != kImageBytes) throw ShapeError("normalize expects a 3x32x32 image");
  Tensor<T> t(Shape{1, 3, kImageSide, kImageSide}, uninitialized);
  normalize_into(image, stats, t.ptr());
  return t;
}

/// Inverse of normalize, rounded back to 8 bits.
template <typename T>
std::vector<std::uint8_t> denormalize(const Tensor<T>& t, const ChannelStats& stats = kCifar10Stats) {
  const std::size_t plane = kImageSide * kImageSide;
  std::vector<std::uint8_t> out(kImageBytes);
  for (std::size_t ch = 0; ch < 3; ++ch) {
    for (std::size_t k = 0; k < plane; ++k) {
      const double v = (static_cast<double>(t[ch * plane + k]) * stats.std[ch] + stats.mean[ch]) * 255.0;
      out[ch * plane + k] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return out;
}

/// Class-stratified sample of `n` record indices, sorted ascending.
/// Per-class quotas are proportional to class frequency (largest remainders
/// first, ties in seeded order), so balanced data with n a multiple of 10
/// yields exactly n / 10 per class.
inline std::vector<std::size_t> subset_indices(const Dataset& ds, std::size_t n, std::uint64_t seed) {
  const std::size_t total = ds.size();
  if (n > total) {
    throw InvalidArgument("subset of " + std::to_string(n) + " requested from " +
                          std::to_string(total) + " records");
  }
  std::array<std::vector<std::size_t>, kClasses> by_class;
  for (std::size_t i = 0; i < total; ++i) by_class.at(static_cast<std::size_t>(ds.labels[i])).push_back(i);

  std::array<std::size_t, kClasses> quota{};
  std::array<double, kClasses> remainder{};
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < kClasses; ++c) {
    const double exact = static_cast<double>(n) * static_cast<double>(by_class[c].size()) /
                         static_cast<double>(std::max<std::size_t>(total, 1));
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    remainder[c] = exact - static_cast<double>(quota[c]);
    assigned += quota[c];
  }
  std::mt19937_64 rng(seed);
  std::array<std::size_t, kClasses> order{};
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < n; k = (k + 1) % kClasses) {
    const std::size_t c = order[k];
    if (quota[c] < by_class[c].size()) {
      ++quota[c];
      ++assigned;
    }
  }
  std::vector<std::size_t> picked;
  picked.reserve(n);
  for (std::size_t c = 0; c < kClasses; ++c) {
    auto members = by_class[c];
    std::shuffle(members.begin(), members.end(), rng);
    picked.insert(picked.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(quota[c]));
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

inline Dataset subset(const Dataset& ds, std::size_t n, std::uint64_t seed) {
  const auto idx = subset_indices(ds, n, seed);
  Dataset out = ds.select(idx);
  out.subset_seed = seed;
  return out;
}

/// Splits off the last `fraction` of a seeded permutation as a held-out set.
inline std::pair<Dataset, Dataset> split_holdout(const Dataset& ds, double fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction >= 1.0) throw InvalidArgument("holdout fraction must be in [0, 1)");
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ull);
  std::shuffle(order.begin(), order.end(), rng);
  const auto held = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(ds.size())));
  const std::size_t keep = ds.size() - held;
  std::span<const std::size_t> all(order);
  return {ds.select(all.first(keep)), ds.select(all.subspan(keep))};
}

/// Normalized (n, 3, 32, 32) batch for the records at `indices`, optionally augmented.
template <typename T, typename Rng>
std::pair<Tensor<T>, std::vector<std::int32_t>> make_batch(const Dataset& ds,
                                                           std::span<const std::size_t> indices,
                                                           const ChannelStats& stats, bool augment_images,
                                                           Rng& rng) {
  Tensor<T> x(Shape{indices.size(), 3, kImageSide, kImageSide}, uninitialized);
  std::vector<std::int32_t> y(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto img = ds.image(indices[k]);
    T* dst = x.ptr() + k * kImageBytes;
    if (augment_images) {
      const auto aug = augment(img, draw_augment(rng));
      normalize_into(std::span<const std::uint8_t>(aug), stats, dst);
    } else {
      normalize_into(img, stats, dst);
    }
    y[k] = ds.labels[indices[k]];
  }
  return {std::move(x), std::move(y)};
}

}  // namespace lprune::data
