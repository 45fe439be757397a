// Copyright 2026 The Projnet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "projnet/data.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "projnet/errors.h"
#include "projnet/random.h"

namespace projnet {

namespace {

constexpr std::uint32_t kIdxImages = 0x00000803;
constexpr std::uint32_t kIdxLabels = 0x00000801;

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset,
                        const char* what) {
  if (offset + 4 > bytes.size()) {
    throw FormatError(std::string(what) + ": truncated header", bytes.size());
  }
  return (std::uint32_t{bytes[offset]} << 24) |
         (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

/// Class-specific shape mask at offset (dx, dy) from the centre, half size s.
bool in_shape(std::size_t cls, double dx, double dy, double s) {
  const double ax = std::abs(dx), ay = std::abs(dy);
  const bool in_box = ax <= s && ay <= s;
  switch (cls) {
    case 0:  // filled square
      return in_box;
    case 1:  // square outline
      return in_box && std::max(ax, ay) >= s - 1.0;
    case 2:  // disc
      return std::hypot(dx, dy) <= s;
    case 3:  // ring
      return std::abs(std::hypot(dx, dy) - s) <= 0.75;
    case 4:  // horizontal bars
      return in_box && static_cast<long>(std::floor(dy + s)) % 2 == 0;
    case 5:  // vertical bars
      return in_box && static_cast<long>(std::floor(dx + s)) % 2 == 0;
    case 6:  // plus
      return (ax <= 1.0 && ay <= s) || (ay <= 1.0 && ax <= s);
    default:  // diagonal cross
      return in_box && std::abs(ax - ay) <= 0.75;
  }
}

ChannelStack render(std::size_t cls, Rng& rng) {
  constexpr std::size_t n = kSyntheticSide;
  const double cx = rng.uniform(5.5, 10.5);
  const double cy = rng.uniform(5.5, 10.5);
  const double s = rng.uniform(3.0, 5.0);
  const double a = rng.uniform(0.6, 0.9);

  Tensor mask(Shape{n, n});
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      const double dx = static_cast<double>(x) - cx;
      const double dy = static_cast<double>(y) - cy;
      mask[y * n + x] = in_shape(cls, dx, dy, s) ? 1.0 : 0.0;
    }
  }
  Tensor c0(Shape{n, n});
  Tensor c1(Shape{n, n});
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      double blur = 0.0;
      for (int oy = -1; oy <= 1; ++oy) {
        for (int ox = -1; ox <= 1; ++ox) {
          const long yy = static_cast<long>(y) + oy;
          const long xx = static_cast<long>(x) + ox;
          if (yy >= 0 && xx >= 0 && yy < static_cast<long>(n) &&
              xx < static_cast<long>(n)) {
            blur += mask[static_cast<std::size_t>(yy) * n + static_cast<std::size_t>(xx)];
          }
        }
      }
      const std::size_t i = y * n + x;
      c0[i] = std::clamp(0.1 + a * mask[i] + 0.05 * rng.normal(), 0.0, 1.0);
      c1[i] = std::clamp(0.2 + a * blur / 9.0 + 0.05 * rng.normal(), 0.0, 1.0);
    }
  }
  return ChannelStack({std::move(c0), std::move(c1)});
}

}  // namespace

void Dataset::validate() const {
  if (images.empty()) throw ConfigError("dataset is empty");
  if (images.size() != labels.size()) {
    throw ConfigError("dataset has different image and label counts");
  }
  const Shape& shape = image_shape();
  const std::size_t depth = channels();
  for (std::size_t i = 0; i < images.size(); ++i) {
    images[i].validate();
    if (images[i].depth() != depth || !(images[i].channel_shape() == shape)) {
      throw ConfigError("image " + std::to_string(i) + " has a different shape");
    }
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw ConfigError("label " + std::to_string(labels[i]) + " out of range");
    }
  }
}

Dataset parse_idx(std::span<const std::uint8_t> images,
                  std::span<const std::uint8_t> labels, const std::string& split) {
  if (read_be32(images, 0, "images") != kIdxImages) {
    throw FormatError("images: bad magic, expected 0x00000803", 0);
  }
  if (read_be32(labels, 0, "labels") != kIdxLabels) {
    throw FormatError("labels: bad magic, expected 0x00000801", 0);
  }
  const std::size_t count = read_be32(images, 4, "images");
  const std::size_t rows = read_be32(images, 8, "images");
  const std::size_t cols = read_be32(images, 12, "images");
  const std::size_t label_count = read_be32(labels, 4, "labels");
  if (rows == 0 || cols == 0) throw FormatError("images: zero extent", 8);
  if (label_count != count) {
    throw FormatError("labels: count " + std::to_string(label_count) +
                          " differs from image count " + std::to_string(count),
                      4);
  }
  const std::size_t pixels = rows * cols;
  if (images.size() - 16 < count * pixels) {
    throw FormatError("images: pixel data truncated", images.size());
  }
  if (images.size() - 16 > count * pixels) {
    throw FormatError("images: trailing bytes", 16 + count * pixels);
  }
  if (labels.size() - 8 != count) {
    throw FormatError(labels.size() - 8 < count ? "labels: truncated"
                                                : "labels: trailing bytes",
                      std::min(labels.size(), 8 + count));
  }

  Dataset ds;
  ds.split = split;
  int max_label = 0;
  for (std::size_t i = 0; i < count; ++i) {
    Tensor img(Shape{rows, cols});
    const std::uint8_t* p = images.data() + 16 + i * pixels;
    for (std::size_t j = 0; j < pixels; ++j) img[j] = p[j] / 255.0;
    ds.images.push_back(ChannelStack({std::move(img)}));
    ds.labels.push_back(labels[8 + i]);
    max_label = std::max(max_label, ds.labels.back());
  }
  ds.classes = static_cast<std::size_t>(max_label) + 1;
  return ds;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 const std::string& split) {
  const std::vector<std::uint8_t> images = read_file(images_path);
  const std::vector<std::uint8_t> labels = read_file(labels_path);
  return parse_idx(images, labels, split);
}

Dataset gen_synthetic(SyntheticTask task, std::size_t n, std::uint64_t seed,
                      const std::string& split) {
  if (n < 2 * kSyntheticClasses) {
    throw ConfigError("synthetic datasets need at least 16 samples");
  }
  Dataset ds;
  ds.classes = kSyntheticClasses;
  ds.split = split;
  ds.images.reserve(n);
  ds.labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t cls = i % kSyntheticClasses;
    Rng rng(derive_seed(seed, {0x5a7, i}));
    ChannelStack img = render(cls, rng);
    if (task == SyntheticTask::kB) task_b_shift(img);
    ds.images.push_back(std::move(img));
    ds.labels.push_back(static_cast<int>(cls));
  }
  return ds;
}

void task_b_shift(ChannelStack& image) {
  for (double& v : image[0].data()) v = 0.15 + 0.75 * v;
  for (double& v : image[1].data()) v = 1.2 * v - 0.05;
}

ChannelStack hflip(const ChannelStack& image) {
  ChannelStack out = image;
  for (Tensor& c : out.channels) {
    if (c.rank() == 0) continue;
    const std::size_t w = c.shape()[c.rank() - 1];
    for (std::size_t row = 0; row < c.size(); row += w) {
      std::reverse(c.data().begin() + static_cast<std::ptrdiff_t>(row),
                   c.data().begin() + static_cast<std::ptrdiff_t>(row + w));
    }
  }
  return out;
}

}  // namespace projnet
