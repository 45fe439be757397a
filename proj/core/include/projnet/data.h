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

#ifndef PROJNET_DATA_H_
#define PROJNET_DATA_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "projnet/tensor.h"

namespace projnet {

struct Dataset {
  std::vector<ChannelStack> images;
  std::vector<int> labels;
  std::size_t classes = 0;
  std::string split;  // "pretrain", "train" or "test"

  std::size_t size() const { return images.size(); }
  std::size_t channels() const { return images.front().depth(); }
  const Shape& image_shape() const { return images.front().channel_shape(); }

  /// Labels in [0, classes), one shape for every image. Throws ConfigError.
  void validate() const;
};

/// IDX pair as used by the MNIST family: images with magic 0x00000803
/// (count, rows, cols, then unsigned bytes) and labels with magic 0x00000801.
/// Pixels are scaled to [0, 1] in a single channel. Throws FormatError with
/// the offending byte offset.
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 const std::string& split = "train");
Dataset parse_idx(std::span<const std::uint8_t> images,
                  std::span<const std::uint8_t> labels,
                  const std::string& split = "train");

inline constexpr std::size_t kSyntheticClasses = 8;
inline constexpr std::size_t kSyntheticSide = 16;

enum class SyntheticTask { kA, kB };

/// Eight shape classes on 16x16 images with two channels: channel 0 holds
/// the shape at a random position, size and brightness over pixel noise;
/// channel 1 holds a blurred copy of it. Labels are assigned round robin.
/// Task B renders the same images and then applies task_b_shift.
/// Requires n >= 2 * 8. Deterministic in (task, n, seed).
Dataset gen_synthetic(SyntheticTask task, std::size_t n, std::uint64_t seed,
                      const std::string& split = "train");

/// The fixed appearance shift from task A to task B, a per-channel intensity
/// recalibration: channel 0 maps x -> 0.15 + 0.75x (lower contrast, lifted
/// black level), channel 1 maps x -> 1.2x - 0.05. Labels keep their meaning.
void task_b_shift(ChannelStack& image);

/// Mirror along the last axis.
ChannelStack hflip(const ChannelStack& image);

}  // namespace projnet

#endif  // PROJNET_DATA_H_
