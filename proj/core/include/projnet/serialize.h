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

// .pnet model files.
//
//   offset  size  content
//   0       4     magic "PNET"
//   4       4     format version, u32 little-endian (currently 1)
//   8       8     metadata length N, u64 little-endian
//   16      N     JSON metadata: architecture, node kinds, activations,
//                 padding, freeze flags, seed, param_count
//   16+N    8*P   P = param_count IEEE-754 binary64 values, little-endian,
//                 in theta order (see ParamBlock)
//
// Nothing may follow the payload. Parameters round-trip bit for bit.

#ifndef PROJNET_SERIALIZE_H_
#define PROJNET_SERIALIZE_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "projnet/model.h"

namespace projnet {

inline constexpr std::uint32_t kModelFormatVersion = 1;

std::vector<std::uint8_t> serialize_model(const Model& model);

/// Throws FormatError (with the failing byte offset) on any corruption; no
/// partially built model is ever returned.
Model deserialize_model(std::span<const std::uint8_t> bytes);

/// Writes to a sibling temporary file and renames it into place.
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

}  // namespace projnet

#endif  // PROJNET_SERIALIZE_H_
