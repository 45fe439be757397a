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

#ifndef PROJNET_ERRORS_H_
#define PROJNET_ERRORS_H_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace projnet {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes, ranks or channel counts do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A GCNN node has a filter extent > 1 and has no GFFN image.
class NotReducibleError : public Error {
 public:
  using Error::Error;
};

/// A node cannot be projected (its node function is not separable by input).
class ProjectionError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss or parameter.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed architecture spec, training config or CLI arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Corrupt or unsupported file. Carries the byte offset where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace projnet

#endif  // PROJNET_ERRORS_H_
