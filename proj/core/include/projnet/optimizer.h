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

#ifndef PROJNET_OPTIMIZER_H_
#define PROJNET_OPTIMIZER_H_

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "projnet/autodiff.h"
#include "projnet/model.h"

namespace projnet {

/// velocity = momentum * velocity - lr * g;  p += velocity
struct SgdConfig {
  double lr = 0.01;
  double momentum = 0.0;
};

/// Defaults are the usual framework defaults: lr 1e-3, betas 0.9 / 0.999,
/// epsilon 1e-7. Uses the bias-corrected step size form
///   p -= lr * sqrt(1 - b2^t) / (1 - b1^t) * m / (sqrt(v) + eps).
struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

/// Optimizer state with one moment buffer per parameter block.
class Optimizer {
 public:
  explicit Optimizer(SgdConfig config) : config_(config) {}
  explicit Optimizer(AdamConfig config) : config_(config) {}

  /// Updates trainable parameters only. The tape must come from `model`
  /// with its current parameter layout.
  void step(Model& model, const GradientTape& tape);

  std::uint64_t steps() const noexcept { return steps_; }
  std::string name() const;

 private:
  std::variant<SgdConfig, AdamConfig> config_;
  std::vector<std::vector<double>> first_;   // momentum or Adam m
  std::vector<std::vector<double>> second_;  // Adam v
  std::uint64_t steps_ = 0;
};

}  // namespace projnet

#endif  // PROJNET_OPTIMIZER_H_
