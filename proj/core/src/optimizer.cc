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

#include "projnet/optimizer.h"

#include <cmath>

#include "projnet/errors.h"

namespace projnet {

std::string Optimizer::name() const {
  return std::holds_alternative<SgdConfig>(config_) ? "sgd" : "adam";
}

void Optimizer::step(Model& model, const GradientTape& tape) {
  std::vector<ParamBlock> blocks = param_blocks(model);
  if (blocks.size() != tape.grads.size()) {
    throw DimensionError("gradient tape does not match the model layout");
  }
  if (first_.empty()) {
    first_.resize(blocks.size());
    second_.resize(blocks.size());
  } else if (first_.size() != blocks.size()) {
    throw DimensionError("optimizer state does not match the model layout");
  }
  ++steps_;
  const double t = static_cast<double>(steps_);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    ParamBlock& block = blocks[b];
    if (!block.trainable.get() || tape.grads[b].empty()) continue;
    const std::vector<double>& g = tape.grads[b];
    if (g.size() != block.values.size()) {
      throw DimensionError("gradient shape does not match parameter shape");
    }
    std::span<double> p = block.values;
    if (first_[b].empty()) first_[b].assign(p.size(), 0.0);
    std::vector<double>& m = first_[b];

    if (const auto* sgd = std::get_if<SgdConfig>(&config_)) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = sgd->momentum * m[i] - sgd->lr * g[i];
        p[i] += m[i];
      }
      continue;
    }
    const auto& adam = std::get<AdamConfig>(config_);
    if (second_[b].empty()) second_[b].assign(p.size(), 0.0);
    std::vector<double>& v = second_[b];
    const double alpha = adam.lr * std::sqrt(1.0 - std::pow(adam.beta2, t)) /
                         (1.0 - std::pow(adam.beta1, t));
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = adam.beta1 * m[i] + (1.0 - adam.beta1) * g[i];
      v[i] = adam.beta2 * v[i] + (1.0 - adam.beta2) * g[i] * g[i];
      p[i] -= alpha * m[i] / (std::sqrt(v[i]) + adam.epsilon);
    }
  }
}

}  // namespace projnet
