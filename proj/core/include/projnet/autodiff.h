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

#ifndef PROJNET_AUTODIFF_H_
#define PROJNET_AUTODIFF_H_

#include <cstddef>
#include <functional>
#include <vector>

#include "projnet/model.h"
#include "projnet/tensor.h"

namespace projnet {

enum class LossKind {
  /// -log softmax(logits)[label]; requires a softmax head.
  kCrossEntropy,
  /// sum over output entries of (y - t)^2; t is the explicit target when
  /// given, else the one-hot label.
  kMeanSquaredError,
};

struct Batch {
  std::vector<ChannelStack> inputs;
  std::vector<int> labels;
  std::vector<Tensor> targets;  // optional, MSE only

  std::size_t size() const { return inputs.size(); }
};

/// Gradients of the batch-mean loss, one buffer per parameter block in
/// theta order. Frozen blocks have empty buffers.
struct GradientTape {
  std::vector<std::vector<double>> grads;
  std::vector<ParamInfo> layout;

  bool has(std::size_t block) const { return !grads[block].empty(); }
  /// Gradient for flat theta index; 0 for frozen parameters.
  double at(std::size_t theta_index) const;
};

struct BackwardResult {
  double loss = 0.0;
  GradientTape tape;
};

/// Loss (mean over the batch) and exact gradients for every trainable
/// parameter. Throws NumericError when the loss is not finite.
BackwardResult backward(const Model& model, const Batch& batch, LossKind loss,
                        const ForwardOptions& options = {});

/// Batch-mean loss without gradients.
double evaluate_loss(const Model& model, const Batch& batch, LossKind loss,
                     const ForwardOptions& options = {});

/// (f(x + eps) - f(x - eps)) / (2 eps).
double central_difference(const std::function<double(double)>& f, double x,
                          double eps);

/// Central difference of evaluate_loss with respect to theta[param_index].
/// Works for frozen parameters too.
double fd_gradient(const Model& model, const Batch& batch, LossKind loss,
                   std::size_t param_index, double eps,
                   const ForwardOptions& options = {});

}  // namespace projnet

#endif  // PROJNET_AUTODIFF_H_
