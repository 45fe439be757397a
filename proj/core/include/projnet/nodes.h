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

// Node kinds and their forward semantics.
//
// Every node maps a ChannelStack Z = (Z_1, ..., Z_d) to one output tensor:
//
//   GFFN       sigma( sum_k w_k Z_k                     + b Gamma )
//   GCNN       sigma( sum_k Z_k * F_k                   + b Gamma )
//   Projected  sigma( sum_k gamma_k f_k(Z_k)            + b Gamma )
//
// where * is cross-correlation and f_k is a frozen per-channel sub-function.
// The pre-activation (everything inside sigma) is the node function.
//
// Channel sums always run in ascending k, starting from a zero tensor, with
// the bias added last. Keeping one order everywhere is what makes a freshly
// projected node (all gamma_k = 1) reproduce its source node bit for bit.

#ifndef PROJNET_NODES_H_
#define PROJNET_NODES_H_

#include <cstddef>
#include <optional>
#include <variant>
#include <vector>

#include "projnet/tensor.h"

namespace projnet {

struct GffnNode {
  std::vector<double> weights;  // one scalar per input channel
  double bias = 0.0;
  ActivationKind activation = ActivationKind::kRelu;
  /// When set, inputs must have this channel shape.
  std::optional<Shape> out_shape;
  bool weights_trainable = true;
  bool bias_trainable = true;

  GffnNode(std::vector<double> w, double b,
           ActivationKind act = ActivationKind::kRelu,
           std::optional<Shape> shape = std::nullopt);

  std::size_t depth() const noexcept { return weights.size(); }
};

struct GcnnNode {
  std::vector<Tensor> filters;  // F_{jk}, all of one shape
  double bias = 0.0;
  ActivationKind activation = ActivationKind::kRelu;
  PadMode mode = PadMode::kSame;
  bool filters_trainable = true;
  bool bias_trainable = true;

  GcnnNode(std::vector<Tensor> f, double b,
           ActivationKind act = ActivationKind::kRelu,
           PadMode m = PadMode::kSame);

  std::size_t depth() const noexcept { return filters.size(); }
  const Shape& filter_shape() const { return filters.front().shape(); }
};

/// A per-channel transformation f_k(Z_k) of a separable node function.
struct SubFunction {
  enum class Kind { kConv, kScale };

  Kind kind = Kind::kScale;
  /// Conv: the filter channel. Scale: a rank-0 tensor holding W_k.
  Tensor params;
  PadMode mode = PadMode::kSame;
  bool frozen = true;

  static SubFunction conv(Tensor filter, PadMode mode, bool frozen = true);
  static SubFunction scale(double w, bool frozen = true);
};

/// Output of one sub-function applied to one input channel.
Tensor eval_subfunction(const SubFunction& sub, const Tensor& z_k);

struct ProjectedNode {
  std::vector<SubFunction> subs;
  std::vector<double> gates;  // gamma_k
  double bias = 0.0;
  ActivationKind activation = ActivationKind::kRelu;
  bool gates_trainable = true;
  bool bias_trainable = true;

  /// All gates start at 1 and every sub-function is frozen.
  ProjectedNode(std::vector<SubFunction> s, double b,
                ActivationKind act = ActivationKind::kRelu);

  std::size_t depth() const noexcept { return subs.size(); }
};

using Node = std::variant<GffnNode, GcnnNode, ProjectedNode>;

// Node functions (pre-activation).
Tensor gffn_pre_activation(const GffnNode& node, const ChannelStack& z);
Tensor gcnn_pre_activation(const GcnnNode& node, const ChannelStack& z);
/// If `zhat` is non-null it receives the sub-function outputs f_k(Z_k).
Tensor projected_pre_activation(const ProjectedNode& node, const ChannelStack& z,
                                std::vector<Tensor>* zhat = nullptr);

Tensor gffn_forward(const GffnNode& node, const ChannelStack& z);
Tensor gcnn_forward(const GcnnNode& node, const ChannelStack& z);
Tensor projected_forward(const ProjectedNode& node, const ChannelStack& z);

/// The node-specific preprocessed stack Zhat_j = (f_1(Z_1), ..., f_d(Z_d)).
ChannelStack preprocess(const ProjectedNode& node, const ChannelStack& z);

Tensor node_pre_activation(const Node& node, const ChannelStack& z);
Tensor node_forward(const Node& node, const ChannelStack& z);

std::size_t node_depth(const Node& node);
ActivationKind node_activation(const Node& node);

/// Channel shape the node produces for inputs of `in` (DimensionError if the
/// input shape is incompatible).
Shape node_output_shape(const Node& node, const Shape& in);

/// Total scalar parameter count (weights, filters, gates, sub-function
/// parameters and bias).
std::size_t node_param_count(const Node& node);

/// True for GFFN nodes and projected nodes, which already have GFFN form.
bool is_gffn_form(const Node& node);

/// GCNN with every filter extent 1 -> the GFFN with w_k = F_k.
/// Throws NotReducibleError if any filter has an extent above 1.
GffnNode gcnn_to_gffn(const GcnnNode& node);

/// GFFN -> GCNN whose filters are rank-`rank` all-ones-shape tensors holding
/// w_k. The result uses same-mode padding, which equals valid mode here.
GcnnNode gffn_to_gcnn(const GffnNode& node, std::size_t rank);

}  // namespace projnet

#endif  // PROJNET_NODES_H_
