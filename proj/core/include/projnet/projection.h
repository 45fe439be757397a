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

// Model projection.
//
// A node whose node function is separable by input,
//
//   f'(Z) = sum_k f_k(Z_k) + b Gamma,
//
// is projected by freezing every f_k and giving each channel contribution a
// new trainable scalar gate gamma_k, initialized to 1:
//
//   f_hat(Z) = sigma( sum_k gamma_k f_k(Z_k) + b Gamma ).
//
// The bias stays trainable. Nodes already in GFFN form (GFFN nodes and
// projected nodes) are left alone, which makes project_model idempotent.

#ifndef PROJNET_PROJECTION_H_
#define PROJNET_PROJECTION_H_

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "projnet/model.h"
#include "projnet/nodes.h"

namespace projnet {

/// GCNN -> projected node with frozen conv sub-functions and unit gates.
/// GFFN and projected nodes are returned unchanged.
Node project_node(const Node& node);
ProjectedNode project_gcnn(const GcnnNode& node);

/// A node known only through its node function f'(Z). It can be projected
/// only when it also declares its per-channel decomposition f_k and bias.
struct OpaqueNode {
  std::function<Tensor(const ChannelStack&)> node_function;
  std::optional<std::vector<SubFunction>> separable_parts;
  double bias = 0.0;
  ActivationKind activation = ActivationKind::kIdentity;
};

/// Throws ProjectionError when `node` declares no decomposition.
ProjectedNode project_opaque(const OpaqueNode& node);

/// Projects every non-GFFN node of every node layer; structural layers and
/// the head are copied untouched. Layers that gain projected nodes are
/// marked as having inhomogeneous inputs.
Model project_model(Model model);

struct ParamAuditRow {
  std::size_t layer = 0;
  std::string kind;
  std::size_t nodes = 0;
  std::size_t trainable = 0;
  std::size_t frozen = 0;
};

struct ParamAudit {
  std::vector<ParamAuditRow> rows;  // layers that own parameters
  std::size_t trainable = 0;
  std::size_t frozen = 0;

  std::size_t total() const { return trainable + frozen; }

  /// Columns: layer,nodes,trainable,frozen
  std::string to_csv() const;
  std::string to_json() const;
};

/// Exact trainable/frozen counts under the model's current flags.
ParamAudit count_params(const Model& model);

}  // namespace projnet

#endif  // PROJNET_PROJECTION_H_
