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

#include "projnet/projection.h"

#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "projnet/errors.h"

namespace projnet {

ProjectedNode project_gcnn(const GcnnNode& node) {
  std::vector<SubFunction> subs;
  subs.reserve(node.depth());
  for (const Tensor& f : node.filters) {
    subs.push_back(SubFunction::conv(f, node.mode, /*frozen=*/true));
  }
  ProjectedNode out(std::move(subs), node.bias, node.activation);
  out.bias_trainable = true;
  out.gates_trainable = true;
  return out;
}

Node project_node(const Node& node) {
  if (const auto* c = std::get_if<GcnnNode>(&node)) return project_gcnn(*c);
  return node;
}

ProjectedNode project_opaque(const OpaqueNode& node) {
  if (!node.separable_parts || node.separable_parts->empty()) {
    throw ProjectionError(
        "node function is not separable by input; it cannot be projected");
  }
  return ProjectedNode(*node.separable_parts, node.bias, node.activation);
}

Model project_model(Model model) {
  for (Layer& layer : model.layers) {
    auto* nl = std::get_if<NodeLayer>(&layer);
    if (!nl) continue;
    bool changed = false;
    for (Node& n : nl->nodes) {
      if (!is_gffn_form(n)) {
        n = project_node(n);
        changed = true;
      }
    }
    if (changed) nl->homogeneous = false;
  }
  return model;
}

ParamAudit count_params(const Model& model) {
  ParamAudit audit;
  std::map<std::size_t, ParamAuditRow> rows;
  for (const ParamInfo& p : param_layout(model)) {
    ParamAuditRow& row = rows[p.layer];
    row.layer = p.layer;
    (p.trainable ? row.trainable : row.frozen) += p.size;
    (p.trainable ? audit.trainable : audit.frozen) += p.size;
  }
  for (auto& [l, row] : rows) {
    const Layer& layer = model.layers[l];
    row.kind = layer_kind_name(layer);
    if (const auto* nl = std::get_if<NodeLayer>(&layer)) {
      row.nodes = nl->nodes.size();
      bool any_projected = false;
      for (const Node& n : nl->nodes) {
        any_projected |= std::holds_alternative<ProjectedNode>(n);
      }
      if (any_projected) row.kind = "projected";
    } else if (const auto* h = std::get_if<DenseHead>(&layer)) {
      row.nodes = h->classes();
    }
    audit.rows.push_back(row);
  }
  return audit;
}

std::string ParamAudit::to_csv() const {
  std::ostringstream os;
  os << "layer,nodes,trainable,frozen\n";
  for (const ParamAuditRow& r : rows) {
    os << r.layer << ',' << r.nodes << ',' << r.trainable << ',' << r.frozen
       << '\n';
  }
  return os.str();
}

std::string ParamAudit::to_json() const {
  nlohmann::json j;
  j["rows"] = nlohmann::json::array();
  for (const ParamAuditRow& r : rows) {
    j["rows"].push_back({{"layer", r.layer},
                         {"kind", r.kind},
                         {"nodes", r.nodes},
                         {"trainable", r.trainable},
                         {"frozen", r.frozen}});
  }
  j["trainable"] = trainable;
  j["frozen"] = frozen;
  j["total"] = total();
  return j.dump(2);
}

}  // namespace projnet
