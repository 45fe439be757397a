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

#include "projnet/nodes.h"

#include <string>

#include "projnet/errors.h"

namespace projnet {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_depth(std::size_t expected, const ChannelStack& z,
                 const char* who) {
  z.validate();
  if (z.depth() != expected) {
    throw DimensionError(std::string(who) + ": node expects " +
                         std::to_string(expected) + " channels, got " +
                         std::to_string(z.depth()));
  }
}

void add_bias(Tensor& t, double b) {
  for (double& v : t.data()) v += b;
}

}  // namespace

GffnNode::GffnNode(std::vector<double> w, double b, ActivationKind act,
                   std::optional<Shape> shape)
    : weights(std::move(w)), bias(b), activation(act),
      out_shape(std::move(shape)) {
  if (weights.empty()) throw DimensionError("GFFN node needs d >= 1 weights");
}

GcnnNode::GcnnNode(std::vector<Tensor> f, double b, ActivationKind act,
                   PadMode m)
    : filters(std::move(f)), bias(b), activation(act), mode(m) {
  if (filters.empty()) throw DimensionError("GCNN node needs d >= 1 filters");
  for (const Tensor& t : filters) {
    if (t.shape() != filters.front().shape()) {
      throw DimensionError("GCNN filter channels must share one shape");
    }
  }
}

SubFunction SubFunction::conv(Tensor filter, PadMode mode, bool frozen) {
  SubFunction s;
  s.kind = Kind::kConv;
  s.params = std::move(filter);
  s.mode = mode;
  s.frozen = frozen;
  return s;
}

SubFunction SubFunction::scale(double w, bool frozen) {
  SubFunction s;
  s.kind = Kind::kScale;
  s.params = Tensor::scalar(w);
  s.frozen = frozen;
  return s;
}

Tensor eval_subfunction(const SubFunction& sub, const Tensor& z_k) {
  if (sub.kind == SubFunction::Kind::kConv) {
    return convolve(z_k, sub.params, sub.mode);
  }
  Tensor out = z_k;
  const double w = sub.params.item();
  for (double& v : out.data()) v = w * v;
  return out;
}

ProjectedNode::ProjectedNode(std::vector<SubFunction> s, double b,
                             ActivationKind act)
    : subs(std::move(s)), gates(subs.size(), 1.0), bias(b), activation(act) {
  if (subs.empty()) throw DimensionError("projected node needs d >= 1 inputs");
  for (SubFunction& f : subs) f.frozen = true;
}

Tensor gffn_pre_activation(const GffnNode& node, const ChannelStack& z) {
  check_depth(node.depth(), z, "gffn");
  if (node.out_shape && z.channel_shape() != *node.out_shape) {
    throw DimensionError("gffn: channel shape " +
                         z.channel_shape().to_string() + " vs node shape " +
                         node.out_shape->to_string());
  }
  Tensor pre = tensor_dot(z, node.weights);
  add_bias(pre, node.bias);
  return pre;
}

Tensor gcnn_pre_activation(const GcnnNode& node, const ChannelStack& z) {
  check_depth(node.depth(), z, "gcnn");
  Tensor pre(conv_output_shape(z.channel_shape(), node.filter_shape(),
                               node.mode));
  for (std::size_t k = 0; k < node.depth(); ++k) {
    convolve_accumulate(z[k], node.filters[k], node.mode, 1.0, pre);
  }
  add_bias(pre, node.bias);
  return pre;
}

Tensor projected_pre_activation(const ProjectedNode& node,
                                const ChannelStack& z,
                                std::vector<Tensor>* zhat) {
  check_depth(node.depth(), z, "projected");
  if (node.gates.size() != node.depth()) {
    throw DimensionError("projected: gate count does not match channel count");
  }
  if (zhat) {
    zhat->clear();
    zhat->reserve(node.depth());
  }
  std::optional<Tensor> pre;
  for (std::size_t k = 0; k < node.depth(); ++k) {
    Tensor f = eval_subfunction(node.subs[k], z[k]);
    if (!pre) {
      pre.emplace(f.shape());
    } else if (pre->shape() != f.shape()) {
      throw DimensionError("projected: sub-function outputs differ in shape");
    }
    const double g = node.gates[k];
    double* o = pre->data().data();
    const double* src = f.data().data();
    for (std::size_t i = 0; i < f.size(); ++i) o[i] += g * src[i];
    if (zhat) zhat->push_back(std::move(f));
  }
  add_bias(*pre, node.bias);
  return std::move(*pre);
}

Tensor gffn_forward(const GffnNode& node, const ChannelStack& z) {
  Tensor t = gffn_pre_activation(node, z);
  apply_activation_inplace(t, node.activation);
  return t;
}

Tensor gcnn_forward(const GcnnNode& node, const ChannelStack& z) {
  Tensor t = gcnn_pre_activation(node, z);
  apply_activation_inplace(t, node.activation);
  return t;
}

Tensor projected_forward(const ProjectedNode& node, const ChannelStack& z) {
  Tensor t = projected_pre_activation(node, z);
  apply_activation_inplace(t, node.activation);
  return t;
}

ChannelStack preprocess(const ProjectedNode& node, const ChannelStack& z) {
  check_depth(node.depth(), z, "preprocess");
  ChannelStack out;
  out.channels.reserve(node.depth());
  for (std::size_t k = 0; k < node.depth(); ++k) {
    out.channels.push_back(eval_subfunction(node.subs[k], z[k]));
  }
  return out;
}

Tensor node_pre_activation(const Node& node, const ChannelStack& z) {
  return std::visit(
      Overloaded{
          [&](const GffnNode& n) { return gffn_pre_activation(n, z); },
          [&](const GcnnNode& n) { return gcnn_pre_activation(n, z); },
          [&](const ProjectedNode& n) {
            return projected_pre_activation(n, z);
          },
      },
      node);
}

Tensor node_forward(const Node& node, const ChannelStack& z) {
  Tensor t = node_pre_activation(node, z);
  apply_activation_inplace(t, node_activation(node));
  return t;
}

std::size_t node_depth(const Node& node) {
  return std::visit([](const auto& n) { return n.depth(); }, node);
}

ActivationKind node_activation(const Node& node) {
  return std::visit([](const auto& n) { return n.activation; }, node);
}

Shape node_output_shape(const Node& node, const Shape& in) {
  return std::visit(
      Overloaded{
          [&](const GffnNode& n) {
            if (n.out_shape && *n.out_shape != in) {
              throw DimensionError("gffn: channel shape " + in.to_string() +
                                   " vs node shape " +
                                   n.out_shape->to_string());
            }
            return in;
          },
          [&](const GcnnNode& n) {
            return conv_output_shape(in, n.filter_shape(), n.mode);
          },
          [&](const ProjectedNode& n) {
            std::optional<Shape> s;
            for (const SubFunction& f : n.subs) {
              Shape o = f.kind == SubFunction::Kind::kConv
                            ? conv_output_shape(in, f.params.shape(), f.mode)
                            : in;
              if (s && *s != o) {
                throw DimensionError(
                    "projected: sub-function outputs differ in shape");
              }
              s = std::move(o);
            }
            return *s;
          },
      },
      node);
}

std::size_t node_param_count(const Node& node) {
  return std::visit(
      Overloaded{
          [](const GffnNode& n) { return n.depth() + 1; },
          [](const GcnnNode& n) {
            return n.depth() * n.filter_shape().volume() + 1;
          },
          [](const ProjectedNode& n) {
            std::size_t c = n.gates.size() + 1;
            for (const SubFunction& f : n.subs) c += f.params.size();
            return c;
          },
      },
      node);
}

bool is_gffn_form(const Node& node) {
  return !std::holds_alternative<GcnnNode>(node);
}

GffnNode gcnn_to_gffn(const GcnnNode& node) {
  if (!node.filter_shape().all_ones()) {
    throw NotReducibleError("GCNN filter shape " +
                            node.filter_shape().to_string() +
                            " has an extent above 1; no GFFN image exists");
  }
  std::vector<double> w;
  w.reserve(node.depth());
  for (const Tensor& f : node.filters) w.push_back(f.item());
  GffnNode out(std::move(w), node.bias, node.activation);
  out.weights_trainable = node.filters_trainable;
  out.bias_trainable = node.bias_trainable;
  return out;
}

GcnnNode gffn_to_gcnn(const GffnNode& node, std::size_t rank) {
  std::vector<Tensor> filters;
  filters.reserve(node.depth());
  for (double w : node.weights) filters.emplace_back(Shape::ones(rank), w);
  GcnnNode out(std::move(filters), node.bias, node.activation, PadMode::kSame);
  out.filters_trainable = node.weights_trainable;
  out.bias_trainable = node.bias_trainable;
  return out;
}

}  // namespace projnet
