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

#include "projnet/autodiff.h"

#include <algorithm>
#include <cmath>

#include "projnet/errors.h"

namespace projnet {

double GradientTape::at(std::size_t theta_index) const {
  std::size_t base = 0;
  for (std::size_t b = 0; b < layout.size(); ++b) {
    if (theta_index < base + layout[b].size) {
      return grads[b].empty() ? 0.0 : grads[b][theta_index - base];
    }
    base += layout[b].size;
  }
  throw DimensionError("gradient index out of range");
}

namespace {

void check_batch(const Model& model, const Batch& batch, LossKind loss) {
  if (batch.inputs.empty()) throw DimensionError("empty batch");
  if (loss == LossKind::kCrossEntropy) {
    if (!model.has_head() ||
        model.head().activation != ActivationKind::kSoftmax) {
      throw ConfigError("cross-entropy needs a softmax head");
    }
    if (batch.labels.size() != batch.size()) {
      throw DimensionError("batch has " + std::to_string(batch.size()) +
                           " inputs but " + std::to_string(batch.labels.size()) +
                           " labels");
    }
  } else if (batch.targets.size() != batch.size() &&
             batch.labels.size() != batch.size()) {
    throw DimensionError("MSE needs one target or label per input");
  }
}

Tensor mse_target(const Batch& batch, std::size_t i, std::size_t n) {
  if (!batch.targets.empty()) {
    if (batch.targets[i].size() != n) {
      throw DimensionError("target size does not match model output");
    }
    return batch.targets[i];
  }
  Tensor t(Shape{n});
  const int y = batch.labels[i];
  if (y < 0 || static_cast<std::size_t>(y) >= n) {
    throw DimensionError("label out of range");
  }
  t[static_cast<std::size_t>(y)] = 1.0;
  return t;
}

// Loss of one sample and, if `grad` is non-null, dLoss/d(pre-softmax logits)
// when the model ends in a head, else dLoss/d(flattened output).
double sample_loss(const Model& model, const ForwardTrace& trace,
                   const Batch& batch, std::size_t i, LossKind loss,
                   std::vector<double>* grad) {
  const Tensor& out = trace.output;
  if (loss == LossKind::kCrossEntropy) {
    const std::vector<double>& logits = trace.layers.back().logits;
    const int y = batch.labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= logits.size()) {
      throw DimensionError("label " + std::to_string(y) + " out of range");
    }
    const double m = *std::max_element(logits.begin(), logits.end());
    double s = 0.0;
    for (double v : logits) s += std::exp(v - m);
    const double value = std::log(s) + m - logits[static_cast<std::size_t>(y)];
    if (grad) {
      grad->assign(out.data().begin(), out.data().end());
      (*grad)[static_cast<std::size_t>(y)] -= 1.0;
    }
    return value;
  }
  const Tensor target = mse_target(batch, i, out.size());
  double value = 0.0;
  std::vector<double> dy(out.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double e = out[k] - target[k];
    value += e * e;
    dy[k] = 2.0 * e;
  }
  if (grad) {
    if (model.has_head() &&
        model.head().activation == ActivationKind::kSoftmax) {
      // Softmax Jacobian-vector product: p * (dy - <dy, p>).
      double dot = 0.0;
      for (std::size_t k = 0; k < dy.size(); ++k) dot += dy[k] * out[k];
      grad->resize(dy.size());
      for (std::size_t k = 0; k < dy.size(); ++k) {
        (*grad)[k] = out[k] * (dy[k] - dot);
      }
    } else if (model.has_head() &&
               model.head().activation != ActivationKind::kIdentity) {
      const auto& logits = trace.layers.back().logits;
      Tensor pre = Tensor::vector(logits);
      Tensor g = Tensor::vector(dy);
      activation_backward_inplace(pre, out, model.head().activation, g);
      grad->assign(g.data().begin(), g.data().end());
    } else {
      *grad = std::move(dy);
    }
  }
  return value;
}

// First layer owning a trainable parameter; backward stops there.
std::size_t first_trainable_layer(const std::vector<ParamInfo>& layout,
                                  std::size_t n_layers) {
  std::size_t first = n_layers;
  for (const ParamInfo& p : layout) {
    if (p.trainable) first = std::min(first, p.layer);
  }
  return first;
}

ChannelStack zeros_like(const ChannelStack& z) {
  ChannelStack out;
  out.channels.reserve(z.depth());
  for (const Tensor& c : z.channels) out.channels.emplace_back(c.shape());
  return out;
}

void add_to(std::vector<double>& dst, std::span<const double> src) {
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}

double sum(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += v;
  return s;
}

class BackwardPass {
 public:
  BackwardPass(const Model& model, GradientTape& tape)
      : model_(model),
        tape_(tape),
        offsets_(node_block_offsets(model)),
        stop_(first_trainable_layer(tape.layout, model.layers.size())) {}

  // `upstream` is dLoss/d(logits) for a head model, else dLoss/d(output).
  void run(const ForwardTrace& trace, std::vector<double> upstream) {
    if (stop_ >= model_.layers.size()) return;
    ChannelStack g;
    std::size_t l = model_.layers.size();
    if (model_.has_head()) {
      --l;
      g = head_backward(l, trace.layers[l], upstream);
    } else {
      g = unflatten(upstream, output_like());
    }
    while (l-- > stop_) {
      g = layer_backward(l, trace.layers[l], std::move(g));
    }
  }

 private:
  // Stack with the shape of the last layer's output (model without head).
  ChannelStack output_like() const {
    const auto sigs = layer_signatures(model_);
    ChannelStack z;
    for (std::size_t k = 0; k < sigs.back().depth; ++k) {
      z.channels.emplace_back(sigs.back().shape);
    }
    return z;
  }

  static ChannelStack unflatten(std::span<const double> flat,
                                ChannelStack like) {
    std::size_t pos = 0;
    for (Tensor& c : like.channels) {
      for (double& v : c.data()) v = flat[pos++];
    }
    return like;
  }

  std::vector<double>* grad_buffer(std::size_t block) {
    auto& g = tape_.grads[block];
    return g.empty() ? nullptr : &g;
  }

  ChannelStack head_backward(std::size_t l, const LayerTrace& lt,
                             const std::vector<double>& dlogits) {
    const DenseHead& h = std::get<DenseHead>(model_.layers[l]);
    const std::size_t c = h.classes();
    const std::size_t f = h.inputs();
    const std::size_t block = offsets_[l][0];
    if (auto* dw = grad_buffer(block)) {
      for (std::size_t i = 0; i < c; ++i) {
        const double gi = dlogits[i];
        double* row = dw->data() + i * f;
        for (std::size_t k = 0; k < f; ++k) row[k] += gi * lt.head_input[k];
      }
    }
    if (auto* db = grad_buffer(block + 1)) add_to(*db, dlogits);
    if (l <= stop_) return {};
    std::vector<double> din(f, 0.0);
    const double* w = h.weights.data().data();
    for (std::size_t i = 0; i < c; ++i) {
      const double gi = dlogits[i];
      const double* row = w + i * f;
      for (std::size_t k = 0; k < f; ++k) din[k] += row[k] * gi;
    }
    return unflatten(din, zeros_like(lt.input));
  }

  ChannelStack layer_backward(std::size_t l, const LayerTrace& lt,
                              ChannelStack g) {
    const Layer& layer = model_.layers[l];
    const bool need_input_grad = l > stop_;
    if (std::holds_alternative<GlobalAvgPool>(layer)) {
      ChannelStack out = zeros_like(lt.input);
      for (std::size_t k = 0; k < out.depth(); ++k) {
        out[k].fill(g[k].item() / static_cast<double>(out[k].size()));
      }
      return out;
    }
    if (std::holds_alternative<Dropout>(layer)) {
      if (!lt.mask.empty()) {
        for (std::size_t k = 0; k < g.depth(); ++k) {
          for (std::size_t i = 0; i < g[k].size(); ++i) g[k][i] *= lt.mask[k][i];
        }
      }
      return g;
    }
    if (std::holds_alternative<Flatten>(layer)) {
      std::vector<double> flat;
      flat.reserve(g.depth());
      for (const Tensor& t : g.channels) flat.push_back(t.item());
      return unflatten(flat, zeros_like(lt.input));
    }
    const auto& nl = std::get<NodeLayer>(layer);
    ChannelStack gin;
    if (need_input_grad) gin = zeros_like(lt.input);
    for (std::size_t j = 0; j < nl.nodes.size(); ++j) {
      const NodeTrace& nt = lt.nodes[j];
      Tensor gpre = std::move(g[j]);
      activation_backward_inplace(nt.pre, nt.out, node_activation(nl.nodes[j]),
                                  gpre);
      node_backward(nl.nodes[j], offsets_[l][j], lt.input, nt, gpre,
                    need_input_grad ? &gin : nullptr);
    }
    return gin;
  }

  void node_backward(const Node& node, std::size_t block,
                     const ChannelStack& z, const NodeTrace& nt,
                     const Tensor& gpre, ChannelStack* gin) {
    if (const auto* n = std::get_if<GffnNode>(&node)) {
      if (auto* dw = grad_buffer(block)) {
        for (std::size_t k = 0; k < n->depth(); ++k) {
          (*dw)[k] += inner_product(gpre, z[k]);
        }
      }
      if (auto* db = grad_buffer(block + 1)) (*db)[0] += sum(gpre);
      if (gin) {
        for (std::size_t k = 0; k < n->depth(); ++k) {
          double* dst = (*gin)[k].data().data();
          const double w = n->weights[k];
          for (std::size_t i = 0; i < gpre.size(); ++i) dst[i] += w * gpre[i];
        }
      }
      return;
    }
    if (const auto* n = std::get_if<GcnnNode>(&node)) {
      const std::size_t d = n->depth();
      for (std::size_t k = 0; k < d; ++k) {
        if (auto* df = grad_buffer(block + k)) {
          Tensor acc(n->filter_shape());
          convolve_kernel_grad(z[k], gpre, n->mode, acc);
          add_to(*df, acc.data());
        }
        if (gin) convolve_input_grad(gpre, n->filters[k], n->mode, (*gin)[k]);
      }
      if (auto* db = grad_buffer(block + d)) (*db)[0] += sum(gpre);
      return;
    }
    const auto& n = std::get<ProjectedNode>(node);
    const std::size_t d = n.depth();
    if (auto* dg = grad_buffer(block + d)) {
      for (std::size_t k = 0; k < d; ++k) {
        (*dg)[k] += inner_product(gpre, nt.zhat[k]);
      }
    }
    if (auto* db = grad_buffer(block + d + 1)) (*db)[0] += sum(gpre);
    for (std::size_t k = 0; k < d; ++k) {
      auto* dsub = grad_buffer(block + k);
      if (!dsub && !gin) continue;
      Tensor gs = gpre;
      gs *= n.gates[k];
      const SubFunction& sub = n.subs[k];
      if (sub.kind == SubFunction::Kind::kConv) {
        if (dsub) {
          Tensor acc(sub.params.shape());
          convolve_kernel_grad(z[k], gs, sub.mode, acc);
          add_to(*dsub, acc.data());
        }
        if (gin) convolve_input_grad(gs, sub.params, sub.mode, (*gin)[k]);
      } else {
        if (dsub) (*dsub)[0] += inner_product(gs, z[k]);
        if (gin) {
          const double w = sub.params.item();
          double* dst = (*gin)[k].data().data();
          for (std::size_t i = 0; i < gs.size(); ++i) dst[i] += w * gs[i];
        }
      }
    }
  }

  const Model& model_;
  GradientTape& tape_;
  std::vector<std::vector<std::size_t>> offsets_;
  std::size_t stop_;
};

}  // namespace

BackwardResult backward(const Model& model, const Batch& batch, LossKind loss,
                        const ForwardOptions& options) {
  check_batch(model, batch, loss);
  BackwardResult result;
  GradientTape& tape = result.tape;
  tape.layout = param_layout(model);
  tape.grads.resize(tape.layout.size());
  for (std::size_t b = 0; b < tape.layout.size(); ++b) {
    if (tape.layout[b].trainable) tape.grads[b].assign(tape.layout[b].size, 0.0);
  }
  BackwardPass pass(model, tape);
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  ForwardTrace trace;
  std::vector<double> upstream;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    forward_sample(model, batch.inputs[i], options, i, &trace);
    total += sample_loss(model, trace, batch, i, loss, &upstream);
    for (double& u : upstream) u *= scale;
    pass.run(trace, std::move(upstream));
    upstream.clear();
  }
  result.loss = total * scale;
  if (!std::isfinite(result.loss)) {
    throw NumericError("loss is not finite");
  }
  return result;
}

double evaluate_loss(const Model& model, const Batch& batch, LossKind loss,
                     const ForwardOptions& options) {
  check_batch(model, batch, loss);
  double total = 0.0;
  ForwardTrace trace;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    forward_sample(model, batch.inputs[i], options, i, &trace);
    total += sample_loss(model, trace, batch, i, loss, nullptr);
  }
  const double value = total / static_cast<double>(batch.size());
  if (!std::isfinite(value)) throw NumericError("loss is not finite");
  return value;
}

double central_difference(const std::function<double(double)>& f, double x,
                          double eps) {
  if (!(eps > 0.0)) throw ConfigError("finite-difference step must be > 0");
  return (f(x + eps) - f(x - eps)) / (2.0 * eps);
}

double fd_gradient(const Model& model, const Batch& batch, LossKind loss,
                   std::size_t param_index, double eps,
                   const ForwardOptions& options) {
  Model probe = model;
  const double x = get_param(probe, param_index);
  return central_difference(
      [&](double v) {
        set_param(probe, param_index, v);
        return evaluate_loss(probe, batch, loss, options);
      },
      x, eps);
}

}  // namespace projnet
