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

#include "projnet/model.h"

#include <cmath>
#include <nlohmann/json.hpp>

#include "projnet/errors.h"
#include "projnet/random.h"

namespace projnet {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

StackSignature next_signature(const Layer& layer, const StackSignature& in,
                              bool is_last) {
  return std::visit(
      Overloaded{
          [&](const NodeLayer& l) -> StackSignature {
            if (l.nodes.size() < 2) {
              throw ConfigError("node layer needs at least two nodes, has " +
                                std::to_string(l.nodes.size()));
            }
            std::optional<Shape> out;
            for (const Node& n : l.nodes) {
              if (node_activation(n) == ActivationKind::kSoftmax) {
                throw ConfigError("softmax is only allowed on the head");
              }
              if (node_depth(n) != in.depth) {
                throw DimensionError(
                    "node expects " + std::to_string(node_depth(n)) +
                    " input channels, layer receives " +
                    std::to_string(in.depth));
              }
              Shape s = node_output_shape(n, in.shape);
              if (out && *out != s) {
                throw DimensionError("nodes of one layer disagree on output "
                                     "shape");
              }
              out = std::move(s);
            }
            return {l.nodes.size(), *out};
          },
          [&](const GlobalAvgPool&) -> StackSignature {
            return {in.depth, Shape{}};
          },
          [&](const Dropout& d) -> StackSignature {
            if (!(d.rate >= 0.0 && d.rate < 1.0)) {
              throw ConfigError("dropout rate must lie in [0, 1)");
            }
            return in;
          },
          [&](const Flatten&) -> StackSignature {
            return {in.depth * in.shape.volume(), Shape{}};
          },
          [&](const DenseHead& h) -> StackSignature {
            if (!is_last) throw ConfigError("dense head must be the last layer");
            if (h.weights.rank() != 2 ||
                h.weights.shape()[0] != h.biases.size()) {
              throw DimensionError("dense head weights must be (classes, inputs)");
            }
            if (h.inputs() != in.depth * in.shape.volume()) {
              throw DimensionError(
                  "dense head expects " + std::to_string(h.inputs()) +
                  " inputs, receives " +
                  std::to_string(in.depth * in.shape.volume()));
            }
            return {h.classes(), Shape{}};
          },
      },
      layer);
}

// Visits every parameter block in theta order. `fn` receives
// (cls, layer, node, channel, values, flag).
template <class M, class Fn>
void visit_blocks(M& model, Fn&& fn) {
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    auto& layer = model.layers[l];
    if (auto* nl = std::get_if<NodeLayer>(&layer)) {
      for (std::size_t j = 0; j < nl->nodes.size(); ++j) {
        auto& node = nl->nodes[j];
        if (auto* g = std::get_if<GffnNode>(&node)) {
          fn(ParamClass::kWeight, l, j, 0, std::span(g->weights),
             TrainableFlag(const_cast<bool*>(&g->weights_trainable), false));
          fn(ParamClass::kBias, l, j, 0, std::span(&g->bias, 1),
             TrainableFlag(const_cast<bool*>(&g->bias_trainable), false));
        } else if (auto* c = std::get_if<GcnnNode>(&node)) {
          for (std::size_t k = 0; k < c->filters.size(); ++k) {
            fn(ParamClass::kFilter, l, j, k, c->filters[k].data(),
               TrainableFlag(const_cast<bool*>(&c->filters_trainable), false));
          }
          fn(ParamClass::kBias, l, j, 0, std::span(&c->bias, 1),
             TrainableFlag(const_cast<bool*>(&c->bias_trainable), false));
        } else if (auto* p = std::get_if<ProjectedNode>(&node)) {
          for (std::size_t k = 0; k < p->subs.size(); ++k) {
            auto& sub = p->subs[k];
            fn(sub.kind == SubFunction::Kind::kConv ? ParamClass::kFilter
                                                    : ParamClass::kWeight,
               l, j, k, sub.params.data(),
               TrainableFlag(const_cast<bool*>(&sub.frozen), true));
          }
          fn(ParamClass::kGate, l, j, 0, std::span(p->gates),
             TrainableFlag(const_cast<bool*>(&p->gates_trainable), false));
          fn(ParamClass::kBias, l, j, 0, std::span(&p->bias, 1),
             TrainableFlag(const_cast<bool*>(&p->bias_trainable), false));
        }
      }
    } else if (auto* h = std::get_if<DenseHead>(&layer)) {
      fn(ParamClass::kHeadWeight, l, 0, 0, h->weights.data(),
         TrainableFlag(const_cast<bool*>(&h->weights_trainable), false));
      fn(ParamClass::kHeadBias, l, 0, 0, std::span(h->biases),
         TrainableFlag(const_cast<bool*>(&h->bias_trainable), false));
    }
  }
}

}  // namespace

const char* layer_kind_name(const Layer& layer) {
  return std::visit(Overloaded{
                        [](const NodeLayer&) { return "nodes"; },
                        [](const GlobalAvgPool&) { return "gap"; },
                        [](const Dropout&) { return "dropout"; },
                        [](const Flatten&) { return "flatten"; },
                        [](const DenseHead&) { return "head"; },
                    },
                    layer);
}

std::vector<StackSignature> layer_signatures(const Model& model) {
  if (model.input_channels == 0) {
    throw DimensionError("model needs at least one input channel");
  }
  std::vector<StackSignature> sigs;
  sigs.push_back({model.input_channels, model.input_shape});
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    sigs.push_back(next_signature(model.layers[l], sigs.back(),
                                  l + 1 == model.layers.size()));
  }
  return sigs;
}

void Model::validate() const { (void)layer_signatures(*this); }

bool Model::has_head() const {
  return !layers.empty() && std::holds_alternative<DenseHead>(layers.back());
}

DenseHead& Model::head() {
  if (!has_head()) throw ConfigError("model has no dense head");
  return std::get<DenseHead>(layers.back());
}

const DenseHead& Model::head() const {
  if (!has_head()) throw ConfigError("model has no dense head");
  return std::get<DenseHead>(layers.back());
}

const char* to_string(ParamClass c) {
  switch (c) {
    case ParamClass::kWeight:
      return "w";
    case ParamClass::kFilter:
      return "F";
    case ParamClass::kBias:
      return "b";
    case ParamClass::kGate:
      return "gamma";
    case ParamClass::kHeadWeight:
      return "head_w";
    case ParamClass::kHeadBias:
      return "head_b";
  }
  return "?";
}

std::vector<ParamBlock> param_blocks(Model& model) {
  std::vector<ParamBlock> out;
  visit_blocks(model, [&](ParamClass cls, std::size_t l, std::size_t j,
                          std::size_t k, std::span<double> v,
                          TrainableFlag flag) {
    out.push_back({cls, l, j, k, v, flag});
  });
  return out;
}

std::vector<ParamInfo> param_layout(const Model& model) {
  std::vector<ParamInfo> out;
  visit_blocks(model, [&](ParamClass cls, std::size_t l, std::size_t j,
                          std::size_t k, auto v, TrainableFlag flag) {
    out.push_back({cls, l, j, k, v.size(), flag.get()});
  });
  return out;
}

std::vector<std::vector<std::size_t>> node_block_offsets(const Model& model) {
  std::vector<std::vector<std::size_t>> offsets(model.layers.size());
  std::size_t index = 0;
  std::size_t last_layer = SIZE_MAX, last_node = SIZE_MAX;
  visit_blocks(model, [&](ParamClass, std::size_t l, std::size_t j,
                          std::size_t, auto, TrainableFlag) {
    if (l != last_layer || j != last_node) {
      offsets[l].push_back(index);
      last_layer = l;
      last_node = j;
    }
    ++index;
  });
  return offsets;
}

std::size_t param_count(const Model& model) {
  std::size_t n = 0;
  for (const ParamInfo& p : param_layout(model)) n += p.size;
  return n;
}

std::vector<double> flatten_params(const Model& model) {
  std::vector<double> theta;
  visit_blocks(model, [&](ParamClass, std::size_t, std::size_t, std::size_t,
                          auto v, TrainableFlag) {
    theta.insert(theta.end(), v.begin(), v.end());
  });
  return theta;
}

double get_param(const Model& model, std::size_t index) {
  double found = 0.0;
  bool ok = false;
  std::size_t base = 0;
  visit_blocks(model, [&](ParamClass, std::size_t, std::size_t, std::size_t,
                          auto v, TrainableFlag) {
    if (!ok && index < base + v.size()) {
      found = v[index - base];
      ok = true;
    }
    base += v.size();
  });
  if (!ok) throw DimensionError("parameter index out of range");
  return found;
}

void set_param(Model& model, std::size_t index, double value) {
  std::size_t base = 0;
  for (ParamBlock& b : param_blocks(model)) {
    if (index < base + b.values.size()) {
      b.values[index - base] = value;
      return;
    }
    base += b.values.size();
  }
  throw DimensionError("parameter index out of range");
}

void set_all_trainable(Model& model, bool trainable) {
  for (ParamBlock& b : param_blocks(model)) b.trainable.set(trainable);
}

namespace {

std::vector<double> flatten_stack(const ChannelStack& z) {
  std::vector<double> out;
  for (const Tensor& c : z.channels) {
    out.insert(out.end(), c.data().begin(), c.data().end());
  }
  return out;
}

}  // namespace

Tensor forward_sample(const Model& model, const ChannelStack& x,
                      const ForwardOptions& options, std::size_t sample_index,
                      ForwardTrace* trace) {
  x.validate();
  if (x.depth() != model.input_channels ||
      x.channel_shape() != model.input_shape) {
    throw DimensionError("input stack " + std::to_string(x.depth()) + "x" +
                         x.channel_shape().to_string() +
                         " does not match model input " +
                         std::to_string(model.input_channels) + "x" +
                         model.input_shape.to_string());
  }
  if (trace) {
    trace->layers.clear();
    trace->layers.resize(model.layers.size());
  }
  ChannelStack cur = x;
  std::optional<Tensor> head_out;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    LayerTrace* lt = trace ? &trace->layers[l] : nullptr;
    if (lt) lt->input = cur;
    std::visit(
        Overloaded{
            [&](const NodeLayer& layer) {
              ChannelStack next;
              next.channels.reserve(layer.nodes.size());
              if (lt) lt->nodes.resize(layer.nodes.size());
              for (std::size_t j = 0; j < layer.nodes.size(); ++j) {
                const Node& node = layer.nodes[j];
                Tensor pre;
                if (const auto* p = std::get_if<ProjectedNode>(&node)) {
                  pre = projected_pre_activation(*p, cur,
                                                 lt ? &lt->nodes[j].zhat
                                                    : nullptr);
                } else {
                  pre = node_pre_activation(node, cur);
                }
                Tensor out = pre;
                apply_activation_inplace(out, node_activation(node));
                if (lt) {
                  lt->nodes[j].pre = std::move(pre);
                  lt->nodes[j].out = out;
                }
                next.channels.push_back(std::move(out));
              }
              cur = std::move(next);
            },
            [&](const GlobalAvgPool&) {
              for (Tensor& c : cur.channels) {
                double s = 0.0;
                for (double v : c.data()) s += v;
                c = Tensor::scalar(s / static_cast<double>(c.size()));
              }
            },
            [&](const Dropout& d) {
              if (!options.training || d.rate == 0.0) return;
              Rng rng(derive_seed(options.dropout_seed, {sample_index, l}));
              const double keep_scale = 1.0 / (1.0 - d.rate);
              if (lt) lt->mask.resize(cur.depth());
              for (std::size_t k = 0; k < cur.depth(); ++k) {
                std::vector<double> mask(cur[k].size());
                for (std::size_t i = 0; i < mask.size(); ++i) {
                  mask[i] = rng.uniform() < d.rate ? 0.0 : keep_scale;
                  cur[k][i] *= mask[i];
                }
                if (lt) lt->mask[k] = std::move(mask);
              }
            },
            [&](const Flatten&) {
              ChannelStack next;
              for (double v : flatten_stack(cur)) {
                next.channels.push_back(Tensor::scalar(v));
              }
              cur = std::move(next);
            },
            [&](const DenseHead& h) {
              std::vector<double> in = flatten_stack(cur);
              if (in.size() != h.inputs()) {
                throw DimensionError("dense head input size mismatch");
              }
              const std::size_t c = h.classes();
              std::vector<double> logits(c);
              const double* w = h.weights.data().data();
              for (std::size_t i = 0; i < c; ++i) {
                double acc = 0.0;
                const double* row = w + i * in.size();
                for (std::size_t f = 0; f < in.size(); ++f) acc += row[f] * in[f];
                logits[i] = acc + h.biases[i];
              }
              Tensor out = Tensor::vector(logits);
              apply_activation_inplace(out, h.activation);
              if (lt) {
                lt->head_input = std::move(in);
                lt->logits = std::move(logits);
              }
              head_out = std::move(out);
            },
        },
        model.layers[l]);
  }
  Tensor result = head_out ? std::move(*head_out)
                           : Tensor::vector(flatten_stack(cur));
  if (trace) trace->output = result;
  return result;
}

std::vector<Tensor> forward(const Model& model,
                            std::span<const ChannelStack> batch,
                            const ForwardOptions& options) {
  std::vector<Tensor> out;
  out.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out.push_back(forward_sample(model, batch[i], options, i));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Architecture specs and initialization
// ---------------------------------------------------------------------------

namespace {

LayerSpec::Kind layer_kind_from_string(const std::string& s) {
  if (s == "conv") return LayerSpec::Kind::kConv;
  if (s == "gffn") return LayerSpec::Kind::kGffn;
  if (s == "gap") return LayerSpec::Kind::kGap;
  if (s == "dropout") return LayerSpec::Kind::kDropout;
  if (s == "flatten") return LayerSpec::Kind::kFlatten;
  if (s == "head") return LayerSpec::Kind::kHead;
  throw ConfigError("unknown layer type '" + s + "'");
}

const char* to_string(LayerSpec::Kind k) {
  switch (k) {
    case LayerSpec::Kind::kConv:
      return "conv";
    case LayerSpec::Kind::kGffn:
      return "gffn";
    case LayerSpec::Kind::kGap:
      return "gap";
    case LayerSpec::Kind::kDropout:
      return "dropout";
    case LayerSpec::Kind::kFlatten:
      return "flatten";
    case LayerSpec::Kind::kHead:
      return "head";
  }
  return "?";
}

DenseHead make_head(std::size_t classes, std::size_t inputs, Rng& rng) {
  if (classes < 2) throw ConfigError("head needs at least two classes");
  DenseHead h;
  const double limit = std::sqrt(6.0 / static_cast<double>(inputs + classes));
  h.weights = Tensor(Shape{classes, inputs});
  for (double& v : h.weights.data()) v = rng.uniform(-limit, limit);
  h.biases.assign(classes, 0.0);
  return h;
}

}  // namespace

LayerSpec LayerSpec::conv(std::size_t filters, std::vector<std::size_t> kernel,
                          ActivationKind act, PadMode mode) {
  LayerSpec s;
  s.kind = Kind::kConv;
  s.units = filters;
  s.kernel = std::move(kernel);
  s.activation = act;
  s.mode = mode;
  return s;
}

LayerSpec LayerSpec::gffn(std::size_t nodes, ActivationKind act) {
  LayerSpec s;
  s.kind = Kind::kGffn;
  s.units = nodes;
  s.activation = act;
  return s;
}

LayerSpec LayerSpec::gap() {
  LayerSpec s;
  s.kind = Kind::kGap;
  return s;
}

LayerSpec LayerSpec::dropout(double rate) {
  LayerSpec s;
  s.kind = Kind::kDropout;
  s.rate = rate;
  return s;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec s;
  s.kind = Kind::kFlatten;
  return s;
}

LayerSpec LayerSpec::head(std::size_t classes, ActivationKind act) {
  LayerSpec s;
  s.kind = Kind::kHead;
  s.units = classes;
  s.activation = act;
  return s;
}

ArchSpec parse_arch_spec(const std::string& json_text) {
  using nlohmann::json;
  ArchSpec spec;
  try {
    const json j = json::parse(json_text);
    spec.input_channels = j.at("input_channels").get<std::size_t>();
    spec.input_shape = j.at("input_shape").get<std::vector<std::size_t>>();
    spec.seed = j.value("seed", std::uint64_t{0});
    for (const json& lj : j.at("layers")) {
      LayerSpec ls;
      ls.kind = layer_kind_from_string(lj.at("type").get<std::string>());
      switch (ls.kind) {
        case LayerSpec::Kind::kConv:
          ls.units = lj.at("filters").get<std::size_t>();
          ls.kernel = lj.at("kernel").get<std::vector<std::size_t>>();
          ls.mode = pad_mode_from_string(lj.value("padding", "same"));
          ls.activation =
              activation_from_string(lj.value("activation", "relu"));
          break;
        case LayerSpec::Kind::kGffn:
          ls.units = lj.at("nodes").get<std::size_t>();
          ls.activation =
              activation_from_string(lj.value("activation", "relu"));
          break;
        case LayerSpec::Kind::kDropout:
          ls.rate = lj.at("rate").get<double>();
          break;
        case LayerSpec::Kind::kHead:
          ls.units = lj.at("classes").get<std::size_t>();
          break;
        case LayerSpec::Kind::kGap:
        case LayerSpec::Kind::kFlatten:
          break;
      }
      spec.layers.push_back(std::move(ls));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("architecture spec: ") + e.what());
  }
  return spec;
}

std::string arch_spec_to_json(const ArchSpec& spec) {
  using nlohmann::json;
  json j;
  j["input_channels"] = spec.input_channels;
  j["input_shape"] = spec.input_shape;
  j["seed"] = spec.seed;
  j["layers"] = json::array();
  for (const LayerSpec& ls : spec.layers) {
    json lj;
    lj["type"] = to_string(ls.kind);
    switch (ls.kind) {
      case LayerSpec::Kind::kConv:
        lj["filters"] = ls.units;
        lj["kernel"] = ls.kernel;
        lj["padding"] = to_string(ls.mode);
        lj["activation"] = to_string(ls.activation);
        break;
      case LayerSpec::Kind::kGffn:
        lj["nodes"] = ls.units;
        lj["activation"] = to_string(ls.activation);
        break;
      case LayerSpec::Kind::kDropout:
        lj["rate"] = ls.rate;
        break;
      case LayerSpec::Kind::kHead:
        lj["classes"] = ls.units;
        break;
      default:
        break;
    }
    j["layers"].push_back(std::move(lj));
  }
  return j.dump(2);
}

Model build_backbone(const ArchSpec& spec) {
  Model m;
  m.seed = spec.seed;
  m.input_channels = spec.input_channels;
  try {
    m.input_shape = Shape(spec.input_shape);
  } catch (const DimensionError& e) {
    throw ConfigError(std::string("input shape: ") + e.what());
  }
  if (spec.input_channels == 0) throw ConfigError("input_channels must be >= 1");

  Rng rng(derive_seed(spec.seed, {0x1417}));
  StackSignature sig{spec.input_channels, m.input_shape};
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& ls = spec.layers[i];
    switch (ls.kind) {
      case LayerSpec::Kind::kConv: {
        if (ls.units < 2) {
          throw ConfigError("conv layer needs at least two filters");
        }
        if (ls.kernel.size() != sig.shape.rank()) {
          throw ConfigError("conv kernel rank " +
                            std::to_string(ls.kernel.size()) +
                            " does not match input rank " +
                            std::to_string(sig.shape.rank()));
        }
        Shape ks;
        try {
          ks = Shape(ls.kernel);
        } catch (const DimensionError& e) {
          throw ConfigError(std::string("conv kernel: ") + e.what());
        }
        const double fan_in = static_cast<double>(sig.depth * ks.volume());
        const double stddev = std::sqrt(2.0 / fan_in);
        NodeLayer layer;
        for (std::size_t j = 0; j < ls.units; ++j) {
          std::vector<Tensor> filters;
          for (std::size_t k = 0; k < sig.depth; ++k) {
            Tensor f(ks);
            for (double& v : f.data()) v = stddev * rng.normal();
            filters.push_back(std::move(f));
          }
          layer.nodes.emplace_back(
              GcnnNode(std::move(filters), 0.0, ls.activation, ls.mode));
        }
        m.layers.emplace_back(std::move(layer));
        break;
      }
      case LayerSpec::Kind::kGffn: {
        if (ls.units < 2) throw ConfigError("gffn layer needs at least two nodes");
        const double stddev = std::sqrt(2.0 / static_cast<double>(sig.depth));
        NodeLayer layer;
        for (std::size_t j = 0; j < ls.units; ++j) {
          std::vector<double> w(sig.depth);
          for (double& v : w) v = stddev * rng.normal();
          layer.nodes.emplace_back(GffnNode(std::move(w), 0.0, ls.activation));
        }
        m.layers.emplace_back(std::move(layer));
        break;
      }
      case LayerSpec::Kind::kGap:
        m.layers.emplace_back(GlobalAvgPool{});
        break;
      case LayerSpec::Kind::kDropout:
        m.layers.emplace_back(Dropout{ls.rate});
        break;
      case LayerSpec::Kind::kFlatten:
        m.layers.emplace_back(Flatten{});
        break;
      case LayerSpec::Kind::kHead:
        m.layers.emplace_back(
            make_head(ls.units, sig.depth * sig.shape.volume(), rng));
        break;
    }
    try {
      sig = next_signature(m.layers.back(), sig, i + 1 == spec.layers.size());
    } catch (const DimensionError& e) {
      throw ConfigError(std::string("architecture does not compose: ") +
                        e.what());
    }
  }
  return m;
}

void reset_head(Model& model, std::size_t classes, std::uint64_t seed) {
  if (!model.has_head()) throw ConfigError("model has no dense head");
  const std::size_t inputs = model.head().inputs();
  Rng rng(derive_seed(seed, {0x4ead}));
  model.layers.back() = make_head(classes, inputs, rng);
}

}  // namespace projnet
