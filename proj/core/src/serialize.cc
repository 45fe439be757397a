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

#include "projnet/serialize.h"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>

#include "projnet/errors.h"

namespace projnet {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'P', 'N', 'E', 'T'};
constexpr std::size_t kHeaderSize = 16;

template <class T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
}

template <class T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<T>(bytes[offset + i]) << (8 * i);
  }
  return v;
}

json shape_json(const Shape& s) { return s.dims(); }

json node_json(const Node& node) {
  if (const auto* n = std::get_if<GffnNode>(&node)) {
    json j{{"kind", "gffn"},
           {"depth", n->depth()},
           {"activation", to_string(n->activation)},
           {"weights_trainable", n->weights_trainable},
           {"bias_trainable", n->bias_trainable}};
    j["out_shape"] = n->out_shape ? shape_json(*n->out_shape) : json(nullptr);
    return j;
  }
  if (const auto* n = std::get_if<GcnnNode>(&node)) {
    return json{{"kind", "gcnn"},
                {"depth", n->depth()},
                {"filter_shape", shape_json(n->filter_shape())},
                {"padding", to_string(n->mode)},
                {"activation", to_string(n->activation)},
                {"filters_trainable", n->filters_trainable},
                {"bias_trainable", n->bias_trainable}};
  }
  const auto& n = std::get<ProjectedNode>(node);
  json subs = json::array();
  for (const SubFunction& s : n.subs) {
    if (s.kind == SubFunction::Kind::kConv) {
      subs.push_back({{"kind", "conv"},
                      {"shape", shape_json(s.params.shape())},
                      {"padding", to_string(s.mode)},
                      {"frozen", s.frozen}});
    } else {
      subs.push_back({{"kind", "scale"}, {"frozen", s.frozen}});
    }
  }
  return json{{"kind", "projected"},
              {"activation", to_string(n.activation)},
              {"gates_trainable", n.gates_trainable},
              {"bias_trainable", n.bias_trainable},
              {"subs", std::move(subs)}};
}

json layer_json(const Layer& layer) {
  if (const auto* nl = std::get_if<NodeLayer>(&layer)) {
    json nodes = json::array();
    for (const Node& n : nl->nodes) nodes.push_back(node_json(n));
    return json{{"type", "nodes"},
                {"homogeneous", nl->homogeneous},
                {"nodes", std::move(nodes)}};
  }
  if (std::holds_alternative<GlobalAvgPool>(layer)) return json{{"type", "gap"}};
  if (const auto* d = std::get_if<Dropout>(&layer)) {
    return json{{"type", "dropout"}, {"rate", d->rate}};
  }
  if (std::holds_alternative<Flatten>(layer)) return json{{"type", "flatten"}};
  const auto& h = std::get<DenseHead>(layer);
  return json{{"type", "head"},
              {"classes", h.classes()},
              {"inputs", h.inputs()},
              {"activation", to_string(h.activation)},
              {"weights_trainable", h.weights_trainable},
              {"bias_trainable", h.bias_trainable}};
}

Shape shape_from_json(const json& j) {
  return Shape(j.get<std::vector<std::size_t>>());
}

Node node_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  const ActivationKind act =
      activation_from_string(j.at("activation").get<std::string>());
  if (kind == "gffn") {
    std::optional<Shape> out;
    if (!j.at("out_shape").is_null()) out = shape_from_json(j.at("out_shape"));
    GffnNode n(std::vector<double>(j.at("depth").get<std::size_t>()), 0.0, act,
               out);
    n.weights_trainable = j.at("weights_trainable").get<bool>();
    n.bias_trainable = j.at("bias_trainable").get<bool>();
    return n;
  }
  if (kind == "gcnn") {
    const Shape fs = shape_from_json(j.at("filter_shape"));
    std::vector<Tensor> filters(j.at("depth").get<std::size_t>(), Tensor(fs));
    GcnnNode n(std::move(filters), 0.0, act,
               pad_mode_from_string(j.at("padding").get<std::string>()));
    n.filters_trainable = j.at("filters_trainable").get<bool>();
    n.bias_trainable = j.at("bias_trainable").get<bool>();
    return n;
  }
  if (kind == "projected") {
    std::vector<SubFunction> subs;
    std::vector<bool> frozen;
    for (const json& s : j.at("subs")) {
      const std::string sk = s.at("kind").get<std::string>();
      if (sk == "conv") {
        subs.push_back(SubFunction::conv(
            Tensor(shape_from_json(s.at("shape"))),
            pad_mode_from_string(s.at("padding").get<std::string>())));
      } else if (sk == "scale") {
        subs.push_back(SubFunction::scale(0.0));
      } else {
        throw ConfigError("unknown sub-function kind '" + sk + "'");
      }
      frozen.push_back(s.at("frozen").get<bool>());
    }
    ProjectedNode n(std::move(subs), 0.0, act);
    for (std::size_t k = 0; k < frozen.size(); ++k) n.subs[k].frozen = frozen[k];
    n.gates_trainable = j.at("gates_trainable").get<bool>();
    n.bias_trainable = j.at("bias_trainable").get<bool>();
    return n;
  }
  throw ConfigError("unknown node kind '" + kind + "'");
}

Layer layer_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "nodes") {
    NodeLayer nl;
    nl.homogeneous = j.at("homogeneous").get<bool>();
    for (const json& n : j.at("nodes")) nl.nodes.push_back(node_from_json(n));
    return nl;
  }
  if (type == "gap") return GlobalAvgPool{};
  if (type == "dropout") return Dropout{j.at("rate").get<double>()};
  if (type == "flatten") return Flatten{};
  if (type == "head") {
    DenseHead h;
    const auto classes = j.at("classes").get<std::size_t>();
    h.weights = Tensor(Shape{classes, j.at("inputs").get<std::size_t>()});
    h.biases.assign(classes, 0.0);
    h.activation = activation_from_string(j.at("activation").get<std::string>());
    h.weights_trainable = j.at("weights_trainable").get<bool>();
    h.bias_trainable = j.at("bias_trainable").get<bool>();
    return h;
  }
  throw ConfigError("unknown layer type '" + type + "'");
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const Model& model) {
  json meta;
  meta["format"] = "projnet-model";
  meta["dtype"] = "f64";
  meta["seed"] = model.seed;
  meta["input_channels"] = model.input_channels;
  meta["input_shape"] = shape_json(model.input_shape);
  meta["layers"] = json::array();
  for (const Layer& l : model.layers) meta["layers"].push_back(layer_json(l));
  const std::vector<double> theta = flatten_params(model);
  meta["param_count"] = theta.size();
  const std::string text = meta.dump();

  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + text.size() + 8 * theta.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(out, kModelFormatVersion);
  put_le<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (double v : theta) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

Model deserialize_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) {
    throw FormatError("file shorter than the 16-byte header", bytes.size());
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("bad magic, expected \"PNET\"", 0);
  }
  const auto version = get_le<std::uint32_t>(bytes, 4);
  if (version != kModelFormatVersion) {
    throw FormatError("unsupported format version " + std::to_string(version),
                      4);
  }
  const auto meta_len = get_le<std::uint64_t>(bytes, 8);
  if (meta_len > bytes.size() - kHeaderSize) {
    throw FormatError("metadata length " + std::to_string(meta_len) +
                          " runs past end of file",
                      8);
  }
  const std::string_view text(
      reinterpret_cast<const char*>(bytes.data() + kHeaderSize), meta_len);

  Model model;
  std::size_t param_total = 0;
  try {
    const json meta = json::parse(text);
    if (meta.at("format").get<std::string>() != "projnet-model" ||
        meta.at("dtype").get<std::string>() != "f64") {
      throw FormatError("metadata does not describe an f64 projnet model",
                        kHeaderSize);
    }
    model.seed = meta.at("seed").get<std::uint64_t>();
    model.input_channels = meta.at("input_channels").get<std::size_t>();
    model.input_shape = shape_from_json(meta.at("input_shape"));
    for (const json& lj : meta.at("layers")) {
      model.layers.push_back(layer_from_json(lj));
    }
    param_total = meta.at("param_count").get<std::size_t>();
    model.validate();
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("metadata is not valid JSON: ") + e.what(),
                      kHeaderSize + (e.byte > 0 ? e.byte - 1 : 0));
  } catch (const json::exception& e) {
    throw FormatError(std::string("metadata: ") + e.what(), kHeaderSize);
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    throw FormatError(std::string("metadata: ") + e.what(), kHeaderSize);
  }

  if (param_count(model) != param_total) {
    throw FormatError("param_count " + std::to_string(param_total) +
                          " disagrees with the described architecture",
                      kHeaderSize);
  }
  std::size_t offset = kHeaderSize + meta_len;
  const std::size_t payload = bytes.size() - offset;
  if (payload < 8 * param_total) {
    throw FormatError("parameter payload truncated: expected " +
                          std::to_string(8 * param_total) + " bytes, found " +
                          std::to_string(payload),
                      bytes.size());
  }
  if (payload > 8 * param_total) {
    throw FormatError("trailing bytes after parameter payload",
                      offset + 8 * param_total);
  }
  for (ParamBlock& block : param_blocks(model)) {
    for (double& v : block.values) {
      v = std::bit_cast<double>(get_le<std::uint64_t>(bytes, offset));
      offset += 8;
    }
  }
  return model;
}

void save_model(const Model& model, const std::string& path) {
  const std::vector<std::uint8_t> bytes = serialize_model(model);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open '" + tmp + "' for writing");
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
    if (!os) throw Error("write to '" + tmp + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot move '" + tmp + "' to '" + path + "': " + ec.message());
}

Model load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open '" + path + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                        std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace projnet
