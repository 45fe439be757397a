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

#ifndef PROJNET_MODEL_H_
#define PROJNET_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "projnet/nodes.h"
#include "projnet/tensor.h"

namespace projnet {

/// A layer of J >= 2 nodes. With homogeneous inputs every node reads the
/// identical stack; projected layers are marked inhomogeneous because each
/// node effectively consumes its own preprocessed stack.
struct NodeLayer {
  std::vector<Node> nodes;
  bool homogeneous = true;
};

/// Replaces each channel by its mean (a rank-0 tensor).
struct GlobalAvgPool {};

/// Inverted dropout; identity at evaluation time.
struct Dropout {
  double rate = 0.5;
};

/// d channels of shape D -> d * |D| scalar channels.
struct Flatten {};

/// Fully connected classifier over the flattened input stack.
struct DenseHead {
  Tensor weights;  // (classes, inputs)
  std::vector<double> biases;
  ActivationKind activation = ActivationKind::kSoftmax;
  bool weights_trainable = true;
  bool bias_trainable = true;

  std::size_t classes() const { return biases.size(); }
  std::size_t inputs() const { return weights.shape()[1]; }
};

using Layer = std::variant<NodeLayer, GlobalAvgPool, Dropout, Flatten, DenseHead>;

const char* layer_kind_name(const Layer& layer);

/// M(theta) = f_L o ... o f_1 plus the input signature it accepts.
struct Model {
  std::size_t input_channels = 1;
  Shape input_shape;  // shape of each input channel
  std::vector<Layer> layers;
  std::uint64_t seed = 0;

  /// Checks J_i >= 2, softmax placement and that adjacent layers compose.
  /// Throws DimensionError / ConfigError.
  void validate() const;

  bool has_head() const;
  DenseHead& head();
  const DenseHead& head() const;
};

/// Shape flowing out of each layer for a validated model: channel count and
/// per-channel shape. Entry 0 is the model input.
struct StackSignature {
  std::size_t depth = 0;
  Shape shape;
};
std::vector<StackSignature> layer_signatures(const Model& model);

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

enum class ParamClass {
  kWeight,      // GFFN w_k and scale sub-function W_k
  kFilter,      // GCNN filter channel or conv sub-function filter
  kBias,        // node bias
  kGate,        // projection gate vector gamma_j
  kHeadWeight,  // dense head weight matrix
  kHeadBias,    // dense head bias vector
};

const char* to_string(ParamClass c);

/// Reference to the flag that controls a block. Sub-functions store
/// `frozen`, every other owner stores `trainable`.
class TrainableFlag {
 public:
  TrainableFlag(bool* flag, bool inverted) : flag_(flag), inverted_(inverted) {}
  bool get() const { return *flag_ != inverted_; }
  void set(bool trainable) { *flag_ = trainable != inverted_; }

 private:
  bool* flag_;
  bool inverted_;
};

/// One contiguous block of theta. Blocks are enumerated layer by layer,
/// node by node: GFFN [w, b]; GCNN [F_1..F_d, b]; projected [f_1..f_d,
/// gamma, b]; head [W, b]. The order is stable across runs.
struct ParamBlock {
  ParamClass cls;
  std::size_t layer;
  std::size_t node;
  std::size_t channel;  // filter / sub-function index, else 0
  std::span<double> values;
  TrainableFlag trainable;
};

struct ParamInfo {
  ParamClass cls;
  std::size_t layer;
  std::size_t node;
  std::size_t channel;
  std::size_t size;
  bool trainable;
};

std::vector<ParamBlock> param_blocks(Model& model);
std::vector<ParamInfo> param_layout(const Model& model);

/// Index of the first block of every node (head counts as node 0) per layer.
std::vector<std::vector<std::size_t>> node_block_offsets(const Model& model);

std::size_t param_count(const Model& model);
std::vector<double> flatten_params(const Model& model);
double get_param(const Model& model, std::size_t index);
void set_param(Model& model, std::size_t index, double value);

/// Sets every trainable flag in the model to `trainable`.
void set_all_trainable(Model& model, bool trainable);

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

struct ForwardOptions {
  bool training = false;
  /// Dropout masks are derived from this seed, the sample index and the
  /// layer index.
  std::uint64_t dropout_seed = 0;
};

struct NodeTrace {
  Tensor pre;
  Tensor out;
  std::vector<Tensor> zhat;  // projected nodes only
};

/// Values recorded while running one sample forward, consumed by backward.
struct LayerTrace {
  ChannelStack input;
  std::vector<NodeTrace> nodes;           // NodeLayer
  std::vector<std::vector<double>> mask;  // Dropout, per channel
  std::vector<double> head_input;         // DenseHead
  std::vector<double> logits;             // DenseHead
};

struct ForwardTrace {
  std::vector<LayerTrace> layers;
  Tensor output;
};

/// Runs one sample. Returns the flattened output of the last layer, which
/// is a probability vector when the model ends in a softmax head.
Tensor forward_sample(const Model& model, const ChannelStack& x,
                      const ForwardOptions& options,
                      std::size_t sample_index = 0,
                      ForwardTrace* trace = nullptr);

std::vector<Tensor> forward(const Model& model,
                            std::span<const ChannelStack> batch,
                            const ForwardOptions& options = {});

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

/// One entry of an architecture description.
struct LayerSpec {
  enum class Kind { kConv, kGffn, kGap, kDropout, kFlatten, kHead };
  Kind kind = Kind::kConv;
  std::size_t units = 0;  // nodes (conv/gffn) or classes (head)
  std::vector<std::size_t> kernel;  // conv only
  ActivationKind activation = ActivationKind::kRelu;
  PadMode mode = PadMode::kSame;
  double rate = 0.5;  // dropout only

  static LayerSpec conv(std::size_t filters, std::vector<std::size_t> kernel,
                        ActivationKind act = ActivationKind::kRelu,
                        PadMode mode = PadMode::kSame);
  static LayerSpec gffn(std::size_t nodes,
                        ActivationKind act = ActivationKind::kRelu);
  static LayerSpec gap();
  static LayerSpec dropout(double rate);
  static LayerSpec flatten();
  static LayerSpec head(std::size_t classes,
                        ActivationKind act = ActivationKind::kSoftmax);
};

struct ArchSpec {
  std::size_t input_channels = 1;
  std::vector<std::size_t> input_shape;
  std::vector<LayerSpec> layers;
  std::uint64_t seed = 0;
};

/// Parses the JSON architecture format, e.g.
///   {"input_channels": 2, "input_shape": [16, 16], "seed": 1,
///    "layers": [{"type": "conv", "filters": 8, "kernel": [3, 3]},
///               {"type": "gap"}, {"type": "dropout", "rate": 0.5},
///               {"type": "head", "classes": 8}]}
ArchSpec parse_arch_spec(const std::string& json_text);
std::string arch_spec_to_json(const ArchSpec& spec);

/// He-normal conv / GFFN weights, Glorot-uniform head, zero biases. The
/// result depends only on `spec` (including its seed).
Model build_backbone(const ArchSpec& spec);

/// Replaces the head by a freshly initialized one with `classes` outputs.
void reset_head(Model& model, std::size_t classes, std::uint64_t seed);

}  // namespace projnet

#endif  // PROJNET_MODEL_H_
