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


#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "oracles.h"
#include "projnet/errors.h"
#include "projnet/experiment.h"
#include "projnet/projection.h"
#include "projnet/serialize.h"

namespace projnet {
namespace {

Model small_model(std::uint64_t seed, double dropout = 0.5) {
  ArchSpec spec;
  spec.input_channels = 2;
  spec.input_shape = {6, 6};
  spec.seed = seed;
  spec.layers = {LayerSpec::conv(3, {3, 3}), LayerSpec::conv(4, {2, 2}),
                 LayerSpec::gap(), LayerSpec::dropout(dropout), LayerSpec::head(5)};
  return build_backbone(spec);
}

std::vector<ChannelStack> inputs(std::size_t n, const Shape& shape, std::size_t d,
                                 std::uint64_t seed) {
  Rng rng(seed);
  std::vector<ChannelStack> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(oracle::random_stack(d, shape, rng));
  return out;
}

std::uint64_t bits(double v) {
  std::uint64_t b;
  std::memcpy(&b, &v, sizeof b);
  return b;
}

TEST(BuildBackbone, DefaultArchitecture) {
  const Model m = build_backbone(default_arch(1));
  ASSERT_EQ(m.layers.size(), 5u);
  EXPECT_EQ(std::get<NodeLayer>(m.layers[0]).nodes.size(), 8u);
  EXPECT_EQ(std::get<NodeLayer>(m.layers[1]).nodes.size(), 16u);
  EXPECT_TRUE(std::holds_alternative<GlobalAvgPool>(m.layers[2]));
  EXPECT_EQ(std::get<Dropout>(m.layers[3]).rate, 0.5);
  EXPECT_EQ(m.head().classes(), 8u);
  EXPECT_EQ(param_count(m), 8u * (2 * 9 + 1) + 16u * (8 * 9 + 1) + 8u * 16 + 8);
}

TEST(BuildBackbone, Deterministic) {
  EXPECT_EQ(flatten_params(small_model(4)), flatten_params(small_model(4)));
  EXPECT_NE(flatten_params(small_model(4)), flatten_params(small_model(5)));
}

TEST(BuildBackbone, InitializationScheme) {
  const Model m = build_backbone(default_arch(2));
  const auto& conv = std::get<NodeLayer>(m.layers[1]);
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (const Node& node : conv.nodes) {
    const auto& g = std::get<GcnnNode>(node);
    EXPECT_EQ(g.bias, 0.0);
    for (const Tensor& f : g.filters) {
      for (double v : f.data()) {
        sum += v;
        sq += v * v;
        ++n;
      }
    }
  }
  const double var = sq / n - (sum / n) * (sum / n);
  EXPECT_NEAR(var, 2.0 / (8 * 9), 0.25 * 2.0 / (8 * 9));
  const double limit = std::sqrt(6.0 / (16 + 8));
  for (double v : m.head().weights.data()) EXPECT_LE(std::abs(v), limit);
  for (double v : m.head().biases) EXPECT_EQ(v, 0.0);
}

TEST(BuildBackbone, Rejections) {
  ArchSpec spec;
  spec.input_channels = 1;
  spec.input_shape = {4, 4};
  spec.layers = {LayerSpec::conv(1, {3, 3}), LayerSpec::gap(), LayerSpec::head(2)};
  EXPECT_THROW(build_backbone(spec), ConfigError);
  spec.layers = {LayerSpec::conv(2, {3, 3}, ActivationKind::kSoftmax)};
  EXPECT_THROW(build_backbone(spec), ConfigError);
  spec.layers = {LayerSpec::conv(2, {3}), LayerSpec::head(2)};
  EXPECT_THROW(build_backbone(spec), Error);
  spec.layers = {LayerSpec::head(2), LayerSpec::gap()};
  EXPECT_THROW(build_backbone(spec), ConfigError);
  spec.layers = {LayerSpec::dropout(1.0)};
  EXPECT_THROW(build_backbone(spec), ConfigError);
}

TEST(ArchSpec, JsonRoundTrip) {
  const ArchSpec spec = parse_arch_spec(R"({"input_channels": 2, "input_shape": [16, 16],
      "seed": 1, "layers": [{"type": "conv", "filters": 8, "kernel": [3, 3]},
      {"type": "gap"}, {"type": "dropout", "rate": 0.25},
      {"type": "head", "classes": 8}]})");
  EXPECT_EQ(spec.layers.size(), 4u);
  EXPECT_EQ(spec.layers[2].rate, 0.25);
  const ArchSpec again = parse_arch_spec(arch_spec_to_json(spec));
  EXPECT_EQ(flatten_params(build_backbone(again)), flatten_params(build_backbone(spec)));
  EXPECT_THROW(parse_arch_spec("{"), ConfigError);
  EXPECT_THROW(parse_arch_spec(R"({"layers": [{"type": "lstm"}]})"), ConfigError);
}

TEST(Forward, SoftmaxRowsSumToOne) {
  const Model m = small_model(3);
  for (const Tensor& p : forward(m, inputs(20, Shape{6, 6}, 2, 1))) {
    double total = 0.0;
    for (double v : p.data()) {
      EXPECT_GE(v, 0.0);
      total += v;
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(Forward, ZeroDropoutMatchesEval) {
  const Model m = small_model(3, 0.0);
  const auto xs = inputs(5, Shape{6, 6}, 2, 2);
  const ForwardOptions train{true, 99};
  for (std::size_t i = 0; i < xs.size(); ++i) {
    EXPECT_EQ(forward_sample(m, xs[i], train, i), forward_sample(m, xs[i], {}, i));
  }
}

TEST(Forward, DropoutSeededAndActiveOnlyInTraining) {
  const Model m = small_model(3, 0.5);
  const auto xs = inputs(1, Shape{6, 6}, 2, 2);
  const ForwardOptions a{true, 1}, b{true, 2};
  EXPECT_EQ(forward_sample(m, xs[0], a), forward_sample(m, xs[0], a));
  EXPECT_NE(forward_sample(m, xs[0], a), forward_sample(m, xs[0], b));
  EXPECT_EQ(forward_sample(m, xs[0], {}), forward_sample(m, xs[0], {false, 7}));
}

TEST(Forward, HeadOnlyIsLogisticRegression) {
  Model m;
  m.input_channels = 3;
  m.input_shape = Shape{};
  DenseHead h;
  h.weights = Tensor(Shape{2, 3}, {1, 2, 3, -1, 0, 1});
  h.biases = {0.5, -0.5};
  m.layers = {h};
  const Tensor p = forward_sample(
      m, ChannelStack({Tensor::scalar(1), Tensor::scalar(0), Tensor::scalar(-1)}), {});
  const double l0 = 1 - 3 + 0.5, l1 = -1 - 1 - 0.5;
  EXPECT_NEAR(p[0], std::exp(l0) / (std::exp(l0) + std::exp(l1)), 1e-15);
}

TEST(Forward, GlobalAveragePoolOfConstant) {
  Model m;
  m.input_channels = 2;
  m.input_shape = Shape{3, 3};
  m.layers = {GlobalAvgPool{}};
  const Tensor out = forward_sample(
      m, ChannelStack({Tensor(Shape{3, 3}, 0.7), Tensor(Shape{3, 3}, -2.0)}), {});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_NEAR(out[0], 0.7, 1e-15);
  EXPECT_EQ(out[1], -2.0);
}

TEST(Forward, ShapeMismatch) {
  const Model m = small_model(1);
  EXPECT_THROW(forward_sample(m, inputs(1, Shape{5, 6}, 2, 1)[0], {}), DimensionError);
  EXPECT_THROW(forward_sample(m, inputs(1, Shape{6, 6}, 3, 1)[0], {}), DimensionError);
}

TEST(Theta, StableEnumeration) {
  Model m = small_model(6);
  const std::vector<double> flat = flatten_params(m);
  ASSERT_EQ(flat.size(), param_count(m));
  for (std::size_t i = 0; i < flat.size(); ++i) EXPECT_EQ(get_param(m, i), flat[i]);
  set_param(m, 7, 42.0);
  EXPECT_EQ(flatten_params(m)[7], 42.0);
  EXPECT_THROW(get_param(m, flat.size()), DimensionError);
  std::size_t total = 0;
  for (const ParamInfo& info : param_layout(m)) total += info.size;
  EXPECT_EQ(total, flat.size());
}

TEST(Serialize, RoundTripIsBitExact) {
  Model m = project_model(small_model(7));
  Rng rng(1);
  for (ParamBlock& b : param_blocks(m)) {
    for (double& v : b.values) v = rng.normal() * std::pow(10.0, rng.uniform(-300, 300));
  }
  set_param(m, 0, -0.0);
  set_param(m, 1, 5e-324);
  auto blocks = param_blocks(m);
  blocks[2].trainable.set(false);
  blocks[blocks.size() - 1].trainable.set(false);

  const Model back = deserialize_model(serialize_model(m));
  const auto a = flatten_params(m), b = flatten_params(back);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(bits(a[i]), bits(b[i])) << i;
  const auto la = param_layout(m), lb = param_layout(back);
  ASSERT_EQ(la.size(), lb.size());
  for (std::size_t i = 0; i < la.size(); ++i) {
    EXPECT_EQ(la[i].trainable, lb[i].trainable);
    EXPECT_EQ(la[i].cls, lb[i].cls);
  }
  EXPECT_EQ(back.seed, m.seed);
  EXPECT_EQ(serialize_model(back), serialize_model(m));
}

TEST(Serialize, ForwardIdenticalAfterFileRoundTrip) {
  const Model m = small_model(8);
  const auto path = std::filesystem::temp_directory_path() / "projnet_model_test.pnet";
  save_model(m, path.string());
  const Model back = load_model(path.string());
  for (const ChannelStack& x : inputs(8, Shape{6, 6}, 2, 3)) {
    EXPECT_EQ(forward_sample(m, x, {}), forward_sample(back, x, {}));
  }
  std::filesystem::remove(path);
}

TEST(Serialize, HeaderLayout) {
  const auto bytes = serialize_model(small_model(1));
  ASSERT_GT(bytes.size(), 16u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "PNET");
  EXPECT_EQ(bytes[4], kModelFormatVersion);
  EXPECT_EQ(bytes[5] | bytes[6] | bytes[7], 0);
  std::uint64_t len = 0;
  for (int i = 7; i >= 0; --i) len = (len << 8) | bytes[8 + i];
  EXPECT_EQ(bytes[16], '{');
  EXPECT_EQ(bytes.size(), 16 + len + 8 * param_count(small_model(1)));
}

std::uint64_t format_offset(const std::vector<std::uint8_t>& bytes) {
  try {
    (void)deserialize_model(bytes);
  } catch (const FormatError& e) {
    return e.offset();
  }
  ADD_FAILURE() << "no FormatError";
  return ~0ull;
}

TEST(Serialize, CorruptionIsRejectedWithOffset) {
  const auto good = serialize_model(small_model(2));
  auto bad = good;
  bad[0] = 'X';
  EXPECT_EQ(format_offset(bad), 0u);
  bad = good;
  bad[4] = 9;
  EXPECT_EQ(format_offset(bad), 4u);
  bad = good;
  bad[15] = 0x7f;
  EXPECT_EQ(format_offset(bad), 8u);
  bad = good;
  bad.resize(good.size() - 3);
  EXPECT_EQ(format_offset(bad), bad.size());
  bad = good;
  bad.push_back(0);
  EXPECT_EQ(format_offset(bad), good.size());
  bad = good;
  bad[16] = '[';
  EXPECT_GE(format_offset(bad), 16u);
  EXPECT_EQ(format_offset(std::vector<std::uint8_t>(good.begin(), good.begin() + 10)), 10u);
}

TEST(Serialize, EveryTruncationFails) {
  const auto good = serialize_model(small_model(3));
  for (std::size_t n = 0; n < good.size(); n += 7) {
    const std::vector<std::uint8_t> cut(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(n));
    EXPECT_THROW((void)deserialize_model(cut), FormatError) << n;
  }
}

TEST(Serialize, FailedLoadLeavesTargetUntouched) {
  const auto path = std::filesystem::temp_directory_path() / "projnet_corrupt.pnet";
  {
    std::ofstream os(path, std::ios::binary);
    os << "PNET garbage";
  }
  Model keep = small_model(4);
  const auto before = flatten_params(keep);
  EXPECT_THROW(keep = load_model(path.string()), FormatError);
  EXPECT_EQ(flatten_params(keep), before);
  std::filesystem::remove(path);
  EXPECT_THROW(load_model(path.string()), Error);
}

}  // namespace
}  // namespace projnet
