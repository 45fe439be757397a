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
#include <vector>

#include "oracles.h"
#include "projnet/errors.h"
#include "projnet/tensor.h"

namespace projnet {
namespace {

TEST(Shape, VolumeAndRank) {
  EXPECT_EQ(Shape{}.volume(), 1u);
  EXPECT_EQ(Shape{}.rank(), 0u);
  EXPECT_EQ((Shape{2, 3, 4}).volume(), 24u);
  EXPECT_TRUE(Shape::ones(3).all_ones());
  EXPECT_THROW(Shape({2, 0}), DimensionError);
}

TEST(Tensor, DataLengthMatchesShape) {
  EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  Tensor t(Shape{2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.at({1, 2}), 1.5);
}

TEST(TensorDot, ScalarChannelsReduceToDotProduct) {
  ChannelStack z({Tensor::scalar(1), Tensor::scalar(2), Tensor::scalar(3)});
  const std::vector<double> w{4, 5, 6};
  EXPECT_EQ(tensor_dot(z, w).item(), 32.0);
}

TEST(TensorDot, SelectorAndMixedWeights) {
  ChannelStack z({Tensor::vector({1, 2}), Tensor::vector({3, 4})});
  const std::vector<double> pick{1, 0};
  const std::vector<double> mix{2, -1};
  EXPECT_EQ(tensor_dot(z, pick), Tensor::vector({1, 2}));
  EXPECT_EQ(tensor_dot(z, mix), Tensor::vector({-1, 0}));
}

TEST(TensorDot, LengthMismatch) {
  ChannelStack z({Tensor::vector({1, 2}), Tensor::vector({3, 4})});
  const std::vector<double> w{1};
  EXPECT_THROW(tensor_dot(z, w), DimensionError);
}

TEST(TensorDot, LinearInWeights) {
  Rng rng(11);
  double worst = 0.0;
  for (int it = 0; it < 100; ++it) {
    const std::size_t d = 1 + rng.below(6);
    const ChannelStack z =
        oracle::random_stack(d, oracle::random_shape(rng.below(4), 1, 4, rng), rng);
    std::vector<double> w1(d), w2(d), mix(d);
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    for (std::size_t k = 0; k < d; ++k) {
      w1[k] = rng.uniform(-1, 1);
      w2[k] = rng.uniform(-1, 1);
      mix[k] = a * w1[k] + b * w2[k];
    }
    const Tensor lhs = tensor_dot(z, mix);
    const Tensor rhs = a * tensor_dot(z, w1) + b * tensor_dot(z, w2);
    worst = std::max(worst, max_abs_diff(lhs, rhs));
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(Convolve, ValidSlidingWindow) {
  EXPECT_EQ(convolve(Tensor::vector({1, 2, 3}), Tensor::vector({1, 1}), PadMode::kValid),
            Tensor::vector({3, 5}));
}

TEST(Convolve, SizeOneKernelIsScaling) {
  const Tensor z(Shape{2, 2}, {1, 2, 3, 4});
  const Tensor f(Shape{1, 1}, {2.5});
  EXPECT_EQ(convolve(z, f, PadMode::kSame), Tensor(Shape{2, 2}, {2.5, 5, 7.5, 10}));
  EXPECT_EQ(convolve(z, Tensor(Shape{1, 1}, {1.0}), PadMode::kValid), z);
  EXPECT_EQ(convolve(Tensor::scalar(3), Tensor::scalar(-2), PadMode::kSame).item(), -6.0);
}

TEST(Convolve, SameModePadsFloorBeforeRestAfter) {
  // Kernel of extent 2: no padding before, one zero after.
  EXPECT_EQ(convolve(Tensor::vector({1, 2, 3}), Tensor::vector({1, 10}), PadMode::kSame),
            Tensor::vector({21, 32, 3}));
  // Extent 3: one zero on each side.
  EXPECT_EQ(convolve(Tensor::vector({1, 2, 3}), Tensor::vector({1, 0, 0}), PadMode::kSame),
            Tensor::vector({0, 1, 2}));
}

TEST(Convolve, Errors) {
  EXPECT_THROW(convolve(Tensor::vector({1, 2}), Tensor(Shape{1, 1}), PadMode::kSame),
               DimensionError);
  EXPECT_THROW(convolve(Tensor::vector({1, 2}), Tensor::vector({1, 1, 1}), PadMode::kValid),
               DimensionError);
}

TEST(Convolve, MatchesBruteForceAcrossRanks) {
  Rng rng(3);
  for (int it = 0; it < 300; ++it) {
    const std::size_t rank = 1 + rng.below(3);
    const Shape zs = oracle::random_shape(rank, 1, rank == 2 ? 12 : 6, rng);
    std::vector<std::size_t> fd(rank);
    for (std::size_t a = 0; a < rank; ++a) fd[a] = 1 + rng.below(std::min<std::size_t>(zs[a], 4));
    const PadMode mode = rng.bernoulli(0.5) ? PadMode::kSame : PadMode::kValid;
    const Tensor z = oracle::random_tensor(zs, rng);
    const Tensor f = oracle::random_tensor(Shape(fd), rng);
    const Tensor got = convolve(z, f, mode);
    const Tensor want = oracle::convolve(z, f, mode);
    ASSERT_EQ(got.shape(), want.shape());
    EXPECT_LE(max_abs_diff(got, want), 1e-12) << zs.to_string() << " * "
                                              << Shape(fd).to_string();
  }
}

TEST(Convolve, LinearAndCommutesWithScalars) {
  Rng rng(5);
  double worst = 0.0;
  for (int it = 0; it < 100; ++it) {
    const Shape zs = oracle::random_shape(2, 3, 8, rng);
    const Tensor z = oracle::random_tensor(zs, rng);
    const Tensor z2 = oracle::random_tensor(zs, rng);
    const Tensor f = oracle::random_tensor(Shape{3, 3}, rng);
    const Tensor f2 = oracle::random_tensor(Shape{3, 3}, rng);
    const double c = rng.uniform(-3, 3);
    const Tensor base = convolve(z, f, PadMode::kSame);
    worst = std::max(worst, max_abs_diff(convolve(c * z, f, PadMode::kSame), c * base));
    worst = std::max(worst, max_abs_diff(convolve(z, c * f, PadMode::kSame), c * base));
    worst = std::max(worst, max_abs_diff(convolve(z + z2, f, PadMode::kSame),
                                         base + convolve(z2, f, PadMode::kSame)));
    worst = std::max(worst, max_abs_diff(convolve(z, f + f2, PadMode::kSame),
                                         base + convolve(z, f2, PadMode::kSame)));
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(Convolve, InputAndKernelGradientsAreAdjoint) {
  // <conv(Z, F), G> is bilinear: its derivative in Z is input_grad(G, F) and
  // in F is kernel_grad(Z, G). Check both by brute-force differentiation of
  // the oracle's linear map.
  Rng rng(9);
  for (int it = 0; it < 60; ++it) {
    const std::size_t rank = 1 + rng.below(2);
    const Shape zs = oracle::random_shape(rank, 2, 7, rng);
    std::vector<std::size_t> fd(rank);
    for (std::size_t a = 0; a < rank; ++a) fd[a] = 1 + rng.below(std::min<std::size_t>(zs[a], 3));
    const PadMode mode = rng.bernoulli(0.5) ? PadMode::kSame : PadMode::kValid;
    const Tensor z = oracle::random_tensor(zs, rng);
    const Tensor f = oracle::random_tensor(Shape(fd), rng);
    const Tensor g = oracle::random_tensor(conv_output_shape(zs, Shape(fd), mode), rng);

    Tensor gz(zs);
    convolve_input_grad(g, f, mode, gz);
    for (std::size_t i = 0; i < z.size(); ++i) {
      Tensor e(zs);
      e[i] = 1.0;
      EXPECT_NEAR(gz[i], inner_product(oracle::convolve(e, f, mode), g), 1e-12);
    }
    Tensor gf{Shape(fd)};
    convolve_kernel_grad(z, g, mode, gf);
    for (std::size_t t = 0; t < f.size(); ++t) {
      Tensor e{Shape(fd)};
      e[t] = 1.0;
      EXPECT_NEAR(gf[t], inner_product(oracle::convolve(z, e, mode), g), 1e-12);
    }
  }
}

TEST(Convolve, AccumulateAddsScaledResult) {
  const Tensor z(Shape{3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  const Tensor f(Shape{2, 2}, {1, 0, 0, 1});
  Tensor out(Shape{2, 2}, 1.0);
  convolve_accumulate(z, f, PadMode::kValid, 2.0, out);
  EXPECT_EQ(out, Tensor(Shape{2, 2}, {13, 17, 25, 29}));
  Tensor wrong(Shape{3, 3});
  EXPECT_THROW(convolve_accumulate(z, f, PadMode::kValid, 1.0, wrong), DimensionError);
}

TEST(BroadcastBias, ConstantFill) {
  EXPECT_EQ(broadcast_bias(0.0, Shape{3, 3}), Tensor(Shape{3, 3}));
  EXPECT_EQ(broadcast_bias(2.5, Shape{}).item(), 2.5);
  EXPECT_EQ(broadcast_bias(-1.0, Shape{2, 2}), Tensor(Shape{2, 2}, {-1, -1, -1, -1}));
}

TEST(Activation, Definitions) {
  EXPECT_EQ(apply_activation(Tensor::vector({-1, 0, 2}), ActivationKind::kRelu),
            Tensor::vector({0, 0, 2}));
  const Tensor x = Tensor::vector({-3.5, 0.25, 7});
  EXPECT_EQ(apply_activation(x, ActivationKind::kIdentity), x);
  EXPECT_EQ(apply_activation(Tensor::vector({0}), ActivationKind::kSigmoid),
            Tensor::vector({0.5}));
  const Tensor s = apply_activation(Tensor::vector({1, 2, 3, 1000}), ActivationKind::kSoftmax);
  double total = 0.0;
  for (double v : s.data()) total += v;
  EXPECT_NEAR(total, 1.0, 1e-9);
  EXPECT_TRUE(s.all_finite());
}

TEST(Activation, NamesRoundTrip) {
  for (auto k : {ActivationKind::kIdentity, ActivationKind::kRelu,
                 ActivationKind::kSigmoid, ActivationKind::kSoftmax}) {
    EXPECT_EQ(activation_from_string(to_string(k)), k);
  }
  EXPECT_EQ(pad_mode_from_string("valid"), PadMode::kValid);
  EXPECT_EQ(pad_mode_from_string("same"), PadMode::kSame);
  EXPECT_THROW(activation_from_string("tanh"), ConfigError);
}

}  // namespace
}  // namespace projnet
