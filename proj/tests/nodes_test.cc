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

#include <vector>

#include "oracles.h"
#include "projnet/errors.h"
#include "projnet/nodes.h"

namespace projnet {
namespace {

constexpr auto kId = ActivationKind::kIdentity;

TEST(GffnNode, Examples) {
  EXPECT_EQ(gffn_forward(GffnNode({1, 1}, 0, kId),
                         ChannelStack({Tensor::scalar(1), Tensor::scalar(2)}))
                .item(),
            3.0);
  EXPECT_EQ(gffn_forward(GffnNode({2, -1}, 1, kId),
                         ChannelStack({Tensor::vector({1, 2}), Tensor::vector({3, 4})})),
            Tensor::vector({0, 1}));
  Rng rng(1);
  const ChannelStack z = oracle::random_stack(3, Shape{4, 4}, rng);
  EXPECT_EQ(gffn_forward(GffnNode({0, 0, 0}, 0, ActivationKind::kRelu), z),
            Tensor(Shape{4, 4}));
}

TEST(GffnNode, Rejections) {
  EXPECT_THROW(GffnNode({}, 0), DimensionError);
  const ChannelStack z({Tensor::vector({1, 2})});
  EXPECT_THROW(gffn_forward(GffnNode({1, 2}, 0), z), DimensionError);
  EXPECT_THROW(gffn_forward(GffnNode({1}, 0, kId, Shape{3}), z), DimensionError);
}

TEST(GcnnNode, Examples) {
  const GcnnNode n({Tensor::vector({1, 1})}, 0, kId, PadMode::kValid);
  EXPECT_EQ(gcnn_forward(n, ChannelStack({Tensor::vector({1, 2, 3})})),
            Tensor::vector({3, 5}));
  Rng rng(2);
  const ChannelStack z = oracle::random_stack(2, Shape{5, 5}, rng);
  const GcnnNode zero({Tensor(Shape{3, 3}), Tensor(Shape{3, 3})}, 4.0, kId);
  EXPECT_EQ(gcnn_forward(zero, z), Tensor(Shape{5, 5}, 4.0));
  EXPECT_THROW(GcnnNode({}, 0), DimensionError);
  EXPECT_THROW(GcnnNode({Tensor(Shape{3}), Tensor(Shape{2})}, 0), DimensionError);
}

TEST(GcnnNode, MatchesOracleSum) {
  Rng rng(4);
  for (int it = 0; it < 100; ++it) {
    const std::size_t d = 1 + rng.below(4);
    const Shape zs = oracle::random_shape(2, 3, 7, rng);
    const PadMode mode = rng.bernoulli(0.5) ? PadMode::kSame : PadMode::kValid;
    std::vector<Tensor> f;
    for (std::size_t k = 0; k < d; ++k) f.push_back(oracle::random_tensor(Shape{2, 3}, rng));
    const double b = rng.uniform(-1, 1);
    const ChannelStack z = oracle::random_stack(d, zs, rng);
    Tensor want = oracle::convolve(z[0], f[0], mode);
    for (std::size_t k = 1; k < d; ++k) want += oracle::convolve(z[k], f[k], mode);
    for (double& v : want.data()) v += b;
    EXPECT_LE(max_abs_diff(gcnn_pre_activation(GcnnNode(f, b, kId, mode), z), want), 1e-12);
  }
}

TEST(ProjectedNode, Examples) {
  const SubFunction c = SubFunction::conv(Tensor::vector({1, 1}), PadMode::kValid);
  ProjectedNode n({c, c}, 0.0, kId);
  EXPECT_EQ(n.gates, (std::vector<double>{1, 1}));
  n.gates = {1, 2};
  const ChannelStack z({Tensor::vector({1, 2, 3}), Tensor::vector({0, 1, 0})});
  EXPECT_EQ(projected_forward(n, z), Tensor::vector({5, 7}));
  n.gates = {0, 0};
  n.activation = ActivationKind::kRelu;
  EXPECT_EQ(projected_forward(n, z), Tensor::vector({0, 0}));
}

TEST(ProjectedNode, UnitGatesReproduceSource) {
  Rng rng(6);
  for (int it = 0; it < 50; ++it) {
    const std::size_t d = 1 + rng.below(5);
    std::vector<Tensor> f;
    for (std::size_t k = 0; k < d; ++k) f.push_back(oracle::random_tensor(Shape{3, 3}, rng, -1, 1));
    const GcnnNode g(f, rng.uniform(-1, 1), ActivationKind::kRelu);
    std::vector<SubFunction> subs;
    for (const Tensor& t : f) subs.push_back(SubFunction::conv(t, PadMode::kSame));
    const ProjectedNode p(subs, g.bias, g.activation);
    const ChannelStack z = oracle::random_stack(d, Shape{6, 5}, rng);
    EXPECT_EQ(projected_forward(p, z), gcnn_forward(g, z));
  }
}

TEST(ProjectedNode, PreprocessExposesZhat) {
  const ProjectedNode n({SubFunction::scale(3.0), SubFunction::scale(-1.0)}, 0.5, kId);
  const ChannelStack z({Tensor::vector({1, 2}), Tensor::vector({4, 8})});
  const ChannelStack zhat = preprocess(n, z);
  EXPECT_EQ(zhat[0], Tensor::vector({3, 6}));
  EXPECT_EQ(zhat[1], Tensor::vector({-4, -8}));
  EXPECT_EQ(projected_forward(n, z), Tensor::vector({-0.5, -1.5}));
}

TEST(SubFunction, Examples) {
  EXPECT_EQ(eval_subfunction(SubFunction::scale(3.0), Tensor::vector({1, 2})),
            Tensor::vector({3, 6}));
  EXPECT_EQ(eval_subfunction(SubFunction::conv(Tensor::vector({1, 0}), PadMode::kValid),
                             Tensor::vector({4, 5, 6})),
            Tensor::vector({4, 5}));
  const Tensor z(Shape{2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(eval_subfunction(SubFunction::conv(Tensor(Shape{1, 1}, {1.0}), PadMode::kSame), z), z);
  EXPECT_TRUE(SubFunction::scale(1.0).frozen);
}

TEST(Bijection, GcnnToGffnExample) {
  const GcnnNode g({Tensor::scalar(2), Tensor::scalar(-3)}, 1.0, kId);
  const GffnNode f = gcnn_to_gffn(g);
  EXPECT_EQ(f.weights, (std::vector<double>{2, -3}));
  EXPECT_EQ(f.bias, 1.0);
  EXPECT_EQ(f.activation, kId);
  EXPECT_THROW(gcnn_to_gffn(GcnnNode({Tensor(Shape{3, 3})}, 0)), NotReducibleError);
}

TEST(Bijection, GffnToGcnnExample) {
  const GcnnNode g = gffn_to_gcnn(GffnNode({2, -3}, 0.5, kId), 2);
  ASSERT_EQ(g.depth(), 2u);
  EXPECT_EQ(g.filters[0], Tensor(Shape{1, 1}, {2.0}));
  EXPECT_EQ(g.filters[1], Tensor(Shape{1, 1}, {-3.0}));
  EXPECT_EQ(g.bias, 0.5);
}

TEST(Bijection, RoundTripAndForwardAgreement) {
  Rng rng(8);
  for (int it = 0; it < 200; ++it) {
    const std::size_t d = 1 + rng.below(8);
    const std::size_t rank = rng.below(4);
    std::vector<double> w(d);
    for (double& v : w) v = rng.uniform(-1, 1);
    const GffnNode f(w, rng.uniform(-1, 1), ActivationKind::kSigmoid);
    const GcnnNode g = gffn_to_gcnn(f, rank);
    const GffnNode back = gcnn_to_gffn(g);
    EXPECT_EQ(back.weights, f.weights);
    EXPECT_EQ(back.bias, f.bias);
    const ChannelStack z = oracle::random_stack(d, oracle::random_shape(rank, 1, 4, rng), rng);
    EXPECT_LE(max_abs_diff(gcnn_forward(g, z), gffn_forward(back, z)), 1e-12);
  }
}

TEST(NodeQueries, ShapesAndCounts) {
  const Node g = GcnnNode({Tensor(Shape{3, 3}), Tensor(Shape{3, 3})}, 0, kId, PadMode::kValid);
  EXPECT_EQ(node_output_shape(g, Shape{8, 8}), (Shape{6, 6}));
  EXPECT_EQ(node_param_count(g), 19u);
  EXPECT_FALSE(is_gffn_form(g));
  const Node f = GffnNode({1, 2, 3}, 0);
  EXPECT_EQ(node_param_count(f), 4u);
  EXPECT_TRUE(is_gffn_form(f));
  EXPECT_EQ(node_depth(f), 3u);
  EXPECT_THROW(node_output_shape(g, Shape{2, 2}), DimensionError);
}

}  // namespace
}  // namespace projnet
