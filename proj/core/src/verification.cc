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

#include "projnet/verification.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>

#include "projnet/autodiff.h"
#include "projnet/errors.h"
#include "projnet/model.h"
#include "projnet/nodes.h"
#include "projnet/projection.h"
#include "projnet/random.h"
#include "projnet/tensor.h"

namespace projnet {

namespace {

constexpr char kDistribution[] =
    "weights~U(-1,1), inputs~U(-2,2), d in [1,8], ranks {0,1,2,3}, "
    "extents {1..5} (rank 3: {1..3}), kernel extents {1..3}";

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string num(std::size_t v) { return std::to_string(v); }
std::string flag(bool v) { return v ? "true" : "false"; }

void require_instances(std::size_t n) {
  if (n == 0) throw ConfigError("a check needs at least one instance");
}

Tensor random_tensor(Rng& rng, const Shape& shape, double lo, double hi) {
  Tensor t(shape);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

Shape random_shape(Rng& rng, std::size_t rank) {
  const std::size_t max_extent = rank >= 3 ? 3 : 5;
  std::vector<std::size_t> dims(rank);
  for (auto& e : dims) e = 1 + rng.below(max_extent);
  return Shape(std::move(dims));
}

ChannelStack random_stack(Rng& rng, std::size_t d, const Shape& shape) {
  ChannelStack z;
  for (std::size_t k = 0; k < d; ++k) {
    z.channels.push_back(random_tensor(rng, shape, -2.0, 2.0));
  }
  return z;
}

ActivationKind random_activation(Rng& rng) {
  constexpr ActivationKind kinds[] = {ActivationKind::kIdentity,
                                      ActivationKind::kRelu,
                                      ActivationKind::kSigmoid};
  return kinds[rng.below(3)];
}

PadMode random_mode(Rng& rng) {
  return rng.bernoulli(0.5) ? PadMode::kSame : PadMode::kValid;
}

/// Kernel no larger than the input on any axis and at most 3 per axis.
Shape random_kernel_shape(Rng& rng, const Shape& input) {
  std::vector<std::size_t> dims(input.rank());
  for (std::size_t a = 0; a < dims.size(); ++a) {
    dims[a] = 1 + rng.below(std::min<std::size_t>(input[a], 3));
  }
  return Shape(std::move(dims));
}

GcnnNode random_gcnn(Rng& rng, std::size_t d, const Shape& input,
                     bool unit_kernel) {
  const Shape ks =
      unit_kernel ? Shape::ones(input.rank()) : random_kernel_shape(rng, input);
  std::vector<Tensor> filters;
  for (std::size_t k = 0; k < d; ++k) {
    filters.push_back(random_tensor(rng, ks, -1.0, 1.0));
  }
  return GcnnNode(std::move(filters), rng.uniform(-1.0, 1.0),
                  random_activation(rng), random_mode(rng));
}

ChannelStack zeros_like(const ChannelStack& z) {
  ChannelStack out;
  for (const Tensor& c : z.channels) out.channels.emplace_back(c.shape());
  return out;
}

/// |f(Z) - (sum_k [f(Z masked to channel k) - f(0)] + f(0))|_max.
/// f(0) is the bias term for any function of the separable form.
double zero_mask_deviation(
    const std::function<Tensor(const ChannelStack&)>& f, const ChannelStack& z) {
  const Tensor full = f(z);
  const ChannelStack zero = zeros_like(z);
  const Tensor base = f(zero);
  Tensor sum(full.shape());
  for (std::size_t k = 0; k < z.depth(); ++k) {
    ChannelStack masked = zero;
    masked.channels[k] = z.channels[k];
    Tensor term = f(masked);
    term += -1.0 * base;
    sum += term;
  }
  sum += base;
  return max_abs_diff(full, sum);
}

bool same_parameters(const GcnnNode& a, const GcnnNode& b) {
  if (a.depth() != b.depth() || a.bias != b.bias || a.activation != b.activation) {
    return false;
  }
  for (std::size_t k = 0; k < a.depth(); ++k) {
    if (!(a.filters[k] == b.filters[k])) return false;
  }
  return true;
}

/// A size-2 kernel separates inputs that agree pointwise somewhere. Every
/// GFFN output entry is a function of the input values at that position
/// alone, so two positions with equal inputs but unequal targets rule out
/// every GFFN node, whatever its weights, bias and activation.
struct Witness {
  double gap = 0.0;          // |target difference| at a shared input value
  double ls_residual = 0.0;  // best affine pointwise fit, sum of squares
  bool sums_equal = false;
};

Witness strictness_witness() {
  const GcnnNode node({Tensor::vector({1.0, -1.0})}, 0.0,
                      ActivationKind::kIdentity, PadMode::kSame);
  const ChannelStack za{{Tensor::vector({1.0, 0.0})}};
  const ChannelStack zb{{Tensor::vector({0.0, 1.0})}};
  const Tensor ya = gcnn_forward(node, za);
  const Tensor yb = gcnn_forward(node, zb);

  Witness w;
  double sa = 0.0, sb = 0.0;
  for (double v : za[0].data()) sa += v;
  for (double v : zb[0].data()) sb += v;
  w.sums_equal = sa == sb;

  std::vector<std::pair<double, double>> pairs;  // (input value, target)
  for (std::size_t i = 0; i < 2; ++i) pairs.emplace_back(za[0][i], ya[i]);
  for (std::size_t i = 0; i < 2; ++i) pairs.emplace_back(zb[0][i], yb[i]);
  for (const auto& p : pairs) {
    for (const auto& q : pairs) {
      if (p.first == q.first) w.gap = std::max(w.gap, std::abs(p.second - q.second));
    }
  }

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(pairs.size());
  for (const auto& [x, y] : pairs) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double det = n * sxx - sx * sx;
  const double slope = (n * sxy - sx * sy) / det;
  const double icpt = (sy - slope * sx) / n;
  for (const auto& [x, y] : pairs) {
    const double r = slope * x + icpt - y;
    w.ls_residual += r * r;
  }
  return w;
}

ArchSpec two_conv_spec(std::uint64_t seed, std::size_t classes = 8) {
  ArchSpec spec;
  spec.input_channels = 2;
  spec.input_shape = {16, 16};
  spec.seed = seed;
  spec.layers = {LayerSpec::conv(8, {3, 3}), LayerSpec::conv(16, {3, 3}),
                 LayerSpec::gap(), LayerSpec::dropout(0.5), LayerSpec::head(classes)};
  return spec;
}

std::vector<ChannelStack> random_batch(Rng& rng, std::size_t n,
                                       std::size_t channels, const Shape& shape,
                                       double lo, double hi) {
  std::vector<ChannelStack> batch;
  for (std::size_t i = 0; i < n; ++i) {
    ChannelStack z;
    for (std::size_t k = 0; k < channels; ++k) {
      z.channels.push_back(random_tensor(rng, shape, lo, hi));
    }
    batch.push_back(std::move(z));
  }
  return batch;
}

// Gradient-check fixtures. Each model is small, mixes every parameter class
// and runs with dropout active under a fixed mask seed.
struct GradientFixture {
  Model model;
  Batch batch;
  LossKind loss;
  ForwardOptions options;
};

std::vector<GradientFixture> gradient_fixtures(std::uint64_t seed) {
  std::vector<GradientFixture> out;
  for (std::uint64_t v = 0; v < 3; ++v) {
    Rng rng(derive_seed(seed, {0x6ad, v}));
    const Shape in{6, 6};

    // conv -> gffn -> gap -> dropout -> softmax head, cross entropy
    ArchSpec a;
    a.input_channels = 3;
    a.input_shape = {6, 6};
    a.seed = derive_seed(seed, {0xa, v});
    a.layers = {LayerSpec::conv(6, {3, 3}, ActivationKind::kRelu),
                LayerSpec::gffn(6, ActivationKind::kSigmoid), LayerSpec::gap(),
                LayerSpec::dropout(0.25), LayerSpec::head(4)};
    GradientFixture fa{build_backbone(a), {}, LossKind::kCrossEntropy, {}};
    fa.batch.inputs = random_batch(rng, 4, 3, in, -2.0, 2.0);
    for (std::size_t i = 0; i < 4; ++i) {
      fa.batch.labels.push_back(static_cast<int>(rng.below(4)));
    }
    fa.options = {true, derive_seed(seed, {0xd0, v})};
    out.push_back(std::move(fa));

    // projected conv(valid, sigmoid) -> conv(same) -> gap -> head, MSE.
    // Gates are moved off 1 so every term of the gate gradient matters.
    ArchSpec b;
    b.input_channels = 3;
    b.input_shape = {6, 6};
    b.seed = derive_seed(seed, {0xb, v});
    b.layers = {
        LayerSpec::conv(6, {3, 3}, ActivationKind::kSigmoid, PadMode::kValid),
        LayerSpec::conv(6, {2, 2}, ActivationKind::kRelu), LayerSpec::gap(),
        LayerSpec::head(4)};
    Model pm = project_model(build_backbone(b));
    for (ParamBlock& blk : param_blocks(pm)) {
      if (blk.cls == ParamClass::kGate) {
        for (double& g : blk.values) g = rng.uniform(0.5, 1.5);
      }
      if (blk.cls == ParamClass::kBias) {
        for (double& g : blk.values) g = rng.uniform(-0.2, 0.2);
      }
    }
    GradientFixture fb{pm, {}, LossKind::kMeanSquaredError, {}};
    fb.batch.inputs = random_batch(rng, 4, 3, in, -2.0, 2.0);
    for (std::size_t i = 0; i < 4; ++i) {
      fb.batch.labels.push_back(static_cast<int>(rng.below(4)));
    }
    out.push_back(fb);

    // The same projected model with its frozen filters released, as in the
    // second stage of projection + fine-tuning.
    GradientFixture fc = fb;
    set_all_trainable(fc.model, true);
    fc.loss = LossKind::kCrossEntropy;
    out.push_back(std::move(fc));
  }
  return out;
}

struct GradientSample {
  std::size_t fixture;
  std::size_t index;
  ParamClass cls;
};

/// Round-robin over parameter classes, without replacement, until `n`
/// samples are drawn or every pool is exhausted.
std::vector<GradientSample> sample_parameters(
    const std::vector<GradientFixture>& fixtures, std::size_t n, Rng& rng) {
  std::map<ParamClass, std::vector<GradientSample>> pools;
  for (std::size_t f = 0; f < fixtures.size(); ++f) {
    std::size_t offset = 0;
    for (const ParamInfo& info : param_layout(fixtures[f].model)) {
      if (info.trainable) {
        for (std::size_t i = 0; i < info.size; ++i) {
          pools[info.cls].push_back({f, offset + i, info.cls});
        }
      }
      offset += info.size;
    }
  }
  for (auto& [cls, pool] : pools) {
    for (std::size_t i = pool.size(); i > 1; --i) {
      std::swap(pool[i - 1], pool[rng.below(i)]);
    }
  }
  std::vector<GradientSample> out;
  std::map<ParamClass, std::size_t> cursor;
  bool progress = true;
  while (out.size() < n && progress) {
    progress = false;
    for (auto& [cls, pool] : pools) {
      if (out.size() == n) break;
      std::size_t& c = cursor[cls];
      if (c < pool.size()) {
        out.push_back(pool[c++]);
        progress = true;
      }
    }
  }
  return out;
}

CheckRow gradient_row(std::size_t n_params, std::uint64_t seed, bool corrupt) {
  require_instances(n_params);
  CheckRow row;
  row.check = corrupt ? "gradient_negative_control" : "gradient_fd";
  row.tolerance = kGradientTolerance;
  row.expected_within = !corrupt;
  row.distribution =
      "3 x {conv-gffn-gap-dropout-head CE, projected conv-conv-gap-head MSE, "
      "projected + released filters CE}; inputs~U(-2,2), batch 4, "
      "eps 1e-6, error |a-fd|/max(1,|fd|)";

  const std::vector<GradientFixture> fixtures = gradient_fixtures(seed);
  std::vector<GradientTape> tapes;
  for (const auto& f : fixtures) {
    tapes.push_back(backward(f.model, f.batch, f.loss, f.options).tape);
  }
  Rng rng(derive_seed(seed, {corrupt ? 0xbadULL : 0x5a3ULL}));
  const std::vector<GradientSample> samples =
      sample_parameters(fixtures, n_params, rng);

  std::map<ParamClass, std::size_t> per_class;
  for (const GradientSample& s : samples) {
    const GradientFixture& f = fixtures[s.fixture];
    double analytic = tapes[s.fixture].at(s.index);
    if (corrupt) analytic += 1e-3 * std::max(1.0, std::abs(analytic));
    const double fd =
        fd_gradient(f.model, f.batch, f.loss, s.index, kGradientStep, f.options);
    const double err = std::abs(analytic - fd) / std::max(1.0, std::abs(fd));
    row.max_deviation = std::max(row.max_deviation, err);
    ++per_class[s.cls];
  }
  row.instances = samples.size();
  bool all_classes = true;
  for (ParamClass c : {ParamClass::kWeight, ParamClass::kFilter,
                       ParamClass::kBias, ParamClass::kGate,
                       ParamClass::kHeadWeight, ParamClass::kHeadBias}) {
    row.details.emplace_back(std::string("sampled_") + to_string(c),
                             num(per_class[c]));
    all_classes = all_classes && per_class[c] > 0;
  }
  row.details.emplace_back("all_classes_sampled", flag(all_classes));
  row.within_tolerance = row.max_deviation <= row.tolerance &&
                         (corrupt || (all_classes && samples.size() == n_params));
  row.finish();
  return row;
}

}  // namespace

const CheckRow& VerificationReport::row(const std::string& check) const {
  for (const CheckRow& r : rows) {
    if (r.check == check) return r;
  }
  throw ConfigError("no verification row named '" + check + "'");
}

std::string VerificationReport::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["overall_pass"] = overall_pass;
  j["tolerances"] = {{"algebraic", kAlgebraicTolerance},
                     {"identity", kIdentityTolerance},
                     {"gradient_relative", kGradientTolerance},
                     {"gradient_step", kGradientStep}};
  j["rows"] = nlohmann::ordered_json::array();
  for (const CheckRow& r : rows) {
    nlohmann::ordered_json jr;
    jr["check"] = r.check;
    jr["instances"] = r.instances;
    jr["max_deviation"] = r.max_deviation;
    jr["tolerance"] = r.tolerance;
    jr["within_tolerance"] = r.within_tolerance;
    jr["expected_within_tolerance"] = r.expected_within;
    jr["pass"] = r.pass;
    jr["distribution"] = r.distribution;
    nlohmann::ordered_json details = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.details) details[k] = v;
    jr["details"] = std::move(details);
    j["rows"].push_back(std::move(jr));
  }
  return j.dump(2) + "\n";
}

CheckRow check_theorem1(std::size_t n, std::uint64_t seed) {
  require_instances(n);
  Rng rng(derive_seed(seed, {0x7101}));
  CheckRow row;
  row.check = "gcnn_gffn_bijection";
  row.instances = n;
  row.tolerance = kAlgebraicTolerance;
  row.distribution = kDistribution;

  bool roundtrip_ok = true;
  std::size_t per_rank[4] = {0, 0, 0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t rank = i % 4;
    const std::size_t d = 1 + rng.below(8);
    const Shape shape = random_shape(rng, rank);
    const GcnnNode g = random_gcnn(rng, d, shape, /*unit_kernel=*/true);
    const GffnNode f = gcnn_to_gffn(g);
    const ChannelStack z = random_stack(rng, d, shape);
    row.max_deviation =
        std::max(row.max_deviation, max_abs_diff(gcnn_forward(g, z), gffn_forward(f, z)));

    const GcnnNode back = gffn_to_gcnn(f, rank);
    const GffnNode again = gcnn_to_gffn(back);
    roundtrip_ok = roundtrip_ok && same_parameters(g, back) &&
                   again.weights == f.weights && again.bias == f.bias &&
                   again.activation == f.activation;
    ++per_rank[rank];
  }

  bool rejects_wide = false;
  try {
    gcnn_to_gffn(GcnnNode({Tensor(Shape{3, 3}, 1.0)}, 0.0));
  } catch (const NotReducibleError&) {
    rejects_wide = true;
  }

  const Witness w = strictness_witness();
  const bool witness_ok = w.sums_equal && w.gap > 0.0 && w.ls_residual > 0.0;
  for (std::size_t r = 0; r < 4; ++r) {
    row.details.emplace_back("instances_rank" + std::to_string(r), num(per_rank[r]));
  }
  row.details.emplace_back("parameter_roundtrip_exact", flag(roundtrip_ok));
  row.details.emplace_back("wide_kernel_rejected", flag(rejects_wide));
  row.details.emplace_back("witness",
                           "kernel [1,-1] same mode on Z_a=[1,0], Z_b=[0,1]");
  row.details.emplace_back("witness_channel_sums_equal", flag(w.sums_equal));
  row.details.emplace_back("witness_pointwise_gap", num(w.gap));
  row.details.emplace_back("witness_best_affine_residual", num(w.ls_residual));
  row.within_tolerance = row.max_deviation <= row.tolerance && roundtrip_ok &&
                         rejects_wide && witness_ok;
  row.finish();
  return row;
}

CheckRow check_theorem2(std::size_t n, std::uint64_t seed) {
  require_instances(n);
  Rng rng(derive_seed(seed, {0x7102}));
  CheckRow row;
  row.check = "projected_is_gffn_on_zhat";
  row.instances = n;
  row.tolerance = kAlgebraicTolerance;
  row.distribution = std::string(kDistribution) +
                     "; gates~U(-1.5,1.5), every 5th instance keeps gates at 1";

  double unit_gate_dev = 0.0;
  bool distinct_ok = true;
  bool identical_ok = true;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t rank = i % 4;
    const std::size_t d = 1 + rng.below(8);
    const Shape shape = random_shape(rng, rank);
    const GcnnNode src = random_gcnn(rng, d, shape, false);
    ProjectedNode p = project_gcnn(src);
    const bool unit = i % 5 == 0;
    if (!unit) {
      for (double& g : p.gates) g = rng.uniform(-1.5, 1.5);
    }
    const ChannelStack z = random_stack(rng, d, shape);

    // Zhat first, then a plain GFFN node with w = gamma.
    ChannelStack zhat;
    for (std::size_t k = 0; k < d; ++k) {
      zhat.channels.push_back(eval_subfunction(p.subs[k], z[k]));
    }
    const GffnNode g(p.gates, p.bias, p.activation, zhat.channel_shape());
    const Tensor via_zhat = gffn_forward(g, zhat);
    const Tensor direct = projected_forward(p, z);
    row.max_deviation = std::max(row.max_deviation, max_abs_diff(direct, via_zhat));
    if (unit) {
      unit_gate_dev = std::max(unit_gate_dev, max_abs_diff(direct, gcnn_forward(src, z)));
    }

    // A second node in the same layer: other filters give another Zhat,
    // equal filters give the same one.
    GcnnNode other = src;
    for (Tensor& f : other.filters) {
      for (double& v : f.data()) v = rng.uniform(-1.0, 1.0);
    }
    const ChannelStack zhat_other = preprocess(project_gcnn(other), z);
    bool differs = false;
    for (std::size_t k = 0; k < d; ++k) {
      differs = differs || !(zhat_other[k] == zhat[k]);
    }
    distinct_ok = distinct_ok && differs;
    identical_ok = identical_ok && preprocess(project_gcnn(src), z) == zhat;
  }
  row.details.emplace_back("unit_gate_vs_source_max_deviation", num(unit_gate_dev));
  row.details.emplace_back("distinct_filters_give_distinct_zhat", flag(distinct_ok));
  row.details.emplace_back("equal_filters_give_equal_zhat", flag(identical_ok));
  row.within_tolerance = row.max_deviation <= row.tolerance &&
                         unit_gate_dev <= kIdentityTolerance && distinct_ok &&
                         identical_ok;
  row.finish();
  return row;
}

CheckRow check_separability(std::size_t n, std::uint64_t seed) {
  require_instances(n);
  Rng rng(derive_seed(seed, {0x5e9}));
  CheckRow row;
  row.check = "gcnn_separable_by_input";
  row.instances = n;
  row.tolerance = kAlgebraicTolerance;
  row.distribution = kDistribution;
  std::size_t single_channel = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t rank = i % 4;
    const std::size_t d = 1 + rng.below(8);
    const Shape shape = random_shape(rng, rank);
    const GcnnNode node = random_gcnn(rng, d, shape, false);
    const ChannelStack z = random_stack(rng, d, shape);
    const double dev = zero_mask_deviation(
        [&](const ChannelStack& s) { return gcnn_pre_activation(node, s); }, z);
    row.max_deviation = std::max(row.max_deviation, dev);
    single_channel += d == 1;
  }
  row.details.emplace_back("single_channel_instances", num(single_channel));
  row.within_tolerance = row.max_deviation <= row.tolerance;
  row.finish();
  return row;
}

CheckRow check_separability_control(std::size_t n, std::uint64_t seed) {
  require_instances(n);
  Rng rng(derive_seed(seed, {0x5e90}));
  CheckRow row;
  row.check = "separability_negative_control";
  row.instances = n;
  row.tolerance = kAlgebraicTolerance;
  row.expected_within = false;
  row.distribution = "f(Z) = Z_1 * Z_2 + b elementwise, d=2, inputs~U(-2,2)";

  OpaqueNode product;
  product.bias = 0.5;
  product.node_function = [&product](const ChannelStack& s) {
    Tensor out(s.channel_shape(), product.bias);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += s[0][i] * s[1][i];
    return out;
  };
  for (std::size_t i = 0; i < n; ++i) {
    const Shape shape = random_shape(rng, 1 + i % 3);
    const ChannelStack z = random_stack(rng, 2, shape);
    row.max_deviation =
        std::max(row.max_deviation, zero_mask_deviation(product.node_function, z));
  }
  bool rejected = false;
  try {
    project_opaque(product);
  } catch (const ProjectionError&) {
    rejected = true;
  }
  row.details.emplace_back("projection_rejected", flag(rejected));
  row.within_tolerance = row.max_deviation <= row.tolerance || !rejected;
  row.finish();
  return row;
}

CheckRow check_gamma_placement(std::size_t n, std::uint64_t seed) {
  require_instances(n);
  Rng rng(derive_seed(seed, {0x9a3}));
  CheckRow row;
  row.check = "gate_commutes_with_convolution";
  row.instances = n;
  row.tolerance = kAlgebraicTolerance;
  row.distribution = std::string(kDistribution) +
                     "; gamma~U(-2,2), instance 0 gamma=0, instance 1 gamma=1";
  double zero_gate = 0.0;
  double unit_gate = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Shape shape = random_shape(rng, i % 4);
    const Tensor z = random_tensor(rng, shape, -2.0, 2.0);
    const Tensor f = random_tensor(rng, random_kernel_shape(rng, shape), -1.0, 1.0);
    const PadMode mode = random_mode(rng);
    const double gamma = i == 0 ? 0.0 : i == 1 ? 1.0 : rng.uniform(-2.0, 2.0);
    const Tensor after = gamma * convolve(z, f, mode);
    const Tensor before = convolve(gamma * z, f, mode);
    row.max_deviation = std::max(row.max_deviation, max_abs_diff(after, before));
    if (i == 0) {
      zero_gate = std::max(max_abs_diff(after, Tensor(after.shape())),
                           max_abs_diff(before, Tensor(before.shape())));
    }
    if (i == 1) {
      const Tensor plain = convolve(z, f, mode);
      unit_gate = std::max(max_abs_diff(after, plain), max_abs_diff(before, plain));
    }
  }
  row.details.emplace_back("zero_gate_max_abs", num(zero_gate));
  row.details.emplace_back("unit_gate_max_deviation", num(unit_gate));
  row.within_tolerance = row.max_deviation <= row.tolerance && zero_gate == 0.0 &&
                         unit_gate <= row.tolerance;
  row.finish();
  return row;
}

CheckRow check_projection_identity(std::size_t n, std::uint64_t seed) {
  require_instances(n);
  Rng rng(derive_seed(seed, {0x1de}));
  CheckRow row;
  row.check = "projection_identity";
  row.tolerance = kIdentityTolerance;
  row.distribution =
      "model: 2x16x16 -> conv(8,3x3) -> conv(16,3x3) -> gap -> dropout(0.5) -> "
      "head(8), batch 64 inputs~U(0,1); nodes: " +
      std::string(kDistribution);

  const Model model = build_backbone(two_conv_spec(derive_seed(seed, {0xbb})));
  const std::vector<ChannelStack> batch =
      random_batch(rng, 64, 2, Shape{16, 16}, 0.0, 1.0);
  const Model projected = project_model(model);
  const std::vector<Tensor> before = forward(model, batch);
  const std::vector<Tensor> after = forward(projected, batch);
  double model_dev = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    model_dev = std::max(model_dev, max_abs_diff(before[i], after[i]));
  }

  double node_dev = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t d = 1 + rng.below(8);
    const Shape shape = random_shape(rng, i % 4);
    const GcnnNode g = random_gcnn(rng, d, shape, false);
    const ChannelStack z = random_stack(rng, d, shape);
    node_dev = std::max(node_dev,
                        max_abs_diff(gcnn_forward(g, z), projected_forward(project_gcnn(g), z)));
  }
  row.instances = batch.size() + n;
  row.max_deviation = std::max(model_dev, node_dev);
  row.details.emplace_back("model_batch_max_deviation", num(model_dev));
  row.details.emplace_back("node_max_deviation", num(node_dev));
  row.within_tolerance = row.max_deviation <= row.tolerance;
  row.finish();
  return row;
}

CheckRow check_projection_idempotence(std::uint64_t seed) {
  CheckRow row;
  row.check = "projection_idempotence";
  row.instances = 1;
  row.tolerance = 0.0;
  row.distribution = "2-conv backbone as in projection_identity";

  const Model once = project_model(build_backbone(two_conv_spec(derive_seed(seed, {0xbb}))));
  const Model twice = project_model(once);

  bool structure = once.layers.size() == twice.layers.size();
  for (std::size_t l = 0; structure && l < once.layers.size(); ++l) {
    structure = once.layers[l].index() == twice.layers[l].index();
    const auto* a = std::get_if<NodeLayer>(&once.layers[l]);
    const auto* b = std::get_if<NodeLayer>(&twice.layers[l]);
    if (!structure || !a) continue;
    structure = a->nodes.size() == b->nodes.size() && a->homogeneous == b->homogeneous;
    for (std::size_t j = 0; structure && j < a->nodes.size(); ++j) {
      structure = a->nodes[j].index() == b->nodes[j].index() &&
                  std::holds_alternative<ProjectedNode>(a->nodes[j]);
    }
  }
  const auto la = param_layout(once);
  const auto lb = param_layout(twice);
  bool layout = la.size() == lb.size();
  for (std::size_t i = 0; layout && i < la.size(); ++i) {
    layout = la[i].cls == lb[i].cls && la[i].size == lb[i].size &&
             la[i].trainable == lb[i].trainable;
  }
  const std::vector<double> ta = flatten_params(once);
  const std::vector<double> tb = flatten_params(twice);
  if (ta.size() == tb.size()) {
    for (std::size_t i = 0; i < ta.size(); ++i) {
      row.max_deviation = std::max(row.max_deviation, std::abs(ta[i] - tb[i]));
    }
  } else {
    layout = false;
  }

  // Each projected node trains exactly its gates and bias.
  const ParamAudit audit = count_params(once);
  bool gate_counts = true;
  for (const ParamAuditRow& r : audit.rows) {
    const auto* nl = std::get_if<NodeLayer>(&once.layers[r.layer]);
    if (!nl) continue;
    std::size_t expected = 0;
    for (const Node& nd : nl->nodes) expected += node_depth(nd) + 1;
    gate_counts = gate_counts && r.trainable == expected;
  }
  const ParamAudit audit2 = count_params(twice);
  const bool audit_equal =
      audit.trainable == audit2.trainable && audit.frozen == audit2.frozen;

  row.details.emplace_back("structure_equal", flag(structure));
  row.details.emplace_back("layout_equal", flag(layout));
  row.details.emplace_back("audit_equal", flag(audit_equal));
  row.details.emplace_back("projected_trainable_is_depth_plus_one", flag(gate_counts));
  row.details.emplace_back("trainable", num(audit.trainable));
  row.details.emplace_back("frozen", num(audit.frozen));
  row.within_tolerance = row.max_deviation == 0.0 && structure && layout &&
                         audit_equal && gate_counts;
  row.finish();
  return row;
}

CheckRow check_gradients(std::size_t n_params, std::uint64_t seed) {
  return gradient_row(n_params, seed, false);
}

CheckRow check_gradient_control(std::size_t n_params, std::uint64_t seed) {
  return gradient_row(n_params, seed, true);
}

CheckRow check_inherited_training(std::size_t n, std::uint64_t seed) {
  require_instances(n);
  Rng rng(derive_seed(seed, {0xc02}));
  CheckRow row;
  row.check = "projected_inherits_gffn_training";
  row.instances = n;
  row.tolerance = kGradientTolerance;
  row.distribution = std::string(kDistribution) +
                     "; loss <u, node output>, u~U(-1,1), gates~U(-1.5,1.5)";

  bool counts_ok = true;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t d = 1 + rng.below(8);
    const Shape shape = random_shape(rng, 1 + i % 3);
    GcnnNode src = random_gcnn(rng, d, shape, false);
    src.activation = ActivationKind::kIdentity;
    ProjectedNode p = project_gcnn(src);
    for (double& g : p.gates) g = rng.uniform(-1.5, 1.5);
    const ChannelStack z = random_stack(rng, d, shape);
    const Tensor u =
        random_tensor(rng, node_output_shape(Node(p), shape), -1.0, 1.0);
    const ChannelStack zhat = preprocess(p, z);

    for (std::size_t k = 0; k < d; ++k) {
      // GFFN weight gradient of <u, w . Zhat + b> is <u, Zhat_k>.
      const double closed = inner_product(u, zhat[k]);
      const double fd = central_difference(
          [&](double g) {
            ProjectedNode q = p;
            q.gates[k] = g;
            return inner_product(u, projected_forward(q, z));
          },
          p.gates[k], kGradientStep);
      row.max_deviation = std::max(row.max_deviation,
                                   std::abs(closed - fd) / std::max(1.0, std::abs(fd)));
    }

    Model m;
    m.input_channels = d;
    m.input_shape = shape;
    m.layers.push_back(NodeLayer{{p, project_gcnn(src)}, false});
    const ParamAudit audit = count_params(m);
    counts_ok = counts_ok && audit.trainable == 2 * (d + 1);
  }
  row.details.emplace_back("trainable_is_one_per_channel_plus_bias", flag(counts_ok));
  row.within_tolerance = row.max_deviation <= row.tolerance && counts_ok;
  row.finish();
  return row;
}

VerificationReport run_full_suite(std::uint64_t seed, std::size_t n,
                                  std::size_t n_gradients) {
  require_instances(n);
  VerificationReport report;
  report.seed = seed;
  report.rows.push_back(check_theorem1(n, seed));
  report.rows.push_back(check_theorem2(n, seed));
  report.rows.push_back(check_separability(n, seed));
  report.rows.push_back(check_separability_control(n, seed));
  report.rows.push_back(check_gamma_placement(n, seed));
  report.rows.push_back(check_projection_identity(n, seed));
  report.rows.push_back(check_projection_idempotence(seed));
  report.rows.push_back(check_gradients(n_gradients, seed));
  report.rows.push_back(check_gradient_control(std::max<std::size_t>(1, n_gradients / 10), seed));
  report.rows.push_back(check_inherited_training(n, seed));
  report.overall_pass = std::all_of(report.rows.begin(), report.rows.end(),
                                    [](const CheckRow& r) { return r.pass; });
  return report;
}

}  // namespace projnet
