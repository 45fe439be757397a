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

// Seeded numerical certificates for the node-class results:
//
//   * size-1-kernel GCNN nodes and GFFN nodes are in bijection, and GCNN
//     nodes with larger kernels compute functions no GFFN node can;
//   * a projected node is a GFFN node applied to its own preprocessed stack;
//   * GCNN node functions split into per-channel terms (zero masking);
//   * a gate commutes with convolution;
//   * projection leaves a model's function unchanged and is idempotent;
//   * analytic gradients agree with central differences.
//
// Negative controls (a non-separable node, a corrupted gradient) are
// expected to exceed their tolerance; their rows pass when they do.

#ifndef PROJNET_VERIFICATION_H_
#define PROJNET_VERIFICATION_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace projnet {

inline constexpr double kAlgebraicTolerance = 1e-12;
inline constexpr double kIdentityTolerance = 1e-15;
inline constexpr double kGradientTolerance = 1e-5;
inline constexpr double kGradientStep = 1e-6;

struct CheckRow {
  std::string check;
  std::size_t instances = 0;
  double max_deviation = 0.0;
  double tolerance = 0.0;
  /// max_deviation <= tolerance, plus any structural conditions of the check.
  bool within_tolerance = false;
  /// false for negative controls.
  bool expected_within = true;
  bool pass = false;
  std::string distribution;
  std::vector<std::pair<std::string, std::string>> details;

  void finish() { pass = within_tolerance == expected_within; }
};

struct VerificationReport {
  std::uint64_t seed = 0;
  std::vector<CheckRow> rows;
  bool overall_pass = false;

  const CheckRow& row(const std::string& check) const;
  std::string to_json() const;
};

/// Each check throws ConfigError when n == 0.
CheckRow check_theorem1(std::size_t n, std::uint64_t seed);
CheckRow check_theorem2(std::size_t n, std::uint64_t seed);
CheckRow check_separability(std::size_t n, std::uint64_t seed);
/// Runs the zero-masking test on a node computing Z_1 * Z_2 + b.
CheckRow check_separability_control(std::size_t n, std::uint64_t seed);
CheckRow check_gamma_placement(std::size_t n, std::uint64_t seed);

/// Two-conv backbone, 64-sample batch, forward before and after projection;
/// plus node-level identity over `n` random GCNN nodes.
CheckRow check_projection_identity(std::size_t n, std::uint64_t seed);
CheckRow check_projection_idempotence(std::uint64_t seed);

/// Analytic vs central-difference gradients for `n_params` scalars drawn
/// evenly from the w, F, b, gamma, head weight and head bias classes.
CheckRow check_gradients(std::size_t n_params, std::uint64_t seed);
/// Same comparison with a deliberately perturbed analytic gradient.
CheckRow check_gradient_control(std::size_t n_params, std::uint64_t seed);

/// Projected nodes train exactly one scalar per input channel plus a bias,
/// and the gate gradient is the GFFN weight gradient taken on Zhat.
CheckRow check_inherited_training(std::size_t n, std::uint64_t seed);

VerificationReport run_full_suite(std::uint64_t seed, std::size_t n = 200,
                                  std::size_t n_gradients = 600);

}  // namespace projnet

#endif  // PROJNET_VERIFICATION_H_
