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

#ifndef PROJNET_TENSOR_H_
#define PROJNET_TENSOR_H_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace projnet {

/// Extents of an N-dimensional array. Rank 0 is a scalar.
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims);
  explicit Shape(std::vector<std::size_t> dims);

  /// Shape of rank `rank` with every extent 1.
  static Shape ones(std::size_t rank);

  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t operator[](std::size_t axis) const { return dims_[axis]; }
  const std::vector<std::size_t>& dims() const noexcept { return dims_; }

  /// Number of elements (1 for rank 0).
  std::size_t volume() const noexcept;

  bool all_ones() const noexcept;

  std::string to_string() const;

  friend bool operator==(const Shape&, const Shape&) = default;

 private:
  std::vector<std::size_t> dims_;
};

/// Dense row-major tensor of doubles with value semantics.
class Tensor {
 public:
  /// Rank-0 tensor holding 0.
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value);
  /// Rank-1 tensor from a list of values.
  static Tensor vector(std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.rank(); }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// Element at a multi-index (one entry per axis).
  double at(std::initializer_list<std::size_t> index) const;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  /// The single entry of a tensor with volume 1.
  double item() const;

  void fill(double value);

  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(double c);

  bool all_finite() const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

Tensor operator*(double c, Tensor t);
Tensor operator+(Tensor a, const Tensor& b);

/// Largest absolute entrywise difference. Shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);

/// Vector of d tensors sharing one shape (the Z in Z ∈ R^{d × D}).
struct ChannelStack {
  std::vector<Tensor> channels;

  ChannelStack() = default;
  explicit ChannelStack(std::vector<Tensor> c) : channels(std::move(c)) {}

  std::size_t depth() const noexcept { return channels.size(); }
  const Tensor& operator[](std::size_t k) const { return channels[k]; }
  Tensor& operator[](std::size_t k) { return channels[k]; }

  /// Common channel shape. Throws DimensionError on an empty or ragged stack.
  const Shape& channel_shape() const;

  /// Throws DimensionError unless depth >= 1 and all shapes agree.
  void validate() const;

  friend bool operator==(const ChannelStack&, const ChannelStack&) = default;
};

enum class PadMode { kValid, kSame };

enum class ActivationKind { kIdentity, kRelu, kSigmoid, kSoftmax };

const char* to_string(PadMode mode);
const char* to_string(ActivationKind kind);
PadMode pad_mode_from_string(const std::string& s);
ActivationKind activation_from_string(const std::string& s);

/// Simplified tensor dot product: sum_k Z_k * w_k, accumulated in ascending k.
Tensor tensor_dot(const ChannelStack& z, std::span<const double> w);

/// Output shape of convolve(input, kernel, mode).
Shape conv_output_shape(const Shape& input, const Shape& kernel, PadMode mode);

/// Stride-1 N-dimensional cross-correlation (no kernel flip).
///
/// Valid mode yields extent n - l + 1 per axis. Same mode zero-pads so the
/// output keeps the input extent; the leading pad is floor((l - 1) / 2).
/// Every output entry accumulates its taps in row-major kernel order
/// starting from 0.0, and taps that fall on padding are skipped.
Tensor convolve(const Tensor& input, const Tensor& kernel, PadMode mode);

/// out += scale * convolve(input, kernel, mode). `out` must have the output
/// shape. The convolution is first formed in a zeroed scratch so the
/// result rounds identically to convolve() followed by an add.
void convolve_accumulate(const Tensor& input, const Tensor& kernel,
                         PadMode mode, double scale, Tensor& out);

/// d(sum(grad_out . convolve(Z, F))) / dZ, accumulated into `grad_input`.
void convolve_input_grad(const Tensor& grad_out, const Tensor& kernel,
                         PadMode mode, Tensor& grad_input);

/// d(sum(grad_out . convolve(Z, F))) / dF, accumulated into `grad_kernel`.
void convolve_kernel_grad(const Tensor& input, const Tensor& grad_out,
                          PadMode mode, Tensor& grad_kernel);

/// b * Gamma_D: tensor of `shape` with every entry equal to b.
Tensor broadcast_bias(double b, const Shape& shape);

/// Elementwise activation. Softmax is taken over the flattened tensor.
Tensor apply_activation(const Tensor& x, ActivationKind kind);
void apply_activation_inplace(Tensor& x, ActivationKind kind);

/// Multiplies `grad` in place by sigma'(pre), given the pre-activation and
/// the activation output. Softmax is not supported here.
void activation_backward_inplace(const Tensor& pre, const Tensor& out,
                                 ActivationKind kind, Tensor& grad);

/// Sum of elementwise products.
double inner_product(const Tensor& a, const Tensor& b);

}  // namespace projnet

#endif  // PROJNET_TENSOR_H_
