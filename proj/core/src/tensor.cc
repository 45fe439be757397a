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

#include "projnet/tensor.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "projnet/errors.h"

namespace projnet {

Shape::Shape(std::initializer_list<std::size_t> dims)
    : Shape(std::vector<std::size_t>(dims)) {}

Shape::Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
  for (std::size_t d : dims_) {
    if (d == 0) throw DimensionError("shape extents must be >= 1");
  }
}

Shape Shape::ones(std::size_t rank) {
  return Shape(std::vector<std::size_t>(rank, 1));
}

std::size_t Shape::volume() const noexcept {
  return std::accumulate(dims_.begin(), dims_.end(), std::size_t{1},
                         std::multiplies<>());
}

bool Shape::all_ones() const noexcept {
  return std::all_of(dims_.begin(), dims_.end(),
                     [](std::size_t d) { return d == 1; });
}

std::string Shape::to_string() const {
  std::string s = "(";
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(dims_[i]);
  }
  return s + ")";
}

Tensor::Tensor() : data_(1, 0.0) {}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_.volume(), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_.volume()) {
    throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_.to_string());
  }
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, {value}); }

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(Shape{n}, std::move(values));
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  if (index.size() != rank()) throw DimensionError("index rank mismatch");
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= shape_[axis]) throw DimensionError("index out of range");
    flat = flat * shape_[axis] + i;
    ++axis;
  }
  return data_[flat];
}

double Tensor::item() const {
  if (data_.size() != 1) throw DimensionError("item() needs a volume-1 tensor");
  return data_[0];
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Tensor& Tensor::operator+=(const Tensor& other) {
  if (other.shape_ != shape_) {
    throw DimensionError("add: shape " + shape_.to_string() + " vs " +
                         other.shape_.to_string());
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double c) {
  for (double& v : data_) v *= c;
  return *this;
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

Tensor operator*(double c, Tensor t) {
  t *= c;
  return t;
}

Tensor operator+(Tensor a, const Tensor& b) {
  a += b;
  return a;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("max_abs_diff: shape " + a.shape().to_string() +
                         " vs " + b.shape().to_string());
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]));
  }
  return m;
}

const Shape& ChannelStack::channel_shape() const {
  validate();
  return channels.front().shape();
}

void ChannelStack::validate() const {
  if (channels.empty()) throw DimensionError("channel stack has depth 0");
  const Shape& s = channels.front().shape();
  for (const Tensor& c : channels) {
    if (c.shape() != s) {
      throw DimensionError("channel stack is ragged: " + s.to_string() +
                           " vs " + c.shape().to_string());
    }
  }
}

const char* to_string(PadMode mode) {
  return mode == PadMode::kValid ? "valid" : "same";
}

const char* to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::kIdentity:
      return "identity";
    case ActivationKind::kRelu:
      return "relu";
    case ActivationKind::kSigmoid:
      return "sigmoid";
    case ActivationKind::kSoftmax:
      return "softmax";
  }
  return "?";
}

PadMode pad_mode_from_string(const std::string& s) {
  if (s == "valid") return PadMode::kValid;
  if (s == "same") return PadMode::kSame;
  throw ConfigError("unknown padding mode '" + s + "'");
}

ActivationKind activation_from_string(const std::string& s) {
  if (s == "identity" || s == "linear") return ActivationKind::kIdentity;
  if (s == "relu") return ActivationKind::kRelu;
  if (s == "sigmoid") return ActivationKind::kSigmoid;
  if (s == "softmax") return ActivationKind::kSoftmax;
  throw ConfigError("unknown activation '" + s + "'");
}

Tensor tensor_dot(const ChannelStack& z, std::span<const double> w) {
  if (w.size() != z.depth()) {
    throw DimensionError("tensor_dot: " + std::to_string(w.size()) +
                         " weights for " + std::to_string(z.depth()) +
                         " channels");
  }
  Tensor out(z.channel_shape());
  double* o = out.data().data();
  const std::size_t n = out.size();
  for (std::size_t k = 0; k < z.depth(); ++k) {
    const double* zk = z[k].data().data();
    const double wk = w[k];
    for (std::size_t i = 0; i < n; ++i) o[i] += zk[i] * wk;
  }
  return out;
}

namespace {

constexpr std::size_t kMaxRank = 8;
using Index = std::array<std::size_t, kMaxRank>;

// Geometry shared by the forward and both backward passes.
struct ConvGeometry {
  std::size_t rank = 0;
  Index in{}, ker{}, out{}, pad{};
  Index in_stride{}, out_stride{};
};

ConvGeometry make_geometry(const Shape& input, const Shape& kernel,
                           PadMode mode) {
  if (input.rank() != kernel.rank()) {
    throw DimensionError("convolve: input rank " +
                         std::to_string(input.rank()) + " vs kernel rank " +
                         std::to_string(kernel.rank()));
  }
  if (input.rank() > kMaxRank) {
    throw DimensionError("convolve: rank above " + std::to_string(kMaxRank));
  }
  ConvGeometry g;
  g.rank = input.rank();
  for (std::size_t a = 0; a < g.rank; ++a) {
    g.in[a] = input[a];
    g.ker[a] = kernel[a];
    if (mode == PadMode::kValid) {
      if (kernel[a] > input[a]) {
        throw DimensionError("convolve: kernel " + kernel.to_string() +
                             " larger than input " + input.to_string() +
                             " in valid mode");
      }
      g.out[a] = input[a] - kernel[a] + 1;
      g.pad[a] = 0;
    } else {
      g.out[a] = input[a];
      g.pad[a] = (kernel[a] - 1) / 2;
    }
  }
  std::size_t si = 1, so = 1;
  for (std::size_t a = g.rank; a-- > 0;) {
    g.in_stride[a] = si;
    g.out_stride[a] = so;
    si *= g.in[a];
    so *= g.out[a];
  }
  return g;
}

// Visits every (kernel tap, contiguous output row) pair. For each tap t in
// row-major order, the output box where o + t - pad stays inside the input is
// walked row by row; `row(tap, out_offset, in_offset, len)` handles one row
// along the innermost axis.
template <typename RowFn>
void for_each_tap_row(const ConvGeometry& g, RowFn&& row) {
  if (g.rank == 0) {
    row(std::size_t{0}, std::size_t{0}, std::size_t{0}, std::size_t{1});
    return;
  }
  const std::size_t r = g.rank;
  Index tap{};
  Index lo{}, hi{};
  std::size_t tap_flat = 0;
  while (true) {
    bool empty = false;
    for (std::size_t a = 0; a < r; ++a) {
      // 0 <= o + t - p < n  and  0 <= o < m
      const std::ptrdiff_t shift =
          static_cast<std::ptrdiff_t>(tap[a]) - static_cast<std::ptrdiff_t>(g.pad[a]);
      const std::ptrdiff_t l = std::max<std::ptrdiff_t>(0, -shift);
      const std::ptrdiff_t h = std::min<std::ptrdiff_t>(
          static_cast<std::ptrdiff_t>(g.out[a]),
          static_cast<std::ptrdiff_t>(g.in[a]) - shift);
      if (h <= l) {
        empty = true;
        break;
      }
      lo[a] = static_cast<std::size_t>(l);
      hi[a] = static_cast<std::size_t>(h);
    }
    if (!empty) {
      const std::size_t len = hi[r - 1] - lo[r - 1];
      Index o = lo;
      while (true) {
        std::size_t out_off = 0, in_off = 0;
        for (std::size_t a = 0; a < r; ++a) {
          out_off += o[a] * g.out_stride[a];
          in_off += (o[a] + tap[a] - g.pad[a]) * g.in_stride[a];
        }
        row(tap_flat, out_off, in_off, len);
        // Advance the outer axes of the output box.
        std::size_t a = r - 1;
        bool done = true;
        while (a-- > 0) {
          if (++o[a] < hi[a]) {
            done = false;
            break;
          }
          o[a] = lo[a];
        }
        if (done) break;
      }
    }
    ++tap_flat;
    std::size_t a = r;
    bool done = true;
    while (a-- > 0) {
      if (++tap[a] < g.ker[a]) {
        done = false;
        break;
      }
      tap[a] = 0;
    }
    if (done) break;
  }
}

Shape shape_from(const ConvGeometry& g, const Index& extents) {
  return Shape(std::vector<std::size_t>(extents.begin(),
                                        extents.begin() + g.rank));
}

// Rank-2 fast path: copy the input into a zero-padded plane so that every
// tap covers whole output rows. Adding f * 0 to a sum that starts at +0 never
// changes its bits, so this matches skipping the padded taps exactly.
struct Plane2 {
  std::size_t oh, ow, kh, kw, ph, pw;
};

Plane2 plane_of(const ConvGeometry& g) {
  return {g.out[0], g.out[1], g.ker[0], g.ker[1], g.out[0] + g.ker[0] - 1,
          g.out[1] + g.ker[1] - 1};
}

const double* padded_input(const ConvGeometry& g, const Plane2& p,
                           const double* in, std::vector<double>& buf) {
  if (g.pad[0] == 0 && g.pad[1] == 0 && p.ph == g.in[0] && p.pw == g.in[1]) {
    return in;
  }
  // The border is zeroed only when the layout changes; later calls with the
  // same layout overwrite the interior alone.
  struct Layout {
    std::size_t ph, pw, py, px, ih, iw;
    bool operator==(const Layout&) const = default;
  };
  thread_local std::vector<std::pair<const std::vector<double>*, Layout>> seen;
  const Layout layout{p.ph, p.pw, g.pad[0], g.pad[1], g.in[0], g.in[1]};
  auto it = std::find_if(seen.begin(), seen.end(),
                         [&](const auto& e) { return e.first == &buf; });
  if (it == seen.end() || !(it->second == layout) || buf.size() != p.ph * p.pw) {
    buf.assign(p.ph * p.pw, 0.0);
    if (it == seen.end()) {
      seen.emplace_back(&buf, layout);
    } else {
      it->second = layout;
    }
  }
  // Same mode pads (k-1)/2 before and the rest after; rows past the input
  // stay zero.
  for (std::size_t y = 0; y < g.in[0] && y + g.pad[0] < p.ph; ++y) {
    const std::size_t n = std::min(g.in[1], p.pw - g.pad[1]);
    std::copy_n(in + y * g.in[1], n, buf.data() + (y + g.pad[0]) * p.pw + g.pad[1]);
  }
  return buf.data();
}

constexpr std::size_t kTile = 8;

// acc[0..N) += sum over taps (row-major) of f * src_tap[0..N); the tile stays
// in registers across all taps. KH/KW of 0 mean "runtime extent".
template <std::size_t N, std::size_t KH = 0, std::size_t KW = 0,
          bool kFromZero = false>
inline void tile_taps(double* __restrict acc, const double* __restrict ker,
                      const double* __restrict base, std::size_t kh,
                      std::size_t kw, std::size_t row_stride) {
  const std::size_t h = KH ? KH : kh;
  const std::size_t w = KW ? KW : kw;
  double t[N];
  for (std::size_t i = 0; i < N; ++i) t[i] = kFromZero ? 0.0 : acc[i];
  for (std::size_t ty = 0; ty < h; ++ty) {
    const double* row = base + ty * row_stride;
    for (std::size_t tx = 0; tx < w; ++tx) {
      const double f = ker[ty * w + tx];
      for (std::size_t i = 0; i < N; ++i) t[i] += f * row[tx + i];
    }
  }
  for (std::size_t i = 0; i < N; ++i) acc[i] = t[i];
}

// Writes one row of `width` outputs, each summed from +0 over all taps.
template <std::size_t KH, std::size_t KW>
void row_taps(double* out, const double* ker, const double* base,
              std::size_t width, std::size_t kh, std::size_t kw,
              std::size_t row_stride) {
  std::size_t c = 0;
  for (; c + kTile <= width; c += kTile) {
    tile_taps<kTile, KH, KW, true>(out + c, ker, base + c, kh, kw, row_stride);
  }
  for (; c < width; ++c) {
    tile_taps<1, KH, KW, true>(out + c, ker, base + c, kh, kw, row_stride);
  }
}

void row_taps_any(double* out, const double* ker, const double* base,
                  std::size_t width, std::size_t kh, std::size_t kw,
                  std::size_t row_stride) {
  if (kh == 3 && kw == 3) {
    row_taps<3, 3>(out, ker, base, width, kh, kw, row_stride);
  } else if (kh == 1 && kw == 1) {
    row_taps<1, 1>(out, ker, base, width, kh, kw, row_stride);
  } else {
    row_taps<0, 0>(out, ker, base, width, kh, kw, row_stride);
  }
}

void conv2_forward(const ConvGeometry& g, const double* in, const double* ker,
                   double* out) {
  const Plane2 p = plane_of(g);
  thread_local std::vector<double> buf;
  const double* x = padded_input(g, p, in, buf);
  for (std::size_t y = 0; y < p.oh; ++y) {
    row_taps_any(out + y * p.ow, ker, x + y * p.pw, p.ow, p.kh, p.kw, p.pw);
  }
}

// Kernel gradient over a padded plane. Every tap keeps kLanes partial sums
// (lane i sees output columns congruent to i) that are folded pairwise at the
// end, so the reduction order is fixed. KW of 0 means "runtime extent".
constexpr std::size_t kLanes = 8;

inline double fold_lanes(const double* a) {
  return ((a[0] + a[1]) + (a[2] + a[3])) + ((a[4] + a[5]) + (a[6] + a[7]));
}

template <std::size_t KW>
void kernel_grad_rows(const Plane2& p, const double* gout, const double* x,
                      double* gk) {
  const std::size_t kw = KW ? KW : p.kw;
  const std::size_t body = p.ow - p.ow % kLanes;
  for (std::size_t ty = 0; ty < p.kh; ++ty) {
    for (std::size_t tx0 = 0; tx0 < kw; tx0 += 3) {
      const std::size_t taps = std::min<std::size_t>(3, kw - tx0);
      double acc[3][kLanes] = {};
      for (std::size_t y = 0; y < p.oh; ++y) {
        const double* __restrict a = gout + y * p.ow;
        const double* __restrict b = x + (y + ty) * p.pw + tx0;
        for (std::size_t i = 0; i < body; i += kLanes) {
          for (std::size_t t = 0; t < (KW ? KW : taps); ++t) {
            for (std::size_t l = 0; l < kLanes; ++l) {
              acc[t][l] += a[i + l] * b[i + t + l];
            }
          }
        }
        for (std::size_t i = body; i < p.ow; ++i) {
          for (std::size_t t = 0; t < taps; ++t) acc[t][i - body] += a[i] * b[i + t];
        }
      }
      for (std::size_t t = 0; t < taps; ++t) {
        gk[ty * kw + tx0 + t] += fold_lanes(acc[t]);
      }
    }
  }
}

void convolve_into(const ConvGeometry& g, const double* in, const double* ker,
                   double* out) {
  if (g.rank == 2) {
    conv2_forward(g, in, ker, out);
    return;
  }
  for_each_tap_row(g, [&](std::size_t t, std::size_t oo, std::size_t io,
                          std::size_t len) {
    const double f = ker[t];
    double* __restrict o = out + oo;
    const double* __restrict x = in + io;
    for (std::size_t i = 0; i < len; ++i) o[i] += f * x[i];
  });
}

}  // namespace

Shape conv_output_shape(const Shape& input, const Shape& kernel, PadMode mode) {
  const ConvGeometry g = make_geometry(input, kernel, mode);
  return shape_from(g, g.out);
}

Tensor convolve(const Tensor& input, const Tensor& kernel, PadMode mode) {
  const ConvGeometry g = make_geometry(input.shape(), kernel.shape(), mode);
  Tensor out(shape_from(g, g.out));
  convolve_into(g, input.data().data(), kernel.data().data(),
                out.data().data());
  return out;
}

void convolve_accumulate(const Tensor& input, const Tensor& kernel,
                         PadMode mode, double scale, Tensor& out) {
  const ConvGeometry g = make_geometry(input.shape(), kernel.shape(), mode);
  if (out.shape() != shape_from(g, g.out)) {
    throw DimensionError("convolve_accumulate: output shape mismatch");
  }
  thread_local std::vector<double> scratch;
  if (g.rank == 2) {
    scratch.resize(out.size());
  } else {
    scratch.assign(out.size(), 0.0);
  }
  convolve_into(g, input.data().data(), kernel.data().data(), scratch.data());
  double* o = out.data().data();
  for (std::size_t i = 0; i < out.size(); ++i) o[i] += scale * scratch[i];
}

void convolve_input_grad(const Tensor& grad_out, const Tensor& kernel,
                         PadMode mode, Tensor& grad_input) {
  const ConvGeometry g =
      make_geometry(grad_input.shape(), kernel.shape(), mode);
  if (grad_out.shape() != shape_from(g, g.out)) {
    throw DimensionError("convolve_input_grad: gradient shape mismatch");
  }
  const double* gout = grad_out.data().data();
  const double* ker = kernel.data().data();
  double* gin = grad_input.data().data();
  if (g.rank == 2) {
    // Gather form: grad_in[u] = sum_t F[t] * grad_out[u + pad - t], read from
    // a copy of grad_out with kernel-1 zeros around it and a flipped kernel.
    const std::size_t kh = g.ker[0], kw = g.ker[1];
    const std::size_t gh = g.out[0] + 2 * (kh - 1), gw = g.out[1] + 2 * (kw - 1);
    thread_local std::vector<double> buf, flipped, acc;
    buf.assign(gh * gw, 0.0);
    for (std::size_t y = 0; y < g.out[0]; ++y) {
      std::copy_n(gout + y * g.out[1], g.out[1],
                  buf.data() + (y + kh - 1) * gw + (kw - 1));
    }
    flipped.assign(ker, ker + kh * kw);
    std::reverse(flipped.begin(), flipped.end());
    acc.resize(g.in[1]);
    for (std::size_t y = 0; y < g.in[0]; ++y) {
      const double* base = buf.data() + (y + g.pad[0]) * gw + g.pad[1];
      row_taps_any(acc.data(), flipped.data(), base, g.in[1], kh, kw, gw);
      double* dst = gin + y * g.in[1];
      for (std::size_t i = 0; i < g.in[1]; ++i) dst[i] += acc[i];
    }
    return;
  }
  for_each_tap_row(g, [&](std::size_t t, std::size_t oo, std::size_t io,
                          std::size_t len) {
    const double f = ker[t];
    double* __restrict dst = gin + io;
    const double* __restrict src = gout + oo;
    for (std::size_t i = 0; i < len; ++i) dst[i] += f * src[i];
  });
}

void convolve_kernel_grad(const Tensor& input, const Tensor& grad_out,
                          PadMode mode, Tensor& grad_kernel) {
  const ConvGeometry g =
      make_geometry(input.shape(), grad_kernel.shape(), mode);
  if (grad_out.shape() != shape_from(g, g.out)) {
    throw DimensionError("convolve_kernel_grad: gradient shape mismatch");
  }
  const double* gout = grad_out.data().data();
  const double* in = input.data().data();
  double* gk = grad_kernel.data().data();
  if (g.rank == 2) {
    const Plane2 p = plane_of(g);
    thread_local std::vector<double> buf;
    const double* x = padded_input(g, p, in, buf);
    if (p.kw == 3) {
      kernel_grad_rows<3>(p, gout, x, gk);
    } else {
      kernel_grad_rows<0>(p, gout, x, gk);
    }
    return;
  }
  for_each_tap_row(g, [&](std::size_t t, std::size_t oo, std::size_t io,
                          std::size_t len) {
    const double* __restrict a = gout + oo;
    const double* __restrict b = in + io;
    double acc = 0.0;
    for (std::size_t i = 0; i < len; ++i) acc += a[i] * b[i];
    gk[t] += acc;
  });
}

Tensor broadcast_bias(double b, const Shape& shape) { return Tensor(shape, b); }

void apply_activation_inplace(Tensor& x, ActivationKind kind) {
  auto d = x.data();
  switch (kind) {
    case ActivationKind::kIdentity:
      return;
    case ActivationKind::kRelu:
      for (double& v : d) v = v > 0.0 ? v : 0.0;
      return;
    case ActivationKind::kSigmoid:
      for (double& v : d) v = 1.0 / (1.0 + std::exp(-v));
      return;
    case ActivationKind::kSoftmax: {
      const double m = *std::max_element(d.begin(), d.end());
      double s = 0.0;
      for (double& v : d) {
        v = std::exp(v - m);
        s += v;
      }
      for (double& v : d) v /= s;
      return;
    }
  }
}

Tensor apply_activation(const Tensor& x, ActivationKind kind) {
  Tensor y = x;
  apply_activation_inplace(y, kind);
  return y;
}

void activation_backward_inplace(const Tensor& pre, const Tensor& out,
                                 ActivationKind kind, Tensor& grad) {
  auto g = grad.data();
  switch (kind) {
    case ActivationKind::kIdentity:
      return;
    case ActivationKind::kRelu: {
      auto p = pre.data();
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(p[i] > 0.0)) g[i] = 0.0;
      }
      return;
    }
    case ActivationKind::kSigmoid: {
      auto y = out.data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= y[i] * (1.0 - y[i]);
      return;
    }
    case ActivationKind::kSoftmax:
      throw DimensionError(
          "softmax backward is only defined jointly with the loss");
  }
}

double inner_product(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) throw DimensionError("inner_product: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace projnet
