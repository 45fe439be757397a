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


// Reference implementations used only by tests. They share no code with the
// library: plain multi-index loops, explicit padding, naive sums.

#ifndef PROJNET_TESTS_ORACLES_H_
#define PROJNET_TESTS_ORACLES_H_

#include <cstddef>
#include <vector>

#include "projnet/random.h"
#include "projnet/tensor.h"

namespace projnet::oracle {

inline std::vector<std::size_t> unravel(std::size_t flat,
                                        const std::vector<std::size_t>& dims) {
  std::vector<std::size_t> idx(dims.size());
  for (std::size_t a = dims.size(); a-- > 0;) {
    idx[a] = flat % dims[a];
    flat /= dims[a];
  }
  return idx;
}

inline std::size_t ravel(const std::vector<std::size_t>& idx,
                         const std::vector<std::size_t>& dims) {
  std::size_t flat = 0;
  for (std::size_t a = 0; a < dims.size(); ++a) flat = flat * dims[a] + idx[a];
  return flat;
}

// out[o] = sum_t F[t] * Z[o + t - pad], out-of-range reads count as 0.
inline Tensor convolve(const Tensor& z, const Tensor& f, PadMode mode) {
  const auto& zd = z.shape().dims();
  const auto& fd = f.shape().dims();
  std::vector<std::size_t> od(zd.size());
  std::vector<long> pad(zd.size(), 0);
  for (std::size_t a = 0; a < zd.size(); ++a) {
    if (mode == PadMode::kValid) {
      od[a] = zd[a] - fd[a] + 1;
    } else {
      od[a] = zd[a];
      pad[a] = static_cast<long>((fd[a] - 1) / 2);
    }
  }
  Tensor out{Shape(od)};
  for (std::size_t o = 0; o < out.size(); ++o) {
    const auto oi = unravel(o, od);
    double acc = 0.0;
    for (std::size_t t = 0; t < f.size(); ++t) {
      const auto ti = unravel(t, fd);
      std::vector<std::size_t> zi(zd.size());
      bool inside = true;
      for (std::size_t a = 0; a < zd.size() && inside; ++a) {
        const long p = static_cast<long>(oi[a] + ti[a]) - pad[a];
        inside = p >= 0 && p < static_cast<long>(zd[a]);
        if (inside) zi[a] = static_cast<std::size_t>(p);
      }
      if (inside) acc += f[t] * z[ravel(zi, zd)];
    }
    out[o] = acc;
  }
  return out;
}

inline Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -2.0,
                            double hi = 2.0) {
  Tensor t(shape);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

inline ChannelStack random_stack(std::size_t d, const Shape& shape, Rng& rng) {
  std::vector<Tensor> c;
  for (std::size_t k = 0; k < d; ++k) c.push_back(random_tensor(shape, rng));
  return ChannelStack(std::move(c));
}

inline Shape random_shape(std::size_t rank, std::size_t lo, std::size_t hi,
                          Rng& rng) {
  std::vector<std::size_t> dims(rank);
  for (auto& e : dims) e = lo + rng.below(hi - lo + 1);
  return Shape(dims);
}

}  // namespace projnet::oracle

#endif  // PROJNET_TESTS_ORACLES_H_
