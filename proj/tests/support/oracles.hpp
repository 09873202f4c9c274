// Copyright 2026 The crossdim Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Independent reference implementations used as test oracles. They follow
// the textbook definitions directly and share no code with the library.
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "crossdim/metrics.hpp"
#include "crossdim/tensor.hpp"
#include "crossdim/builders.hpp"

namespace crossdim::oracle {

Tensor<double> random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0);

/// y[n,o,p] = b[o] + sum_{i,k} x[n,i,p*s - pad + k] * w[o,i,k] per spatial axis.
Tensor<double> conv(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>* bias,
                    const std::vector<int>& stride, const std::vector<int>& padding);

/// Scatter form: y[n,o,p*s - pad + k] += x[n,i,p] * w[i,o,k]; then bias.
Tensor<double> transposed_conv(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>* bias,
                               const std::vector<int>& stride, const std::vector<int>& padding);

/// Central differences of a scalar function over every coordinate of x.
std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                     std::vector<double> x, double h = 1e-6);

/// max_i |a_i - b_i| / max(max_i |a_i|, max_i |b_i|, floor).
double max_rel_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-8);

struct Counts {
  std::int64_t a = 0, b = 0, both = 0;
};
Counts count(const Mask& a, const Mask& b);
/// 2|A&B|/(|A|+|B|), 1 when both are empty.
double dice(const Mask& a, const Mask& b);
std::optional<double> ravd(const Mask& truth, const Mask& pred);

/// Foreground voxels with a background or out-of-bounds neighbor, found by
/// scanning the 6 face or 26 full neighbors. Depth-1 grids use in-plane
/// neighbors only.
std::vector<std::array<std::int64_t, 3>> surface(const Mask& m, int connectivity);

/// Symmetric surface distances by exhaustive search over voxel surfaces.
std::optional<SurfaceDistances> surface_distances(const Mask& a, const Mask& b, const Spacing& spacing,
                                                  int connectivity);

/// Trainable parameter count of a network, derived by hand from its layer
/// list rather than from the built graph.
std::int64_t parameter_count(const ArchConfig& cfg);

inline std::vector<double> values(const Tensor<double>& t) { return {t.data().begin(), t.data().end()}; }
inline Tensor<double> with_values(const Tensor<double>& like, const std::vector<double>& v) {
  return Tensor<double>(like.shape(), v);
}
/// sum_i a_i * b_i
inline double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace crossdim::oracle
