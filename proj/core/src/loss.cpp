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

#include "crossdim/loss.hpp"

#include <cmath>
#include <vector>

namespace crossdim {

template <typename T>
LossResult<T> compound_loss(const Tensor<T>& pred, const Tensor<T>& target, const LossConfig& cfg) {
  if (pred.shape() != target.shape()) {
    throw DimensionError("loss: prediction " + shape_to_string(pred.shape()) + " and target " +
                         shape_to_string(target.shape()) + " differ");
  }
  if (pred.rank() < 3) throw DimensionError("loss: expected [N, C, spatial...], got " + shape_to_string(pred.shape()));
  if (!(cfg.epsilon > 0) || !(cfg.log_floor > 0) || cfg.log_floor >= 1) {
    throw ConfigError("loss: epsilon must be > 0 and log floor in (0, 1)");
  }
  const std::int64_t n = pred.dim(0), c = pred.dim(1);
  const std::int64_t plane = static_cast<std::int64_t>(pred.numel()) / (n * c);
  const std::int64_t coords = n * plane;
  const T* y = pred.data().data();
  const T* g = target.data().data();
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    if (!(y[i] >= T(0) && y[i] <= T(1))) {
      throw DomainError("loss: prediction " + std::to_string(static_cast<double>(y[i])) + " at flat index " +
                        std::to_string(i) + " lies outside [0, 1]");
    }
    if (!(g[i] >= T(0) && g[i] <= T(1))) {
      throw DomainError("loss: target " + std::to_string(static_cast<double>(g[i])) + " at flat index " +
                        std::to_string(i) + " lies outside [0, 1]");
    }
  }

  std::vector<double> inter(static_cast<std::size_t>(c)), denom(static_cast<std::size_t>(c), cfg.epsilon);
  double bce = 0;
  const double floor = cfg.log_floor;
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t k = 0; k < c; ++k) {
      const std::int64_t off = (b * c + k) * plane;
      double p = 0, s = 0;
      for (std::int64_t i = 0; i < plane; ++i) {
        const double yi = y[off + i], gi = g[off + i];
        p += yi * gi;
        s += yi + gi;
        bce -= gi * std::log(std::max(yi, floor)) + (1 - gi) * std::log(std::max(1 - yi, floor));
      }
      inter[static_cast<std::size_t>(k)] += p;
      denom[static_cast<std::size_t>(k)] += s;
    }
  const double cnt = static_cast<double>(c * coords);
  LossResult<T> r;
  double overlap = 0;
  for (std::int64_t k = 0; k < c; ++k) overlap += inter[static_cast<std::size_t>(k)] / denom[static_cast<std::size_t>(k)];
  r.dice_term = 1 - 2.0 / static_cast<double>(c) * overlap;
  r.bce_term = bce / cnt;
  r.loss = r.dice_term + r.bce_term;

  r.grad = Tensor<T>(pred.shape());
  T* gr = r.grad.data().data();
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t k = 0; k < c; ++k) {
      const double P = inter[static_cast<std::size_t>(k)], D = denom[static_cast<std::size_t>(k)];
      const std::int64_t off = (b * c + k) * plane;
      for (std::int64_t i = 0; i < plane; ++i) {
        const double yi = y[off + i], gi = g[off + i];
        double d = -2.0 / static_cast<double>(c) * (gi * D - P) / (D * D);
        double dl = 0;
        if (yi > floor) dl -= gi / yi;
        if (1 - yi > floor) dl += (1 - gi) / (1 - yi);
        d += dl / cnt;
        gr[off + i] = static_cast<T>(d);
      }
    }
  return r;
}

template LossResult<float> compound_loss(const Tensor<float>&, const Tensor<float>&, const LossConfig&);
template LossResult<double> compound_loss(const Tensor<double>&, const Tensor<double>&, const LossConfig&);

}  // namespace crossdim
