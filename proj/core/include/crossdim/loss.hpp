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

#pragma once

#include "crossdim/tensor.hpp"

namespace crossdim {

struct LossConfig {
  double epsilon = 1e-6;    // Dice denominator guard
  double log_floor = 1e-7;  // logarithm arguments are clamped below at this value
};

template <typename T>
struct LossResult {
  double loss = 0;
  double dice_term = 0;
  double bce_term = 0;
  Tensor<T> grad;  // d loss / d pred, same shape as pred
};

/// Dice plus binary cross-entropy over predictions shaped [N, C, spatial...]
/// with the class axis at 1.
///
///   dice_term = 1 - (2/C) sum_c  P_c / (Y_c + G_c + eps)
///   bce_term  = -1/(C*I) sum  g log(max(y, floor)) + (1-g) log(max(1-y, floor))
///
/// where P_c, Y_c, G_c sum y*g, y and g over every non-class coordinate and I
/// counts those coordinates. Throws DimensionError on a shape mismatch and
/// DomainError when pred or target leaves [0, 1].
template <typename T>
LossResult<T> compound_loss(const Tensor<T>& pred, const Tensor<T>& target, const LossConfig& cfg = {});

}  // namespace crossdim
