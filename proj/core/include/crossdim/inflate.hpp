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

// Cross-dimensional weight reuse: depth replication of 2D kernels into 3D
// kernels, and name-based import of pretrained entries into a network store.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "crossdim/weight_store.hpp"

namespace crossdim {

struct InflationPlan {
  int depth = 3;
  InflationMode mode = InflationMode::replicate;
  /// Drop running statistics and relabel batch-norm entries as instance-norm
  /// affine parameters.
  bool norm_transfer = true;
  /// Per-kernel depth overrides keyed by entry name.
  std::map<std::string, int> depth_overrides;

  int depth_for(const std::string& name) const {
    auto it = depth_overrides.find(name);
    return it == depth_overrides.end() ? depth : it->second;
  }
};

/// [out, in, kh, kw] -> [out, in, kd, kh, kw]; every depth slice is the 2D
/// kernel (replicate) or the 2D kernel divided by kd (replicate-scaled).
template <typename T>
Tensor<T> inflate_kernel(const Tensor<T>& k2, int kd, InflationMode mode = InflationMode::replicate);

/// Inflates every 2D conv kernel of a store. Biases and affine parameters are
/// copied; the source store is never modified.
template <typename T>
WeightStore<T> inflate_store(const WeightStore<T>& s2, const InflationPlan& plan);

struct InflationReport {
  int depth = 1;
  InflationMode mode = InflationMode::replicate;
  int trials = 0;
  /// max over trials of ||y3d - expected||_inf / ||expected||_inf
  double max_rel_error = 0;
  double tolerance = 1e-6;
  bool pass = false;
};

/// Checks the depth-constant-input identity of inflated kernels in double
/// precision: with valid padding, every output depth slice of the 3D conv
/// equals kd * conv2d (replicate) or conv2d (replicate-scaled).
InflationReport verify_inflation_equivalence(const Tensor<double>& k2, int kd, int trials,
                                             InflationMode mode = InflationMode::replicate,
                                             std::uint64_t seed = 0);

struct TransferOptions {
  std::string source_prefix;       // only source entries with this prefix are imported
  std::string destination_prefix;  // replaces source_prefix in the destination name
};

/// Copies every selected source entry into the destination entry of the same
/// (re-prefixed) name. Throws ValidationError listing unmatched or
/// shape-mismatched entries; nothing is copied in that case.
template <typename T>
std::vector<std::string> transfer_weights(WeightStore<T>& destination, const WeightStore<T>& source,
                                          const TransferOptions& options = {});

}  // namespace crossdim
