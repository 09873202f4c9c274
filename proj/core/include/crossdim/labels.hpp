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

#include <cstdint>

#include "crossdim/tensor.hpp"
#include "crossdim/volume.hpp"

namespace crossdim {

/// Brain-tumor label values: 1 necrotic/non-enhancing core, 2 edema,
/// 4 enhancing tumor.
inline constexpr std::int32_t kLabelNet = 1;
inline constexpr std::int32_t kLabelEdema = 2;
inline constexpr std::int32_t kLabelEt = 4;

/// Nested tumor regions: whole tumor, tumor core, enhancing tumor.
struct RegionChannels {
  Mask wt;
  Mask tc;
  Mask et;
};

/// wt = {1,2,4}, tc = {1,4}, et = {4}. Throws ValidationError listing every
/// label value outside {0, 1, 2, 4}.
RegionChannels region_remap(const LabelMap& labels);

/// Channels stacked as a [1, 3, D, H, W] tensor in (wt, tc, et) order.
template <typename T>
Tensor<T> regions_to_tensor(const RegionChannels& ch);

/// Thresholds a [1, 3, D, H, W] (or [3, D, H, W]) probability tensor at
/// `threshold`; a voxel is foreground when p >= threshold.
template <typename T>
RegionChannels binarize_regions(const Tensor<T>& probs, double threshold = 0.5);

enum class VolumeUnit { voxels, mm3 };

struct ReconstructOptions {
  /// ET volumes strictly below this are relabeled as necrotic core. 0 disables.
  double et_min_volume = 0;
  VolumeUnit unit = VolumeUnit::voxels;
  Spacing spacing{1.0, 1.0, 1.0};
};

struct Reconstruction {
  LabelMap labels;
  double et_volume = 0;       // in the configured unit, measured after repair
  bool et_suppressed = false;  // true when the ET threshold fired
  std::int64_t repaired_voxels = 0;  // voxels added by the nesting repair
};

/// Repairs nesting (tc |= et, wt |= tc), applies the ET volume rule, then
/// emits labels: et -> 4, tc & !et -> 1, wt & !tc -> 2, else 0.
Reconstruction reconstruct_labels(const RegionChannels& ch, const ReconstructOptions& opts = {});

}  // namespace crossdim
