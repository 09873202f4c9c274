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

#include "crossdim/volume_io.hpp"

namespace crossdim {

/// One randomized transform: fires with probability p, parameter drawn
/// uniformly from [lo, hi].
struct RandomRange {
  bool enabled = true;
  double p = 0.5;
  double lo = 0;
  double hi = 0;
};

/// Parameter ranges of the augmentation transforms.
///   scaling      isotropic zoom factor
///   rotation     degrees, about each rotation axis of the grid
///   translation  voxels, per axis
///   shearing     off-diagonal affine coefficient, in-plane
///   window       window width as a fraction of the channel range; the level
///                shifts by up to window_level_shift of that range
///   noise        Gaussian standard deviation
struct AugmentConfig {
  RandomRange scaling{true, 0.5, 0.9, 1.1};
  RandomRange rotation{true, 0.5, -10.0, 10.0};
  RandomRange translation{true, 0.5, -4.0, 4.0};
  RandomRange shearing{true, 0.5, -0.1, 0.1};
  RandomRange window{true, 0.5, 0.8, 1.0};
  double window_level_shift = 0.1;
  RandomRange noise{true, 0.5, 0.0, 0.1};

  /// Sets every transform's probability.
  void set_probability(double p);
  /// Throws ConfigError for probabilities outside [0, 1] or non-finite ranges.
  void validate() const;
};

/// Seeded augmentation. Affine transforms compose into one resampling pass
/// about the grid center (linear for the image, nearest for labels, zero
/// outside). Window width/level and noise act on the image only. When no
/// transform fires the input is returned unchanged.
LabeledVolume augment(const LabeledVolume& v, const AugmentConfig& cfg, std::uint64_t seed);

}  // namespace crossdim
