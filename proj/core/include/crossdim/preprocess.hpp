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

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "crossdim/volume_io.hpp"

namespace crossdim {

/// Box of a crop within the original grid.
struct CropRecord {
  Extents original;
  std::array<std::int64_t, 3> offset{0, 0, 0};  // (z, y, x)
  Extents cropped;
};

/// Tight box around voxels that are nonzero in any channel, grown by
/// `margin` per side and clamped to the grid. Labels are cropped alike.
/// Throws ValidationError for an all-zero image.
std::pair<LabeledVolume, CropRecord> crop_nonzero(const LabeledVolume& v, std::int64_t margin = 0);

/// Places a cropped label map back at its original position; zero elsewhere.
LabelMap reembed(const LabelMap& cropped, const CropRecord& record);

/// Places a cropped [C, ...] tensor back into a zero tensor of the original extents.
Tensor<double> reembed(const Tensor<double>& cropped, const CropRecord& record);

/// Per channel, standardizes nonzero voxels with their mean and population
/// standard deviation; zero voxels stay exactly 0. Throws ValidationError
/// when a channel has fewer than 2 nonzero voxels and NumericError (division
/// guard) when their variance is 0.
Tensor<double> zscore_nonzero(const Tensor<double>& image);

/// Standardizes the whole image with its mean and population standard deviation.
Tensor<double> sample_normalize(const Tensor<double>& image);

enum class AnchorPolicy { center, random };

/// Where a patch sits inside its source grid.
struct Placement {
  std::array<std::int64_t, 3> offset{0, 0, 0};
  Extents size;
  Extents source;
};

/// Patch anchor for a size within a source grid. Center uses
/// floor((extent - size) / 2); random draws uniformly from a generator
/// seeded with `seed`. Throws ConfigError when size exceeds the source.
Placement place_patch(const Extents& source, const Extents& size, AnchorPolicy policy, std::uint64_t seed = 0);

/// Copies the placement window out of a [C, ...] image.
Tensor<double> extract_patch(const Tensor<double>& image, const Placement& p);
LabelMap extract_patch(const LabelMap& labels, const Placement& p);

/// Overlapping tiles covering the whole grid with the given stride; the last
/// tile of each axis is aligned to the far border.
std::vector<Placement> tile_placements(const Extents& source, const Extents& size, const Extents& stride);

/// Accumulates per-patch [C, ...] predictions and averages overlaps.
class PatchStitcher {
 public:
  PatchStitcher(std::int64_t channels, Extents source, int spatial_rank);

  void add(const Tensor<double>& patch, const Placement& p);
  /// [C, ...] averaged result; voxels never covered are 0.
  Tensor<double> result() const;

 private:
  std::int64_t channels_;
  Extents source_;
  int rank_;
  std::vector<double> sum_;
  std::vector<std::int32_t> count_;
};

/// Spatial extents of a [C, H, W] or [C, D, H, W] tensor.
Extents image_extents(const Tensor<double>& image);

}  // namespace crossdim
