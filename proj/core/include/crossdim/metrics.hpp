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
#include <optional>
#include <string>
#include <vector>

#include "crossdim/volume.hpp"

namespace crossdim {

struct DiceResult {
  double value = 1;
  bool vacuous = false;  // both masks empty
};

/// 2|A & B| / (|A| + |B|); both empty gives 1 flagged vacuous.
DiceResult dice(const Mask& a, const Mask& b);

/// 100 * ||B| - |A|| / |A| for ground truth A; empty when A is empty.
std::optional<double> ravd(const Mask& truth, const Mask& pred);

enum class Connectivity { six = 6, twenty_six = 26 };

/// Boundary voxels of a mask: foreground voxels with at least one background
/// neighbor (out of bounds counts as background). Points are voxel indices
/// scaled by spacing, in (z, y, x) millimetres.
struct SurfacePointSet {
  std::vector<std::array<double, 3>> points;
  /// Voxel indices of the points; empty for sets built from raw coordinates.
  std::vector<std::array<std::int64_t, 3>> voxels;
  Extents extents;
  Spacing spacing{1.0, 1.0, 1.0};

  bool empty() const noexcept { return points.empty(); }
  std::size_t size() const noexcept { return points.size(); }
  bool on_grid() const noexcept { return !voxels.empty() && voxels.size() == points.size(); }

  static SurfacePointSet from_points(std::vector<std::array<double, 3>> pts);
};

SurfacePointSet extract_surface(const Mask& mask, const Spacing& spacing, Connectivity conn = Connectivity::six);

struct SurfaceDistances {
  double mad = 0;   // symmetric mean surface distance (equal to assd)
  double assd = 0;  // average symmetric surface distance
  double mssd = 0;  // maximum symmetric surface distance
  double hd = 0;    // Hausdorff distance over the surfaces (equal to mssd)
};

/// Symmetric surface distances in millimetres; empty if either set is empty.
/// Sets extracted from grids of equal extents and spacing are measured with
/// an exact Euclidean distance transform; other sets by exhaustive search.
std::optional<SurfaceDistances> surface_distances(const SurfacePointSet& sa, const SurfacePointSet& sb);

/// Squared Euclidean distance (mm^2) from every voxel of the grid to the
/// nearest marked voxel; +inf everywhere when nothing is marked.
std::vector<double> squared_distance_transform(const std::vector<std::uint8_t>& marked, const Extents& extents,
                                               const Spacing& spacing);

/// One evaluated class: the union of `labels` forms the binary mask.
struct ClassSpec {
  std::string name;
  std::vector<std::int32_t> labels;
};

struct ClassMetrics {
  std::string name;
  DiceResult dice;
  std::optional<double> ravd_percent;
  std::optional<SurfaceDistances> distances;
  /// Space separated flags: "vacuous", "ravd-undefined", "surface-undefined".
  std::string flags() const;
};

struct CaseReport {
  std::string case_id;
  std::vector<ClassMetrics> classes;
};

/// Throws ConfigError for non-positive spacing, DimensionError for differing
/// extents, ConfigError for an empty class list.
CaseReport evaluate_case(const std::string& case_id, const LabelMap& pred, const LabelMap& truth,
                         const Spacing& spacing, const std::vector<ClassSpec>& classes,
                         Connectivity conn = Connectivity::six);

Mask class_mask(const LabelMap& labels, const ClassSpec& cls);

/// Brain-tumor regions as classes: WT {1,2,4}, TC {1,4}, ET {4}.
std::vector<ClassSpec> brats_region_classes();

}  // namespace crossdim
