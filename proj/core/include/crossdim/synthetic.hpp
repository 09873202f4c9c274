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
#include <filesystem>
#include <string>

#include "crossdim/volume_io.hpp"

namespace crossdim {

struct SyntheticOptions {
  double radius_min = 0.2;  // fraction of the smallest extent
  double radius_max = 0.35;
  double foreground = 1.0;  // mean intensity inside the object
  double background = 0.0;  // mean intensity outside
  double noise = 0.3;       // Gaussian noise standard deviation
};

/// Sphere (or disk when extents.depth == 1) in Gaussian noise. Labels are
/// 1 inside, 0 outside; every channel sees the same object.
LabeledVolume sphere_case(const Extents& extents, std::int64_t channels, std::uint64_t seed,
                          const SyntheticOptions& opts = {}, const std::string& case_id = "sphere");

/// Three concentric spheres with brain-tumor labels (outer shell 2, middle 1,
/// core 4) over four channels whose contrasts differ per region.
LabeledVolume nested_tumor_case(const Extents& extents, std::uint64_t seed, const SyntheticOptions& opts = {},
                                const std::string& case_id = "tumor");

enum class SyntheticKind { sphere, tumor };

/// Writes `count` cases as NIfTI files plus `manifest.csv` into `dir` and
/// returns the manifest path. Case i uses seed (seed + i).
std::filesystem::path write_synthetic_dataset(const std::filesystem::path& dir, SyntheticKind kind, int count,
                                              const Extents& extents, std::int64_t channels, std::uint64_t seed,
                                              const SyntheticOptions& opts = {});

}  // namespace crossdim
