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

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "crossdim/tensor.hpp"
#include "crossdim/volume.hpp"

namespace crossdim {

/// Image plus optional labels. The image is [C, D, H, W] for volumes and
/// [C, H, W] for planar images; labels span the spatial extents.
struct LabeledVolume {
  Tensor<double> image;
  Spacing spacing{1.0, 1.0, 1.0};  // (z, y, x) millimetres; z is 1 for planar images
  std::optional<LabelMap> labels;
  std::string case_id;

  int spatial_rank() const { return static_cast<int>(image.rank()) - 1; }
  std::int64_t channels() const { return image.dim(0); }
  Extents extents() const;
  /// Throws ValidationError if spacing or label extents break the invariants.
  void validate() const;
};

/// On-disk scalar types (NIfTI datatype codes).
enum class VoxelType { uint8 = 2, int16 = 4, int32 = 8, float32 = 16, float64 = 64 };

/// Reads NIfTI-1 (.nii, .nii.gz) or MetaImage (.mhd + raw). A 4th NIfTI axis
/// or MetaImage ElementNumberOfChannels becomes the channel axis. Axes are
/// taken in stored order (x fastest); orientation matrices are ignored.
/// Throws FormatError naming the offending header field and IoError on
/// missing or truncated data.
LabeledVolume load_volume(const std::filesystem::path& path);

/// Reads an integer-valued volume (e.g. a label file) as a LabelMap.
LabelMap load_label_map(const std::filesystem::path& path, Spacing* spacing = nullptr);

/// Writes the image of `v` (channels on the 4th NIfTI axis). Format follows
/// the extension: .nii, .nii.gz or .mhd (with a sibling .raw). Atomic.
void save_volume(const std::filesystem::path& path, const LabeledVolume& v, VoxelType type = VoxelType::float32);

/// Writes a label map; uint8 unless a value exceeds 255.
void save_label_map(const std::filesystem::path& path, const LabelMap& labels, const Spacing& spacing);

/// Dataset manifest row: `case_id,images,label,split` where `images` lists
/// per-channel files separated by ';' and `label` may be empty.
struct ManifestRow {
  std::string case_id;
  std::vector<std::string> images;
  std::string label;
  std::string split;
};

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows);

/// Loads every channel file of a row (relative paths resolve against
/// `base_dir`), stacks them along the channel axis and attaches labels.
LabeledVolume load_case(const ManifestRow& row, const std::filesystem::path& base_dir);

}  // namespace crossdim
