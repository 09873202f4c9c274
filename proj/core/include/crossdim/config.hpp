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
#include <vector>

#include "crossdim/augment.hpp"
#include "crossdim/builders.hpp"
#include "crossdim/labels.hpp"
#include "crossdim/loss.hpp"
#include "crossdim/optim.hpp"
#include "crossdim/preprocess.hpp"
#include "crossdim/schedule.hpp"

namespace crossdim {

/// How a label map becomes the network target.
///   binary:  foreground = label > 0; one channel (sigmoid) or [bg, fg] (softmax)
///   onehot:  channel c marks label c; labels must lie in [0, n_classes)
///   regions: nested WT / TC / ET channels
enum class TargetEncoding { binary, onehot, regions };

std::string to_string(TargetEncoding t);
TargetEncoding target_encoding_from_string(const std::string& s);

enum class Normalization { none, zscore_nonzero, sample };

std::string to_string(Normalization n);
Normalization normalization_from_string(const std::string& s);

/// Scalar type of a run: "single" (float) or "double".
enum class Precision { f32, f64 };

std::string to_string(Precision p);
Precision precision_from_string(const std::string& s);

struct OptimSection {
  NadamConfig nadam;
  bool lookahead = true;
  LookAheadConfig lookahead_cfg;
};

struct DataSection {
  std::filesystem::path manifest;
  TargetEncoding target = TargetEncoding::binary;
  Normalization normalize = Normalization::zscore_nonzero;
  bool crop = true;
  std::int64_t crop_margin = 0;
  AnchorPolicy anchor = AnchorPolicy::random;
  bool augment = false;
  AugmentConfig augmentation;
  /// Inference tiling stride per spatial axis; empty means half the patch.
  std::vector<std::int64_t> infer_stride;
  double threshold = 0.5;
  double et_min_volume = 0;
  VolumeUnit et_unit = VolumeUnit::voxels;
};

struct RunSection {
  int epochs = 5;
  std::uint64_t seed = 0;
  std::filesystem::path out = "run";
  Precision precision = Precision::f32;
  /// Optimizer steps per epoch; 0 means one step per training case.
  int steps_per_epoch = 0;
  /// Optional weight source copied into matching entries after initialization.
  std::filesystem::path init_checkpoint;
};

struct RunConfig {
  ArchConfig arch;
  OptimSection optim;
  LrSchedule schedule;
  DataSection data;
  LossConfig loss;
  RunSection run;

  /// Patch extents derived from the architecture input.
  Extents patch() const;
  /// Cross-section checks; throws ConfigError.
  void validate() const;
};

/// Parses `[section]` / `key = value` text. Comments start with '#' or ';'.
/// Unknown sections or keys throw ConfigError naming the line. Relative paths
/// resolve against `base_dir`; when `check_paths` is set every referenced path
/// must exist.
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir = {},
                           bool check_paths = true);
RunConfig load_run_config(const std::filesystem::path& path, bool check_paths = true);

/// Complete resolved configuration; parse_run_config(to_ini(c)) == c.
std::string to_ini(const RunConfig& cfg);

}  // namespace crossdim
