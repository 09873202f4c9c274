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

#include "crossdim/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "crossdim/labels.hpp"

namespace crossdim {

namespace {

struct Ball {
  std::array<double, 3> center;
  double radius;
};

Ball random_ball(const Extents& e, const SyntheticOptions& opts, std::mt19937_64& rng) {
  if (!(opts.radius_min > 0 && opts.radius_min <= opts.radius_max)) throw ConfigError("synthetic radius range is invalid");
  const bool planar = e.depth == 1;
  const double smallest = static_cast<double>(planar ? std::min(e.height, e.width) : std::min({e.depth, e.height, e.width}));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Ball b;
  b.radius = smallest * (opts.radius_min + (opts.radius_max - opts.radius_min) * unit(rng));
  const std::array<std::int64_t, 3> n{e.depth, e.height, e.width};
  for (int a = 0; a < 3; ++a) {
    if (a == 0 && planar) {
      b.center[a] = 0;
      continue;
    }
    const double lo = std::min(b.radius, (n[a] - 1) / 2.0);
    const double hi = std::max(lo, static_cast<double>(n[a] - 1) - b.radius);
    b.center[a] = lo + (hi - lo) * unit(rng);
  }
  return b;
}

double dist(const Ball& b, std::int64_t z, std::int64_t y, std::int64_t x) {
  const double dz = static_cast<double>(z) - b.center[0], dy = static_cast<double>(y) - b.center[1],
               dx = static_cast<double>(x) - b.center[2];
  return std::sqrt(dz * dz + dy * dy + dx * dx);
}

Shape image_shape(std::int64_t c, const Extents& e) {
  if (e.depth == 1) return {c, e.height, e.width};
  return {c, e.depth, e.height, e.width};
}

}  // namespace

LabeledVolume sphere_case(const Extents& e, std::int64_t channels, std::uint64_t seed, const SyntheticOptions& opts,
                          const std::string& case_id) {
  if (channels < 1) throw ConfigError("synthetic case needs at least one channel");
  std::mt19937_64 rng(seed);
  const Ball b = random_ball(e, opts, rng);
  std::normal_distribution<double> noise(0.0, opts.noise);
  LabeledVolume v;
  v.case_id = case_id;
  v.image = Tensor<double>(image_shape(channels, e));
  v.labels = LabelMap(e);
  const std::int64_t plane = e.numel();
  for (std::int64_t z = 0; z < e.depth; ++z)
    for (std::int64_t y = 0; y < e.height; ++y)
      for (std::int64_t x = 0; x < e.width; ++x) {
        const bool inside = dist(b, z, y, x) <= b.radius;
        const std::int64_t i = (z * e.height + y) * e.width + x;
        v.labels->data[static_cast<std::size_t>(i)] = inside ? 1 : 0;
        for (std::int64_t c = 0; c < channels; ++c) {
          const double mean = inside ? opts.foreground : opts.background;
          v.image[static_cast<std::size_t>(c * plane + i)] = mean + (opts.noise > 0 ? noise(rng) : 0.0);
        }
      }
  return v;
}

LabeledVolume nested_tumor_case(const Extents& e, std::uint64_t seed, const SyntheticOptions& opts,
                                const std::string& case_id) {
  std::mt19937_64 rng(seed);
  const Ball outer = random_ball(e, opts, rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double r_mid = outer.radius * (0.55 + 0.15 * unit(rng));
  const double r_core = r_mid * (0.45 + 0.15 * unit(rng));
  std::normal_distribution<double> noise(0.0, opts.noise);
  // Per-channel means for (background, edema, necrosis, enhancing).
  static const double contrast[4][4] = {
      {0.0, 0.4, 0.2, 1.0}, {0.0, 0.2, 0.6, 1.2}, {0.0, 1.0, 0.5, 0.4}, {0.0, 1.2, 0.3, 0.6}};
  LabeledVolume v;
  v.case_id = case_id;
  v.image = Tensor<double>(image_shape(4, e));
  v.labels = LabelMap(e);
  const std::int64_t plane = e.numel();
  for (std::int64_t z = 0; z < e.depth; ++z)
    for (std::int64_t y = 0; y < e.height; ++y)
      for (std::int64_t x = 0; x < e.width; ++x) {
        const double d = dist(outer, z, y, x);
        int region = 0;
        std::int32_t label = 0;
        if (d <= r_core) {
          region = 3;
          label = kLabelEt;
        } else if (d <= r_mid) {
          region = 2;
          label = kLabelNet;
        } else if (d <= outer.radius) {
          region = 1;
          label = kLabelEdema;
        }
        const std::int64_t i = (z * e.height + y) * e.width + x;
        v.labels->data[static_cast<std::size_t>(i)] = label;
        for (int c = 0; c < 4; ++c) {
          const double mean = opts.background + (opts.foreground - opts.background) * contrast[c][region];
          v.image[static_cast<std::size_t>(c * plane + i)] = mean + (opts.noise > 0 ? noise(rng) : 0.0);
        }
      }
  return v;
}

std::filesystem::path write_synthetic_dataset(const std::filesystem::path& dir, SyntheticKind kind, int count,
                                              const Extents& extents, std::int64_t channels, std::uint64_t seed,
                                              const SyntheticOptions& opts) {
  if (count < 1) throw ConfigError("synthetic dataset needs at least one case");
  std::filesystem::create_directories(dir);
  std::vector<ManifestRow> rows;
  for (int i = 0; i < count; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "case%03d", i);
    const LabeledVolume v = kind == SyntheticKind::sphere
                                ? sphere_case(extents, channels, seed + static_cast<std::uint64_t>(i), opts, id)
                                : nested_tumor_case(extents, seed + static_cast<std::uint64_t>(i), opts, id);
    const std::string image = std::string(id) + "_image.nii.gz";
    const std::string label = std::string(id) + "_label.nii.gz";
    save_volume(dir / image, v, VoxelType::float32);
    save_label_map(dir / label, *v.labels, v.spacing);
    rows.push_back({id, {image}, label, ""});
  }
  const auto manifest = dir / "manifest.csv";
  write_manifest(manifest, rows);
  return manifest;
}

}  // namespace crossdim
