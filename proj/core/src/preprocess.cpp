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

#include "crossdim/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace crossdim {

Extents image_extents(const Tensor<double>& image) {
  if (image.rank() == 3) return {1, image.dim(1), image.dim(2)};
  if (image.rank() == 4) return {image.dim(1), image.dim(2), image.dim(3)};
  throw DimensionError("image must be [C, H, W] or [C, D, H, W], got " + shape_to_string(image.shape()));
}

namespace {

Shape image_shape(std::int64_t c, const Extents& e, int rank) {
  if (rank == 2) return {c, e.height, e.width};
  return {c, e.depth, e.height, e.width};
}

/// Copies a box of `size` at `src_off` in `src` to `dst_off` in `dst`, per channel.
template <typename V>
void copy_box(const V* src, const Extents& se, std::array<std::int64_t, 3> src_off, V* dst, const Extents& de,
              std::array<std::int64_t, 3> dst_off, const Extents& size, std::int64_t channels) {
  for (std::int64_t c = 0; c < channels; ++c)
    for (std::int64_t z = 0; z < size.depth; ++z)
      for (std::int64_t y = 0; y < size.height; ++y) {
        const V* s = src + ((c * se.depth + z + src_off[0]) * se.height + y + src_off[1]) * se.width + src_off[2];
        V* d = dst + ((c * de.depth + z + dst_off[0]) * de.height + y + dst_off[1]) * de.width + dst_off[2];
        std::copy(s, s + size.width, d);
      }
}

}  // namespace

std::pair<LabeledVolume, CropRecord> crop_nonzero(const LabeledVolume& v, std::int64_t margin) {
  if (margin < 0) throw ConfigError("crop margin must be >= 0");
  const Extents e = v.extents();
  const std::int64_t c = v.channels();
  std::array<std::int64_t, 3> lo{e.depth, e.height, e.width}, hi{-1, -1, -1};
  const double* d = v.image.data().data();
  for (std::int64_t k = 0; k < c; ++k)
    for (std::int64_t z = 0; z < e.depth; ++z)
      for (std::int64_t y = 0; y < e.height; ++y)
        for (std::int64_t x = 0; x < e.width; ++x) {
          if (d[((k * e.depth + z) * e.height + y) * e.width + x] == 0) continue;
          const std::array<std::int64_t, 3> p{z, y, x};
          for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], p[a]);
            hi[a] = std::max(hi[a], p[a]);
          }
        }
  if (hi[0] < 0) throw ValidationError(v.case_id + ": cannot crop an all-zero image");
  const std::array<std::int64_t, 3> ext{e.depth, e.height, e.width};
  CropRecord r;
  r.original = e;
  std::array<std::int64_t, 3> size{};
  for (int a = 0; a < 3; ++a) {
    const std::int64_t b = std::max<std::int64_t>(0, lo[a] - margin);
    const std::int64_t t = std::min(ext[a] - 1, hi[a] + margin);
    r.offset[a] = b;
    size[a] = t - b + 1;
  }
  r.cropped = {size[0], size[1], size[2]};
  LabeledVolume out;
  out.case_id = v.case_id;
  out.spacing = v.spacing;
  out.image = Tensor<double>(image_shape(c, r.cropped, v.spatial_rank()));
  copy_box(d, e, r.offset, out.image.data().data(), r.cropped, {0, 0, 0}, r.cropped, c);
  if (v.labels) {
    LabelMap lm(r.cropped);
    copy_box(v.labels->data.data(), e, r.offset, lm.data.data(), r.cropped, {0, 0, 0}, r.cropped, 1);
    out.labels = std::move(lm);
  }
  return {std::move(out), r};
}

LabelMap reembed(const LabelMap& cropped, const CropRecord& record) {
  require_same_extents(cropped.extents, record.cropped, "reembed");
  LabelMap out(record.original);
  copy_box(cropped.data.data(), record.cropped, {0, 0, 0}, out.data.data(), record.original, record.offset,
           record.cropped, 1);
  return out;
}

Tensor<double> reembed(const Tensor<double>& cropped, const CropRecord& record) {
  require_same_extents(image_extents(cropped), record.cropped, "reembed");
  const int rank = static_cast<int>(cropped.rank()) - 1;
  Tensor<double> out(image_shape(cropped.dim(0), record.original, rank));
  copy_box(cropped.data().data(), record.cropped, {0, 0, 0}, out.data().data(), record.original, record.offset,
           record.cropped, cropped.dim(0));
  return out;
}

Tensor<double> zscore_nonzero(const Tensor<double>& image) {
  image_extents(image);
  Tensor<double> out = image;
  const std::int64_t c = image.dim(0);
  const std::size_t plane = image.numel() / static_cast<std::size_t>(c);
  for (std::int64_t k = 0; k < c; ++k) {
    double* p = out.data().data() + static_cast<std::size_t>(k) * plane;
    double sum = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < plane; ++i)
      if (p[i] != 0) {
        sum += p[i];
        ++n;
      }
    if (n < 2) throw ValidationError("zscore: channel " + std::to_string(k) + " has fewer than 2 nonzero voxels");
    const double mean = sum / static_cast<double>(n);
    double var = 0;
    for (std::size_t i = 0; i < plane; ++i)
      if (p[i] != 0) var += (p[i] - mean) * (p[i] - mean);
    var /= static_cast<double>(n);
    if (!(var > 0)) throw NumericError("division guard: zero variance among nonzero voxels of channel " + std::to_string(k));
    const double inv = 1.0 / std::sqrt(var);
    for (std::size_t i = 0; i < plane; ++i)
      if (p[i] != 0) p[i] = (p[i] - mean) * inv;
  }
  return out;
}

Tensor<double> sample_normalize(const Tensor<double>& image) {
  if (image.numel() < 2) throw ValidationError("sample normalization needs at least 2 voxels");
  double sum = 0;
  for (double v : image.data()) sum += v;
  const double mean = sum / static_cast<double>(image.numel());
  double var = 0;
  for (double v : image.data()) var += (v - mean) * (v - mean);
  var /= static_cast<double>(image.numel());
  if (!(var > 0)) throw NumericError("division guard: image has zero variance");
  const double inv = 1.0 / std::sqrt(var);
  Tensor<double> out = image;
  for (double& v : out.data()) v = (v - mean) * inv;
  return out;
}

Placement place_patch(const Extents& source, const Extents& size, AnchorPolicy policy, std::uint64_t seed) {
  const std::array<std::int64_t, 3> s{source.depth, source.height, source.width};
  const std::array<std::int64_t, 3> p{size.depth, size.height, size.width};
  Placement pl;
  pl.size = size;
  pl.source = source;
  std::mt19937_64 rng(seed);
  for (int a = 0; a < 3; ++a) {
    if (p[a] < 1 || p[a] > s[a]) {
      throw ConfigError("patch " + size.str() + " does not fit inside " + source.str());
    }
    const std::int64_t room = s[a] - p[a];
    if (policy == AnchorPolicy::center) {
      pl.offset[a] = room / 2;
    } else {
      pl.offset[a] = room == 0 ? 0 : std::uniform_int_distribution<std::int64_t>(0, room)(rng);
    }
  }
  return pl;
}

Tensor<double> extract_patch(const Tensor<double>& image, const Placement& p) {
  require_same_extents(image_extents(image), p.source, "extract_patch");
  const int rank = static_cast<int>(image.rank()) - 1;
  Tensor<double> out(image_shape(image.dim(0), p.size, rank));
  copy_box(image.data().data(), p.source, p.offset, out.data().data(), p.size, {0, 0, 0}, p.size, image.dim(0));
  return out;
}

LabelMap extract_patch(const LabelMap& labels, const Placement& p) {
  require_same_extents(labels.extents, p.source, "extract_patch");
  LabelMap out(p.size);
  copy_box(labels.data.data(), p.source, p.offset, out.data.data(), p.size, {0, 0, 0}, p.size, 1);
  return out;
}

std::vector<Placement> tile_placements(const Extents& source, const Extents& size, const Extents& stride) {
  const std::array<std::int64_t, 3> s{source.depth, source.height, source.width};
  const std::array<std::int64_t, 3> p{size.depth, size.height, size.width};
  const std::array<std::int64_t, 3> st{stride.depth, stride.height, stride.width};
  std::array<std::vector<std::int64_t>, 3> starts;
  for (int a = 0; a < 3; ++a) {
    if (p[a] < 1 || p[a] > s[a]) throw ConfigError("tile " + size.str() + " does not fit inside " + source.str());
    if (st[a] < 1) throw ConfigError("tile stride must be positive");
    for (std::int64_t o = 0;; o += st[a]) {
      if (o + p[a] >= s[a]) {
        starts[a].push_back(s[a] - p[a]);
        break;
      }
      starts[a].push_back(o);
    }
  }
  std::vector<Placement> out;
  for (auto z : starts[0])
    for (auto y : starts[1])
      for (auto x : starts[2]) out.push_back(Placement{{z, y, x}, size, source});
  return out;
}

PatchStitcher::PatchStitcher(std::int64_t channels, Extents source, int spatial_rank)
    : channels_(channels),
      source_(source),
      rank_(spatial_rank),
      sum_(static_cast<std::size_t>(channels * source.numel()), 0.0),
      count_(static_cast<std::size_t>(source.numel()), 0) {}

void PatchStitcher::add(const Tensor<double>& patch, const Placement& p) {
  require_same_extents(p.source, source_, "PatchStitcher");
  require_same_extents(image_extents(patch), p.size, "PatchStitcher");
  if (patch.dim(0) != channels_) throw DimensionError("PatchStitcher: channel count mismatch");
  const double* src = patch.data().data();
  for (std::int64_t c = 0; c < channels_; ++c)
    for (std::int64_t z = 0; z < p.size.depth; ++z)
      for (std::int64_t y = 0; y < p.size.height; ++y)
        for (std::int64_t x = 0; x < p.size.width; ++x) {
          const std::int64_t vox = ((z + p.offset[0]) * source_.height + y + p.offset[1]) * source_.width + x + p.offset[2];
          sum_[static_cast<std::size_t>(c * source_.numel() + vox)] += *src++;
          if (c == 0) ++count_[static_cast<std::size_t>(vox)];
        }
}

Tensor<double> PatchStitcher::result() const {
  Tensor<double> out(image_shape(channels_, source_, rank_));
  const std::int64_t n = source_.numel();
  for (std::int64_t c = 0; c < channels_; ++c)
    for (std::int64_t i = 0; i < n; ++i) {
      const auto k = count_[static_cast<std::size_t>(i)];
      out[static_cast<std::size_t>(c * n + i)] = k ? sum_[static_cast<std::size_t>(c * n + i)] / k : 0.0;
    }
  return out;
}

}  // namespace crossdim
