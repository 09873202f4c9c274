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

#include "crossdim/labels.hpp"

#include <set>
#include <sstream>

namespace crossdim {

RegionChannels region_remap(const LabelMap& labels) {
  std::set<std::int32_t> bad;
  RegionChannels ch{Mask(labels.extents), Mask(labels.extents), Mask(labels.extents)};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::int32_t v = labels.data[i];
    switch (v) {
      case 0: break;
      case kLabelNet: ch.wt.data[i] = ch.tc.data[i] = 1; break;
      case kLabelEdema: ch.wt.data[i] = 1; break;
      case kLabelEt: ch.wt.data[i] = ch.tc.data[i] = ch.et.data[i] = 1; break;
      default: bad.insert(v);
    }
  }
  if (!bad.empty()) {
    std::ostringstream os;
    os << "label map contains values outside {0, 1, 2, 4}:";
    for (auto v : bad) os << ' ' << v;
    throw ValidationError(os.str());
  }
  return ch;
}

template <typename T>
Tensor<T> regions_to_tensor(const RegionChannels& ch) {
  require_same_extents(ch.wt.extents, ch.tc.extents, "regions_to_tensor");
  require_same_extents(ch.wt.extents, ch.et.extents, "regions_to_tensor");
  const Extents& e = ch.wt.extents;
  Tensor<T> t({1, 3, e.depth, e.height, e.width});
  const std::size_t n = ch.wt.size();
  const Mask* parts[] = {&ch.wt, &ch.tc, &ch.et};
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < n; ++i) t[c * n + i] = parts[c]->data[i] ? T(1) : T(0);
  return t;
}

template <typename T>
RegionChannels binarize_regions(const Tensor<T>& probs, double threshold) {
  const Shape& s = probs.shape();
  std::size_t off = 0;
  if (s.size() == 5 && s[0] == 1) off = 1;
  if (s.size() - off != 4 || s[off] != 3) {
    throw DimensionError("binarize_regions expects [1, 3, D, H, W], got " + shape_to_string(s));
  }
  const Extents e{s[off + 1], s[off + 2], s[off + 3]};
  RegionChannels ch{Mask(e), Mask(e), Mask(e)};
  Mask* parts[] = {&ch.wt, &ch.tc, &ch.et};
  const std::size_t n = static_cast<std::size_t>(e.numel());
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < n; ++i) parts[c]->data[i] = static_cast<double>(probs[c * n + i]) >= threshold;
  return ch;
}

Reconstruction reconstruct_labels(const RegionChannels& ch, const ReconstructOptions& opts) {
  require_same_extents(ch.wt.extents, ch.tc.extents, "reconstruct_labels");
  require_same_extents(ch.wt.extents, ch.et.extents, "reconstruct_labels");
  if (opts.et_min_volume < 0) throw ConfigError("et_min_volume must be >= 0");
  for (double s : opts.spacing)
    if (!(s > 0)) throw ConfigError("voxel spacing must be positive");
  const std::size_t n = ch.wt.size();
  Reconstruction r;
  r.labels = LabelMap(ch.wt.extents);
  std::vector<std::uint8_t> wt(n), tc(n), et(n);
  std::int64_t et_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    et[i] = ch.et.data[i] != 0;
    tc[i] = ch.tc.data[i] != 0 || et[i];
    wt[i] = ch.wt.data[i] != 0 || tc[i];
    r.repaired_voxels += (tc[i] && !ch.tc.data[i]) + (wt[i] && !ch.wt.data[i]);
    et_count += et[i];
  }
  const double voxel_mm3 = opts.spacing[0] * opts.spacing[1] * opts.spacing[2];
  r.et_volume = opts.unit == VolumeUnit::voxels ? static_cast<double>(et_count) : static_cast<double>(et_count) * voxel_mm3;
  r.et_suppressed = et_count > 0 && r.et_volume < opts.et_min_volume;
  if (r.et_suppressed) std::fill(et.begin(), et.end(), std::uint8_t{0});
  for (std::size_t i = 0; i < n; ++i) {
    std::int32_t v = 0;
    if (et[i]) {
      v = kLabelEt;
    } else if (tc[i]) {
      v = kLabelNet;
    } else if (wt[i]) {
      v = kLabelEdema;
    }
    r.labels.data[i] = v;
  }
  return r;
}

template Tensor<float> regions_to_tensor(const RegionChannels&);
template Tensor<double> regions_to_tensor(const RegionChannels&);
template RegionChannels binarize_regions(const Tensor<float>&, double);
template RegionChannels binarize_regions(const Tensor<double>&, double);

}  // namespace crossdim
