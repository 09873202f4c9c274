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
#include <string>
#include <vector>

#include "crossdim/errors.hpp"

namespace crossdim {

/// Grid extents in (depth, height, width) order; 2D grids have depth 1.
struct Extents {
  std::int64_t depth = 1;
  std::int64_t height = 1;
  std::int64_t width = 1;

  std::int64_t numel() const noexcept { return depth * height * width; }
  bool operator==(const Extents&) const = default;
  std::string str() const {
    return std::to_string(depth) + "x" + std::to_string(height) + "x" + std::to_string(width);
  }
};

/// Physical voxel size in millimetres, ordered (z, y, x) like Extents.
using Spacing = std::array<double, 3>;

/// Single-channel scalar grid, row-major over (z, y, x).
template <typename V>
struct Volume {
  Extents extents;
  std::vector<V> data;

  Volume() = default;
  explicit Volume(Extents e, V fill = V{}) : extents(e), data(static_cast<std::size_t>(e.numel()), fill) {
    if (e.depth < 1 || e.height < 1 || e.width < 1) throw DimensionError("volume extents must be positive, got " + e.str());
  }

  std::size_t index(std::int64_t z, std::int64_t y, std::int64_t x) const noexcept {
    return static_cast<std::size_t>((z * extents.height + y) * extents.width + x);
  }
  V& at(std::int64_t z, std::int64_t y, std::int64_t x) { return data[index(z, y, x)]; }
  const V& at(std::int64_t z, std::int64_t y, std::int64_t x) const { return data[index(z, y, x)]; }
  std::size_t size() const noexcept { return data.size(); }

  bool operator==(const Volume&) const = default;
};

using Mask = Volume<std::uint8_t>;
using LabelMap = Volume<std::int32_t>;

inline void require_same_extents(const Extents& a, const Extents& b, const char* what) {
  if (!(a == b)) throw DimensionError(std::string(what) + ": extents " + a.str() + " and " + b.str() + " differ");
}

inline std::int64_t count_foreground(const Mask& m) {
  std::int64_t n = 0;
  for (auto v : m.data) n += v != 0;
  return n;
}

}  // namespace crossdim
