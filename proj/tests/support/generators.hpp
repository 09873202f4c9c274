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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

#include "crossdim/volume.hpp"

namespace crossdim::oracle {

// Mask pairs of up to 16^3 voxels: sparse noise, boxes, balls, and the empty
// and full extremes, with the second mask a perturbed copy or independent.
struct MaskPair {
  Mask a, b;
  Spacing spacing;
};

inline Mask random_mask(const Extents& e, std::mt19937_64& rng) {
  Mask m(e);
  std::uniform_int_distribution<int> kind(0, 9);
  std::uniform_real_distribution<double> u(0, 1);
  const int k = kind(rng);
  if (k == 0) return m;
  if (k == 1) {
    std::fill(m.data.begin(), m.data.end(), 1);
    return m;
  }
  if (k <= 3) {
    const double p = 0.05 + 0.5 * u(rng);
    for (auto& v : m.data) v = u(rng) < p;
    return m;
  }
  const int shapes = 1 + static_cast<int>(u(rng) * 3);
  for (int s = 0; s < shapes; ++s) {
    const double cz = u(rng) * e.depth, cy = u(rng) * e.height, cx = u(rng) * e.width;
    const double r = 1 + u(rng) * 5;
    const bool ball = k % 2 == 0;
    for (std::int64_t z = 0; z < e.depth; ++z)
      for (std::int64_t y = 0; y < e.height; ++y)
        for (std::int64_t x = 0; x < e.width; ++x) {
          const double dz = e.depth == 1 ? 0 : z - cz, dy = y - cy, dx = x - cx;
          const bool inside = ball ? dz * dz + dy * dy + dx * dx <= r * r
                                   : std::abs(dz) <= r && std::abs(dy) <= r && std::abs(dx) <= r * 0.7;
          if (inside) m.at(z, y, x) = 1;
        }
  }
  return m;
}

inline MaskPair random_pair(std::mt19937_64& rng, std::int64_t max_extent = 16) {
  std::uniform_int_distribution<std::int64_t> ext(1, max_extent);
  std::uniform_real_distribution<double> u(0, 1);
  Extents e{u(rng) < 0.2 ? 1 : ext(rng), ext(rng), ext(rng)};
  MaskPair p{random_mask(e, rng), Mask(e), {0.5 + 2 * u(rng), 0.5 + 2 * u(rng), 0.5 + 2 * u(rng)}};
  if (u(rng) < 0.5) {
    p.b = p.a;
    for (auto& v : p.b.data)
      if (u(rng) < 0.1) v = !v;
  } else {
    p.b = random_mask(e, rng);
  }
  return p;
}

}  // namespace crossdim::oracle
