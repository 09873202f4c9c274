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

#include "crossdim/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

namespace crossdim {

void AugmentConfig::set_probability(double p) {
  for (RandomRange* r : {&scaling, &rotation, &translation, &shearing, &window, &noise}) r->p = p;
}

void AugmentConfig::validate() const {
  for (const RandomRange* r : {&scaling, &rotation, &translation, &shearing, &window, &noise}) {
    if (!(r->p >= 0 && r->p <= 1)) throw ConfigError("augmentation probability must lie in [0, 1]");
    if (!std::isfinite(r->lo) || !std::isfinite(r->hi) || r->lo > r->hi) {
      throw ConfigError("augmentation range must be finite with lo <= hi");
    }
  }
  if (scaling.lo <= 0) throw ConfigError("augmentation scaling must be positive");
  if (window.lo <= 0) throw ConfigError("augmentation window width must be positive");
  if (noise.lo < 0) throw ConfigError("augmentation noise sigma must be >= 0");
  if (!(window_level_shift >= 0) || !std::isfinite(window_level_shift)) throw ConfigError("window level shift must be >= 0");
}

namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 identity() { return {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}; }

Mat3 mul(const Mat3& a, const Mat3& b) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r[i][j] += a[i][k] * b[k][j];
  return r;
}

/// Rotation by `deg` in the plane of axes (a, b).
Mat3 rotation(int a, int b, double deg) {
  Mat3 r = identity();
  const double t = deg * std::numbers::pi / 180.0;
  r[a][a] = std::cos(t);
  r[a][b] = -std::sin(t);
  r[b][a] = std::sin(t);
  r[b][b] = std::cos(t);
  return r;
}

class Draw {
 public:
  explicit Draw(std::uint64_t seed) : rng_(seed) {}
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  double in(const RandomRange& r) { return r.lo + (r.hi - r.lo) * uniform(); }
  bool fires(const RandomRange& r) {
    const double u = uniform();
    return r.enabled && u < r.p;
  }
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace

LabeledVolume augment(const LabeledVolume& v, const AugmentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  v.validate();
  const Extents e = v.extents();
  const bool planar = v.spatial_rank() == 2;
  Draw draw(seed);

  // Affine part, mapping output coordinates to source coordinates (z, y, x).
  Mat3 m = identity();
  std::array<double, 3> shift{0, 0, 0};
  bool affine = false;
  if (draw.fires(cfg.scaling)) {
    const double s = draw.in(cfg.scaling);
    Mat3 sc = identity();
    for (int a = planar ? 1 : 0; a < 3; ++a) sc[a][a] = 1.0 / s;
    m = mul(m, sc);
    affine = true;
  }
  if (draw.fires(cfg.rotation)) {
    m = mul(m, rotation(1, 2, draw.in(cfg.rotation)));
    if (!planar) {
      m = mul(m, rotation(0, 2, draw.in(cfg.rotation)));
      m = mul(m, rotation(0, 1, draw.in(cfg.rotation)));
    }
    affine = true;
  }
  if (draw.fires(cfg.shearing)) {
    Mat3 sh = identity();
    sh[1][2] = draw.in(cfg.shearing);
    m = mul(m, sh);
    affine = true;
  }
  if (draw.fires(cfg.translation)) {
    for (int a = planar ? 1 : 0; a < 3; ++a) shift[a] = draw.in(cfg.translation);
    affine = true;
  }

  LabeledVolume out = v;
  if (affine) {
    const std::array<std::int64_t, 3> n{e.depth, e.height, e.width};
    const std::array<double, 3> c{(n[0] - 1) / 2.0, (n[1] - 1) / 2.0, (n[2] - 1) / 2.0};
    const std::int64_t channels = v.channels();
    const std::int64_t plane = e.numel();
    const double* src = v.image.data().data();
    double* dst = out.image.data().data();
    auto at = [&](std::int64_t ch, std::int64_t z, std::int64_t y, std::int64_t x) -> double {
      if (z < 0 || y < 0 || x < 0 || z >= n[0] || y >= n[1] || x >= n[2]) return 0.0;
      return src[ch * plane + (z * n[1] + y) * n[2] + x];
    };
    for (std::int64_t z = 0; z < n[0]; ++z)
      for (std::int64_t y = 0; y < n[1]; ++y)
        for (std::int64_t x = 0; x < n[2]; ++x) {
          const std::array<double, 3> d{static_cast<double>(z) - c[0], static_cast<double>(y) - c[1],
                                        static_cast<double>(x) - c[2]};
          std::array<double, 3> s{};
          for (int i = 0; i < 3; ++i) s[i] = m[i][0] * d[0] + m[i][1] * d[1] + m[i][2] * d[2] + c[i] + shift[i];
          const std::int64_t out_idx = (z * n[1] + y) * n[2] + x;
          std::array<std::int64_t, 3> base{};
          std::array<double, 3> frac{};
          for (int i = 0; i < 3; ++i) {
            const double f = std::floor(s[i]);
            base[i] = static_cast<std::int64_t>(f);
            frac[i] = s[i] - f;
          }
          for (std::int64_t ch = 0; ch < channels; ++ch) {
            double acc = 0;
            for (int dz = 0; dz < 2; ++dz) {
              const double wz = dz ? frac[0] : 1 - frac[0];
              if (wz == 0) continue;
              for (int dy = 0; dy < 2; ++dy) {
                const double wy = dy ? frac[1] : 1 - frac[1];
                if (wy == 0) continue;
                for (int dx = 0; dx < 2; ++dx) {
                  const double wx = dx ? frac[2] : 1 - frac[2];
                  if (wx == 0) continue;
                  acc += wz * wy * wx * at(ch, base[0] + dz, base[1] + dy, base[2] + dx);
                }
              }
            }
            dst[ch * plane + out_idx] = acc;
          }
          if (v.labels) {
            const std::int64_t lz = std::llround(s[0]), ly = std::llround(s[1]), lx = std::llround(s[2]);
            const bool inside = lz >= 0 && ly >= 0 && lx >= 0 && lz < n[0] && ly < n[1] && lx < n[2];
            out.labels->data[static_cast<std::size_t>(out_idx)] = inside ? v.labels->at(lz, ly, lx) : 0;
          }
        }
  }

  if (draw.fires(cfg.window)) {
    const double width_fraction = draw.in(cfg.window);
    const double level_shift = (2 * draw.uniform() - 1) * cfg.window_level_shift;
    const std::int64_t plane = e.numel();
    for (std::int64_t ch = 0; ch < v.channels(); ++ch) {
      double* p = out.image.data().data() + ch * plane;
      const auto [lo_it, hi_it] = std::minmax_element(p, p + plane);
      const double lo = *lo_it, range = *hi_it - *lo_it;
      if (!(range > 0)) continue;
      const double width = width_fraction * range;
      const double level = lo + range / 2 + level_shift * range;
      const double start = level - width / 2;
      for (std::int64_t i = 0; i < plane; ++i) p[i] = lo + range * std::clamp((p[i] - start) / width, 0.0, 1.0);
    }
  }

  if (draw.fires(cfg.noise)) {
    const double sigma = draw.in(cfg.noise);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& x : out.image.data()) x += sigma * normal(draw.engine());
  }
  return out;
}

}  // namespace crossdim
