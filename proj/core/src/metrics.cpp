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

#include "crossdim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace crossdim {

DiceResult dice(const Mask& a, const Mask& b) {
  require_same_extents(a.extents, b.extents, "dice");
  std::int64_t na = 0, nb = 0, both = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a.data[i] != 0, y = b.data[i] != 0;
    na += x;
    nb += y;
    both += x && y;
  }
  if (na + nb == 0) return {1.0, true};
  return {2.0 * static_cast<double>(both) / static_cast<double>(na + nb), false};
}

std::optional<double> ravd(const Mask& truth, const Mask& pred) {
  require_same_extents(truth.extents, pred.extents, "ravd");
  const std::int64_t a = count_foreground(truth), b = count_foreground(pred);
  if (a == 0) return std::nullopt;
  return 100.0 * static_cast<double>(std::llabs(b - a)) / static_cast<double>(a);
}

SurfacePointSet SurfacePointSet::from_points(std::vector<std::array<double, 3>> pts) {
  SurfacePointSet s;
  s.points = std::move(pts);
  return s;
}

SurfacePointSet extract_surface(const Mask& mask, const Spacing& spacing, Connectivity conn) {
  for (double s : spacing)
    if (!(s > 0)) throw ConfigError("voxel spacing must be positive");
  const Extents& e = mask.extents;
  // A grid of depth 1 is planar: the z axis contributes no neighbors.
  const std::int64_t zr = e.depth > 1 ? 1 : 0;
  std::vector<std::array<std::int64_t, 3>> offsets;
  for (std::int64_t dz = -zr; dz <= zr; ++dz)
    for (std::int64_t dy = -1; dy <= 1; ++dy)
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        const std::int64_t manhattan = std::llabs(dz) + std::llabs(dy) + std::llabs(dx);
        if (manhattan == 0) continue;
        if (conn == Connectivity::six && manhattan != 1) continue;
        offsets.push_back({dz, dy, dx});
      }
  SurfacePointSet s;
  s.extents = e;
  s.spacing = spacing;
  for (std::int64_t z = 0; z < e.depth; ++z)
    for (std::int64_t y = 0; y < e.height; ++y)
      for (std::int64_t x = 0; x < e.width; ++x) {
        if (!mask.at(z, y, x)) continue;
        bool boundary = false;
        for (const auto& o : offsets) {
          const std::int64_t nz = z + o[0], ny = y + o[1], nx = x + o[2];
          if (nz < 0 || ny < 0 || nx < 0 || nz >= e.depth || ny >= e.height || nx >= e.width || !mask.at(nz, ny, nx)) {
            boundary = true;
            break;
          }
        }
        if (!boundary) continue;
        s.voxels.push_back({z, y, x});
        s.points.push_back({static_cast<double>(z) * spacing[0], static_cast<double>(y) * spacing[1],
                            static_cast<double>(x) * spacing[2]});
      }
  return s;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Exact 1D lower envelope of parabolas (Felzenszwalb & Huttenlocher) over
// positions q * step; entries equal to +inf do not seed parabolas.
void edt_1d(const double* f, double* out, std::int64_t n, std::int64_t stride, double step,
            std::vector<std::int64_t>& v, std::vector<double>& z) {
  std::int64_t k = -1;
  for (std::int64_t q = 0; q < n; ++q) {
    const double fq = f[q * stride];
    if (fq == kInf) continue;
    const double xq = static_cast<double>(q) * step;
    while (k >= 0) {
      const double xv = static_cast<double>(v[static_cast<std::size_t>(k)]) * step;
      const double fv = f[v[static_cast<std::size_t>(k)] * stride];
      const double s = ((fq + xq * xq) - (fv + xv * xv)) / (2 * (xq - xv));
      if (s <= z[static_cast<std::size_t>(k)]) {
        --k;
      } else {
        ++k;
        v[static_cast<std::size_t>(k)] = q;
        z[static_cast<std::size_t>(k)] = s;
        break;
      }
    }
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
    }
  }
  if (k < 0) {
    for (std::int64_t q = 0; q < n; ++q) out[q] = kInf;
    return;
  }
  std::int64_t j = 0;
  for (std::int64_t q = 0; q < n; ++q) {
    const double xq = static_cast<double>(q) * step;
    while (j < k && z[static_cast<std::size_t>(j + 1)] < xq) ++j;
    const double xv = static_cast<double>(v[static_cast<std::size_t>(j)]) * step;
    const double d = xq - xv;
    out[q] = f[v[static_cast<std::size_t>(j)] * stride] + d * d;
  }
}

double nearest_squared(const std::array<double, 3>& p, const std::vector<std::array<double, 3>>& set) {
  double best = kInf;
  for (const auto& q : set) {
    const double dz = p[0] - q[0], dy = p[1] - q[1], dx = p[2] - q[2];
    best = std::min(best, dz * dz + dy * dy + dx * dx);
  }
  return best;
}

}  // namespace

std::vector<double> squared_distance_transform(const std::vector<std::uint8_t>& marked, const Extents& e,
                                               const Spacing& spacing) {
  const std::int64_t n = e.numel();
  if (static_cast<std::int64_t>(marked.size()) != n) throw DimensionError("distance transform: mask size mismatch");
  std::vector<double> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) a[static_cast<std::size_t>(i)] = marked[static_cast<std::size_t>(i)] ? 0.0 : kInf;
  const std::int64_t longest = std::max({e.depth, e.height, e.width});
  std::vector<std::int64_t> v(static_cast<std::size_t>(longest));
  std::vector<double> z(static_cast<std::size_t>(longest) + 1);
  std::vector<double> line_in(static_cast<std::size_t>(longest)), line_out(static_cast<std::size_t>(longest));
  // Pass along x (contiguous), then y, then z; each pass reads `a`, writes `b`.
  auto pass = [&](std::int64_t len, std::int64_t stride, double step, auto&& starts) {
    for (std::int64_t base : starts) {
      for (std::int64_t q = 0; q < len; ++q) line_in[static_cast<std::size_t>(q)] = a[static_cast<std::size_t>(base + q * stride)];
      edt_1d(line_in.data(), line_out.data(), len, 1, step, v, z);
      for (std::int64_t q = 0; q < len; ++q) b[static_cast<std::size_t>(base + q * stride)] = line_out[static_cast<std::size_t>(q)];
    }
    std::swap(a, b);
  };
  std::vector<std::int64_t> starts;
  for (std::int64_t zz = 0; zz < e.depth; ++zz)
    for (std::int64_t y = 0; y < e.height; ++y) starts.push_back((zz * e.height + y) * e.width);
  pass(e.width, 1, spacing[2], starts);
  starts.clear();
  for (std::int64_t zz = 0; zz < e.depth; ++zz)
    for (std::int64_t x = 0; x < e.width; ++x) starts.push_back(zz * e.height * e.width + x);
  pass(e.height, e.width, spacing[1], starts);
  starts.clear();
  for (std::int64_t y = 0; y < e.height; ++y)
    for (std::int64_t x = 0; x < e.width; ++x) starts.push_back(y * e.width + x);
  pass(e.depth, e.height * e.width, spacing[0], starts);
  return a;
}

std::optional<SurfaceDistances> surface_distances(const SurfacePointSet& sa, const SurfacePointSet& sb) {
  if (sa.empty() || sb.empty()) return std::nullopt;
  std::vector<double> da(sa.size()), db(sb.size());  // squared distances to the other set
  const bool same_grid = sa.on_grid() && sb.on_grid() && sa.extents == sb.extents && sa.spacing == sb.spacing;
  if (same_grid) {
    auto to_set = [&](const SurfacePointSet& from, const SurfacePointSet& target, std::vector<double>& out) {
      std::vector<std::uint8_t> marked(static_cast<std::size_t>(target.extents.numel()), 0);
      const Extents& e = target.extents;
      auto idx = [&](const std::array<std::int64_t, 3>& v) {
        return static_cast<std::size_t>((v[0] * e.height + v[1]) * e.width + v[2]);
      };
      for (const auto& v : target.voxels) marked[idx(v)] = 1;
      const std::vector<double> dt = squared_distance_transform(marked, e, target.spacing);
      for (std::size_t i = 0; i < from.size(); ++i) out[i] = dt[idx(from.voxels[i])];
    };
    to_set(sa, sb, da);
    to_set(sb, sa, db);
  } else {
    for (std::size_t i = 0; i < sa.size(); ++i) da[i] = nearest_squared(sa.points[i], sb.points);
    for (std::size_t i = 0; i < sb.size(); ++i) db[i] = nearest_squared(sb.points[i], sa.points);
  }
  double sum = 0, worst = 0;
  for (double d2 : da) {
    const double d = std::sqrt(d2);
    sum += d;
    worst = std::max(worst, d);
  }
  for (double d2 : db) {
    const double d = std::sqrt(d2);
    sum += d;
    worst = std::max(worst, d);
  }
  SurfaceDistances r;
  r.assd = sum / static_cast<double>(sa.size() + sb.size());
  r.mad = r.assd;
  r.hd = worst;
  r.mssd = worst;
  return r;
}

std::string ClassMetrics::flags() const {
  std::string f;
  auto add = [&](const char* s) {
    if (!f.empty()) f += ' ';
    f += s;
  };
  if (dice.vacuous) add("vacuous");
  if (!ravd_percent) add("ravd-undefined");
  if (!distances) add("surface-undefined");
  return f;
}

Mask class_mask(const LabelMap& labels, const ClassSpec& cls) {
  Mask m(labels.extents);
  for (std::size_t i = 0; i < labels.size(); ++i)
    m.data[i] = std::find(cls.labels.begin(), cls.labels.end(), labels.data[i]) != cls.labels.end();
  return m;
}

std::vector<ClassSpec> brats_region_classes() {
  return {{"WT", {1, 2, 4}}, {"TC", {1, 4}}, {"ET", {4}}};
}

CaseReport evaluate_case(const std::string& case_id, const LabelMap& pred, const LabelMap& truth,
                         const Spacing& spacing, const std::vector<ClassSpec>& classes, Connectivity conn) {
  for (double s : spacing)
    if (!(s > 0)) throw ConfigError("voxel spacing must be positive, got " + std::to_string(s));
  if (classes.empty()) throw ConfigError("evaluate_case needs at least one class");
  require_same_extents(pred.extents, truth.extents, "evaluate_case");
  CaseReport report;
  report.case_id = case_id;
  for (const ClassSpec& cls : classes) {
    const Mask p = class_mask(pred, cls), t = class_mask(truth, cls);
    ClassMetrics m;
    m.name = cls.name;
    m.dice = dice(t, p);
    m.ravd_percent = ravd(t, p);
    m.distances = surface_distances(extract_surface(p, spacing, conn), extract_surface(t, spacing, conn));
    report.classes.push_back(std::move(m));
  }
  return report;
}

}  // namespace crossdim
