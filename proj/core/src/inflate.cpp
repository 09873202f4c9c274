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

#include "crossdim/inflate.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "crossdim/ops.hpp"

namespace crossdim {

template <typename T>
Tensor<T> inflate_kernel(const Tensor<T>& k2, int kd, InflationMode mode) {
  if (k2.rank() != 4) {
    throw DimensionError("inflate_kernel expects a 2D kernel [out, in, kh, kw], got " + shape_to_string(k2.shape()));
  }
  if (kd < 1) throw ConfigError("inflation depth must be >= 1, got " + std::to_string(kd));
  const Shape& s = k2.shape();
  Tensor<T> k3({s[0], s[1], kd, s[2], s[3]});
  const std::int64_t plane = s[2] * s[3];
  const std::int64_t pairs = s[0] * s[1];
  const T* src = k2.data().data();
  T* dst = k3.data().data();
  const T scale = mode == InflationMode::replicate_scaled ? T(1) / static_cast<T>(kd) : T(1);
  for (std::int64_t p = 0; p < pairs; ++p) {
    for (int d = 0; d < kd; ++d) {
      T* out = dst + (p * kd + d) * plane;
      const T* in = src + p * plane;
      if (mode == InflationMode::replicate_scaled) {
        for (std::int64_t k = 0; k < plane; ++k) out[k] = in[k] * scale;
      } else {
        std::copy(in, in + plane, out);
      }
    }
  }
  return k3;
}

template <typename T>
WeightStore<T> inflate_store(const WeightStore<T>& s2, const InflationPlan& plan) {
  if (plan.mode == InflationMode::none) throw ConfigError("inflation plan needs mode replicate or replicate-scaled");
  std::vector<std::string> offending;
  for (const auto& e : s2.entries()) {
    if (e.rank != 2) offending.push_back(e.name + " (rank " + std::to_string(e.rank) + ")");
  }
  if (!offending.empty()) {
    std::ostringstream os;
    os << "inflate_store requires a rank-2 store; offending entries:";
    for (const auto& o : offending) os << "\n  " << o;
    throw ValidationError(os.str());
  }
  for (const auto& [name, d] : plan.depth_overrides) {
    if (d < 1) throw ConfigError("inflation depth override for '" + name + "' must be >= 1");
  }
  WeightStore<T> s3;
  s3.set_dtype(s2.dtype());
  s3.meta() = s2.meta();
  s3.meta().inflation = plan.mode;
  s3.meta().depth_used = plan.depth;
  for (const auto& e : s2.entries()) {
    if (e.role == ParamRole::conv_kernel) {
      s3.add(e.name, e.role, 3, inflate_kernel(e.value, plan.depth_for(e.name), plan.mode), e.norm);
      continue;
    }
    if (plan.norm_transfer && (e.role == ParamRole::norm_running_mean || e.role == ParamRole::norm_running_var)) {
      continue;
    }
    std::optional<NormMode> norm = e.norm;
    if (plan.norm_transfer && norm == NormMode::batch) norm = NormMode::instance;
    s3.add(e.name, e.role, 3, e.value, norm);
  }
  return s3;
}

InflationReport verify_inflation_equivalence(const Tensor<double>& k2, int kd, int trials, InflationMode mode,
                                             std::uint64_t seed) {
  if (k2.rank() != 4) {
    throw DimensionError("verify_inflation_equivalence expects a 2D kernel, got " + shape_to_string(k2.shape()));
  }
  if (mode == InflationMode::none) throw ConfigError("verification needs an inflation mode");
  InflationReport report;
  report.depth = kd;
  report.mode = mode;
  report.trials = trials;
  const Tensor<double> k3 = inflate_kernel(k2, kd, mode);
  const std::int64_t in_ch = k2.dim(1), kh = k2.dim(2), kw = k2.dim(3);
  const std::int64_t h = kh + 3, w = kw + 3, depth = kd + 2;
  const double factor = mode == InflationMode::replicate ? static_cast<double>(kd) : 1.0;
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int t = 0; t < trials; ++t) {
    Tensor<double> x2({1, in_ch, h, w});
    for (auto& v : x2.data()) v = uni(rng);
    Tensor<double> x3({1, in_ch, depth, h, w});
    for (std::int64_t c = 0; c < in_ch; ++c)
      for (std::int64_t d = 0; d < depth; ++d)
        std::copy_n(x2.data().data() + c * h * w, h * w, x3.data().data() + (c * depth + d) * h * w);
    const Tensor<double> y2 = conv_forward<double>(x2, k2, nullptr, ConvConfig::uniform(2, 1, 0));
    const Tensor<double> y3 = conv_forward<double>(x3, k3, nullptr, ConvConfig::uniform(3, 1, 0));
    const std::int64_t out_c = y2.dim(1), oh = y2.dim(2), ow = y2.dim(3), od = y3.dim(2);
    double max_diff = 0, max_ref = 0;
    for (std::int64_t c = 0; c < out_c; ++c)
      for (std::int64_t d = 0; d < od; ++d)
        for (std::int64_t i = 0; i < oh * ow; ++i) {
          const double expected = factor * y2[static_cast<std::size_t>(c * oh * ow + i)];
          const double got = y3[static_cast<std::size_t>((c * od + d) * oh * ow + i)];
          max_diff = std::max(max_diff, std::abs(got - expected));
          max_ref = std::max(max_ref, std::abs(expected));
        }
    const double rel = max_ref > 0 ? max_diff / max_ref : max_diff;
    report.max_rel_error = std::max(report.max_rel_error, rel);
  }
  report.pass = report.max_rel_error <= report.tolerance;
  return report;
}

template <typename T>
std::vector<std::string> transfer_weights(WeightStore<T>& destination, const WeightStore<T>& source,
                                          const TransferOptions& options) {
  std::vector<std::string> problems;
  std::vector<std::pair<const StoreEntry<T>*, StoreEntry<T>*>> plan;
  for (const auto& e : source.entries()) {
    if (e.name.rfind(options.source_prefix, 0) != 0) continue;
    const std::string target = options.destination_prefix + e.name.substr(options.source_prefix.size());
    StoreEntry<T>* d = destination.find(target);
    if (!d) {
      problems.push_back(e.name + " -> " + target + ": no such destination entry");
    } else if (d->value.shape() != e.value.shape() || d->role != e.role || d->norm != e.norm) {
      auto describe = [](const StoreEntry<T>& x) {
        return to_string(x.role) + (x.norm ? "/" + to_string(*x.norm) : std::string()) + " " +
               shape_to_string(x.value.shape());
      };
      problems.push_back(e.name + " -> " + target + ": " + describe(e) + " vs " + describe(*d));
    } else {
      plan.emplace_back(&e, d);
    }
  }
  if (!problems.empty()) {
    std::ostringstream os;
    os << "weight transfer failed; unmatched entries:";
    for (const auto& p : problems) os << "\n  " << p;
    throw ValidationError(os.str());
  }
  if (plan.empty()) throw ValidationError("weight transfer selected no entries (prefix '" + options.source_prefix + "')");
  std::vector<std::string> names;
  for (auto [src, dst] : plan) {
    dst->value = src->value;
    dst->value.drop_grad();
    names.push_back(dst->name);
  }
  return names;
}

template Tensor<float> inflate_kernel(const Tensor<float>&, int, InflationMode);
template Tensor<double> inflate_kernel(const Tensor<double>&, int, InflationMode);
template WeightStore<float> inflate_store(const WeightStore<float>&, const InflationPlan&);
template WeightStore<double> inflate_store(const WeightStore<double>&, const InflationPlan&);
template std::vector<std::string> transfer_weights(WeightStore<float>&, const WeightStore<float>&,
                                                   const TransferOptions&);
template std::vector<std::string> transfer_weights(WeightStore<double>&, const WeightStore<double>&,
                                                   const TransferOptions&);

}  // namespace crossdim
