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
#include <map>
#include <string>
#include <vector>

#include "crossdim/weight_store.hpp"

namespace crossdim {

struct NadamConfig {
  double lr = 3e-4;
  double beta1 = 0.95;
  double beta2 = 0.99;
  double epsilon = 1e-8;

  void validate() const;
};

/// Adam with Nesterov momentum and a constant momentum schedule.
///
/// With t incremented before the update:
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
///   d  = b1 m / (1 - b1^(t+1)) + (1 - b1) g / (1 - b1^t)
///   theta <- theta - lr d / (sqrt(v / (1 - b2^t)) + eps)
/// Moments are allocated lazily per entry name; t is shared by all entries.
template <typename T>
class NadamOptimizer {
 public:
  explicit NadamOptimizer(NadamConfig cfg = {});

  /// Updates every trainable entry that carries a gradient. Throws
  /// NumericError naming the first entry with a non-finite gradient, in which
  /// case nothing is modified.
  void step(WeightStore<T>& store);

  const NadamConfig& config() const noexcept { return cfg_; }
  void set_lr(double lr) noexcept { cfg_.lr = lr; }
  std::int64_t steps() const noexcept { return t_; }

  /// Moments as a store ("m/<name>", "v/<name>") for checkpointing.
  WeightStore<T> export_state(const WeightStore<T>& params) const;
  void import_state(const WeightStore<T>& state, std::int64_t steps);

 private:
  NadamConfig cfg_;
  std::int64_t t_ = 0;
  std::map<std::string, std::pair<std::vector<T>, std::vector<T>>> moments_;
};

struct LookAheadConfig {
  int k = 6;
  double alpha = 0.5;

  void validate() const;
};

/// Slow/fast weight wrapper around an inner optimizer: every k-th call to
/// step() blends slow <- slow + alpha (fast - slow) and resets fast <- slow.
template <typename T>
class LookAhead {
 public:
  explicit LookAhead(LookAheadConfig cfg = {});

  /// Snapshots the slow weights (trainable entries) from the current values.
  void initialize(const WeightStore<T>& store);
  bool initialized() const noexcept { return !slow_.empty(); }

  /// Call once after every inner optimizer step. Returns true on a commit.
  bool step(WeightStore<T>& store);

  int counter() const noexcept { return counter_; }
  const LookAheadConfig& config() const noexcept { return cfg_; }

  WeightStore<T> export_state(const WeightStore<T>& params) const;
  void import_state(const WeightStore<T>& state, int counter);

 private:
  LookAheadConfig cfg_;
  int counter_ = 0;
  std::map<std::string, std::vector<T>> slow_;
};

extern template class NadamOptimizer<float>;
extern template class NadamOptimizer<double>;
extern template class LookAhead<float>;
extern template class LookAhead<double>;

}  // namespace crossdim
