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

#include <optional>
#include <string>

namespace crossdim {

enum class LrPolicy { constant, exp_decay, cosine };

std::string to_string(LrPolicy p);
LrPolicy lr_policy_from_string(const std::string& s);

struct LrSchedule {
  LrPolicy policy = LrPolicy::exp_decay;
  double lr0 = 3e-4;
  // exp_decay: lr0 * factor^epoch, clamped below at floor
  double factor = 0.95;
  double floor = 1e-5;
  // cosine: constant lr0 until train score > score_threshold and
  // epoch >= epoch_threshold, then annealing to lr_min over `period` epochs
  double score_threshold = 0.85;
  int epoch_threshold = 40;
  double lr_min = 1e-5;
  int period = 0;  // 0: total_epochs - activation epoch

  void validate() const;
};

/// Pure schedule evaluation. `activated_at` is the epoch at which the cosine
/// phase began (ignored by other policies); tau = epoch - activated_at.
double lr_at(const LrSchedule& s, int epoch, std::optional<int> activated_at = std::nullopt, int total_epochs = 0);

/// True when the cosine trigger condition holds for this epoch and score.
bool cosine_trigger(const LrSchedule& s, int epoch, double train_score);

/// Stateful wrapper that latches the cosine activation epoch.
class LrScheduler {
 public:
  LrScheduler(LrSchedule s, int total_epochs);

  /// Learning rate for `epoch`, given the training score of the previous epoch.
  double lr(int epoch, double train_score);

  std::optional<int> activated_at() const noexcept { return activated_at_; }
  void restore(std::optional<int> activated_at) noexcept { activated_at_ = activated_at; }
  const LrSchedule& schedule() const noexcept { return s_; }

 private:
  LrSchedule s_;
  int total_epochs_;
  std::optional<int> activated_at_;
};

}  // namespace crossdim
