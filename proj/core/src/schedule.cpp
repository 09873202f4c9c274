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

#include "crossdim/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "crossdim/errors.hpp"

namespace crossdim {

std::string to_string(LrPolicy p) {
  switch (p) {
    case LrPolicy::constant: return "constant";
    case LrPolicy::exp_decay: return "exp-decay";
    case LrPolicy::cosine: return "cosine";
  }
  return "constant";
}

LrPolicy lr_policy_from_string(const std::string& s) {
  if (s == "constant") return LrPolicy::constant;
  if (s == "exp-decay" || s == "exp_decay") return LrPolicy::exp_decay;
  if (s == "cosine" || s == "constant-then-cosine") return LrPolicy::cosine;
  throw ConfigError("unknown learning-rate policy '" + s + "'");
}

void LrSchedule::validate() const {
  if (!(lr0 > 0)) throw ConfigError("schedule: lr0 must be > 0");
  if (policy == LrPolicy::exp_decay) {
    if (!(factor > 0 && factor < 1)) throw ConfigError("schedule: decay factor must lie in (0, 1)");
    if (!(floor > 0)) throw ConfigError("schedule: floor must be > 0");
  }
  if (policy == LrPolicy::cosine) {
    if (!(lr_min > 0)) throw ConfigError("schedule: lr_min must be > 0");
    if (period < 0 || epoch_threshold < 0) throw ConfigError("schedule: period and epoch threshold must be >= 0");
  }
}

double lr_at(const LrSchedule& s, int epoch, std::optional<int> activated_at, int total_epochs) {
  if (epoch < 0) throw ConfigError("schedule: epoch must be >= 0");
  switch (s.policy) {
    case LrPolicy::constant: return s.lr0;
    case LrPolicy::exp_decay: return std::max(s.lr0 * std::pow(s.factor, epoch), s.floor);
    case LrPolicy::cosine: {
      if (!activated_at || epoch < *activated_at) return s.lr0;
      const int period = s.period > 0 ? s.period : std::max(1, total_epochs - *activated_at);
      const double tau = std::min<double>(epoch - *activated_at, period);
      return s.lr_min + 0.5 * (s.lr0 - s.lr_min) * (1 + std::cos(std::numbers::pi * tau / period));
    }
  }
  return s.lr0;
}

bool cosine_trigger(const LrSchedule& s, int epoch, double train_score) {
  return train_score > s.score_threshold && epoch >= s.epoch_threshold;
}

LrScheduler::LrScheduler(LrSchedule s, int total_epochs) : s_(s), total_epochs_(total_epochs) {
  s_.validate();
}

double LrScheduler::lr(int epoch, double train_score) {
  if (s_.policy == LrPolicy::cosine && !activated_at_ && cosine_trigger(s_, epoch, train_score)) activated_at_ = epoch;
  return lr_at(s_, epoch, activated_at_, total_epochs_);
}

}  // namespace crossdim
