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
#include <string>
#include <vector>

namespace crossdim {

/// Seeded shuffle, then k contiguous chunks; the first (n mod k) folds hold
/// one extra case. Throws ValidationError on duplicate ids and ConfigError
/// unless 1 <= k <= n.
std::vector<std::vector<std::string>> kfold_split(const std::vector<std::string>& case_ids, int k,
                                                  std::uint64_t seed);

struct HoldoutSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
};

/// Seeded shuffle; the first round(fraction * n) cases become validation.
HoldoutSplit holdout_split(const std::vector<std::string>& case_ids, double fraction, std::uint64_t seed);

/// Seed for per-case randomness derived from (run seed, case id, epoch).
std::uint64_t derive_seed(std::uint64_t run_seed, const std::string& case_id, std::int64_t epoch);

}  // namespace crossdim
