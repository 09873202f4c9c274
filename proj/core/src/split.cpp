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

#include "crossdim/split.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "crossdim/errors.hpp"

namespace crossdim {

namespace {

std::vector<std::string> shuffled(const std::vector<std::string>& ids, std::uint64_t seed) {
  std::set<std::string> seen;
  for (const auto& id : ids)
    if (!seen.insert(id).second) throw ValidationError("duplicate case id '" + id + "'");
  std::vector<std::string> out = ids;
  std::mt19937_64 rng(seed);
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

}  // namespace

std::vector<std::vector<std::string>> kfold_split(const std::vector<std::string>& case_ids, int k,
                                                  std::uint64_t seed) {
  if (k < 1 || static_cast<std::size_t>(k) > case_ids.size()) {
    throw ConfigError("k-fold split needs 1 <= k <= " + std::to_string(case_ids.size()) + ", got " + std::to_string(k));
  }
  const std::vector<std::string> order = shuffled(case_ids, seed);
  const std::size_t n = order.size(), base = n / static_cast<std::size_t>(k), extra = n % static_cast<std::size_t>(k);
  std::vector<std::vector<std::string>> folds(static_cast<std::size_t>(k));
  std::size_t pos = 0;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const std::size_t len = base + (f < extra ? 1 : 0);
    folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos), order.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  return folds;
}

HoldoutSplit holdout_split(const std::vector<std::string>& case_ids, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0 && fraction <= 1)) throw ConfigError("holdout fraction must lie in [0, 1]");
  const std::vector<std::string> order = shuffled(case_ids, seed);
  const auto nval = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(order.size())));
  HoldoutSplit s;
  s.validation.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(nval));
  s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(nval), order.end());
  return s;
}

std::uint64_t derive_seed(std::uint64_t run_seed, const std::string& case_id, std::int64_t epoch) {
  // splitmix64 step; each input is absorbed after a full avalanche of the state.
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t id_hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : case_id) {
    id_hash ^= c;
    id_hash *= 0x100000001b3ULL;
  }
  std::uint64_t h = mix(run_seed);
  h = mix(h ^ id_hash);
  return mix(h ^ static_cast<std::uint64_t>(epoch));
}

}  // namespace crossdim
