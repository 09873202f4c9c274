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

#include "crossdim/optim.hpp"

#include <cmath>

namespace crossdim {

void NadamConfig::validate() const {
  if (!(lr >= 0)) throw ConfigError("nadam: learning rate must be >= 0");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw ConfigError("nadam: betas must lie in [0, 1)");
  if (!(epsilon > 0)) throw ConfigError("nadam: epsilon must be > 0");
}

template <typename T>
NadamOptimizer<T>::NadamOptimizer(NadamConfig cfg) : cfg_(cfg) {
  cfg_.validate();
}

template <typename T>
void NadamOptimizer<T>::step(WeightStore<T>& store) {
  for (const auto& e : store.entries()) {
    if (!is_trainable_role(e.role) || !e.value.has_grad()) continue;
    for (T g : e.value.grad()) {
      if (!std::isfinite(static_cast<double>(g))) throw NumericError("nadam: non-finite gradient in '" + e.name + "'");
    }
  }
  ++t_;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double t = static_cast<double>(t_);
  const double c_next = 1 - std::pow(b1, t + 1);  // bias correction of m at t+1
  const double c_now = 1 - std::pow(b1, t);
  const double c_v = 1 - std::pow(b2, t);
  for (auto& e : store.entries()) {
    if (!is_trainable_role(e.role) || !e.value.has_grad()) continue;
    auto& [m, v] = moments_[e.name];
    const std::size_t n = e.value.numel();
    if (m.size() != n) {
      m.assign(n, T(0));
      v.assign(n, T(0));
    }
    auto theta = e.value.data();
    auto grad = e.value.grad();
    for (std::size_t i = 0; i < n; ++i) {
      const double g = grad[i];
      const double mi = b1 * static_cast<double>(m[i]) + (1 - b1) * g;
      const double vi = b2 * static_cast<double>(v[i]) + (1 - b2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double dir = b1 * mi / c_next + (1 - b1) * g / c_now;
      theta[i] = static_cast<T>(static_cast<double>(theta[i]) - cfg_.lr * dir / (std::sqrt(vi / c_v) + cfg_.epsilon));
    }
  }
}

template <typename T>
WeightStore<T> NadamOptimizer<T>::export_state(const WeightStore<T>& params) const {
  WeightStore<T> out;
  for (const auto& e : params.entries()) {
    auto it = moments_.find(e.name);
    if (it == moments_.end()) continue;
    out.add("m/" + e.name, e.role, e.rank, Tensor<T>(e.value.shape(), it->second.first), e.norm);
    out.add("v/" + e.name, e.role, e.rank, Tensor<T>(e.value.shape(), it->second.second), e.norm);
  }
  return out;
}

template <typename T>
void NadamOptimizer<T>::import_state(const WeightStore<T>& state, std::int64_t steps) {
  if (steps < 0) throw ValidationError("nadam: negative step counter in saved state");
  moments_.clear();
  for (const auto& e : state.entries()) {
    if (e.name.rfind("m/", 0) != 0) continue;
    const std::string name = e.name.substr(2);
    const StoreEntry<T>& v = state.at("v/" + name);
    if (v.value.numel() != e.value.numel()) throw ValidationError("nadam: moment sizes differ for '" + name + "'");
    moments_[name] = {e.value.storage(), v.value.storage()};
  }
  t_ = steps;
}

void LookAheadConfig::validate() const {
  if (k < 1) throw ConfigError("lookahead: k must be >= 1");
  if (!(alpha > 0 && alpha <= 1)) throw ConfigError("lookahead: alpha must lie in (0, 1]");
}

template <typename T>
LookAhead<T>::LookAhead(LookAheadConfig cfg) : cfg_(cfg) {
  cfg_.validate();
}

template <typename T>
void LookAhead<T>::initialize(const WeightStore<T>& store) {
  slow_.clear();
  counter_ = 0;
  for (const auto& e : store.entries())
    if (is_trainable_role(e.role)) slow_[e.name] = e.value.storage();
}

template <typename T>
bool LookAhead<T>::step(WeightStore<T>& store) {
  if (!initialized()) throw ValidationError("lookahead: initialize() must precede step()");
  if (++counter_ < cfg_.k) return false;
  counter_ = 0;
  const double a = cfg_.alpha;
  for (auto& [name, slow] : slow_) {
    StoreEntry<T>& e = store.at(name);
    auto fast = e.value.data();
    if (fast.size() != slow.size()) throw ValidationError("lookahead: '" + name + "' changed shape");
    for (std::size_t i = 0; i < slow.size(); ++i) {
      slow[i] = static_cast<T>(static_cast<double>(slow[i]) + a * (static_cast<double>(fast[i]) - static_cast<double>(slow[i])));
      fast[i] = slow[i];
    }
  }
  return true;
}

template <typename T>
WeightStore<T> LookAhead<T>::export_state(const WeightStore<T>& params) const {
  WeightStore<T> out;
  for (const auto& e : params.entries()) {
    auto it = slow_.find(e.name);
    if (it != slow_.end()) out.add("slow/" + e.name, e.role, e.rank, Tensor<T>(e.value.shape(), it->second), e.norm);
  }
  return out;
}

template <typename T>
void LookAhead<T>::import_state(const WeightStore<T>& state, int counter) {
  if (counter < 0 || counter >= cfg_.k) throw ValidationError("lookahead: saved counter out of range");
  slow_.clear();
  for (const auto& e : state.entries())
    if (e.name.rfind("slow/", 0) == 0) slow_[e.name.substr(5)] = e.value.storage();
  counter_ = counter;
}

template class NadamOptimizer<float>;
template class NadamOptimizer<double>;
template class LookAhead<float>;
template class LookAhead<double>;

}  // namespace crossdim
