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

#include "crossdim/weight_store.hpp"

#include <cstring>
#include <sstream>

namespace crossdim {

std::string to_string(ParamRole r) {
  switch (r) {
    case ParamRole::conv_kernel: return "conv-kernel";
    case ParamRole::conv_bias: return "conv-bias";
    case ParamRole::norm_gamma: return "norm-gamma";
    case ParamRole::norm_beta: return "norm-beta";
    case ParamRole::norm_running_mean: return "norm-running-mean";
    case ParamRole::norm_running_var: return "norm-running-var";
  }
  return "conv-kernel";
}

ParamRole param_role_from_string(const std::string& s) {
  for (ParamRole r : {ParamRole::conv_kernel, ParamRole::conv_bias, ParamRole::norm_gamma, ParamRole::norm_beta,
                      ParamRole::norm_running_mean, ParamRole::norm_running_var}) {
    if (to_string(r) == s) return r;
  }
  throw FormatError("unknown parameter role '" + s + "'");
}

bool is_trainable_role(ParamRole r) {
  return r != ParamRole::norm_running_mean && r != ParamRole::norm_running_var;
}

std::string to_string(InflationMode m) {
  switch (m) {
    case InflationMode::none: return "none";
    case InflationMode::replicate: return "replicate";
    case InflationMode::replicate_scaled: return "replicate-scaled";
  }
  return "none";
}

InflationMode inflation_mode_from_string(const std::string& s) {
  if (s == "none") return InflationMode::none;
  if (s == "replicate") return InflationMode::replicate;
  if (s == "replicate-scaled" || s == "replicate_scaled") return InflationMode::replicate_scaled;
  throw ConfigError("unknown inflation mode '" + s + "'");
}

std::string to_string(Dtype d) { return d == Dtype::float32 ? "float32" : "float64"; }

std::string to_string(NormMode m) { return m == NormMode::batch ? "batch" : "instance"; }

NormMode norm_mode_from_string(const std::string& s) {
  if (s == "batch") return NormMode::batch;
  if (s == "instance") return NormMode::instance;
  throw ConfigError("unknown normalization mode '" + s + "'");
}

Dtype dtype_from_string(const std::string& s) {
  if (s == "float32") return Dtype::float32;
  if (s == "float64") return Dtype::float64;
  throw FormatError("unsupported dtype '" + s + "'");
}

namespace {

std::string entry_problem(const std::string& name, ParamRole role, int rank, const Shape& shape) {
  if (name.empty()) return "empty entry name";
  if (rank != 2 && rank != 3) return name + ": rank " + std::to_string(rank) + " is not 2 or 3";
  if (role == ParamRole::conv_kernel) {
    if (static_cast<int>(shape.size()) != 2 + rank) {
      return name + ": conv kernel " + shape_to_string(shape) + " inconsistent with rank " + std::to_string(rank);
    }
  } else if (shape.size() != 1) {
    return name + ": " + to_string(role) + " must be one-dimensional, got " + shape_to_string(shape);
  }
  return {};
}

}  // namespace

template <typename T>
StoreEntry<T>& WeightStore<T>::add(std::string name, ParamRole role, int rank, Tensor<T> value,
                                   std::optional<NormMode> norm) {
  if (index_.count(name)) throw ValidationError("duplicate weight entry '" + name + "'");
  if (auto p = entry_problem(name, role, rank, value.shape()); !p.empty()) throw ValidationError(p);
  index_.emplace(name, entries_.size());
  entries_.push_back(StoreEntry<T>{std::move(name), role, rank, std::move(value), norm});
  return entries_.back();
}

template <typename T>
const StoreEntry<T>* WeightStore<T>::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &entries_[it->second];
}

template <typename T>
StoreEntry<T>* WeightStore<T>::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &entries_[it->second];
}

template <typename T>
const StoreEntry<T>& WeightStore<T>::at(const std::string& name) const {
  if (auto* e = find(name)) return *e;
  throw LookupError("weight entry '" + name + "' not found");
}

template <typename T>
StoreEntry<T>& WeightStore<T>::at(const std::string& name) {
  if (auto* e = find(name)) return *e;
  throw LookupError("weight entry '" + name + "' not found");
}

template <typename T>
std::int64_t WeightStore<T>::trainable_count() const {
  std::int64_t n = 0;
  for (const auto& e : entries_)
    if (is_trainable_role(e.role)) n += static_cast<std::int64_t>(e.value.numel());
  return n;
}

template <typename T>
void WeightStore<T>::zero_grad() {
  for (auto& e : entries_) e.value.zero_grad();
}

template <typename T>
void WeightStore<T>::drop_grads() {
  for (auto& e : entries_) e.value.drop_grad();
}

template <typename T>
void WeightStore<T>::validate() const {
  std::vector<std::string> problems;
  std::unordered_map<std::string, int> seen;
  for (const auto& e : entries_) {
    if (seen[e.name]++) problems.push_back(e.name + ": duplicate name");
    if (auto p = entry_problem(e.name, e.role, e.rank, e.value.shape()); !p.empty()) problems.push_back(p);
    if (static_cast<std::int64_t>(e.value.numel()) != shape_numel(e.value.shape())) {
      problems.push_back(e.name + ": payload length does not match shape");
    }
  }
  if (!problems.empty()) {
    std::ostringstream os;
    os << "invalid weight store:";
    for (const auto& p : problems) os << "\n  " << p;
    throw ValidationError(os.str());
  }
}

template <typename T>
bool WeightStore<T>::bitwise_equal(const WeightStore& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.name != b.name || a.role != b.role || a.rank != b.rank || a.norm != b.norm ||
        a.value.shape() != b.value.shape()) {
      return false;
    }
    if (a.value.numel() && std::memcmp(a.value.data().data(), b.value.data().data(), a.value.numel() * sizeof(T))) {
      return false;
    }
  }
  return true;
}

template class WeightStore<float>;
template class WeightStore<double>;

}  // namespace crossdim
