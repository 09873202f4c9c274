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

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "crossdim/ops.hpp"
#include "crossdim/tensor.hpp"

namespace crossdim {

enum class ParamRole { conv_kernel, conv_bias, norm_gamma, norm_beta, norm_running_mean, norm_running_var };

std::string to_string(ParamRole r);
ParamRole param_role_from_string(const std::string& s);

/// True for entries an optimizer updates (everything but running statistics).
bool is_trainable_role(ParamRole r);

enum class InflationMode { none, replicate, replicate_scaled };

std::string to_string(InflationMode m);
InflationMode inflation_mode_from_string(const std::string& s);

enum class Dtype { float32, float64 };

std::string to_string(Dtype d);
std::string to_string(NormMode m);
NormMode norm_mode_from_string(const std::string& s);
Dtype dtype_from_string(const std::string& s);

template <typename T>
constexpr Dtype native_dtype() {
  return sizeof(T) == 4 ? Dtype::float32 : Dtype::float64;
}

struct StoreMeta {
  std::string source;
  InflationMode inflation = InflationMode::none;
  std::optional<int> depth_used;

  bool operator==(const StoreMeta&) const = default;
};

template <typename T>
struct StoreEntry {
  std::string name;
  ParamRole role = ParamRole::conv_kernel;
  int rank = 2;  // spatial rank of the owning layer
  Tensor<T> value;
  /// Normalization flavour for norm-* roles; empty for conv entries.
  std::optional<NormMode> norm;
};

/// Named, ordered collection of parameter tensors.
///
/// Invariants: names are unique; conv kernels have 2 + rank axes. The store
/// is the unit of checkpointing, weight transfer and kernel inflation.
template <typename T>
class WeightStore {
 public:
  WeightStore() = default;

  /// Throws ValidationError on a duplicate name or rank/shape inconsistency.
  StoreEntry<T>& add(std::string name, ParamRole role, int rank, Tensor<T> value,
                     std::optional<NormMode> norm = std::nullopt);

  const StoreEntry<T>* find(const std::string& name) const;
  StoreEntry<T>* find(const std::string& name);
  /// Throws LookupError naming the missing entry.
  const StoreEntry<T>& at(const std::string& name) const;
  StoreEntry<T>& at(const std::string& name);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::vector<StoreEntry<T>>& entries() noexcept { return entries_; }
  const std::vector<StoreEntry<T>>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  StoreMeta& meta() noexcept { return meta_; }
  const StoreMeta& meta() const noexcept { return meta_; }

  /// Scalar width used when this store is written to disk.
  Dtype dtype() const noexcept { return dtype_; }
  void set_dtype(Dtype d) noexcept { dtype_ = d; }

  /// Sum of element counts over trainable entries.
  std::int64_t trainable_count() const;

  void zero_grad();
  void drop_grads();

  /// Checks every invariant; throws ValidationError listing offending entries.
  void validate() const;

  template <typename U>
  WeightStore<U> cast() const {
    WeightStore<U> out;
    for (const auto& e : entries_) out.add(e.name, e.role, e.rank, e.value.template cast<U>(), e.norm);
    out.meta() = meta_;
    out.set_dtype(dtype_);
    return out;
  }

  /// Names, roles, ranks, shapes and payloads identical bit for bit.
  bool bitwise_equal(const WeightStore& other) const;

 private:
  std::vector<StoreEntry<T>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  StoreMeta meta_;
  Dtype dtype_ = native_dtype<T>();
};

extern template class WeightStore<float>;
extern template class WeightStore<double>;

// --- checkpoint I/O -------------------------------------------------------------
//
// A checkpoint is a directory (or an uncompressed ustar archive whose path
// ends in ".tar") holding `manifest.json` plus one `<index>.bin` per entry
// with little-endian IEEE-754 scalars in row-major order. Writes go to a
// temporary sibling first and are renamed into place.

template <typename T>
void save_checkpoint(const WeightStore<T>& store, const std::filesystem::path& path);

/// Loads and validates a checkpoint; scalars are converted to T.
template <typename T>
WeightStore<T> load_checkpoint(const std::filesystem::path& path);

/// Serialized manifest text (UTF-8 JSON) for a store, entries in definition order.
template <typename T>
std::string manifest_json(const WeightStore<T>& store);

}  // namespace crossdim
