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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "crossdim/config.hpp"
#include "crossdim/runner.hpp"
#include "crossdim/volume_io.hpp"

namespace crossdim {

/// A case on its training grid: cropped, normalized and padded up to the
/// patch extents. `crop` maps the unpadded grid back to the native one.
struct PreparedCase {
  LabeledVolume volume;
  CropRecord crop;
  Extents unpadded;
};

/// Crop, normalize and zero-pad `raw` per the data section. Throws
/// DimensionError when the spatial rank differs from the patch rank.
PreparedCase prepare_case(const LabeledVolume& raw, const DataSection& data, const Extents& patch);

/// [C, ...] image -> [1, C, ...] network input.
template <typename T>
Tensor<T> to_batch(const Tensor<double>& image);

/// Label map -> [1, n_classes, ...] target under `enc`. `rank` is the spatial
/// rank of the network. Throws ValidationError for labels the encoding cannot
/// represent.
template <typename T>
Tensor<T> encode_target(const LabelMap& labels, TargetEncoding enc, std::int64_t n_classes, int rank);

/// [C, ...] probabilities -> label map. binary: foreground when the
/// foreground probability >= threshold; onehot: arg-max channel; regions:
/// thresholded WT/TC/ET followed by label reconstruction.
LabelMap decode_prediction(const Tensor<double>& probs, const DataSection& data, Activation head,
                           const Spacing& spacing);

struct StepStats {
  double loss = 0;
  double dice_term = 0;
  double bce_term = 0;
};

/// One network with its optimizer state. Every step runs forward in train
/// mode, the compound loss, backward, the running-statistics update, Nadam
/// and (optionally) LookAhead.
template <typename T>
class Trainer {
 public:
  Trainer(NetworkGraph graph, WeightStore<T> store, const OptimSection& optim, const LossConfig& loss);

  /// Throws NumericError on a non-finite loss; nothing is modified then.
  StepStats step(const Tensor<T>& x, const Tensor<T>& target);
  /// Inference-mode forward pass.
  Tensor<T> predict(const Tensor<T>& x) const;

  void set_lr(double lr) { nadam_.set_lr(lr); }
  double lr() const { return nadam_.config().lr; }

  const NetworkGraph& graph() const noexcept { return graph_; }
  WeightStore<T>& store() noexcept { return store_; }
  const WeightStore<T>& store() const noexcept { return store_; }
  const NadamOptimizer<T>& optimizer() const noexcept { return nadam_; }
  const LookAhead<T>& lookahead() const noexcept { return lookahead_; }

  /// Nadam moments ("m/", "v/") and LookAhead slow weights ("slow/").
  WeightStore<T> export_optimizer_state() const;
  void import_optimizer_state(const WeightStore<T>& state, std::int64_t steps, int lookahead_counter);

 private:
  NetworkGraph graph_;
  WeightStore<T> store_;
  bool use_lookahead_;
  NadamOptimizer<T> nadam_;
  LookAhead<T> lookahead_;
  LossConfig loss_;
};

extern template class Trainer<float>;
extern template class Trainer<double>;

/// Patched inference over a [C, ...] image with averaged overlaps; returns
/// [n_classes, ...] probabilities on the same grid.
template <typename T>
Tensor<double> predict_image(const Trainer<T>& trainer, const Tensor<double>& image, const Extents& patch,
                             const Extents& stride);

/// Full inference chain for one case: preparation, patched prediction,
/// decoding and re-embedding into the native grid.
template <typename T>
LabelMap infer_case(const Trainer<T>& trainer, const RunConfig& cfg, const LabeledVolume& raw);

struct TrainSummary {
  std::filesystem::path run_dir;
  int first_epoch = 0;
  int epochs_run = 0;
  double best_score = 0;
  double final_score = 0;
};

/// Training loop over the manifest's training cases. The run directory holds
/// config.ini, log.csv, best.tar, final.tar, optimizer.tar and state.json.
/// With `resume`, state is restored from an existing run directory and the
/// epoch counter continues up to cfg.run.epochs.
TrainSummary run_training(const RunConfig& cfg, bool resume = false);

}  // namespace crossdim
