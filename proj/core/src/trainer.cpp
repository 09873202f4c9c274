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

#include "crossdim/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "crossdim/atomic_io.hpp"
#include "crossdim/augment.hpp"
#include "crossdim/errors.hpp"
#include "crossdim/inflate.hpp"
#include "crossdim/labels.hpp"
#include "crossdim/loss.hpp"
#include "crossdim/preprocess.hpp"
#include "crossdim/split.hpp"

namespace crossdim {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

Shape image_shape(std::int64_t channels, const Extents& e, int rank) {
  if (rank == 2) return {channels, e.height, e.width};
  return {channels, e.depth, e.height, e.width};
}

int patch_rank(const Extents& patch, const DataSection&) { return patch.depth == 1 ? 2 : 3; }

/// Zero-pads at the far end of each axis up to `min` extents.
LabeledVolume pad_to(const LabeledVolume& v, const Extents& min) {
  const Extents e = v.extents();
  const Extents p{std::max(e.depth, min.depth), std::max(e.height, min.height), std::max(e.width, min.width)};
  if (p == e) return v;
  LabeledVolume out = v;
  const std::int64_t c = v.channels();
  out.image = Tensor<double>(image_shape(c, p, v.spatial_rank()));
  if (v.labels) out.labels = LabelMap(p);
  for (std::int64_t k = 0; k < c; ++k)
    for (std::int64_t z = 0; z < e.depth; ++z)
      for (std::int64_t y = 0; y < e.height; ++y)
        for (std::int64_t x = 0; x < e.width; ++x) {
          out.image[static_cast<std::size_t>(((k * p.depth + z) * p.height + y) * p.width + x)] =
              v.image[static_cast<std::size_t>(((k * e.depth + z) * e.height + y) * e.width + x)];
        }
  if (v.labels) {
    for (std::int64_t z = 0; z < e.depth; ++z)
      for (std::int64_t y = 0; y < e.height; ++y)
        for (std::int64_t x = 0; x < e.width; ++x) out.labels->at(z, y, x) = v.labels->at(z, y, x);
  }
  return out;
}

}  // namespace

PreparedCase prepare_case(const LabeledVolume& raw, const DataSection& data, const Extents& patch) {
  raw.validate();
  const int rank = patch.depth == 1 ? 2 : 3;
  if (raw.spatial_rank() != rank) {
    throw DimensionError(raw.case_id + ": case has spatial rank " + std::to_string(raw.spatial_rank()) +
                         " but the network expects rank " + std::to_string(rank));
  }
  PreparedCase out;
  if (data.crop) {
    auto [cropped, record] = crop_nonzero(raw, data.crop_margin);
    out.volume = std::move(cropped);
    out.crop = record;
  } else {
    out.volume = raw;
    out.crop = CropRecord{raw.extents(), {0, 0, 0}, raw.extents()};
  }
  switch (data.normalize) {
    case Normalization::none: break;
    case Normalization::zscore_nonzero: out.volume.image = zscore_nonzero(out.volume.image); break;
    case Normalization::sample: out.volume.image = sample_normalize(out.volume.image); break;
  }
  out.unpadded = out.volume.extents();
  out.volume = pad_to(out.volume, patch);
  return out;
}

template <typename T>
Tensor<T> to_batch(const Tensor<double>& image) {
  Shape s = image.shape();
  s.insert(s.begin(), 1);
  Tensor<T> out(s);
  for (std::size_t i = 0; i < image.numel(); ++i) out[i] = static_cast<T>(image[i]);
  return out;
}

template <typename T>
Tensor<T> encode_target(const LabelMap& labels, TargetEncoding enc, std::int64_t n_classes, int rank) {
  const Extents e = labels.extents;
  const std::size_t n = static_cast<std::size_t>(e.numel());
  if (enc == TargetEncoding::regions) {
    Tensor<T> t = regions_to_tensor<T>(region_remap(labels));
    if (rank == 2) t = t.reshaped({1, 3, e.height, e.width});
    return t;
  }
  Shape s = image_shape(n_classes, e, rank);
  s.insert(s.begin(), 1);
  Tensor<T> out(s);
  for (std::size_t i = 0; i < n; ++i) {
    const std::int32_t l = labels.data[i];
    if (enc == TargetEncoding::binary) {
      const bool fg = l > 0;
      if (n_classes == 1) {
        out[i] = fg ? T(1) : T(0);
      } else {
        out[i] = fg ? T(0) : T(1);
        out[n + i] = fg ? T(1) : T(0);
      }
    } else {
      if (l < 0 || l >= n_classes) {
        throw ValidationError("label " + std::to_string(l) + " outside [0, " + std::to_string(n_classes) +
                              ") for onehot target");
      }
      out[static_cast<std::size_t>(l) * n + i] = T(1);
    }
  }
  return out;
}

LabelMap decode_prediction(const Tensor<double>& probs, const DataSection& data, Activation head,
                           const Spacing& spacing) {
  const Extents e = image_extents(probs);
  const std::int64_t c = probs.dim(0);
  const std::size_t n = static_cast<std::size_t>(e.numel());
  if (data.target == TargetEncoding::regions) {
    Tensor<double> p = probs.rank() == 3 ? probs.reshaped({c, 1, e.height, e.width}) : probs;
    ReconstructOptions opts;
    opts.et_min_volume = data.et_min_volume;
    opts.unit = data.et_unit;
    opts.spacing = spacing;
    return reconstruct_labels(binarize_regions(p, data.threshold), opts).labels;
  }
  LabelMap out(e);
  if (data.target == TargetEncoding::binary) {
    const std::size_t fg = (head == Activation::softmax && c == 2) ? 1 : 0;
    for (std::size_t i = 0; i < n; ++i) out.data[i] = probs[fg * n + i] >= data.threshold ? 1 : 0;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::int32_t best = 0;
    for (std::int64_t k = 1; k < c; ++k)
      if (probs[static_cast<std::size_t>(k) * n + i] > probs[static_cast<std::size_t>(best) * n + i]) {
        best = static_cast<std::int32_t>(k);
      }
    out.data[i] = best;
  }
  return out;
}

// --- Trainer ------------------------------------------------------------------

template <typename T>
Trainer<T>::Trainer(NetworkGraph graph, WeightStore<T> store, const OptimSection& optim, const LossConfig& loss)
    : graph_(std::move(graph)),
      store_(std::move(store)),
      use_lookahead_(optim.lookahead),
      nadam_(optim.nadam),
      lookahead_(optim.lookahead_cfg),
      loss_(loss) {
  check_store(graph_, store_);
}

template <typename T>
StepStats Trainer<T>::step(const Tensor<T>& x, const Tensor<T>& target) {
  if (use_lookahead_ && !lookahead_.initialized()) lookahead_.initialize(store_);
  const Tape<T> tape = run_graph(graph_, store_, x, RunMode::train);
  LossResult<T> r = compound_loss(tape.output(), target, loss_);
  if (!std::isfinite(r.loss)) throw NumericError("non-finite loss");
  store_.drop_grads();
  try {
    run_backward(graph_, tape, store_, r.grad);
    nadam_.step(store_);
  } catch (...) {
    store_.drop_grads();
    throw;
  }
  update_running_stats(graph_, tape, store_);
  if (use_lookahead_) lookahead_.step(store_);
  store_.drop_grads();
  return {r.loss, r.dice_term, r.bce_term};
}

template <typename T>
Tensor<T> Trainer<T>::predict(const Tensor<T>& x) const {
  return forward(graph_, store_, x, RunMode::infer);
}

template <typename T>
WeightStore<T> Trainer<T>::export_optimizer_state() const {
  WeightStore<T> out = nadam_.export_state(store_);
  if (use_lookahead_ && lookahead_.initialized()) {
    const WeightStore<T> slow = lookahead_.export_state(store_);
    for (const auto& e : slow.entries()) out.add(e.name, e.role, e.rank, e.value, e.norm);
  }
  return out;
}

template <typename T>
void Trainer<T>::import_optimizer_state(const WeightStore<T>& state, std::int64_t steps, int lookahead_counter) {
  WeightStore<T> moments, slow;
  for (const auto& e : state.entries()) {
    (e.name.rfind("slow/", 0) == 0 ? slow : moments).add(e.name, e.role, e.rank, e.value, e.norm);
  }
  nadam_.import_state(moments, steps);
  if (use_lookahead_ && slow.size() > 0) lookahead_.import_state(slow, lookahead_counter);
}

template class Trainer<float>;
template class Trainer<double>;

// --- inference ----------------------------------------------------------------

template <typename T>
Tensor<double> predict_image(const Trainer<T>& trainer, const Tensor<double>& image, const Extents& patch,
                             const Extents& stride) {
  const Extents source = image_extents(image);
  const int rank = static_cast<int>(image.rank()) - 1;
  std::int64_t classes = 0;
  std::optional<PatchStitcher> stitcher;
  for (const Placement& p : tile_placements(source, patch, stride)) {
    const Tensor<T> y = trainer.predict(to_batch<T>(extract_patch(image, p)));
    Shape s(y.shape().begin() + 1, y.shape().end());
    Tensor<double> probs(s);
    for (std::size_t i = 0; i < y.numel(); ++i) probs[i] = static_cast<double>(y[i]);
    if (!stitcher) {
      classes = s[0];
      stitcher.emplace(classes, source, rank);
    }
    stitcher->add(probs, p);
  }
  return stitcher->result();
}

template <typename T>
LabelMap infer_case(const Trainer<T>& trainer, const RunConfig& cfg, const LabeledVolume& raw) {
  const Extents patch = cfg.patch();
  const PreparedCase pc = prepare_case(raw, cfg.data, patch);
  Extents stride{std::max<std::int64_t>(1, patch.depth / 2), std::max<std::int64_t>(1, patch.height / 2),
                 std::max<std::int64_t>(1, patch.width / 2)};
  if (!cfg.data.infer_stride.empty()) {
    const auto& s = cfg.data.infer_stride;
    stride = s.size() == 2 ? Extents{1, s[0], s[1]} : Extents{s[0], s[1], s[2]};
  }
  Tensor<double> probs = predict_image(trainer, pc.volume.image, patch, stride);
  if (!(pc.unpadded == pc.volume.extents())) {
    probs = extract_patch(probs, Placement{{0, 0, 0}, pc.unpadded, pc.volume.extents()});
  }
  const LabelMap labels = decode_prediction(probs, cfg.data, cfg.arch.output_activation, raw.spacing);
  return reembed(labels, pc.crop);
}

// --- training loop ------------------------------------------------------------

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

template <typename T>
TrainSummary train_impl(const RunConfig& cfg, bool resume) {
  cfg.validate();
  if (cfg.data.manifest.empty()) throw ConfigError("training needs data.manifest");
  const fs::path run_dir = cfg.run.out;
  const fs::path state_path = run_dir / "state.json";
  if (resume && !fs::exists(state_path)) throw ValidationError("cannot resume: " + state_path.string() + " not found");
  if (!resume && fs::exists(state_path)) {
    throw ValidationError("run directory " + run_dir.string() + " already holds a run; resume it or choose another");
  }

  const Extents patch = cfg.patch();
  const int rank = patch_rank(patch, cfg.data);
  std::vector<PreparedCase> cases;
  for (const ManifestRow& row : read_manifest(cfg.data.manifest)) {
    if (!row.split.empty() && row.split != "train") continue;
    if (row.label.empty()) throw ValidationError(row.case_id + ": training case has no label map");
    cases.push_back(prepare_case(load_case(row, cfg.data.manifest.parent_path()), cfg.data, patch));
  }
  if (cases.empty()) throw ValidationError("manifest " + cfg.data.manifest.string() + " has no training cases");

  NetworkGraph graph = build_network(cfg.arch);
  WeightStore<T> store = init_store<T>(graph, cfg.run.seed);
  if (!cfg.run.init_checkpoint.empty()) transfer_weights(store, load_checkpoint<T>(cfg.run.init_checkpoint));

  fs::create_directories(run_dir);
  const fs::path log_path = run_dir / "log.csv";
  std::string log = "epoch,lr,train_loss,train_dice\n";
  int first_epoch = 0;
  double best = -std::numeric_limits<double>::infinity();
  double prev_score = 0;
  LrScheduler scheduler(cfg.schedule, cfg.run.epochs);
  std::int64_t nadam_steps = 0;
  int la_counter = 0;
  if (resume) {
    const json st = json::parse(read_file(state_path));
    first_epoch = st.at("next_epoch").get<int>();
    best = st.at("best_score").get<double>();
    prev_score = st.at("last_score").get<double>();
    if (!st.at("cosine_activated_at").is_null()) scheduler.restore(st.at("cosine_activated_at").get<int>());
    nadam_steps = st.at("nadam_steps").get<std::int64_t>();
    la_counter = st.at("lookahead_counter").get<int>();
    store = load_checkpoint<T>(run_dir / "final.tar");
    log = read_file(log_path);
  } else {
    write_file_atomic(run_dir / "config.ini", to_ini(cfg));
  }

  Trainer<T> trainer(std::move(graph), std::move(store), cfg.optim, cfg.loss);
  if (resume) trainer.import_optimizer_state(load_checkpoint<T>(run_dir / "optimizer.tar"), nadam_steps, la_counter);

  TrainSummary summary;
  summary.run_dir = run_dir;
  summary.first_epoch = first_epoch;
  summary.best_score = best;
  summary.final_score = prev_score;
  const int steps = cfg.run.steps_per_epoch > 0 ? cfg.run.steps_per_epoch : static_cast<int>(cases.size());
  for (int epoch = first_epoch; epoch < cfg.run.epochs; ++epoch) {
    const double lr = scheduler.lr(epoch, prev_score);
    trainer.set_lr(lr);
    double loss_sum = 0, dice_sum = 0;
    for (int s = 0; s < steps; ++s) {
      const PreparedCase& pc = cases[static_cast<std::size_t>(s) % cases.size()];
      const std::uint64_t seed =
          derive_seed(cfg.run.seed, pc.volume.case_id, static_cast<std::int64_t>(epoch) * steps + s);
      const LabeledVolume v = cfg.data.augment ? augment(pc.volume, cfg.data.augmentation, seed) : pc.volume;
      const Placement p = place_patch(v.extents(), patch, cfg.data.anchor, seed + 1);
      const Tensor<T> x = to_batch<T>(extract_patch(v.image, p));
      const Tensor<T> y = encode_target<T>(extract_patch(*v.labels, p), cfg.data.target, cfg.arch.n_classes, rank);
      StepStats st;
      try {
        st = trainer.step(x, y);
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + ", step " + std::to_string(s) + " (case " +
                           pc.volume.case_id + "): " + e.what());
      }
      loss_sum += st.loss;
      dice_sum += st.dice_term;
    }
    const double train_loss = loss_sum / steps;
    const double score = 1.0 - dice_sum / steps;
    log += std::to_string(epoch) + "," + fmt(lr) + "," + fmt(train_loss) + "," + fmt(score) + "\n";
    if (score > best) {
      best = score;
      save_checkpoint(trainer.store(), run_dir / "best.tar");
    }
    prev_score = score;
    save_checkpoint(trainer.store(), run_dir / "final.tar");
    save_checkpoint(trainer.export_optimizer_state(), run_dir / "optimizer.tar");
    write_file_atomic(log_path, log);
    json st;
    st["next_epoch"] = epoch + 1;
    st["best_score"] = best;
    st["last_score"] = score;
    st["cosine_activated_at"] = scheduler.activated_at() ? json(*scheduler.activated_at()) : json(nullptr);
    st["nadam_steps"] = trainer.optimizer().steps();
    st["lookahead_counter"] = trainer.lookahead().counter();
    write_file_atomic(state_path, st.dump(2) + "\n");
    ++summary.epochs_run;
    summary.best_score = best;
    summary.final_score = score;
  }
  return summary;
}

}  // namespace

TrainSummary run_training(const RunConfig& cfg, bool resume) {
  return cfg.run.precision == Precision::f32 ? train_impl<float>(cfg, resume) : train_impl<double>(cfg, resume);
}

template Tensor<float> to_batch(const Tensor<double>&);
template Tensor<double> to_batch(const Tensor<double>&);
template Tensor<float> encode_target(const LabelMap&, TargetEncoding, std::int64_t, int);
template Tensor<double> encode_target(const LabelMap&, TargetEncoding, std::int64_t, int);
template Tensor<double> predict_image(const Trainer<float>&, const Tensor<double>&, const Extents&, const Extents&);
template Tensor<double> predict_image(const Trainer<double>&, const Tensor<double>&, const Extents&, const Extents&);
template LabelMap infer_case(const Trainer<float>&, const RunConfig&, const LabeledVolume&);
template LabelMap infer_case(const Trainer<double>&, const RunConfig&, const LabeledVolume&);

}  // namespace crossdim
