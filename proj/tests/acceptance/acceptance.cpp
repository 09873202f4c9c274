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

// Acceptance harness: one PASS/FAIL line per criterion on stdout, details on
// stderr, exit status 0 only when every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cli.hpp"
#include "crossdim/augment.hpp"
#include "crossdim/builders.hpp"
#include "crossdim/config.hpp"
#include "crossdim/inflate.hpp"
#include "crossdim/labels.hpp"
#include "crossdim/loss.hpp"
#include "crossdim/metrics.hpp"
#include "crossdim/ops.hpp"
#include "crossdim/optim.hpp"
#include "crossdim/schedule.hpp"
#include "crossdim/split.hpp"
#include "crossdim/synthetic.hpp"
#include "crossdim/trainer.hpp"
#include "crossdim/volume_io.hpp"
#include "fixtures.hpp"
#include "generators.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

namespace crossdim {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, const char* spec = "%.3g") {
  char buf[48];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

/// Collects failed checks; the criterion passes when none failed.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  bool ok() const { return failures_.empty(); }
  const std::vector<std::string>& failures() const { return failures_; }
  std::string note;

 private:
  std::vector<std::string> failures_;
};

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;
  std::function<void(Checks&)> run;
};

// --- 1: gradient suite -----------------------------------------------------------

void gradient_suite(Checks& c) {
  double worst_primitive = 0, worst_network = 0;
  for (const auto& r : oracle::check_all_primitives(6, 11)) {
    worst_primitive = std::max(worst_primitive, r.max_rel_error);
    c.expect(r.max_rel_error <= 1e-6, r.name + " rel error " + fmt(r.max_rel_error));
  }
  for (ArchKind k : {ArchKind::omnia_net, ArchKind::ds_net, ArchKind::dx_net}) {
    const auto r = oracle::check_network(oracle::tiny_arch(k), 3);
    worst_network = std::max(worst_network, r.max_rel_error);
    c.expect(r.parameters <= 5000, to_string(k) + " has " + std::to_string(r.parameters) + " parameters");
    c.expect(r.max_rel_error <= 1e-4, to_string(k) + " rel error " + fmt(r.max_rel_error));
  }
  c.note = "primitives max " + fmt(worst_primitive) + ", networks max " + fmt(worst_network);
}

// --- 2: inflation equivalence -----------------------------------------------------

void inflation_equivalence(Checks& c) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::int64_t> ch(1, 4);
  std::uniform_int_distribution<int> ks(0, 2);
  double worst = 0;
  int checks = 0;
  for (int kernel = 0; kernel < 20; ++kernel) {
    const std::int64_t co = ch(rng), ci = ch(rng), kh = 1 + 2 * ks(rng), kw = 1 + 2 * ks(rng);
    const Tensor<double> k2 = oracle::random_tensor({co, ci, kh, kw}, rng);
    const std::int64_t h = kh + 4, w = kw + 5;
    const Tensor<double> x2 = oracle::random_tensor({1, ci, h, w}, rng);
    const Tensor<double> y2 = oracle::conv(x2, k2, nullptr, {1, 1}, {0, 0});
    for (int kd : {1, 2, 3, 5}) {
      const std::int64_t d = kd + 2;
      Tensor<double> x3({1, ci, d, h, w});
      for (std::int64_t i = 0; i < ci; ++i)
        for (std::int64_t z = 0; z < d; ++z)
          for (std::int64_t p = 0; p < h * w; ++p) x3[static_cast<std::size_t>((i * d + z) * h * w + p)] = x2[static_cast<std::size_t>(i * h * w + p)];
      for (InflationMode mode : {InflationMode::replicate, InflationMode::replicate_scaled}) {
        const Tensor<double> k3 = inflate_kernel(k2, kd, mode);
        const Tensor<double> y3 = conv_forward<double>(x3, k3, nullptr, ConvConfig::uniform(3, 1, 0));
        const double scale = mode == InflationMode::replicate ? kd : 1.0;
        const std::int64_t od = d - kd + 1, plane = y2.numel() / static_cast<std::size_t>(co);
        std::vector<double> got, want;
        for (std::int64_t o = 0; o < co; ++o)
          for (std::int64_t z = 0; z < od; ++z)
            for (std::int64_t p = 0; p < plane; ++p) {
              got.push_back(y3[static_cast<std::size_t>((o * od + z) * plane + p)]);
              want.push_back(scale * y2[static_cast<std::size_t>(o * plane + p)]);
            }
        const double err = oracle::max_rel_error(got, want);
        worst = std::max(worst, err);
        ++checks;
        c.expect(err <= 1e-6, "kernel " + std::to_string(kernel) + " kd " + std::to_string(kd) + " rel error " + fmt(err));
      }
    }
  }
  c.note = std::to_string(checks) + " kernel/depth/mode checks, max rel error " + fmt(worst);
}

// --- 3: metric oracle suite -------------------------------------------------------

void metric_oracles(Checks& c) {
  std::mt19937_64 rng(3);
  int defined = 0;
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    const auto p = oracle::random_pair(rng);
    const std::string tag = "pair " + std::to_string(t);
    c.expect(dice(p.a, p.b).value == oracle::dice(p.a, p.b), tag + ": dice differs from counting oracle");
    c.expect(ravd(p.a, p.b) == oracle::ravd(p.a, p.b), tag + ": ravd differs from counting oracle");
    const auto conn = t % 2 ? Connectivity::six : Connectivity::twenty_six;
    const auto got = surface_distances(extract_surface(p.a, p.spacing, conn), extract_surface(p.b, p.spacing, conn));
    const auto want = oracle::surface_distances(p.a, p.b, p.spacing, static_cast<int>(conn));
    c.expect(got.has_value() == want.has_value(), tag + ": definedness differs");
    if (!got || !want) continue;
    ++defined;
    for (auto [g, w] : {std::pair{got->mad, want->mad}, {got->assd, want->assd}, {got->mssd, want->mssd},
                        {got->hd, want->hd}}) {
      worst = std::max(worst, std::abs(g - w));
      c.expect(std::abs(g - w) <= 1e-9, tag + ": distance off by " + fmt(std::abs(g - w)));
    }
  }
  c.note = "100 pairs, " + std::to_string(defined) + " with surfaces, max distance error " + fmt(worst) + " mm";
}

// --- 4: loss and label algebra ----------------------------------------------------

void loss_label_algebra(Checks& c) {
  std::mt19937_64 rng(4);
  std::bernoulli_distribution coin(0.4);
  double worst_perfect = 0;
  int flips = 0;
  for (int t = 0; t < 30; ++t) {
    const std::int64_t ch = 1 + t % 3;
    Tensor<double> g({1, ch, 4, 5});
    for (double& v : g.data()) v = coin(rng);
    for (std::int64_t k = 0; k < ch; ++k) g[static_cast<std::size_t>(k * 20 + t % 20)] = 1;  // non-empty support
    const double perfect = compound_loss(g, g).loss;
    worst_perfect = std::max(worst_perfect, perfect);
    c.expect(perfect <= 1e-4, "perfect loss " + fmt(perfect));
    for (std::size_t i = 0; i < g.numel(); ++i) {
      Tensor<double> flipped = g;
      flipped[i] = 1 - flipped[i];
      ++flips;
      c.expect(compound_loss(flipped, g).loss > perfect, "flip " + std::to_string(i) + " did not increase the loss");
    }
  }
  static const std::int32_t alphabet[4] = {0, 1, 2, 4};
  std::int64_t maps = 0;
  bool identity = true;
  for (int k = 1; k <= 8; ++k) {
    for (std::int64_t code = 0; code < (std::int64_t{1} << (2 * k)); ++code) {
      LabelMap m(Extents{1, 1, k});
      for (int i = 0; i < k; ++i) m.data[static_cast<std::size_t>(i)] = alphabet[(code >> (2 * i)) & 3];
      const auto r = reconstruct_labels(region_remap(m));
      identity = identity && r.labels == m && r.repaired_voxels == 0;
      ++maps;
    }
  }
  c.expect(identity, "region_remap then reconstruct_labels is not the identity");
  c.expect(maps == 87380, "enumerated " + std::to_string(maps) + " maps");
  c.note = "perfect loss max " + fmt(worst_perfect) + ", " + std::to_string(flips) + " flips, " +
           std::to_string(maps) + " label maps";
}

// --- 5: optimizer oracle ----------------------------------------------------------

void optimizer_oracle(Checks& c) {
  // Independent recurrence with constant momentum schedule.
  const double b1 = 0.95, b2 = 0.99, eps = 1e-8, eta = 0.1;
  double theta = 1.0, m = 0, v = 0, worst = 0;
  NadamConfig cfg;
  cfg.lr = eta;
  NadamOptimizer<double> opt(cfg);
  WeightStore<double> s;
  s.add("theta", ParamRole::conv_bias, 2, Tensor<double>({1}, 1.0));
  for (int t = 1; t <= 3; ++t) {
    const double g = 1.0;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double m_hat = b1 * m / (1 - std::pow(b1, t + 1)) + (1 - b1) * g / (1 - std::pow(b1, t));
    const double v_hat = v / (1 - std::pow(b2, t));
    theta -= eta * m_hat / (std::sqrt(v_hat) + eps);
    auto& value = s.at("theta").value;
    value.ensure_grad();
    value.grad()[0] = g;
    opt.step(s);
    const double err = std::abs(value[0] - theta);
    worst = std::max(worst, err);
    c.expect(err <= 1e-12, "nadam step " + std::to_string(t) + " off by " + fmt(err));
  }

  LookAhead<double> la;
  WeightStore<double> w;
  w.add("w", ParamRole::conv_bias, 2, Tensor<double>({1}, 0.0));
  la.initialize(w);
  std::vector<int> commits;
  for (int t = 1; t <= 20; ++t) {
    w.at("w").value[0] += 1.0;
    if (la.step(w)) commits.push_back(t);
  }
  c.expect(commits == std::vector<int>{6, 12, 18}, "lookahead commits at wrong steps");

  const LrSchedule sched;
  const double want[3] = {3e-4, 2.85e-4, 1e-5};
  const int epochs[3] = {0, 1, 67};
  for (int i = 0; i < 3; ++i) {
    const double got = lr_at(sched, epochs[i]);
    c.expect(std::abs(got - want[i]) <= 1e-15, "exp decay epoch " + std::to_string(epochs[i]) + " gives " + fmt(got, "%.17g"));
  }
  c.note = "nadam max error " + fmt(worst) + ", commits at 6/12/18, decay 3e-4/2.85e-4/1e-5";
}

// --- 6: overfit smoke tests -------------------------------------------------------

struct OverfitOutcome {
  int steps = -1;
  double dice = 0;
  double seconds = 0;
};

/// Thresholded foreground Dice of the inference-mode prediction.
template <typename T>
double eval_dice(const Trainer<T>& trainer, const Tensor<T>& x, const LabelMap& truth, const RunConfig& cfg) {
  const Tensor<T> p = trainer.predict(x);
  Tensor<double> probs(Shape(p.shape().begin() + 1, p.shape().end()));
  for (std::size_t i = 0; i < p.numel(); ++i) probs[i] = static_cast<double>(p[i]);
  const LabelMap lab = decode_prediction(probs, cfg.data, cfg.arch.output_activation, {1, 1, 1});
  Mask a(lab.extents), b(truth.extents);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a.data[i] = lab.data[i] != 0;
    b.data[i] = truth.data[i] != 0;
  }
  return dice(a, b).value;
}

RunConfig overfit_config(ArchKind kind) {
  RunConfig cfg;
  cfg.arch = default_arch_config(kind);
  cfg.arch.stem_filters = kind == ArchKind::omnia_net ? 8 : 4;
  cfg.arch.encoder_widths = kind == ArchKind::omnia_net ? std::vector<std::int64_t>{8, 16, 16, 16}
                                                        : std::vector<std::int64_t>{4, 8, 8, 8};
  cfg.arch.input_extents = kind == ArchKind::omnia_net ? std::vector<std::int64_t>{64, 64}
                                                       : std::vector<std::int64_t>{32, 32, 32};
  cfg.data.target = TargetEncoding::binary;
  cfg.optim.nadam.lr = 3e-3;
  cfg.validate();
  return cfg;
}

OverfitOutcome overfit(ArchKind kind, int max_steps, int eval_every) {
  const RunConfig cfg = overfit_config(kind);
  const Extents e = kind == ArchKind::omnia_net ? Extents{1, 64, 64} : Extents{32, 32, 32};
  const NetworkGraph g = build_network(cfg.arch);
  Trainer<float> trainer(g, init_store<float>(g, 1), cfg.optim, cfg.loss);
  const LabeledVolume raw = sphere_case(e, 1, 7);
  const PreparedCase pc = prepare_case(raw, cfg.data, cfg.patch());
  const Tensor<float> x = to_batch<float>(pc.volume.image);
  const int rank = kind == ArchKind::omnia_net ? 2 : 3;
  const Tensor<float> y = encode_target<float>(*pc.volume.labels, cfg.data.target, cfg.arch.n_classes, rank);
  OverfitOutcome out;
  const auto t0 = Clock::now();
  for (int s = 1; s <= max_steps; ++s) {
    trainer.step(x, y);
    if (s % eval_every == 0 || s == max_steps) {
      out.dice = eval_dice(trainer, x, *pc.volume.labels, cfg);
      if (out.dice >= 0.95) {
        out.steps = s;
        break;
      }
    }
  }
  out.seconds = seconds_since(t0);
  return out;
}

void overfit_smoke(Checks& c) {
  std::string note;
  for (ArchKind k : {ArchKind::omnia_net, ArchKind::ds_net, ArchKind::dx_net}) {
    const OverfitOutcome o = overfit(k, 300, 10);
    std::cerr << "  overfit " << to_string(k) << ": dice " << fmt(o.dice, "%.4f") << " after "
              << (o.steps > 0 ? std::to_string(o.steps) : std::string("300 (not reached)")) << " steps, "
              << fmt(o.seconds, "%.1f") << " s\n";
    c.expect(o.steps > 0, to_string(k) + " reached only dice " + fmt(o.dice, "%.4f") + " in 300 steps");
    c.expect(o.seconds <= 600, to_string(k) + " took " + fmt(o.seconds, "%.0f") + " s");
    note += (note.empty() ? "" : ", ") + to_string(k) + " " + (o.steps > 0 ? std::to_string(o.steps) : "-") +
            " steps/" + fmt(o.seconds, "%.0f") + "s";
  }
  c.note = note;
}

// --- 7: transfer-benefit experiment -----------------------------------------------

ArchConfig transfer_source_arch() {
  ArchConfig a = default_arch_config(ArchKind::omnia_net);
  a.stem_filters = 4;
  a.encoder_widths = {4, 8, 8, 8};
  a.input_extents = {16, 16};
  a.n_classes = 1;
  a.output_activation = Activation::sigmoid;
  return a;
}

/// 2D source network pretrained on disk slices of a sphere task.
WeightStore<float> pretrain_source(const RunConfig& base) {
  RunConfig cfg = base;
  cfg.arch = transfer_source_arch();
  const NetworkGraph g = build_network(cfg.arch);
  Trainer<float> trainer(g, init_store<float>(g, 100), cfg.optim, cfg.loss);
  std::vector<std::pair<Tensor<float>, Tensor<float>>> batches;
  for (std::uint64_t s = 0; s < 4; ++s) {
    const PreparedCase pc = prepare_case(sphere_case({1, 16, 16}, 1, 200 + s), cfg.data, cfg.patch());
    batches.emplace_back(to_batch<float>(pc.volume.image),
                         encode_target<float>(*pc.volume.labels, cfg.data.target, 1, 2));
  }
  for (int step = 0; step < 200; ++step) {
    const auto& [x, y] = batches[static_cast<std::size_t>(step) % batches.size()];
    trainer.step(x, y);
  }
  return trainer.store();
}

struct TransferRow {
  std::uint64_t seed;
  std::string init;
  std::optional<int> steps_to_090;
  double final_dice;
};

std::string transfer_csv(const std::vector<TransferRow>& rows) {
  std::string csv = "seed,init,steps_to_dice_0.90,final_dice\n";
  for (const auto& r : rows)
    csv += std::to_string(r.seed) + "," + r.init + "," + (r.steps_to_090 ? std::to_string(*r.steps_to_090) : "NA") +
           "," + fmt(r.final_dice, "%.6f") + "\n";
  return csv;
}

void transfer_experiment(Checks& c, const fs::path& out_dir) {
  RunConfig cfg;
  cfg.arch = transfer_source_arch();
  cfg.arch.kind = ArchKind::dx_net;
  cfg.arch.input_extents = {16, 16, 16};
  cfg.data.target = TargetEncoding::binary;
  cfg.optim.nadam.lr = 3e-3;
  cfg.validate();
  const WeightStore<float> source = pretrain_source(cfg);
  const NetworkGraph g = build_network(cfg.arch);
  const int budget = 150, eval_every = 10;

  std::vector<TransferRow> rows;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const PreparedCase pc = prepare_case(sphere_case({16, 16, 16}, 1, 1000 + seed), cfg.data, cfg.patch());
    const Tensor<float> x = to_batch<float>(pc.volume.image);
    const Tensor<float> y = encode_target<float>(*pc.volume.labels, cfg.data.target, 1, 3);
    for (const std::string init : {"random", "replicate", "replicate-scaled"}) {
      WeightStore<float> store = init_store<float>(g, seed);
      if (init != "random") {
        InflationPlan plan;
        plan.mode = inflation_mode_from_string(init);
        const WeightStore<float> inflated = inflate_store(source, plan);
        for (const std::string prefix : {"stem.", "encoder."}) transfer_weights(store, inflated, {prefix, prefix});
      }
      Trainer<float> trainer(g, std::move(store), cfg.optim, cfg.loss);
      TransferRow row{seed, init, std::nullopt, 0};
      for (int s = 1; s <= budget; ++s) {
        trainer.step(x, y);
        if (s % eval_every == 0) {
          row.final_dice = eval_dice(trainer, x, *pc.volume.labels, cfg);
          if (!row.steps_to_090 && row.final_dice >= 0.90) row.steps_to_090 = s;
        }
      }
      rows.push_back(row);
    }
  }
  const std::string csv = transfer_csv(rows);
  fs::create_directories(out_dir);
  const fs::path path = out_dir / "transfer.csv";
  oracle::write_bytes(path, csv);

  // Well-formedness: re-read the file and parse every field.
  std::istringstream in(oracle::read_bytes(path));
  std::string line;
  std::getline(in, line);
  c.expect(line == "seed,init,steps_to_dice_0.90,final_dice", "bad header '" + line + "'");
  int parsed = 0;
  std::set<std::string> inits;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    bool ok = f.size() == 4;
    if (ok) {
      inits.insert(f[1]);
      try {
        std::stoull(f[0]);
        if (f[2] != "NA") ok = std::stoi(f[2]) > 0;
        const double d = std::stod(f[3]);
        ok = ok && d >= 0 && d <= 1;
      } catch (const std::exception&) {
        ok = false;
      }
    }
    c.expect(ok, "malformed row '" + line + "'");
    ++parsed;
  }
  c.expect(parsed == 15, std::to_string(parsed) + " rows instead of 15");
  c.expect(inits == std::set<std::string>{"random", "replicate", "replicate-scaled"}, "init column incomplete");

  std::string summary;
  for (const std::string init : {"random", "replicate", "replicate-scaled"}) {
    double steps = 0, final_dice = 0;
    int reached = 0;
    for (const auto& r : rows) {
      if (r.init != init) continue;
      final_dice += r.final_dice / 5;
      if (r.steps_to_090) {
        steps += *r.steps_to_090;
        ++reached;
      }
    }
    summary += (summary.empty() ? "" : "; ") + init + " reached " + std::to_string(reached) + "/5" +
               (reached ? ", mean " + fmt(steps / reached, "%.0f") + " steps" : "") + ", final " +
               fmt(final_dice, "%.3f");
  }
  std::cerr << "  transfer: " << summary << "\n  csv: " << path.string() << "\n";
  c.note = summary;
}

// --- 8: determinism ---------------------------------------------------------------

int cli(std::vector<std::string> args, std::string* out = nullptr) {
  args.insert(args.begin(), "crossdim");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), o, e);
  if (out) *out = o.str();
  if (code != cli::kExitOk) std::cerr << "  crossdim " << args[1] << " ...: " << e.str();
  return code;
}

void determinism(Checks& c) {
  oracle::TempDir dir("crossdim_accept");
  const fs::path data = dir.path() / "data";
  c.expect(cli({"--out", data.string(), "--seed", "5", "synth", "--count", "3", "--extents", "16,16,16"}) == 0,
           "synth failed");
  const fs::path manifest = data / "manifest.csv";
  std::vector<std::string> outputs;
  for (int run = 0; run < 2; ++run) {
    const fs::path run_dir = dir.path() / ("run" + std::to_string(run));
    const fs::path ini = dir.path() / ("c" + std::to_string(run) + ".ini");
    oracle::write_bytes(ini, "[arch]\nkind = dx-net\nn_classes = 1\noutput_activation = sigmoid\nstem_filters = 4\n"
                             "encoder_widths = 4, 8, 8, 8\nextents = 16, 16, 16\n[schedule]\nlr0 = 0.003\n"
                             "[data]\nmanifest = " + manifest.string() + "\naugment = true\n"
                             "[run]\nepochs = 2\nseed = 9\nout = " + run_dir.string() + "\n");
    c.expect(cli({"--config", ini.string(), "train"}) == 0, "train failed");
    const fs::path pred = dir.path() / ("pred" + std::to_string(run));
    c.expect(cli({"--config", ini.string(), "--out", pred.string(), "infer", "--checkpoint",
                  (run_dir / "final.tar").string(), "--manifest", manifest.string()}) == 0,
             "infer failed");
    std::string split;
    c.expect(cli({"--seed", "4", "split", "--manifest", manifest.string(), "--k", "3"}, &split) == 0, "split failed");
    std::string bytes;
    for (const char* f : {"final.tar", "best.tar", "optimizer.tar", "log.csv"}) bytes += oracle::read_bytes(run_dir / f);
    for (const char* f : {"case000.nii.gz", "case001.nii.gz", "case002.nii.gz"}) bytes += oracle::read_bytes(pred / f);
    outputs.push_back(bytes + split);
  }
  c.expect(outputs[0] == outputs[1], "checkpoints, masks or splits differ between identical runs");

  const LabeledVolume v = nested_tumor_case({12, 12, 12}, 3);
  AugmentConfig aug;
  aug.set_probability(1.0);
  const LabeledVolume a = augment(v, aug, 77), b = augment(v, aug, 77);
  c.expect(oracle::values(a.image) == oracle::values(b.image) && *a.labels == *b.labels, "augmentation differs");
  c.note = "checkpoints, optimizer state, logs, masks, splits and augmentations identical across two runs";
}

// --- 9: I/O round trips -----------------------------------------------------------

template <typename T>
bool bitwise_equal(const WeightStore<T>& a, const WeightStore<T>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto &x = a.entries()[i], &y = b.entries()[i];
    if (x.name != y.name || x.role != y.role || x.rank != y.rank || x.value.shape() != y.value.shape()) return false;
    if (std::memcmp(x.value.data().data(), y.value.data().data(), x.value.numel() * sizeof(T)) != 0) return false;
  }
  return true;
}

template <typename T>
void checkpoint_round_trip(Checks& c, const fs::path& dir) {
  const NetworkGraph g = build_network(oracle::tiny_arch(ArchKind::ds_net));
  const WeightStore<T> s = init_store<T>(g, 8);
  for (const char* name : {"ckpt_dir", "ckpt.tar"}) {
    const fs::path p = dir / (std::string(sizeof(T) == 4 ? "f_" : "d_") + name);
    save_checkpoint(s, p);
    const WeightStore<T> r = load_checkpoint<T>(p);
    c.expect(bitwise_equal(s, r), p.filename().string() + ": values differ after reload");
    if (p.extension() == ".tar") {
      const fs::path again = dir / ("again_" + p.filename().string());
      save_checkpoint(r, again);
      c.expect(oracle::read_bytes(p) == oracle::read_bytes(again), p.filename().string() + ": re-save differs");
    }
  }
}

void io_round_trips(Checks& c) {
  oracle::TempDir dir("crossdim_accept_io");
  checkpoint_round_trip<float>(c, dir.path());
  checkpoint_round_trip<double>(c, dir.path());

  std::vector<float> cube(8);
  for (int i = 0; i < 8; ++i) cube[static_cast<std::size_t>(i)] = static_cast<float>(i) - 2.5f;
  oracle::write_bytes(dir.path() / "cube.nii", oracle::nifti_fixture({2, 2, 2}, 16, 32, {0.5f, 0.75f, 2.0f}, oracle::raw(cube)));
  const LabeledVolume n = load_volume(dir.path() / "cube.nii");
  bool exact = n.image.numel() == 8;
  for (std::size_t i = 0; exact && i < 8; ++i) exact = n.image[i] == static_cast<double>(cube[i]);
  c.expect(exact, "NIfTI float32 fixture values differ");
  c.expect(n.spacing == Spacing{2.0, 0.75, 0.5}, "NIfTI fixture spacing differs");

  oracle::write_bytes(dir.path() / "s.nii",
                      oracle::nifti_fixture({2, 2}, 4, 16, {1, 1}, oracle::raw<std::int16_t>({-3, 0, 7, 100}), 0.5f, 10.0f));
  c.expect(oracle::values(load_volume(dir.path() / "s.nii").image) == std::vector<double>{8.5, 10, 13.5, 60},
           "NIfTI scaled int16 fixture differs");

  std::vector<std::int16_t> mhd(12);
  for (std::size_t i = 0; i < mhd.size(); ++i) mhd[i] = static_cast<std::int16_t>(17 * i - 90);
  oracle::write_bytes(dir.path() / "m.raw", oracle::raw(mhd));
  oracle::write_bytes(dir.path() / "m.mhd", "NDims = 3\nDimSize = 3 2 2\nElementSpacing = 0.5 0.5 2.0\n"
                                            "ElementType = MET_SHORT\nElementDataFile = m.raw\n");
  const LabeledVolume m = load_volume(dir.path() / "m.mhd");
  c.expect(m.extents() == Extents{2, 2, 3}, "MetaImage fixture extents differ");
  c.expect(m.spacing == Spacing{2.0, 0.5, 0.5}, "MetaImage fixture spacing differs");
  bool mhd_exact = m.image.numel() == mhd.size();
  for (std::size_t i = 0; mhd_exact && i < mhd.size(); ++i) mhd_exact = m.image[i] == mhd[i];
  c.expect(mhd_exact, "MetaImage fixture values differ");

  for (const char* ext : {".nii", ".nii.gz", ".mhd"}) {
    const fs::path p = dir.path() / (std::string("rt") + ext);
    save_volume(p, n, VoxelType::float32);
    const LabeledVolume r = load_volume(p);
    c.expect(oracle::values(r.image) == oracle::values(n.image) && r.spacing == n.spacing,
             std::string(ext) + " save/load differs");
  }
  c.note = "float and double checkpoints (directory and tar) bitwise; NIfTI and MetaImage fixtures exact";
}

}  // namespace
}  // namespace crossdim

int main(int argc, char** argv) {
  using namespace crossdim;
  CLI::App app{"crossdim acceptance harness"};
  std::string out_dir = "acceptance_out";
  std::vector<int> only;
  app.add_option("--out", out_dir, "Directory for experiment reports")->capture_default_str();
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {1, "gradient suite", 120, gradient_suite},
      {2, "inflation equivalence", 30, inflation_equivalence},
      {3, "metric oracles", 120, metric_oracles},
      {4, "loss and label algebra", 60, loss_label_algebra},
      {5, "optimizer oracle", 60, optimizer_oracle},
      {6, "overfit smoke tests", 1800, overfit_smoke},
      {7, "transfer experiment", 1800, [&](Checks& c) { transfer_experiment(c, out_dir); }},
      {8, "determinism", 600, determinism},
      {9, "io round trips", 60, io_round_trips},
  };
  int failed = 0;
  for (const Criterion& cr : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), cr.id) == only.end()) continue;
    Checks checks;
    const auto t0 = Clock::now();
    try {
      cr.run(checks);
    } catch (const std::exception& e) {
      checks.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = seconds_since(t0);
    checks.expect(secs <= cr.budget_seconds, "runtime " + fmt(secs, "%.1f") + " s exceeds " + fmt(cr.budget_seconds, "%.0f") + " s");
    const bool pass = checks.ok();
    failed += !pass;
    std::cout << (pass ? "PASS" : "FAIL") << " [" << cr.id << "] " << cr.name << " (" << fmt(secs, "%.1f") << " s)";
    if (!checks.note.empty()) std::cout << ": " << checks.note;
    std::cout << std::endl;
    const auto& f = checks.failures();
    for (std::size_t i = 0; i < f.size() && i < 10; ++i) std::cerr << "  - " << f[i] << "\n";
    if (f.size() > 10) std::cerr << "  - ... " << f.size() - 10 << " more\n";
  }
  return failed == 0 ? 0 : 1;
}
