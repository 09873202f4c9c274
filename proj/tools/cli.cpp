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

#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "crossdim/atomic_io.hpp"
#include "crossdim/builders.hpp"
#include "crossdim/config.hpp"
#include "crossdim/errors.hpp"
#include "crossdim/inflate.hpp"
#include "crossdim/metrics.hpp"
#include "crossdim/report.hpp"
#include "crossdim/split.hpp"
#include "crossdim/synthetic.hpp"
#include "crossdim/trainer.hpp"
#include "crossdim/volume_io.hpp"

namespace crossdim::cli {

namespace fs = std::filesystem;

namespace {

RunConfig load_config(const GlobalOptions& g) {
  if (g.config.empty()) throw ConfigError("--config is required for this command");
  RunConfig cfg = load_run_config(g.config);
  if (g.seed) cfg.run.seed = *g.seed;
  if (g.precision) cfg.run.precision = precision_from_string(*g.precision);
  return cfg;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// --- train ----------------------------------------------------------------------

int cmd_train(const GlobalOptions& g, bool resume, std::optional<int> epochs, std::ostream& out) {
  RunConfig cfg = load_config(g);
  if (!g.out.empty()) cfg.run.out = fs::absolute(g.out).lexically_normal();
  if (epochs) cfg.run.epochs = *epochs;
  const TrainSummary s = run_training(cfg, resume);
  out << "run directory: " << s.run_dir.string() << "\n"
      << "epochs " << s.first_epoch << ".." << (s.first_epoch + s.epochs_run - 1) << ", final train dice "
      << fmt(s.final_score) << ", best " << fmt(s.best_score) << "\n";
  return kExitOk;
}

// --- infer ----------------------------------------------------------------------

template <typename T>
int infer_impl(const RunConfig& cfg, const fs::path& checkpoint, const fs::path& manifest, const fs::path& out_dir,
               std::ostream& out) {
  NetworkGraph graph = build_network(cfg.arch);
  WeightStore<T> store = load_checkpoint<T>(checkpoint);
  const Trainer<T> trainer(std::move(graph), std::move(store), OptimSection{}, cfg.loss);
  const auto rows = read_manifest(manifest);
  if (rows.empty()) throw ValidationError("manifest " + manifest.string() + " lists no cases");
  if (!out_dir.parent_path().empty()) fs::create_directories(out_dir.parent_path());
  const fs::path staging = staging_path(out_dir);
  try {
    fs::create_directories(staging);
    for (const ManifestRow& row : rows) {
      ManifestRow image_only = row;
      image_only.label.clear();
      const LabeledVolume raw = load_case(image_only, manifest.parent_path());
      const LabelMap labels = infer_case(trainer, cfg, raw);
      save_label_map(staging / (row.case_id + ".nii.gz"), labels, raw.spacing);
      const auto fg = std::count_if(labels.data.begin(), labels.data.end(), [](std::int32_t l) { return l != 0; });
      out << row.case_id << ": " << fg << " labelled voxels\n";
    }
    commit_staged(staging, out_dir);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    throw;
  }
  return kExitOk;
}

int cmd_infer(const GlobalOptions& g, const std::string& checkpoint, const std::string& manifest,
              std::ostream& out) {
  const RunConfig cfg = load_config(g);
  if (g.out.empty()) throw ConfigError("--out is required for infer");
  if (cfg.run.precision == Precision::f32) return infer_impl<float>(cfg, checkpoint, manifest, g.out, out);
  return infer_impl<double>(cfg, checkpoint, manifest, g.out, out);
}

// --- eval -----------------------------------------------------------------------

std::vector<ClassSpec> parse_classes(const std::string& spec) {
  if (spec == "brats") return brats_region_classes();
  std::vector<ClassSpec> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ';')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("class '" + item + "' must read name=label[+label...]");
    ClassSpec c{item.substr(0, eq), {}};
    std::stringstream ls(item.substr(eq + 1));
    std::string l;
    while (std::getline(ls, l, '+')) {
      try {
        c.labels.push_back(std::stoi(l));
      } catch (const std::exception&) {
        throw ConfigError("class '" + c.name + "': '" + l + "' is not an integer label");
      }
    }
    if (c.labels.empty()) throw ConfigError("class '" + c.name + "' names no labels");
    out.push_back(std::move(c));
  }
  if (out.empty()) throw ConfigError("no evaluation classes given");
  return out;
}

/// Case id -> label file, for files named <case_id>.nii, .nii.gz or .mhd.
std::map<std::string, fs::path> label_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ValidationError(dir.string() + " is not a directory");
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    for (const std::string ext : {".nii.gz", ".nii", ".mhd"}) {
      if (name.size() > ext.size() && name.compare(name.size() - ext.size(), ext.size(), ext) == 0) {
        out[name.substr(0, name.size() - ext.size())] = entry.path();
        break;
      }
    }
  }
  return out;
}

int cmd_eval(const std::string& pred_dir, const std::string& gt_dir, const std::string& classes,
             const std::string& spacing_policy, int connectivity, const std::string& out_path, std::ostream& out,
             std::ostream& err) {
  if (spacing_policy != "reference" && spacing_policy != "unit") {
    throw ConfigError("--spacing must be reference or unit");
  }
  if (connectivity != 6 && connectivity != 26) throw ConfigError("--connectivity must be 6 or 26");
  const auto cls = parse_classes(classes);
  const auto preds = label_files(pred_dir), truths = label_files(gt_dir);
  std::vector<CaseReport> reports;
  std::vector<std::string> skipped;
  for (const auto& [id, gt_path] : truths) {
    auto it = preds.find(id);
    if (it == preds.end()) {
      skipped.push_back(id + " (no prediction)");
      continue;
    }
    try {
      Spacing spacing{1.0, 1.0, 1.0};
      const LabelMap truth = load_label_map(gt_path, &spacing);
      const LabelMap pred = load_label_map(it->second);
      if (spacing_policy == "unit") spacing = {1.0, 1.0, 1.0};
      reports.push_back(evaluate_case(id, pred, truth, spacing, cls, static_cast<Connectivity>(connectivity)));
    } catch (const Error& e) {
      skipped.push_back(id + " (" + e.what() + ")");
    }
  }
  for (const auto& [id, path] : preds)
    if (!truths.count(id)) skipped.push_back(id + " (no reference)");
  const std::string csv = report_csv(reports);
  if (out_path.empty()) {
    out << csv;
  } else {
    write_file_atomic(out_path, csv);
    out << "wrote " << reports.size() << " cases to " << out_path << "\n";
  }
  if (!skipped.empty()) {
    err << "skipped " << skipped.size() << " case(s):\n";
    for (const auto& s : skipped) err << "  " << s << "\n";
    return kExitPartial;
  }
  return kExitOk;
}

// --- inflate --------------------------------------------------------------------

int cmd_inflate(const std::string& in, const std::string& out_path, int depth, const std::string& mode, int trials,
                std::uint64_t seed, std::ostream& out) {
  if (out_path.empty()) throw ConfigError("--out is required for inflate");
  if (depth < 1) throw ConfigError("--depth must be >= 1");
  const WeightStore<double> s2 = load_checkpoint<double>(in);
  for (const auto& e : s2.entries())
    if (e.rank != 2) {
      throw ValidationError("entry '" + e.name + "' has spatial rank " + std::to_string(e.rank) +
                            "; inflation needs a 2D store");
    }
  InflationPlan plan;
  plan.depth = depth;
  plan.mode = inflation_mode_from_string(mode);
  const WeightStore<double> s3 = inflate_store(s2, plan);
  bool all_pass = true;
  for (const auto& e : s2.entries()) {
    if (e.role != ParamRole::conv_kernel) continue;
    const InflationReport r = verify_inflation_equivalence(e.value, plan.depth_for(e.name), trials, plan.mode, seed);
    all_pass = all_pass && r.pass;
    out << e.name << ": kd " << r.depth << ", " << r.trials << " trials, max rel error " << fmt(r.max_rel_error)
        << (r.pass ? " ok" : " FAIL") << "\n";
  }
  if (!all_pass) throw NumericError("inflation equivalence check failed");
  save_checkpoint(s3, out_path);
  out << "wrote " << s3.size() << " entries to " << out_path << "\n";
  return kExitOk;
}

// --- split ----------------------------------------------------------------------

int cmd_split(const std::string& manifest, int k, double holdout, std::uint64_t seed, const std::string& out_path,
              std::ostream& out) {
  std::vector<std::string> ids;
  for (const auto& row : read_manifest(manifest)) ids.push_back(row.case_id);
  std::string csv = "case_id,fold\n";
  if (holdout > 0) {
    const HoldoutSplit s = holdout_split(ids, holdout, seed);
    for (const auto& id : s.train) csv += id + ",train\n";
    for (const auto& id : s.validation) csv += id + ",validation\n";
  } else {
    const auto folds = kfold_split(ids, k, seed);
    for (std::size_t f = 0; f < folds.size(); ++f)
      for (const auto& id : folds[f]) csv += id + "," + std::to_string(f) + "\n";
  }
  if (out_path.empty()) {
    out << csv;
  } else {
    write_file_atomic(out_path, csv);
    out << "wrote " << ids.size() << " assignments to " << out_path << "\n";
  }
  return kExitOk;
}

// --- verify ---------------------------------------------------------------------

int cmd_verify(const GlobalOptions& g, const std::string& checkpoint, const std::string& volume,
               std::ostream& out) {
  if (checkpoint.empty() && volume.empty()) throw ConfigError("verify needs --checkpoint and/or --volume");
  if (!checkpoint.empty()) {
    const WeightStore<double> store = load_checkpoint<double>(checkpoint);
    store.validate();
    out << checkpoint << ": " << store.size() << " entries, " << store.trainable_count() << " trainable values, "
        << to_string(store.dtype()) << ", inflation " << to_string(store.meta().inflation) << "\n";
    if (!g.config.empty()) {
      const RunConfig cfg = load_config(g);
      check_store(build_network(cfg.arch), store);
      out << "matches " << to_string(cfg.arch.kind) << " from " << g.config << "\n";
    }
  }
  if (!volume.empty()) {
    const LabeledVolume v = load_volume(volume);
    v.validate();
    out << volume << ": " << v.channels() << " channel(s), extents " << v.extents().str() << ", spacing "
        << fmt(v.spacing[0]) << " x " << fmt(v.spacing[1]) << " x " << fmt(v.spacing[2]) << " mm\n";
  }
  return kExitOk;
}

// --- synth ----------------------------------------------------------------------

int cmd_synth(const std::string& kind, int count, const std::vector<std::int64_t>& extents, std::int64_t channels,
              std::uint64_t seed, const std::string& out_dir, std::ostream& out) {
  if (out_dir.empty()) throw ConfigError("--out is required for synth");
  Extents e;
  if (extents.size() == 2) {
    e = {1, extents[0], extents[1]};
  } else if (extents.size() == 3) {
    e = {extents[0], extents[1], extents[2]};
  } else {
    throw ConfigError("--extents needs 2 or 3 values");
  }
  SyntheticKind k;
  if (kind == "sphere") {
    k = SyntheticKind::sphere;
  } else if (kind == "tumor") {
    k = SyntheticKind::tumor;
  } else {
    throw ConfigError("--kind must be sphere or tumor");
  }
  const fs::path manifest = write_synthetic_dataset(out_dir, k, count, e, channels, seed);
  out << "wrote " << count << " cases; manifest " << manifest.string() << "\n";
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"crossdim: 2D/3D segmentation networks with dimensional weight transfer"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  std::uint64_t seed_value = 0;
  app.add_option("--config", g.config, "Run configuration file");
  auto* seed_opt = app.add_option("--seed", seed_value, "Override the run seed");
  std::string precision;
  auto* precision_opt =
      app.add_option("--precision", precision, "Scalar precision")->check(CLI::IsMember({"single", "double"}));
  app.add_option("--out", g.out, "Output path");

  auto* train = app.add_subcommand("train", "Train a network from a configuration");
  bool resume = false;
  int epochs = 0;
  train->add_flag("--resume", resume, "Continue the run in the output directory");
  auto* epochs_opt = train->add_option("--epochs", epochs, "Override the total epoch count");

  auto* infer = app.add_subcommand("infer", "Predict label maps for every case of a manifest");
  std::string checkpoint, manifest;
  infer->add_option("--checkpoint", checkpoint, "Weight checkpoint")->required();
  infer->add_option("--manifest", manifest, "Input manifest")->required();

  auto* eval = app.add_subcommand("eval", "Compare predicted and reference label maps");
  std::string pred_dir, gt_dir, classes = "foreground=1", spacing = "reference";
  int connectivity = 6;
  eval->add_option("--pred", pred_dir, "Directory of predicted label maps")->required();
  eval->add_option("--gt", gt_dir, "Directory of reference label maps")->required();
  eval->add_option("--classes", classes, "'brats' or name=label[+label];...")->capture_default_str();
  eval->add_option("--spacing", spacing, "Spacing policy: reference or unit")->capture_default_str();
  eval->add_option("--connectivity", connectivity, "Surface connectivity: 6 or 26")->capture_default_str();

  auto* inflate = app.add_subcommand("inflate", "Inflate a 2D checkpoint into 3D");
  std::string inflate_in, mode = "replicate";
  int depth = 3, trials = 5;
  inflate->add_option("--in", inflate_in, "2D checkpoint")->required();
  inflate->add_option("--depth", depth, "Kernel depth")->capture_default_str();
  inflate->add_option("--mode", mode, "replicate or replicate-scaled")->capture_default_str();
  inflate->add_option("--trials", trials, "Random inputs per kernel for verification")->capture_default_str();

  auto* split = app.add_subcommand("split", "Assign manifest cases to folds");
  std::string split_manifest;
  int k = 5;
  double holdout = 0;
  split->add_option("--manifest", split_manifest, "Manifest to split")->required();
  split->add_option("--k", k, "Number of folds")->capture_default_str();
  split->add_option("--holdout", holdout, "Validation fraction; replaces k-fold when > 0");

  auto* verify = app.add_subcommand("verify", "Validate a checkpoint or a volume file");
  std::string verify_ckpt, verify_volume;
  verify->add_option("--checkpoint", verify_ckpt, "Checkpoint to validate");
  verify->add_option("--volume", verify_volume, "NIfTI or MetaImage file to load");

  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset with its manifest");
  std::string kind = "sphere";
  int count = 4;
  std::vector<std::int64_t> extents{32, 32, 32};
  std::int64_t channels = 1;
  synth->add_option("--kind", kind, "sphere or tumor")->capture_default_str();
  synth->add_option("--count", count, "Number of cases")->capture_default_str();
  synth->add_option("--extents", extents, "Spatial extents (2 or 3 values)")->delimiter(',');
  synth->add_option("--channels", channels, "Image channels (sphere only)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }
  if (*seed_opt) g.seed = seed_value;
  if (*precision_opt) g.precision = precision;
  const std::uint64_t seed = g.seed.value_or(0);

  try {
    if (*train) return cmd_train(g, resume, *epochs_opt ? std::optional<int>(epochs) : std::nullopt, out);
    if (*infer) return cmd_infer(g, checkpoint, manifest, out);
    if (*eval) return cmd_eval(pred_dir, gt_dir, classes, spacing, connectivity, g.out, out, err);
    if (*inflate) return cmd_inflate(inflate_in, g.out, depth, mode, trials, seed, out);
    if (*split) return cmd_split(split_manifest, k, holdout, seed, g.out, out);
    if (*verify) return cmd_verify(g, verify_ckpt, verify_volume, out);
    if (*synth) return cmd_synth(kind, count, extents, channels, seed, g.out, out);
  } catch (const NumericError& e) {
    err << "numeric fault: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}

}  // namespace crossdim::cli
