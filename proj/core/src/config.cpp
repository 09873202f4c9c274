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

#include "crossdim/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <map>
#include <sstream>

#include "crossdim/atomic_io.hpp"
#include "crossdim/errors.hpp"

namespace crossdim {

namespace fs = std::filesystem;

std::string to_string(TargetEncoding t) {
  switch (t) {
    case TargetEncoding::binary: return "binary";
    case TargetEncoding::onehot: return "onehot";
    case TargetEncoding::regions: return "regions";
  }
  return "binary";
}

TargetEncoding target_encoding_from_string(const std::string& s) {
  if (s == "binary") return TargetEncoding::binary;
  if (s == "onehot") return TargetEncoding::onehot;
  if (s == "regions") return TargetEncoding::regions;
  throw ConfigError("unknown target encoding '" + s + "' (expected binary, onehot or regions)");
}

std::string to_string(Normalization n) {
  switch (n) {
    case Normalization::none: return "none";
    case Normalization::zscore_nonzero: return "zscore-nonzero";
    case Normalization::sample: return "sample";
  }
  return "none";
}

Normalization normalization_from_string(const std::string& s) {
  if (s == "none") return Normalization::none;
  if (s == "zscore-nonzero") return Normalization::zscore_nonzero;
  if (s == "sample") return Normalization::sample;
  throw ConfigError("unknown normalization '" + s + "' (expected none, zscore-nonzero or sample)");
}

std::string to_string(Precision p) { return p == Precision::f32 ? "single" : "double"; }

Precision precision_from_string(const std::string& s) {
  if (s == "single") return Precision::f32;
  if (s == "double") return Precision::f64;
  throw ConfigError("unknown precision '" + s + "' (expected single or double)");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  if (out.size() == 1 && out[0].empty()) out.clear();
  return out;
}

double parse_double(const std::string& s) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(v)) throw ConfigError("'" + s + "' is not a finite number");
  return v;
}

std::int64_t parse_int(const std::string& s) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0' || errno == ERANGE) throw ConfigError("'" + s + "' is not an integer");
  return v;
}

std::uint64_t parse_uint(const std::string& s) {
  errno = 0;
  char* end = nullptr;
  if (!s.empty() && s[0] == '-') throw ConfigError("'" + s + "' is not a non-negative integer");
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0' || errno == ERANGE) throw ConfigError("'" + s + "' is not a non-negative integer");
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("'" + s + "' is not a boolean");
}

std::vector<std::int64_t> parse_int_list(const std::string& s) {
  std::vector<std::int64_t> out;
  for (const auto& item : split_list(s)) out.push_back(parse_int(item));
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_list(const std::vector<std::int64_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + std::to_string(v[i]);
  return out;
}

std::string fmt_range(const RandomRange& r) { return fmt(r.lo) + ", " + fmt(r.hi); }

void parse_range(RandomRange& r, const std::string& s) {
  const auto items = split_list(s);
  if (items.size() != 2) throw ConfigError("expected 'lo, hi', got '" + s + "'");
  r.lo = parse_double(items[0]);
  r.hi = parse_double(items[1]);
}

struct Field {
  std::string section;
  std::string key;
  std::function<void(RunConfig&, const std::string&, const fs::path&)> set;
  std::function<std::string(const RunConfig&)> get;
};

fs::path resolve(const std::string& value, const fs::path& base) {
  if (value.empty()) return {};
  fs::path p(value);
  if (p.is_relative() && !base.empty()) p = base / p;
  return fs::absolute(p).lexically_normal();
}

// Every recognised key, in snapshot order.
const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    auto add = [&](std::string sec, std::string key, auto set, auto get) {
      f.push_back({std::move(sec), std::move(key), set, get});
    };
    using C = RunConfig;
    using P = const fs::path&;
    using S = const std::string&;
    // [arch]
    add("arch", "kind", [](C& c, S v, P) { c.arch.kind = arch_kind_from_string(v); },
        [](const C& c) { return to_string(c.arch.kind); });
    add("arch", "batch", [](C& c, S v, P) { c.arch.batch = parse_int(v); },
        [](const C& c) { return std::to_string(c.arch.batch); });
    add("arch", "in_channels", [](C& c, S v, P) { c.arch.in_channels = parse_int(v); },
        [](const C& c) { return std::to_string(c.arch.in_channels); });
    add("arch", "n_classes", [](C& c, S v, P) { c.arch.n_classes = parse_int(v); },
        [](const C& c) { return std::to_string(c.arch.n_classes); });
    add("arch", "stem_filters", [](C& c, S v, P) { c.arch.stem_filters = parse_int(v); },
        [](const C& c) { return std::to_string(c.arch.stem_filters); });
    add("arch", "encoder_widths", [](C& c, S v, P) { c.arch.encoder_widths = parse_int_list(v); },
        [](const C& c) { return fmt_list(c.arch.encoder_widths); });
    add("arch", "depth_fold", [](C& c, S v, P) { c.arch.depth_fold = parse_int(v); },
        [](const C& c) { return std::to_string(c.arch.depth_fold); });
    add("arch", "budget_channels", [](C& c, S v, P) { c.arch.budget_channels = parse_int(v); },
        [](const C& c) { return std::to_string(c.arch.budget_channels); });
    add("arch", "stack_width", [](C& c, S v, P) { c.arch.stack_width = parse_int(v); },
        [](const C& c) { return std::to_string(c.arch.stack_width); });
    add("arch", "extents", [](C& c, S v, P) { c.arch.input_extents = parse_int_list(v); },
        [](const C& c) { return fmt_list(c.arch.input_extents); });
    add("arch", "output_activation", [](C& c, S v, P) { c.arch.output_activation = activation_from_string(v); },
        [](const C& c) { return to_string(c.arch.output_activation); });
    add("arch", "freeze_transferred", [](C& c, S v, P) { c.arch.freeze_transferred = parse_bool(v); },
        [](const C& c) { return std::string(c.arch.freeze_transferred ? "true" : "false"); });
    add("arch", "norm_epsilon", [](C& c, S v, P) { c.arch.norm_epsilon = parse_double(v); },
        [](const C& c) { return fmt(c.arch.norm_epsilon); });
    // [optim]
    add("optim", "beta1", [](C& c, S v, P) { c.optim.nadam.beta1 = parse_double(v); },
        [](const C& c) { return fmt(c.optim.nadam.beta1); });
    add("optim", "beta2", [](C& c, S v, P) { c.optim.nadam.beta2 = parse_double(v); },
        [](const C& c) { return fmt(c.optim.nadam.beta2); });
    add("optim", "epsilon", [](C& c, S v, P) { c.optim.nadam.epsilon = parse_double(v); },
        [](const C& c) { return fmt(c.optim.nadam.epsilon); });
    add("optim", "lookahead", [](C& c, S v, P) { c.optim.lookahead = parse_bool(v); },
        [](const C& c) { return std::string(c.optim.lookahead ? "true" : "false"); });
    add("optim", "lookahead_k", [](C& c, S v, P) { c.optim.lookahead_cfg.k = static_cast<int>(parse_int(v)); },
        [](const C& c) { return std::to_string(c.optim.lookahead_cfg.k); });
    add("optim", "lookahead_alpha", [](C& c, S v, P) { c.optim.lookahead_cfg.alpha = parse_double(v); },
        [](const C& c) { return fmt(c.optim.lookahead_cfg.alpha); });
    // [schedule]
    add("schedule", "policy", [](C& c, S v, P) { c.schedule.policy = lr_policy_from_string(v); },
        [](const C& c) { return to_string(c.schedule.policy); });
    add("schedule", "lr0", [](C& c, S v, P) { c.schedule.lr0 = parse_double(v); },
        [](const C& c) { return fmt(c.schedule.lr0); });
    add("schedule", "factor", [](C& c, S v, P) { c.schedule.factor = parse_double(v); },
        [](const C& c) { return fmt(c.schedule.factor); });
    add("schedule", "floor", [](C& c, S v, P) { c.schedule.floor = parse_double(v); },
        [](const C& c) { return fmt(c.schedule.floor); });
    add("schedule", "score_threshold", [](C& c, S v, P) { c.schedule.score_threshold = parse_double(v); },
        [](const C& c) { return fmt(c.schedule.score_threshold); });
    add("schedule", "epoch_threshold", [](C& c, S v, P) { c.schedule.epoch_threshold = static_cast<int>(parse_int(v)); },
        [](const C& c) { return std::to_string(c.schedule.epoch_threshold); });
    add("schedule", "lr_min", [](C& c, S v, P) { c.schedule.lr_min = parse_double(v); },
        [](const C& c) { return fmt(c.schedule.lr_min); });
    add("schedule", "period", [](C& c, S v, P) { c.schedule.period = static_cast<int>(parse_int(v)); },
        [](const C& c) { return std::to_string(c.schedule.period); });
    // [data]
    add("data", "manifest", [](C& c, S v, P base) { c.data.manifest = resolve(v, base); },
        [](const C& c) { return c.data.manifest.string(); });
    add("data", "target", [](C& c, S v, P) { c.data.target = target_encoding_from_string(v); },
        [](const C& c) { return to_string(c.data.target); });
    add("data", "normalize", [](C& c, S v, P) { c.data.normalize = normalization_from_string(v); },
        [](const C& c) { return to_string(c.data.normalize); });
    add("data", "crop", [](C& c, S v, P) { c.data.crop = parse_bool(v); },
        [](const C& c) { return std::string(c.data.crop ? "true" : "false"); });
    add("data", "crop_margin", [](C& c, S v, P) { c.data.crop_margin = parse_int(v); },
        [](const C& c) { return std::to_string(c.data.crop_margin); });
    add("data", "anchor", [](C& c, S v, P) {
          if (v == "center") c.data.anchor = AnchorPolicy::center;
          else if (v == "random") c.data.anchor = AnchorPolicy::random;
          else throw ConfigError("unknown anchor policy '" + v + "' (expected center or random)");
        },
        [](const C& c) { return std::string(c.data.anchor == AnchorPolicy::center ? "center" : "random"); });
    add("data", "augment", [](C& c, S v, P) { c.data.augment = parse_bool(v); },
        [](const C& c) { return std::string(c.data.augment ? "true" : "false"); });
    struct Aug {
      const char* name;
      RandomRange AugmentConfig::*member;
    };
    for (Aug a : {Aug{"scaling", &AugmentConfig::scaling}, Aug{"rotation", &AugmentConfig::rotation},
                  Aug{"translation", &AugmentConfig::translation}, Aug{"shearing", &AugmentConfig::shearing},
                  Aug{"window", &AugmentConfig::window}, Aug{"noise", &AugmentConfig::noise}}) {
      const auto m = a.member;
      add("data", a.name, [m](C& c, S v, P) { parse_range(c.data.augmentation.*m, v); },
          [m](const C& c) { return fmt_range(c.data.augmentation.*m); });
      add("data", std::string(a.name) + "_p", [m](C& c, S v, P) { (c.data.augmentation.*m).p = parse_double(v); },
          [m](const C& c) { return fmt((c.data.augmentation.*m).p); });
    }
    add("data", "window_level_shift", [](C& c, S v, P) { c.data.augmentation.window_level_shift = parse_double(v); },
        [](const C& c) { return fmt(c.data.augmentation.window_level_shift); });
    add("data", "infer_stride", [](C& c, S v, P) { c.data.infer_stride = parse_int_list(v); },
        [](const C& c) { return fmt_list(c.data.infer_stride); });
    add("data", "threshold", [](C& c, S v, P) { c.data.threshold = parse_double(v); },
        [](const C& c) { return fmt(c.data.threshold); });
    add("data", "et_min_volume", [](C& c, S v, P) { c.data.et_min_volume = parse_double(v); },
        [](const C& c) { return fmt(c.data.et_min_volume); });
    add("data", "et_unit", [](C& c, S v, P) {
          if (v == "voxels") c.data.et_unit = VolumeUnit::voxels;
          else if (v == "mm3") c.data.et_unit = VolumeUnit::mm3;
          else throw ConfigError("unknown volume unit '" + v + "' (expected voxels or mm3)");
        },
        [](const C& c) { return std::string(c.data.et_unit == VolumeUnit::voxels ? "voxels" : "mm3"); });
    // [loss]
    add("loss", "epsilon", [](C& c, S v, P) { c.loss.epsilon = parse_double(v); },
        [](const C& c) { return fmt(c.loss.epsilon); });
    add("loss", "log_floor", [](C& c, S v, P) { c.loss.log_floor = parse_double(v); },
        [](const C& c) { return fmt(c.loss.log_floor); });
    // [run]
    add("run", "epochs", [](C& c, S v, P) { c.run.epochs = static_cast<int>(parse_int(v)); },
        [](const C& c) { return std::to_string(c.run.epochs); });
    add("run", "seed", [](C& c, S v, P) { c.run.seed = parse_uint(v); },
        [](const C& c) { return std::to_string(c.run.seed); });
    add("run", "out", [](C& c, S v, P base) { c.run.out = resolve(v, base); },
        [](const C& c) { return c.run.out.string(); });
    add("run", "precision", [](C& c, S v, P) { c.run.precision = precision_from_string(v); },
        [](const C& c) { return to_string(c.run.precision); });
    add("run", "steps_per_epoch", [](C& c, S v, P) { c.run.steps_per_epoch = static_cast<int>(parse_int(v)); },
        [](const C& c) { return std::to_string(c.run.steps_per_epoch); });
    add("run", "init_checkpoint", [](C& c, S v, P base) { c.run.init_checkpoint = resolve(v, base); },
        [](const C& c) { return c.run.init_checkpoint.string(); });
    return f;
  }();
  return table;
}

}  // namespace

Extents RunConfig::patch() const {
  const auto& e = arch.input_extents;
  if (e.size() == 2) return Extents{1, e[0], e[1]};
  if (e.size() == 3) return Extents{e[0], e[1], e[2]};
  throw ConfigError("arch extents must have 2 or 3 entries");
}

void RunConfig::validate() const {
  arch.validate();
  optim.nadam.validate();
  optim.lookahead_cfg.validate();
  schedule.validate();
  data.augmentation.validate();
  if (arch.batch != 1) throw ConfigError("runs process one case per step; arch.batch must be 1");
  const bool softmax = arch.output_activation == Activation::softmax;
  const bool sigmoid = arch.output_activation == Activation::sigmoid;
  switch (data.target) {
    case TargetEncoding::binary:
      if (!((arch.n_classes == 1 && sigmoid) || (arch.n_classes == 2 && softmax))) {
        throw ConfigError("binary target needs n_classes = 1 with sigmoid or n_classes = 2 with softmax");
      }
      break;
    case TargetEncoding::onehot:
      if (!softmax) throw ConfigError("onehot target needs a softmax head");
      break;
    case TargetEncoding::regions:
      if (!(arch.n_classes == 3 && sigmoid)) throw ConfigError("regions target needs n_classes = 3 with sigmoid");
      break;
  }
  if (data.crop_margin < 0) throw ConfigError("data.crop_margin must be >= 0");
  if (!data.infer_stride.empty()) {
    if (data.infer_stride.size() != arch.input_extents.size()) {
      throw ConfigError("data.infer_stride needs one entry per spatial axis");
    }
    for (auto s : data.infer_stride)
      if (s < 1) throw ConfigError("data.infer_stride entries must be positive");
  }
  if (!(data.threshold > 0 && data.threshold < 1)) throw ConfigError("data.threshold must lie in (0, 1)");
  if (!(data.et_min_volume >= 0)) throw ConfigError("data.et_min_volume must be >= 0");
  if (!(loss.epsilon > 0)) throw ConfigError("loss.epsilon must be > 0");
  if (!(loss.log_floor > 0 && loss.log_floor < 0.5)) throw ConfigError("loss.log_floor must lie in (0, 0.5)");
  if (run.epochs < 1) throw ConfigError("run.epochs must be >= 1");
  if (run.steps_per_epoch < 0) throw ConfigError("run.steps_per_epoch must be >= 0");
  if (run.out.empty()) throw ConfigError("run.out must name an output directory");
}

RunConfig parse_run_config(const std::string& text, const fs::path& base_dir, bool check_paths) {
  RunConfig cfg;
  std::map<std::pair<std::string, std::string>, const Field*> index;
  std::set<std::string> sections;
  for (const auto& f : fields()) {
    index[{f.section, f.key}] = &f;
    sections.insert(f.section);
  }
  std::set<std::pair<std::string, std::string>> seen;
  std::stringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = "config line " + std::to_string(lineno) + ": ";
    const auto hash = line.find_first_of("#;");
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') throw ConfigError(where + "malformed section header '" + body + "'");
      section = trim(body.substr(1, body.size() - 2));
      if (!sections.count(section)) throw ConfigError(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value', got '" + body + "'");
    if (section.empty()) throw ConfigError(where + "key outside of any section");
    const std::string key = trim(body.substr(0, eq)), value = trim(body.substr(eq + 1));
    auto it = index.find({section, key});
    if (it == index.end()) throw ConfigError(where + "unknown key '" + key + "' in [" + section + "]");
    if (!seen.insert({section, key}).second) throw ConfigError(where + "duplicate key '" + key + "' in [" + section + "]");
    try {
      it->second->set(cfg, value, base_dir);
    } catch (const ConfigError& e) {
      throw ConfigError(where + section + "." + key + ": " + e.what());
    }
  }
  cfg.optim.nadam.lr = cfg.schedule.lr0;
  if (!seen.count({"run", "out"})) cfg.run.out = resolve(cfg.run.out.string(), base_dir);
  cfg.validate();
  if (check_paths) {
    if (!cfg.data.manifest.empty() && !fs::exists(cfg.data.manifest)) {
      throw ConfigError("data.manifest " + cfg.data.manifest.string() + " does not exist");
    }
    if (!cfg.run.init_checkpoint.empty() && !fs::exists(cfg.run.init_checkpoint)) {
      throw ConfigError("run.init_checkpoint " + cfg.run.init_checkpoint.string() + " does not exist");
    }
  }
  return cfg;
}

RunConfig load_run_config(const fs::path& path, bool check_paths) {
  if (!fs::is_regular_file(path)) throw ConfigError("config file " + path.string() + " does not exist");
  return parse_run_config(read_file(path), fs::absolute(path).parent_path(), check_paths);
}

std::string to_ini(const RunConfig& cfg) {
  std::string out, section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      out += (section.empty() ? "" : "\n") + std::string("[") + f.section + "]\n";
      section = f.section;
    }
    out += f.key + " = " + f.get(cfg) + "\n";
  }
  return out;
}

}  // namespace crossdim
