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

#include "crossdim/builders.hpp"

namespace crossdim {

std::string to_string(ArchKind k) {
  switch (k) {
    case ArchKind::omnia_net: return "omnia-net";
    case ArchKind::ds_net: return "ds-net";
    case ArchKind::dx_net: return "dx-net";
  }
  return "omnia-net";
}

ArchKind arch_kind_from_string(const std::string& s) {
  if (s == "omnia-net" || s == "omnia") return ArchKind::omnia_net;
  if (s == "ds-net" || s == "ds") return ArchKind::ds_net;
  if (s == "dx-net" || s == "dx") return ArchKind::dx_net;
  throw ConfigError("unknown architecture '" + s + "' (expected omnia-net, ds-net or dx-net)");
}

Shape ArchConfig::input_shape() const {
  Shape s{batch, in_channels};
  s.insert(s.end(), input_extents.begin(), input_extents.end());
  return s;
}

void ArchConfig::validate() const {
  const std::string arch = to_string(kind);
  auto fail = [&](const std::string& msg) { throw ConfigError(arch + ": " + msg); };
  if (batch < 1 || in_channels < 1 || n_classes < 1) fail("batch, in_channels and n_classes must be positive");
  if (encoder_widths.empty()) fail("encoder_widths must name at least one stage");
  for (auto w : encoder_widths)
    if (w < 1) fail("encoder widths must be positive");
  if (kind != ArchKind::ds_net && stem_filters < 1) fail("stem_filters must be positive");
  if (output_activation != Activation::softmax && output_activation != Activation::sigmoid) {
    fail("output activation must be softmax or sigmoid");
  }
  if (output_activation == Activation::softmax && n_classes < 2) fail("softmax head needs at least 2 classes");
  if (!(norm_epsilon > 0)) fail("norm epsilon must be positive");
  const std::size_t want_rank = kind == ArchKind::omnia_net ? 2 : 3;
  if (input_extents.size() != want_rank) {
    fail("expects " + std::to_string(want_rank) + " spatial extents, got " + std::to_string(input_extents.size()));
  }
  const std::int64_t down = std::int64_t{1} << encoder_widths.size();
  static const char* axis_names[] = {"depth", "height", "width"};
  for (std::size_t a = 0; a < input_extents.size(); ++a) {
    const char* axis = axis_names[a + 3 - input_extents.size()];
    const std::int64_t e = input_extents[a];
    if (e < 1) fail(std::string(axis) + " extent must be positive");
    const bool spatially_encoded = kind != ArchKind::ds_net || a > 0;
    if (spatially_encoded && e % down != 0) {
      fail(std::string(axis) + " extent " + std::to_string(e) + " must be divisible by " + std::to_string(down) +
           " (2^" + std::to_string(encoder_widths.size()) + " encoder stages)");
    }
  }
  if (kind == ArchKind::ds_net) {
    if (depth_fold < 1 || (depth_fold & (depth_fold - 1)) != 0) {
      fail("depth_fold must be a power of two, got " + std::to_string(depth_fold));
    }
    if (input_extents[0] % depth_fold != 0) {
      fail("depth extent " + std::to_string(input_extents[0]) + " must be divisible by depth_fold " +
           std::to_string(depth_fold));
    }
    if (budget_channels < 1 || stack_width < 1) fail("budget_channels and stack_width must be positive");
  }
}

ArchConfig default_arch_config(ArchKind kind) {
  ArchConfig cfg;
  cfg.kind = kind;
  if (kind != ArchKind::omnia_net) {
    cfg.input_extents = {32, 32, 32};
    cfg.output_activation = Activation::sigmoid;
    cfg.n_classes = 1;
  }
  return cfg;
}

namespace {

std::vector<int> fill(int rank, int v) { return std::vector<int>(static_cast<std::size_t>(rank), v); }

/// conv3 (stride s) + norm + activation; returns the activation node.
int conv_block(GraphBuilder& b, const std::string& prefix, int idx, int in, std::int64_t width,
               std::vector<int> stride, NormMode norm, Activation act, double eps) {
  const int r = b.rank(in);
  const std::string k = std::to_string(idx);
  int x = b.conv(prefix + ".conv" + k, in, width, fill(r, 3), std::move(stride), fill(r, 1), false);
  x = b.norm(prefix + ".norm" + k, x, norm, eps);
  return b.act(prefix + ".act" + k, x, act);
}

/// Eff-Mini: per stage a stride-2 block then a stride-1 block. Returns the
/// output of every stage (shallowest first).
std::vector<int> eff_mini(GraphBuilder& b, int in, const std::vector<std::int64_t>& widths, NormMode norm,
                          double eps) {
  std::vector<int> stages;
  int x = in;
  for (std::size_t s = 0; s < widths.size(); ++s) {
    const std::string p = "encoder.stage" + std::to_string(s);
    x = conv_block(b, p, 1, x, widths[s], fill(b.rank(x), 2), norm, Activation::silu, eps);
    x = conv_block(b, p, 2, x, widths[s], fill(b.rank(x), 1), norm, Activation::silu, eps);
    stages.push_back(x);
  }
  return stages;
}

/// U-Net decoder over the encoder stages. Level j upsamples the running
/// tensor and concatenates skips[j]; widths[j] is that level's block width.
/// With `transposed`, upsampling is a stride-2 transposed conv to widths[j].
int decoder(GraphBuilder& b, const std::string& prefix, int x, const std::vector<int>& skips,
            const std::vector<std::int64_t>& widths, NormMode norm, Activation act, double eps, bool transposed) {
  for (std::size_t j = 0; j < skips.size(); ++j) {
    const std::string p = prefix + ".level" + std::to_string(j);
    const int r = b.rank(x);
    int up = transposed ? b.tconv(p + ".up", x, widths[j], fill(r, 2), fill(r, 2), fill(r, 0), true)
                        : b.upsample(p + ".up", x, fill(r, 2));
    int cat = b.concat(p + ".concat", {up, skips[j]});
    x = conv_block(b, p, 1, cat, widths[j], fill(r, 1), norm, act, eps);
    x = conv_block(b, p, 2, x, widths[j], fill(r, 1), norm, act, eps);
  }
  return x;
}

int head(GraphBuilder& b, int x, const ArchConfig& cfg) {
  const int r = b.rank(x);
  x = b.conv("head.conv", x, cfg.n_classes, fill(r, 1), fill(r, 1), fill(r, 0), true);
  x = b.act("head.act", x, cfg.output_activation);
  return b.output(x);
}

/// Skips and widths for the decoder levels below the deepest stage.
void mirror(const std::vector<int>& stages, const std::vector<std::int64_t>& widths, int last_skip,
            std::int64_t last_width, std::vector<int>& skips, std::vector<std::int64_t>& level_widths) {
  for (std::size_t s = stages.size() - 1; s-- > 0;) {
    skips.push_back(stages[s]);
    level_widths.push_back(widths[s]);
  }
  skips.push_back(last_skip);
  level_widths.push_back(last_width);
}

}  // namespace

NetworkGraph build_omnia_net(const ArchConfig& cfg_in) {
  ArchConfig cfg = cfg_in;
  cfg.kind = ArchKind::omnia_net;
  cfg.validate();
  GraphBuilder b("omnia-net", cfg.input_shape());
  const double eps = cfg.norm_epsilon;
  const int stem = conv_block(b, "stem", 0, b.input(), cfg.stem_filters, fill(2, 1), NormMode::batch,
                              Activation::relu, eps);
  const std::vector<int> stages = eff_mini(b, stem, cfg.encoder_widths, NormMode::batch, eps);
  std::vector<int> skips;
  std::vector<std::int64_t> widths;
  mirror(stages, cfg.encoder_widths, stem, cfg.stem_filters, skips, widths);
  const int x = decoder(b, "decoder", stages.back(), skips, widths, NormMode::batch, Activation::relu, eps, false);
  head(b, x, cfg);
  if (cfg.freeze_transferred) b.freeze_prefix("encoder.");
  return b.finish();
}

NetworkGraph build_ds_net(const ArchConfig& cfg_in) {
  ArchConfig cfg = cfg_in;
  cfg.kind = ArchKind::ds_net;
  cfg.validate();
  GraphBuilder b("ds-net", cfg.input_shape());
  const double eps = cfg.norm_epsilon;
  const NormMode in3 = NormMode::instance;

  // Stacking section: depth shrinks by 2 per level until depth_fold is absorbed.
  int levels = 0;
  while ((std::int64_t{1} << levels) < cfg.depth_fold) ++levels;
  std::vector<int> stack;
  int x = conv_block(b, "stack.level0", 1, b.input(), cfg.stack_width, fill(3, 1), in3, Activation::silu, eps);
  x = conv_block(b, "stack.level0", 2, x, cfg.stack_width, fill(3, 1), in3, Activation::silu, eps);
  stack.push_back(x);
  for (int j = 1; j <= levels; ++j) {
    const std::string p = "stack.level" + std::to_string(j);
    x = conv_block(b, p, 1, x, cfg.stack_width, {2, 1, 1}, in3, Activation::silu, eps);
    x = conv_block(b, p, 2, x, cfg.stack_width, fill(3, 1), in3, Activation::silu, eps);
    stack.push_back(x);
  }
  x = b.conv("stack.project", x, cfg.budget_channels, fill(3, 1), fill(3, 1), fill(3, 0), true);
  const int folded = b.fold_depth("fold", x);

  // Embedded 2D section.
  const std::vector<int> stages = eff_mini(b, folded, cfg.encoder_widths, NormMode::batch, eps);
  std::vector<int> skips;
  std::vector<std::int64_t> widths;
  mirror(stages, cfg.encoder_widths, folded, cfg.encoder_widths.front(), skips, widths);
  x = decoder(b, "decoder2d", stages.back(), skips, widths, NormMode::batch, Activation::relu, eps, false);
  x = b.conv("decoder2d.out", x, cfg.budget_channels, fill(2, 1), fill(2, 1), fill(2, 0), true);

  // Unstacking: exact inverse of the fold, then a 3D decoder back to full depth.
  x = b.unfold_depth("unfold", x, cfg.input_extents[0] / cfg.depth_fold);
  if (cfg.budget_channels != cfg.stack_width) {
    x = b.conv("unstack.project", x, cfg.stack_width, fill(3, 1), fill(3, 1), fill(3, 0), true);
  }
  for (int j = 0; j < levels; ++j) {
    const std::string p = "decoder3d.level" + std::to_string(j);
    const int up = b.upsample(p + ".up", x, {2, 1, 1});
    const int cat = b.concat(p + ".concat", {up, stack[static_cast<std::size_t>(levels - 1 - j)]});
    x = conv_block(b, p, 1, cat, cfg.stack_width, fill(3, 1), in3, Activation::silu, eps);
    x = conv_block(b, p, 2, x, cfg.stack_width, fill(3, 1), in3, Activation::silu, eps);
  }
  head(b, x, cfg);
  if (cfg.freeze_transferred) b.freeze_prefix("encoder.");
  return b.finish();
}

NetworkGraph build_dx_net(const ArchConfig& cfg_in) {
  ArchConfig cfg = cfg_in;
  cfg.kind = ArchKind::dx_net;
  cfg.validate();
  GraphBuilder b("dx-net", cfg.input_shape());
  const double eps = cfg.norm_epsilon;
  const NormMode in3 = NormMode::instance;
  const int stem = conv_block(b, "stem", 0, b.input(), cfg.stem_filters, fill(3, 1), in3, Activation::silu, eps);
  const std::vector<int> stages = eff_mini(b, stem, cfg.encoder_widths, in3, eps);
  std::vector<int> skips;
  std::vector<std::int64_t> widths;
  mirror(stages, cfg.encoder_widths, stem, cfg.stem_filters, skips, widths);
  const int x = decoder(b, "decoder", stages.back(), skips, widths, in3, Activation::silu, eps, true);
  head(b, x, cfg);
  if (cfg.freeze_transferred) b.freeze_prefix("encoder.");
  return b.finish();
}

NetworkGraph build_network(const ArchConfig& cfg) {
  switch (cfg.kind) {
    case ArchKind::omnia_net: return build_omnia_net(cfg);
    case ArchKind::ds_net: return build_ds_net(cfg);
    case ArchKind::dx_net: return build_dx_net(cfg);
  }
  throw ConfigError("unknown architecture kind");
}

}  // namespace crossdim
