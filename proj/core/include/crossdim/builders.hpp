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
#include <string>
#include <vector>

#include "crossdim/graph.hpp"

namespace crossdim {

enum class ArchKind { omnia_net, ds_net, dx_net };

std::string to_string(ArchKind k);
ArchKind arch_kind_from_string(const std::string& s);

/// Network hyper-parameters shared by the three builders.
///
/// The encoder ("Eff-Mini") has one stage per entry of encoder_widths; each
/// stage halves every spatial extent, so extents must be divisible by
/// 2^stages. Decoder widths mirror the encoder in reverse.
struct ArchConfig {
  ArchKind kind = ArchKind::omnia_net;
  std::int64_t batch = 1;
  std::int64_t in_channels = 1;
  std::int64_t n_classes = 2;
  std::int64_t stem_filters = 16;
  std::vector<std::int64_t> encoder_widths{8, 16, 24, 32};
  /// DS-Net: depth reduction of the stacking section (a power of two).
  std::int64_t depth_fold = 8;
  /// DS-Net: channels handed to the 2D section per folded slab.
  std::int64_t budget_channels = 3;
  /// DS-Net: width of the 3D stacking and unstacking blocks.
  std::int64_t stack_width = 8;
  /// Spatial extents: {H, W} for Omnia-Net, {D, H, W} otherwise.
  std::vector<std::int64_t> input_extents{64, 64};
  Activation output_activation = Activation::softmax;
  /// Freeze every "encoder.*" node (no gradients, running batch statistics).
  bool freeze_transferred = false;
  double norm_epsilon = 1e-5;

  Shape input_shape() const;
  /// Throws ConfigError naming the first violated constraint.
  void validate() const;
};

/// Defaults per architecture: Omnia-Net softmax on 64x64, DS-Net and DX-Net
/// sigmoid on 32^3.
ArchConfig default_arch_config(ArchKind kind);

NetworkGraph build_omnia_net(const ArchConfig& cfg);
NetworkGraph build_ds_net(const ArchConfig& cfg);
NetworkGraph build_dx_net(const ArchConfig& cfg);
/// Dispatches on cfg.kind.
NetworkGraph build_network(const ArchConfig& cfg);

}  // namespace crossdim
