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

// Forward and reverse-mode kernels for every layer primitive used by the
// segmentation networks. All routines accept 2D ([N, C, H, W]) and 3D
// ([N, C, D, H, W]) activations; 2D inputs run through the 3D code path
// with a unit depth axis.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "crossdim/tensor.hpp"

namespace crossdim {

/// Stride and zero padding per spatial axis. Dilation and groups are 1.
struct ConvConfig {
  int rank = 2;
  std::vector<int> stride;   // size == rank
  std::vector<int> padding;  // size == rank

  static ConvConfig uniform(int rank, int stride, int padding) {
    return ConvConfig{rank, std::vector<int>(rank, stride), std::vector<int>(rank, padding)};
  }
  /// Symmetric "same" padding floor((k-1)/2) for a square kernel of size k.
  static ConvConfig same(int rank, int kernel, int stride = 1) {
    return uniform(rank, stride, (kernel - 1) / 2);
  }
};

template <typename T>
struct ConvParams {
  Tensor<T> kernel;  // [out, in, (kd,) kh, kw]
  std::optional<Tensor<T>> bias;  // [out]
  ConvConfig config;
};

template <typename T>
struct ConvGrads {
  Tensor<T> grad_x;
  Tensor<T> grad_kernel;
  std::optional<Tensor<T>> grad_bias;
};

/// Output extents of a convolution; throws ConfigError if any is < 1.
Shape conv_output_shape(const Shape& x, const Shape& kernel, const ConvConfig& cfg);
/// Output extents of a transposed convolution: (in - 1) * s - 2p + k per axis.
Shape transposed_conv_output_shape(const Shape& x, const Shape& kernel, const ConvConfig& cfg);

/// Cross-correlation with zero padding; bias per output channel.
template <typename T>
Tensor<T> conv_forward(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>* bias, const ConvConfig& cfg);
template <typename T>
Tensor<T> conv_forward(const Tensor<T>& x, const ConvParams<T>& p) {
  return conv_forward(x, p.kernel, p.bias ? &*p.bias : nullptr, p.config);
}

template <typename T>
ConvGrads<T> conv_backward(const Tensor<T>& x, const Tensor<T>& kernel, bool has_bias, const ConvConfig& cfg,
                           const Tensor<T>& grad_out);
template <typename T>
ConvGrads<T> conv_backward(const Tensor<T>& x, const ConvParams<T>& p, const Tensor<T>& grad_out) {
  return conv_backward(x, p.kernel, p.bias.has_value(), p.config, grad_out);
}

/// Adjoint of conv_forward. The kernel keeps the conv layout
/// [conv_out, conv_in, ...], so a transposed conv maps kernel.dim(0) input
/// channels to kernel.dim(1) output channels. Bias has kernel.dim(1) entries.
template <typename T>
Tensor<T> transposed_conv_forward(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>* bias,
                                  const ConvConfig& cfg);
template <typename T>
Tensor<T> transposed_conv_forward(const Tensor<T>& x, const ConvParams<T>& p) {
  return transposed_conv_forward(x, p.kernel, p.bias ? &*p.bias : nullptr, p.config);
}

template <typename T>
ConvGrads<T> transposed_conv_backward(const Tensor<T>& x, const Tensor<T>& kernel, bool has_bias,
                                      const ConvConfig& cfg, const Tensor<T>& grad_out);
template <typename T>
ConvGrads<T> transposed_conv_backward(const Tensor<T>& x, const ConvParams<T>& p, const Tensor<T>& grad_out) {
  return transposed_conv_backward(x, p.kernel, p.bias.has_value(), p.config, grad_out);
}

// --- normalization ---------------------------------------------------------

enum class NormMode { batch, instance };

struct NormConfig {
  NormMode mode = NormMode::instance;
  double epsilon = 1e-5;
};

template <typename T>
struct NormParams {
  Tensor<T> gamma;
  Tensor<T> beta;
  std::optional<Tensor<T>> running_mean;
  std::optional<Tensor<T>> running_var;
  NormConfig config;
};

/// Forward result plus the statistics the backward pass needs.
template <typename T>
struct NormForward {
  Tensor<T> y;
  std::vector<T> mean;    // one per normalization group
  std::vector<T> invstd;  // one per normalization group
  std::vector<T> var;     // population variance per group (batch statistics only)
  bool batch_statistics = true;  // false when running statistics were used
};

/// Instance mode normalizes per (sample, channel) over spatial axes; batch
/// mode per channel over (batch, spatial). Batch mode with training == false
/// uses the running statistics, which must then be present.
template <typename T>
NormForward<T> normalize_forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                                 const Tensor<T>* running_mean, const Tensor<T>* running_var,
                                 const NormConfig& cfg, bool training);

template <typename T>
Tensor<T> normalize(const Tensor<T>& x, const NormParams<T>& p, bool training) {
  return normalize_forward(x, p.gamma, p.beta, p.running_mean ? &*p.running_mean : nullptr,
                           p.running_var ? &*p.running_var : nullptr, p.config, training)
      .y;
}

template <typename T>
struct NormGrads {
  Tensor<T> grad_x;
  Tensor<T> grad_gamma;
  Tensor<T> grad_beta;
};

template <typename T>
NormGrads<T> normalize_backward(const Tensor<T>& x, const Tensor<T>& gamma, const NormConfig& cfg,
                                const NormForward<T>& fwd, const Tensor<T>& grad_out);

// --- pointwise activations -------------------------------------------------

enum class Activation { identity, relu, silu, sigmoid, softmax };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

/// Softmax applies over the channel axis (axis 1).
template <typename T>
Tensor<T> activation(const Tensor<T>& x, Activation kind);

/// Needs both the input and the forward output.
template <typename T>
Tensor<T> activation_backward(const Tensor<T>& x, const Tensor<T>& y, Activation kind, const Tensor<T>& grad_out);

template <typename T>
T stable_sigmoid(T x);

// --- resampling and reshaping ---------------------------------------------

/// Nearest-neighbour upsampling by an integer factor per spatial axis.
template <typename T>
Tensor<T> nearest_upsample(const Tensor<T>& x, const std::vector<int>& factor);
template <typename T>
Tensor<T> nearest_upsample_backward(const Tensor<T>& grad_out, const std::vector<int>& factor, const Shape& x_shape);

template <typename T>
Tensor<T> concat_channels(const std::vector<const Tensor<T>*>& xs);
template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& xs);
template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& x, const std::vector<std::int64_t>& channels);

/// [N, C, D, H, W] -> [N * D, C, H, W]; sample n, slab d maps to batch n * D + d.
template <typename T>
Tensor<T> fold_depth(const Tensor<T>& x);
/// Inverse of fold_depth: [N * D, C, H, W] -> [N, C, D, H, W].
template <typename T>
Tensor<T> unfold_depth(const Tensor<T>& x, std::int64_t depth);

}  // namespace crossdim
