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

#include "crossdim/ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace crossdim {

namespace {

using Dims5 = std::array<std::int64_t, 5>;

Dims5 as_5d(const Shape& s, const char* what) {
  if (s.size() == 4) return {s[0], s[1], 1, s[2], s[3]};
  if (s.size() == 5) return {s[0], s[1], s[2], s[3], s[4]};
  throw DimensionError(std::string(what) + " must have rank 4 or 5, got shape " + shape_to_string(s));
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return -floor_div(-a, b); }

// Convolution geometry in the 3D embedding; "input" and "output" always refer
// to the forward cross-correlation.
struct ConvGeom {
  std::int64_t n = 0, ci = 0, di = 0, hi = 0, wi = 0;
  std::int64_t co = 0, dout = 0, ho = 0, wo = 0;
  std::int64_t kd = 0, kh = 0, kw = 0;
  std::int64_t sd = 1, sh = 1, sw = 1, pd = 0, ph = 0, pw = 0;
};

struct TapRange {
  std::int64_t lo, hi;
};

// Output positions o with 0 <= o * s - p + k < in.
TapRange valid_range(std::int64_t k, std::int64_t s, std::int64_t p, std::int64_t in, std::int64_t out) {
  std::int64_t lo = std::max<std::int64_t>(0, ceil_div(p - k, s));
  std::int64_t hi = std::min<std::int64_t>(out, floor_div(in - 1 + p - k, s) + 1);
  return {lo, std::max(lo, hi)};
}

void check_conv_config(const ConvConfig& cfg) {
  if (cfg.rank != 2 && cfg.rank != 3) throw ConfigError("conv rank must be 2 or 3, got " + std::to_string(cfg.rank));
  if (static_cast<int>(cfg.stride.size()) != cfg.rank || static_cast<int>(cfg.padding.size()) != cfg.rank) {
    throw ConfigError("conv stride/padding must have one entry per spatial axis");
  }
  for (int a = 0; a < cfg.rank; ++a) {
    if (cfg.stride[a] < 1) throw ConfigError("conv stride must be >= 1 on spatial axis " + std::to_string(a));
    if (cfg.padding[a] < 0) throw ConfigError("conv padding must be >= 0 on spatial axis " + std::to_string(a));
  }
}

void check_ranks(const Shape& x, const Shape& kernel, const ConvConfig& cfg) {
  check_conv_config(cfg);
  if (static_cast<int>(x.size()) != cfg.rank + 2) {
    throw DimensionError("input " + shape_to_string(x) + " does not have spatial rank " + std::to_string(cfg.rank));
  }
  if (static_cast<int>(kernel.size()) != cfg.rank + 2) {
    throw DimensionError("kernel " + shape_to_string(kernel) + " does not have spatial rank " +
                         std::to_string(cfg.rank));
  }
}

std::array<std::int64_t, 3> stride3(const ConvConfig& cfg) {
  if (cfg.rank == 2) return {1, cfg.stride[0], cfg.stride[1]};
  return {cfg.stride[0], cfg.stride[1], cfg.stride[2]};
}

std::array<std::int64_t, 3> pad3(const ConvConfig& cfg) {
  if (cfg.rank == 2) return {0, cfg.padding[0], cfg.padding[1]};
  return {cfg.padding[0], cfg.padding[1], cfg.padding[2]};
}

ConvGeom make_geom(const Shape& conv_in, const Shape& kernel, const Shape& conv_out, const ConvConfig& cfg) {
  Dims5 i5 = as_5d(conv_in, "conv input");
  Dims5 k5 = as_5d(kernel, "kernel");
  Dims5 o5 = as_5d(conv_out, "conv output");
  auto s = stride3(cfg);
  auto p = pad3(cfg);
  ConvGeom g;
  g.n = i5[0];
  g.ci = i5[1];
  g.di = i5[2];
  g.hi = i5[3];
  g.wi = i5[4];
  g.co = o5[1];
  g.dout = o5[2];
  g.ho = o5[3];
  g.wo = o5[4];
  g.kd = k5[2];
  g.kh = k5[3];
  g.kw = k5[4];
  g.sd = s[0];
  g.sh = s[1];
  g.sw = s[2];
  g.pd = p[0];
  g.ph = p[1];
  g.pw = p[2];
  return g;
}

// y[n, co] += sum_ci sum_taps w[co, ci, tap] * x[n, ci, shifted]
template <typename T>
void conv_fwd_kernel(const ConvGeom& g, const T* x, const T* w, T* y) {
  const std::int64_t in_plane = g.di * g.hi * g.wi;
  const std::int64_t out_plane = g.dout * g.ho * g.wo;
  const std::int64_t taps = g.kd * g.kh * g.kw;
  for (std::int64_t n = 0; n < g.n; ++n) {
    for (std::int64_t co = 0; co < g.co; ++co) {
      T* yp = y + (n * g.co + co) * out_plane;
      for (std::int64_t ci = 0; ci < g.ci; ++ci) {
        const T* xp = x + (n * g.ci + ci) * in_plane;
        const T* wk = w + (co * g.ci + ci) * taps;
        for (std::int64_t a = 0; a < g.kd; ++a) {
          const TapRange rd = valid_range(a, g.sd, g.pd, g.di, g.dout);
          for (std::int64_t b = 0; b < g.kh; ++b) {
            const TapRange rh = valid_range(b, g.sh, g.ph, g.hi, g.ho);
            for (std::int64_t c = 0; c < g.kw; ++c) {
              const TapRange rw = valid_range(c, g.sw, g.pw, g.wi, g.wo);
              const T wv = wk[(a * g.kh + b) * g.kw + c];
              const std::int64_t shift = c - g.pw;
              for (std::int64_t od = rd.lo; od < rd.hi; ++od) {
                const std::int64_t id = od * g.sd - g.pd + a;
                for (std::int64_t oh = rh.lo; oh < rh.hi; ++oh) {
                  const std::int64_t ih = oh * g.sh - g.ph + b;
                  T* yr = yp + (od * g.ho + oh) * g.wo;
                  const T* xr = xp + (id * g.hi + ih) * g.wi;
                  if (g.sw == 1) {
                    for (std::int64_t ow = rw.lo; ow < rw.hi; ++ow) yr[ow] += wv * xr[ow + shift];
                  } else {
                    for (std::int64_t ow = rw.lo; ow < rw.hi; ++ow) yr[ow] += wv * xr[ow * g.sw + shift];
                  }
                }
              }
            }
          }
        }
      }
    }
  }
}

// gx[n, ci, shifted] += w[co, ci, tap] * gy[n, co]
template <typename T>
void conv_bwd_data_kernel(const ConvGeom& g, const T* gy, const T* w, T* gx) {
  const std::int64_t in_plane = g.di * g.hi * g.wi;
  const std::int64_t out_plane = g.dout * g.ho * g.wo;
  const std::int64_t taps = g.kd * g.kh * g.kw;
  for (std::int64_t n = 0; n < g.n; ++n) {
    for (std::int64_t ci = 0; ci < g.ci; ++ci) {
      T* xp = gx + (n * g.ci + ci) * in_plane;
      for (std::int64_t co = 0; co < g.co; ++co) {
        const T* yp = gy + (n * g.co + co) * out_plane;
        const T* wk = w + (co * g.ci + ci) * taps;
        for (std::int64_t a = 0; a < g.kd; ++a) {
          const TapRange rd = valid_range(a, g.sd, g.pd, g.di, g.dout);
          for (std::int64_t b = 0; b < g.kh; ++b) {
            const TapRange rh = valid_range(b, g.sh, g.ph, g.hi, g.ho);
            for (std::int64_t c = 0; c < g.kw; ++c) {
              const TapRange rw = valid_range(c, g.sw, g.pw, g.wi, g.wo);
              const T wv = wk[(a * g.kh + b) * g.kw + c];
              const std::int64_t shift = c - g.pw;
              for (std::int64_t od = rd.lo; od < rd.hi; ++od) {
                const std::int64_t id = od * g.sd - g.pd + a;
                for (std::int64_t oh = rh.lo; oh < rh.hi; ++oh) {
                  const std::int64_t ih = oh * g.sh - g.ph + b;
                  const T* yr = yp + (od * g.ho + oh) * g.wo;
                  T* xr = xp + (id * g.hi + ih) * g.wi;
                  if (g.sw == 1) {
                    for (std::int64_t ow = rw.lo; ow < rw.hi; ++ow) xr[ow + shift] += wv * yr[ow];
                  } else {
                    for (std::int64_t ow = rw.lo; ow < rw.hi; ++ow) xr[ow * g.sw + shift] += wv * yr[ow];
                  }
                }
              }
            }
          }
        }
      }
    }
  }
}

// gw[co, ci, tap] += sum gy[n, co] * x[n, ci, shifted]
template <typename T>
void conv_bwd_weight_kernel(const ConvGeom& g, const T* x, const T* gy, T* gw) {
  const std::int64_t in_plane = g.di * g.hi * g.wi;
  const std::int64_t out_plane = g.dout * g.ho * g.wo;
  const std::int64_t taps = g.kd * g.kh * g.kw;
  for (std::int64_t co = 0; co < g.co; ++co) {
    for (std::int64_t ci = 0; ci < g.ci; ++ci) {
      T* wk = gw + (co * g.ci + ci) * taps;
      for (std::int64_t a = 0; a < g.kd; ++a) {
        const TapRange rd = valid_range(a, g.sd, g.pd, g.di, g.dout);
        for (std::int64_t b = 0; b < g.kh; ++b) {
          const TapRange rh = valid_range(b, g.sh, g.ph, g.hi, g.ho);
          for (std::int64_t c = 0; c < g.kw; ++c) {
            const TapRange rw = valid_range(c, g.sw, g.pw, g.wi, g.wo);
            const std::int64_t shift = c - g.pw;
            T acc = 0;
            for (std::int64_t n = 0; n < g.n; ++n) {
              const T* xp = x + (n * g.ci + ci) * in_plane;
              const T* yp = gy + (n * g.co + co) * out_plane;
              for (std::int64_t od = rd.lo; od < rd.hi; ++od) {
                const std::int64_t id = od * g.sd - g.pd + a;
                for (std::int64_t oh = rh.lo; oh < rh.hi; ++oh) {
                  const std::int64_t ih = oh * g.sh - g.ph + b;
                  const T* yr = yp + (od * g.ho + oh) * g.wo;
                  const T* xr = xp + (id * g.hi + ih) * g.wi;
                  T row = 0;
                  if (g.sw == 1) {
                    for (std::int64_t ow = rw.lo; ow < rw.hi; ++ow) row += yr[ow] * xr[ow + shift];
                  } else {
                    for (std::int64_t ow = rw.lo; ow < rw.hi; ++ow) row += yr[ow] * xr[ow * g.sw + shift];
                  }
                  acc += row;
                }
              }
            }
            wk[(a * g.kh + b) * g.kw + c] += acc;
          }
        }
      }
    }
  }
}

template <typename T>
void add_channel_bias(Tensor<T>& y, const Tensor<T>& bias) {
  const std::int64_t n = y.dim(0), c = y.dim(1);
  if (bias.numel() != static_cast<std::size_t>(c)) {
    throw DimensionError("bias " + shape_to_string(bias.shape()) + " does not match " + std::to_string(c) +
                         " output channels");
  }
  const std::int64_t plane = static_cast<std::int64_t>(y.numel()) / (n * c);
  T* d = y.data().data();
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < c; ++j) {
      T* p = d + (i * c + j) * plane;
      const T b = bias[static_cast<std::size_t>(j)];
      for (std::int64_t k = 0; k < plane; ++k) p[k] += b;
    }
}

template <typename T>
Tensor<T> channel_sums(const Tensor<T>& g) {
  const std::int64_t n = g.dim(0), c = g.dim(1);
  const std::int64_t plane = static_cast<std::int64_t>(g.numel()) / (n * c);
  Tensor<T> out({c});
  const T* d = g.data().data();
  for (std::int64_t j = 0; j < c; ++j) {
    T acc = 0;
    for (std::int64_t i = 0; i < n; ++i) {
      const T* p = d + (i * c + j) * plane;
      for (std::int64_t k = 0; k < plane; ++k) acc += p[k];
    }
    out[static_cast<std::size_t>(j)] = acc;
  }
  return out;
}

}  // namespace

Shape conv_output_shape(const Shape& x, const Shape& kernel, const ConvConfig& cfg) {
  check_ranks(x, kernel, cfg);
  if (x[1] != kernel[1]) {
    throw DimensionError("channel mismatch on axis 1: input " + shape_to_string(x) + " has " +
                         std::to_string(x[1]) + " channels, kernel " + shape_to_string(kernel) + " expects " +
                         std::to_string(kernel[1]));
  }
  Shape out{x[0], kernel[0]};
  for (int a = 0; a < cfg.rank; ++a) {
    const std::int64_t in = x[2 + a], k = kernel[2 + a];
    const std::int64_t span = in + 2 * cfg.padding[a] - k;
    if (span < 0) {
      throw ConfigError("non-positive output extent on spatial axis " + std::to_string(a) + " (input " +
                        std::to_string(in) + ", kernel " + std::to_string(k) + ", padding " +
                        std::to_string(cfg.padding[a]) + ")");
    }
    out.push_back(span / cfg.stride[a] + 1);
  }
  return out;
}

Shape transposed_conv_output_shape(const Shape& x, const Shape& kernel, const ConvConfig& cfg) {
  check_ranks(x, kernel, cfg);
  if (x[1] != kernel[0]) {
    throw DimensionError("channel mismatch on axis 1: input " + shape_to_string(x) + " has " +
                         std::to_string(x[1]) + " channels, transposed kernel " + shape_to_string(kernel) +
                         " expects " + std::to_string(kernel[0]));
  }
  Shape out{x[0], kernel[1]};
  for (int a = 0; a < cfg.rank; ++a) {
    const std::int64_t e = (x[2 + a] - 1) * cfg.stride[a] - 2 * cfg.padding[a] + kernel[2 + a];
    if (e < 1) {
      throw ConfigError("non-positive transposed-conv output extent on spatial axis " + std::to_string(a));
    }
    out.push_back(e);
  }
  return out;
}

template <typename T>
Tensor<T> conv_forward(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>* bias, const ConvConfig& cfg) {
  Shape out_shape = conv_output_shape(x.shape(), kernel.shape(), cfg);
  Tensor<T> y(out_shape);
  ConvGeom g = make_geom(x.shape(), kernel.shape(), out_shape, cfg);
  conv_fwd_kernel(g, x.data().data(), kernel.data().data(), y.data().data());
  if (bias) add_channel_bias(y, *bias);
  return y;
}

template <typename T>
ConvGrads<T> conv_backward(const Tensor<T>& x, const Tensor<T>& kernel, bool has_bias, const ConvConfig& cfg,
                           const Tensor<T>& grad_out) {
  Shape out_shape = conv_output_shape(x.shape(), kernel.shape(), cfg);
  if (grad_out.shape() != out_shape) {
    throw DimensionError("grad_out " + shape_to_string(grad_out.shape()) + " does not match conv output " +
                         shape_to_string(out_shape));
  }
  ConvGeom g = make_geom(x.shape(), kernel.shape(), out_shape, cfg);
  ConvGrads<T> r{Tensor<T>(x.shape()), Tensor<T>(kernel.shape()), std::nullopt};
  conv_bwd_data_kernel(g, grad_out.data().data(), kernel.data().data(), r.grad_x.data().data());
  conv_bwd_weight_kernel(g, x.data().data(), grad_out.data().data(), r.grad_kernel.data().data());
  if (has_bias) r.grad_bias = channel_sums(grad_out);
  return r;
}

template <typename T>
Tensor<T> transposed_conv_forward(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>* bias,
                                  const ConvConfig& cfg) {
  Shape out_shape = transposed_conv_output_shape(x.shape(), kernel.shape(), cfg);
  Tensor<T> y(out_shape);
  ConvGeom g = make_geom(out_shape, kernel.shape(), x.shape(), cfg);
  conv_bwd_data_kernel(g, x.data().data(), kernel.data().data(), y.data().data());
  if (bias) add_channel_bias(y, *bias);
  return y;
}

template <typename T>
ConvGrads<T> transposed_conv_backward(const Tensor<T>& x, const Tensor<T>& kernel, bool has_bias,
                                      const ConvConfig& cfg, const Tensor<T>& grad_out) {
  Shape out_shape = transposed_conv_output_shape(x.shape(), kernel.shape(), cfg);
  if (grad_out.shape() != out_shape) {
    throw DimensionError("grad_out " + shape_to_string(grad_out.shape()) + " does not match transposed-conv output " +
                         shape_to_string(out_shape));
  }
  ConvGeom g = make_geom(out_shape, kernel.shape(), x.shape(), cfg);
  ConvGrads<T> r{Tensor<T>(x.shape()), Tensor<T>(kernel.shape()), std::nullopt};
  conv_fwd_kernel(g, grad_out.data().data(), kernel.data().data(), r.grad_x.data().data());
  conv_bwd_weight_kernel(g, grad_out.data().data(), x.data().data(), r.grad_kernel.data().data());
  if (has_bias) r.grad_bias = channel_sums(grad_out);
  return r;
}

// --- normalization ---------------------------------------------------------

namespace {

struct NormLayout {
  std::int64_t n, c, plane;
  std::int64_t groups;    // normalization sets
  std::int64_t segments;  // contiguous runs per set
};

NormLayout norm_layout(const Shape& s, NormMode mode) {
  if (s.size() < 3) throw DimensionError("normalization input must be [N, C, spatial...], got " + shape_to_string(s));
  NormLayout l{};
  l.n = s[0];
  l.c = s[1];
  l.plane = 1;
  for (std::size_t i = 2; i < s.size(); ++i) l.plane *= s[i];
  if (mode == NormMode::instance) {
    l.groups = l.n * l.c;
    l.segments = 1;
  } else {
    l.groups = l.c;
    l.segments = l.n;
  }
  return l;
}

// Offset of segment `seg` of group `g`.
std::int64_t segment_offset(const NormLayout& l, NormMode mode, std::int64_t g, std::int64_t seg) {
  if (mode == NormMode::instance) return g * l.plane;
  return (seg * l.c + g) * l.plane;
}

std::int64_t group_channel(const NormLayout& l, NormMode mode, std::int64_t g) {
  return mode == NormMode::instance ? g % l.c : g;
}

}  // namespace

template <typename T>
NormForward<T> normalize_forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                                 const Tensor<T>* running_mean, const Tensor<T>* running_var,
                                 const NormConfig& cfg, bool training) {
  if (x.rank() < 3) throw DimensionError("normalization input must be [N, C, spatial...], got " + shape_to_string(x.shape()));
  const std::int64_t c = x.dim(1);
  if (static_cast<std::int64_t>(gamma.numel()) != c || static_cast<std::int64_t>(beta.numel()) != c) {
    throw DimensionError("norm affine parameters " + shape_to_string(gamma.shape()) + "/" +
                         shape_to_string(beta.shape()) + " do not match " + std::to_string(c) + " channels");
  }
  if (cfg.epsilon < 0) throw ConfigError("normalization epsilon must be >= 0");
  const bool use_running = cfg.mode == NormMode::batch && !training;
  if (use_running && (!running_mean || !running_var)) {
    throw LookupError("batch normalization in inference mode requires running statistics");
  }
  const NormLayout l = norm_layout(x.shape(), cfg.mode);
  NormForward<T> r;
  r.y = Tensor<T>(x.shape());
  r.batch_statistics = !use_running;
  r.mean.resize(static_cast<std::size_t>(l.groups));
  r.invstd.resize(static_cast<std::size_t>(l.groups));
  if (!use_running) r.var.resize(static_cast<std::size_t>(l.groups));
  const T* xd = x.data().data();
  T* yd = r.y.data().data();
  const double count = static_cast<double>(l.segments * l.plane);
  for (std::int64_t g = 0; g < l.groups; ++g) {
    const std::int64_t ch = group_channel(l, cfg.mode, g);
    double mean = 0, var = 0;
    if (use_running) {
      mean = static_cast<double>((*running_mean)[static_cast<std::size_t>(ch)]);
      var = static_cast<double>((*running_var)[static_cast<std::size_t>(ch)]);
    } else {
      for (std::int64_t s = 0; s < l.segments; ++s) {
        const T* p = xd + segment_offset(l, cfg.mode, g, s);
        for (std::int64_t k = 0; k < l.plane; ++k) mean += static_cast<double>(p[k]);
      }
      mean /= count;
      for (std::int64_t s = 0; s < l.segments; ++s) {
        const T* p = xd + segment_offset(l, cfg.mode, g, s);
        for (std::int64_t k = 0; k < l.plane; ++k) {
          const double d = static_cast<double>(p[k]) - mean;
          var += d * d;
        }
      }
      var /= count;
      r.var[static_cast<std::size_t>(g)] = static_cast<T>(var);
    }
    const double denom = var + cfg.epsilon;
    if (!(denom > 0)) {
      throw NumericError("division guard: zero variance with epsilon 0 in normalization group " + std::to_string(g) +
                         " (" + std::to_string(static_cast<std::int64_t>(count)) + " elements)");
    }
    const double invstd = 1.0 / std::sqrt(denom);
    r.mean[static_cast<std::size_t>(g)] = static_cast<T>(mean);
    r.invstd[static_cast<std::size_t>(g)] = static_cast<T>(invstd);
    const T gm = gamma[static_cast<std::size_t>(ch)], bt = beta[static_cast<std::size_t>(ch)];
    const T m = static_cast<T>(mean), is = static_cast<T>(invstd);
    for (std::int64_t s = 0; s < l.segments; ++s) {
      const std::int64_t off = segment_offset(l, cfg.mode, g, s);
      for (std::int64_t k = 0; k < l.plane; ++k) yd[off + k] = gm * ((xd[off + k] - m) * is) + bt;
    }
  }
  return r;
}

template <typename T>
NormGrads<T> normalize_backward(const Tensor<T>& x, const Tensor<T>& gamma, const NormConfig& cfg,
                                const NormForward<T>& fwd, const Tensor<T>& grad_out) {
  if (grad_out.shape() != x.shape()) {
    throw DimensionError("grad_out " + shape_to_string(grad_out.shape()) + " does not match input " +
                         shape_to_string(x.shape()));
  }
  const std::int64_t c = x.dim(1);
  const NormLayout l = norm_layout(x.shape(), cfg.mode);
  NormGrads<T> r{Tensor<T>(x.shape()), Tensor<T>({c}), Tensor<T>({c})};
  const T* xd = x.data().data();
  const T* gy = grad_out.data().data();
  T* gx = r.grad_x.data().data();
  const double count = static_cast<double>(l.segments * l.plane);
  for (std::int64_t g = 0; g < l.groups; ++g) {
    const std::int64_t ch = group_channel(l, cfg.mode, g);
    const double m = fwd.mean[static_cast<std::size_t>(g)];
    const double is = fwd.invstd[static_cast<std::size_t>(g)];
    const double gm = gamma[static_cast<std::size_t>(ch)];
    double sum_gy = 0, sum_gy_xhat = 0;
    for (std::int64_t s = 0; s < l.segments; ++s) {
      const std::int64_t off = segment_offset(l, cfg.mode, g, s);
      for (std::int64_t k = 0; k < l.plane; ++k) {
        const double xhat = (static_cast<double>(xd[off + k]) - m) * is;
        sum_gy += gy[off + k];
        sum_gy_xhat += static_cast<double>(gy[off + k]) * xhat;
      }
    }
    r.grad_gamma[static_cast<std::size_t>(ch)] += static_cast<T>(sum_gy_xhat);
    r.grad_beta[static_cast<std::size_t>(ch)] += static_cast<T>(sum_gy);
    if (fwd.batch_statistics) {
      const double mean_gy = sum_gy / count, mean_gy_xhat = sum_gy_xhat / count;
      for (std::int64_t s = 0; s < l.segments; ++s) {
        const std::int64_t off = segment_offset(l, cfg.mode, g, s);
        for (std::int64_t k = 0; k < l.plane; ++k) {
          const double xhat = (static_cast<double>(xd[off + k]) - m) * is;
          gx[off + k] = static_cast<T>(gm * is * (gy[off + k] - mean_gy - xhat * mean_gy_xhat));
        }
      }
    } else {
      for (std::int64_t s = 0; s < l.segments; ++s) {
        const std::int64_t off = segment_offset(l, cfg.mode, g, s);
        for (std::int64_t k = 0; k < l.plane; ++k) gx[off + k] = static_cast<T>(gm * is * gy[off + k]);
      }
    }
  }
  return r;
}

// --- activations -------------------------------------------------------------

std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::silu: return "silu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::softmax: return "softmax";
  }
  return "identity";
}

Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::identity;
  if (s == "relu") return Activation::relu;
  if (s == "silu") return Activation::silu;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "softmax") return Activation::softmax;
  throw ConfigError("unknown activation '" + s + "'");
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= 0) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
Tensor<T> activation(const Tensor<T>& x, Activation kind) {
  Tensor<T> y(x.shape());
  const auto xd = x.data();
  auto yd = y.data();
  switch (kind) {
    case Activation::identity:
      std::copy(xd.begin(), xd.end(), yd.begin());
      break;
    case Activation::relu:
      for (std::size_t i = 0; i < xd.size(); ++i) yd[i] = xd[i] > T(0) ? xd[i] : T(0);
      break;
    case Activation::silu:
      for (std::size_t i = 0; i < xd.size(); ++i) yd[i] = xd[i] * stable_sigmoid(xd[i]);
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < xd.size(); ++i) yd[i] = stable_sigmoid(xd[i]);
      break;
    case Activation::softmax: {
      if (x.rank() < 2) throw DimensionError("softmax needs a channel axis");
      const std::int64_t n = x.dim(0), c = x.dim(1);
      const std::int64_t plane = static_cast<std::int64_t>(x.numel()) / (n * c);
      for (std::int64_t i = 0; i < n; ++i) {
        const std::int64_t base = i * c * plane;
        for (std::int64_t k = 0; k < plane; ++k) {
          T mx = -std::numeric_limits<T>::infinity();
          for (std::int64_t j = 0; j < c; ++j) mx = std::max(mx, xd[base + j * plane + k]);
          T sum = 0;
          for (std::int64_t j = 0; j < c; ++j) {
            const T e = std::exp(xd[base + j * plane + k] - mx);
            yd[base + j * plane + k] = e;
            sum += e;
          }
          for (std::int64_t j = 0; j < c; ++j) yd[base + j * plane + k] /= sum;
        }
      }
      break;
    }
  }
  return y;
}

template <typename T>
Tensor<T> activation_backward(const Tensor<T>& x, const Tensor<T>& y, Activation kind, const Tensor<T>& grad_out) {
  if (grad_out.shape() != x.shape() || y.shape() != x.shape()) {
    throw DimensionError("activation backward shape mismatch: " + shape_to_string(grad_out.shape()) + " vs " +
                         shape_to_string(x.shape()));
  }
  Tensor<T> gx(x.shape());
  const auto xd = x.data();
  const auto yd = y.data();
  const auto gy = grad_out.data();
  auto gd = gx.data();
  switch (kind) {
    case Activation::identity:
      std::copy(gy.begin(), gy.end(), gd.begin());
      break;
    case Activation::relu:
      for (std::size_t i = 0; i < xd.size(); ++i) gd[i] = xd[i] > T(0) ? gy[i] : T(0);
      break;
    case Activation::silu:
      for (std::size_t i = 0; i < xd.size(); ++i) {
        const T s = stable_sigmoid(xd[i]);
        gd[i] = gy[i] * s * (T(1) + xd[i] * (T(1) - s));
      }
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < xd.size(); ++i) gd[i] = gy[i] * yd[i] * (T(1) - yd[i]);
      break;
    case Activation::softmax: {
      const std::int64_t n = x.dim(0), c = x.dim(1);
      const std::int64_t plane = static_cast<std::int64_t>(x.numel()) / (n * c);
      for (std::int64_t i = 0; i < n; ++i) {
        const std::int64_t base = i * c * plane;
        for (std::int64_t k = 0; k < plane; ++k) {
          T dot = 0;
          for (std::int64_t j = 0; j < c; ++j) dot += gy[base + j * plane + k] * yd[base + j * plane + k];
          for (std::int64_t j = 0; j < c; ++j) {
            const std::int64_t idx = base + j * plane + k;
            gd[idx] = yd[idx] * (gy[idx] - dot);
          }
        }
      }
      break;
    }
  }
  return gx;
}

// --- resampling and reshaping -------------------------------------------------

namespace {

std::array<std::int64_t, 3> factor3(const std::vector<int>& factor, int rank) {
  if (static_cast<int>(factor.size()) != rank) {
    throw ConfigError("upsample factor needs one entry per spatial axis (" + std::to_string(rank) + ")");
  }
  for (int f : factor) {
    if (f < 1) throw ConfigError("upsample factor must be >= 1, got " + std::to_string(f));
  }
  if (rank == 2) return {1, factor[0], factor[1]};
  return {factor[0], factor[1], factor[2]};
}

}  // namespace

template <typename T>
Tensor<T> nearest_upsample(const Tensor<T>& x, const std::vector<int>& factor) {
  const int rank = spatial_rank(x);
  const auto f = factor3(factor, rank);
  const Dims5 i5 = as_5d(x.shape(), "upsample input");
  Shape out{x.dim(0), x.dim(1)};
  for (int a = 0; a < rank; ++a) out.push_back(x.dim(2 + a) * factor[a]);
  Tensor<T> y(out);
  const std::int64_t od = i5[2] * f[0], oh = i5[3] * f[1], ow = i5[4] * f[2];
  const T* xd = x.data().data();
  T* yd = y.data().data();
  for (std::int64_t p = 0; p < i5[0] * i5[1]; ++p) {
    const T* xp = xd + p * i5[2] * i5[3] * i5[4];
    T* yp = yd + p * od * oh * ow;
    for (std::int64_t d = 0; d < od; ++d)
      for (std::int64_t h = 0; h < oh; ++h) {
        const T* xr = xp + ((d / f[0]) * i5[3] + h / f[1]) * i5[4];
        T* yr = yp + (d * oh + h) * ow;
        for (std::int64_t w = 0; w < ow; ++w) yr[w] = xr[w / f[2]];
      }
  }
  return y;
}

template <typename T>
Tensor<T> nearest_upsample_backward(const Tensor<T>& grad_out, const std::vector<int>& factor, const Shape& x_shape) {
  const int rank = static_cast<int>(x_shape.size()) - 2;
  const auto f = factor3(factor, rank);
  const Dims5 i5 = as_5d(x_shape, "upsample input");
  const std::int64_t od = i5[2] * f[0], oh = i5[3] * f[1], ow = i5[4] * f[2];
  if (static_cast<std::int64_t>(grad_out.numel()) != i5[0] * i5[1] * od * oh * ow) {
    throw DimensionError("upsample grad_out " + shape_to_string(grad_out.shape()) + " inconsistent with input " +
                         shape_to_string(x_shape));
  }
  Tensor<T> gx(x_shape);
  const T* gy = grad_out.data().data();
  T* gd = gx.data().data();
  for (std::int64_t p = 0; p < i5[0] * i5[1]; ++p) {
    T* xp = gd + p * i5[2] * i5[3] * i5[4];
    const T* yp = gy + p * od * oh * ow;
    for (std::int64_t d = 0; d < od; ++d)
      for (std::int64_t h = 0; h < oh; ++h) {
        T* xr = xp + ((d / f[0]) * i5[3] + h / f[1]) * i5[4];
        const T* yr = yp + (d * oh + h) * ow;
        for (std::int64_t w = 0; w < ow; ++w) xr[w / f[2]] += yr[w];
      }
  }
  return gx;
}

template <typename T>
Tensor<T> concat_channels(const std::vector<const Tensor<T>*>& xs) {
  if (xs.empty()) throw DimensionError("concat of zero tensors");
  const Shape& ref = xs.front()->shape();
  if (ref.size() < 2) throw DimensionError("concat input must have a channel axis");
  std::int64_t channels = 0;
  for (const Tensor<T>* t : xs) {
    const Shape& s = t->shape();
    bool ok = s.size() == ref.size() && s[0] == ref[0];
    for (std::size_t i = 2; ok && i < s.size(); ++i) ok = s[i] == ref[i];
    if (!ok) {
      throw DimensionError("concat spatial mismatch: " + shape_to_string(ref) + " vs " + shape_to_string(s));
    }
    channels += s[1];
  }
  Shape out = ref;
  out[1] = channels;
  Tensor<T> y(out);
  const std::int64_t n = ref[0];
  const std::int64_t plane = shape_numel(ref) / (ref[0] * ref[1]);
  T* yd = y.data().data();
  for (std::int64_t i = 0; i < n; ++i) {
    std::int64_t c0 = 0;
    for (const Tensor<T>* t : xs) {
      const std::int64_t c = t->dim(1);
      const T* src = t->data().data() + i * c * plane;
      std::copy(src, src + c * plane, yd + (i * channels + c0) * plane);
      c0 += c;
    }
  }
  return y;
}

template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& xs) {
  std::vector<const Tensor<T>*> ptrs;
  ptrs.reserve(xs.size());
  for (const auto& t : xs) ptrs.push_back(&t);
  return concat_channels(ptrs);
}

template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& x, const std::vector<std::int64_t>& channels) {
  std::int64_t total = 0;
  for (auto c : channels) total += c;
  if (x.rank() < 2 || total != x.dim(1)) {
    throw DimensionError("split sizes do not sum to the channel extent of " + shape_to_string(x.shape()));
  }
  const std::int64_t n = x.dim(0);
  const std::int64_t plane = static_cast<std::int64_t>(x.numel()) / (n * total);
  std::vector<Tensor<T>> out;
  std::int64_t c0 = 0;
  for (auto c : channels) {
    Shape s = x.shape();
    s[1] = c;
    Tensor<T> part(s);
    for (std::int64_t i = 0; i < n; ++i) {
      const T* src = x.data().data() + (i * total + c0) * plane;
      std::copy(src, src + c * plane, part.data().data() + i * c * plane);
    }
    out.push_back(std::move(part));
    c0 += c;
  }
  return out;
}

template <typename T>
Tensor<T> fold_depth(const Tensor<T>& x) {
  if (x.rank() != 5) throw DimensionError("fold_depth expects [N, C, D, H, W], got " + shape_to_string(x.shape()));
  const std::int64_t n = x.dim(0), c = x.dim(1), d = x.dim(2), plane = x.dim(3) * x.dim(4);
  Tensor<T> y({n * d, c, x.dim(3), x.dim(4)});
  const T* xd = x.data().data();
  T* yd = y.data().data();
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < c; ++j)
      for (std::int64_t k = 0; k < d; ++k) {
        const T* src = xd + ((i * c + j) * d + k) * plane;
        std::copy(src, src + plane, yd + ((i * d + k) * c + j) * plane);
      }
  return y;
}

template <typename T>
Tensor<T> unfold_depth(const Tensor<T>& x, std::int64_t depth) {
  if (x.rank() != 4) throw DimensionError("unfold_depth expects [N*D, C, H, W], got " + shape_to_string(x.shape()));
  if (depth < 1 || x.dim(0) % depth != 0) {
    throw DimensionError("batch extent " + std::to_string(x.dim(0)) + " is not a multiple of depth " +
                      std::to_string(depth));
  }
  const std::int64_t n = x.dim(0) / depth, c = x.dim(1), plane = x.dim(2) * x.dim(3);
  Tensor<T> y({n, c, depth, x.dim(2), x.dim(3)});
  const T* xd = x.data().data();
  T* yd = y.data().data();
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < c; ++j)
      for (std::int64_t k = 0; k < depth; ++k) {
        const T* src = xd + ((i * depth + k) * c + j) * plane;
        std::copy(src, src + plane, yd + ((i * c + j) * depth + k) * plane);
      }
  return y;
}

#define CROSSDIM_INSTANTIATE_OPS(T)                                                                                  \
  template Tensor<T> conv_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*, const ConvConfig&);        \
  template ConvGrads<T> conv_backward(const Tensor<T>&, const Tensor<T>&, bool, const ConvConfig&,                 \
                                      const Tensor<T>&);                                                           \
  template Tensor<T> transposed_conv_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*,                 \
                                             const ConvConfig&);                                                   \
  template ConvGrads<T> transposed_conv_backward(const Tensor<T>&, const Tensor<T>&, bool, const ConvConfig&,      \
                                                 const Tensor<T>&);                                                \
  template NormForward<T> normalize_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,                  \
                                            const Tensor<T>*, const Tensor<T>*, const NormConfig&, bool);          \
  template NormGrads<T> normalize_backward(const Tensor<T>&, const Tensor<T>&, const NormConfig&,                  \
                                           const NormForward<T>&, const Tensor<T>&);                               \
  template T stable_sigmoid(T);                                                                                    \
  template Tensor<T> activation(const Tensor<T>&, Activation);                                                     \
  template Tensor<T> activation_backward(const Tensor<T>&, const Tensor<T>&, Activation, const Tensor<T>&);        \
  template Tensor<T> nearest_upsample(const Tensor<T>&, const std::vector<int>&);                                  \
  template Tensor<T> nearest_upsample_backward(const Tensor<T>&, const std::vector<int>&, const Shape&);           \
  template Tensor<T> concat_channels(const std::vector<const Tensor<T>*>&);                                        \
  template Tensor<T> concat_channels(const std::vector<Tensor<T>>&);                                               \
  template std::vector<Tensor<T>> split_channels(const Tensor<T>&, const std::vector<std::int64_t>&);              \
  template Tensor<T> fold_depth(const Tensor<T>&);                                                                 \
  template Tensor<T> unfold_depth(const Tensor<T>&, std::int64_t);

CROSSDIM_INSTANTIATE_OPS(float)
CROSSDIM_INSTANTIATE_OPS(double)

#undef CROSSDIM_INSTANTIATE_OPS

}  // namespace crossdim
