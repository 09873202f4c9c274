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

#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "crossdim/loss.hpp"
#include "crossdim/ops.hpp"
#include "crossdim/runner.hpp"
#include "oracles.hpp"

namespace crossdim::oracle {

namespace {

int pick(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

/// Reference gradient of x -> sum(r * f(x)).
template <typename F>
std::vector<double> fd(const Tensor<double>& x, const Tensor<double>& r, F f) {
  return numeric_gradient([&](const std::vector<double>& v) { return dot(r, f(with_values(x, v))); }, values(x));
}

struct ConvCase {
  Tensor<double> x, w, b;
  std::vector<int> stride, padding;
};

ConvCase random_conv_case(std::mt19937_64& rng, bool transposed) {
  const int rank = pick(rng, 2, 3);
  const std::int64_t n = pick(rng, 1, 2), ci = pick(rng, 1, 3), co = pick(rng, 1, 3);
  Shape xs{n, ci}, ws;
  ws = transposed ? Shape{ci, co} : Shape{co, ci};
  ConvCase c;
  for (int a = 0; a < rank; ++a) {
    const int k = pick(rng, 1, 3), s = pick(rng, 1, 2), p = pick(rng, 0, std::min(1, k - 1));
    const std::int64_t e = transposed ? pick(rng, 2, 4) : pick(rng, std::max(k, 3), 5);
    xs.push_back(e);
    ws.push_back(k);
    c.stride.push_back(s);
    c.padding.push_back(transposed ? 0 : p);
  }
  c.x = random_tensor(xs, rng);
  c.w = random_tensor(ws, rng);
  c.b = random_tensor({co}, rng);
  return c;
}

}  // namespace

GradCheckResult check_conv(int configs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  GradCheckResult res{"conv", configs, 0, 0};
  for (int t = 0; t < configs; ++t) {
    const ConvCase c = random_conv_case(rng, false);
    const ConvConfig cfg{static_cast<int>(c.stride.size()), c.stride, c.padding};
    const Tensor<double> y = conv_forward(c.x, c.w, &c.b, cfg);
    const Tensor<double> r = random_tensor(y.shape(), rng);
    const ConvGrads<double> g = conv_backward(c.x, c.w, true, cfg, r);
    const auto nx = fd(c.x, r, [&](const Tensor<double>& v) { return conv_forward(v, c.w, &c.b, cfg); });
    const auto nw = fd(c.w, r, [&](const Tensor<double>& v) { return conv_forward(c.x, v, &c.b, cfg); });
    const auto nb = fd(c.b, r, [&](const Tensor<double>& v) { return conv_forward(c.x, c.w, &v, cfg); });
    res.max_rel_error = std::max({res.max_rel_error, max_rel_error(values(g.grad_x), nx),
                                  max_rel_error(values(g.grad_kernel), nw), max_rel_error(values(*g.grad_bias), nb)});
  }
  return res;
}

GradCheckResult check_transposed_conv(int configs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  GradCheckResult res{"transposed_conv", configs, 0, 0};
  for (int t = 0; t < configs; ++t) {
    const ConvCase c = random_conv_case(rng, true);
    const ConvConfig cfg{static_cast<int>(c.stride.size()), c.stride, c.padding};
    const Tensor<double> y = transposed_conv_forward(c.x, c.w, &c.b, cfg);
    const Tensor<double> r = random_tensor(y.shape(), rng);
    const ConvGrads<double> g = transposed_conv_backward(c.x, c.w, true, cfg, r);
    const auto nx = fd(c.x, r, [&](const Tensor<double>& v) { return transposed_conv_forward(v, c.w, &c.b, cfg); });
    const auto nw = fd(c.w, r, [&](const Tensor<double>& v) { return transposed_conv_forward(c.x, v, &c.b, cfg); });
    const auto nb = fd(c.b, r, [&](const Tensor<double>& v) { return transposed_conv_forward(c.x, c.w, &v, cfg); });
    res.max_rel_error = std::max({res.max_rel_error, max_rel_error(values(g.grad_x), nx),
                                  max_rel_error(values(g.grad_kernel), nw), max_rel_error(values(*g.grad_bias), nb)});
  }
  return res;
}

GradCheckResult check_norm(NormMode mode, int configs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  GradCheckResult res{mode == NormMode::batch ? "batch_norm" : "instance_norm", configs, 0, 0};
  for (int t = 0; t < configs; ++t) {
    const int rank = pick(rng, 2, 3);
    const std::int64_t n = pick(rng, 1, 3), c = pick(rng, 1, 3);
    Shape xs{n, c};
    for (int a = 0; a < rank; ++a) xs.push_back(pick(rng, 2, 4));
    const Tensor<double> x = random_tensor(xs, rng, -2, 2);
    const Tensor<double> gamma = random_tensor({c}, rng, 0.5, 1.5), beta = random_tensor({c}, rng);
    const NormConfig cfg{mode, 1e-5};
    auto f = [&](const Tensor<double>& xv, const Tensor<double>& gv, const Tensor<double>& bv) {
      return normalize_forward<double>(xv, gv, bv, nullptr, nullptr, cfg, true).y;
    };
    const auto fwd = normalize_forward<double>(x, gamma, beta, nullptr, nullptr, cfg, true);
    const Tensor<double> r = random_tensor(fwd.y.shape(), rng);
    const NormGrads<double> g = normalize_backward(x, gamma, cfg, fwd, r);
    const auto nx = fd(x, r, [&](const Tensor<double>& v) { return f(v, gamma, beta); });
    const auto ng = fd(gamma, r, [&](const Tensor<double>& v) { return f(x, v, beta); });
    const auto nb = fd(beta, r, [&](const Tensor<double>& v) { return f(x, gamma, v); });
    res.max_rel_error = std::max({res.max_rel_error, max_rel_error(values(g.grad_x), nx),
                                  max_rel_error(values(g.grad_gamma), ng), max_rel_error(values(g.grad_beta), nb)});
  }
  return res;
}

GradCheckResult check_activation(Activation kind, int configs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  GradCheckResult res{"activation:" + to_string(kind), configs, 0, 0};
  for (int t = 0; t < configs; ++t) {
    const int rank = pick(rng, 2, 3);
    Shape xs{pick(rng, 1, 2), pick(rng, 1, 4)};
    for (int a = 0; a < rank; ++a) xs.push_back(pick(rng, 1, 4));
    Tensor<double> x = random_tensor(xs, rng, -3, 3);
    // Keep relu arguments away from its kink.
    for (std::size_t i = 0; i < x.numel(); ++i)
      if (std::abs(x[i]) < 1e-2) x[i] = 0.5;
    const Tensor<double> y = activation(x, kind);
    const Tensor<double> r = random_tensor(y.shape(), rng);
    const Tensor<double> g = activation_backward(x, y, kind, r);
    const auto nx = fd(x, r, [&](const Tensor<double>& v) { return activation(v, kind); });
    res.max_rel_error = std::max(res.max_rel_error, max_rel_error(values(g), nx));
  }
  return res;
}

GradCheckResult check_upsample(int configs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  GradCheckResult res{"upsample", configs, 0, 0};
  for (int t = 0; t < configs; ++t) {
    const int rank = pick(rng, 2, 3);
    Shape xs{pick(rng, 1, 2), pick(rng, 1, 3)};
    std::vector<int> factor;
    for (int a = 0; a < rank; ++a) {
      xs.push_back(pick(rng, 1, 3));
      factor.push_back(pick(rng, 1, 3));
    }
    const Tensor<double> x = random_tensor(xs, rng);
    const Tensor<double> y = nearest_upsample(x, factor);
    const Tensor<double> r = random_tensor(y.shape(), rng);
    const Tensor<double> g = nearest_upsample_backward(r, factor, x.shape());
    const auto nx = fd(x, r, [&](const Tensor<double>& v) { return nearest_upsample(v, factor); });
    res.max_rel_error = std::max(res.max_rel_error, max_rel_error(values(g), nx));
  }
  return res;
}

GradCheckResult check_concat(int configs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  GradCheckResult res{"concat", configs, 0, 0};
  for (int t = 0; t < configs; ++t) {
    const int rank = pick(rng, 2, 3);
    const std::int64_t n = pick(rng, 1, 2), ca = pick(rng, 1, 3), cb = pick(rng, 1, 3);
    Shape as{n, ca}, bs{n, cb};
    for (int a = 0; a < rank; ++a) {
      const std::int64_t e = pick(rng, 1, 3);
      as.push_back(e);
      bs.push_back(e);
    }
    const Tensor<double> a = random_tensor(as, rng), b = random_tensor(bs, rng);
    const Tensor<double> y = concat_channels<double>(std::vector<Tensor<double>>{a, b});
    const Tensor<double> r = random_tensor(y.shape(), rng);
    const auto parts = split_channels(r, {ca, cb});
    const auto na = fd(a, r, [&](const Tensor<double>& v) { return concat_channels<double>(std::vector<Tensor<double>>{v, b}); });
    const auto nb = fd(b, r, [&](const Tensor<double>& v) { return concat_channels<double>(std::vector<Tensor<double>>{a, v}); });
    res.max_rel_error =
        std::max({res.max_rel_error, max_rel_error(values(parts[0]), na), max_rel_error(values(parts[1]), nb)});
  }
  return res;
}

GradCheckResult check_fold(int configs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  GradCheckResult res{"fold_depth", configs, 0, 0};
  for (int t = 0; t < configs; ++t) {
    const std::int64_t n = pick(rng, 1, 2), c = pick(rng, 1, 3), d = pick(rng, 1, 4);
    const Tensor<double> x = random_tensor({n, c, d, pick(rng, 1, 3), pick(rng, 1, 3)}, rng);
    const Tensor<double> y = fold_depth(x);
    const Tensor<double> r = random_tensor(y.shape(), rng);
    // The adjoint of a permutation is its inverse.
    const Tensor<double> g = unfold_depth(r, d);
    const auto nx = fd(x, r, [&](const Tensor<double>& v) { return fold_depth(v); });
    res.max_rel_error = std::max(res.max_rel_error, max_rel_error(values(g), nx));
    const Tensor<double> r2 = random_tensor(x.shape(), rng);
    const Tensor<double> g2 = fold_depth(r2);
    const auto ny = fd(y, r2, [&](const Tensor<double>& v) { return unfold_depth(v, d); });
    res.max_rel_error = std::max(res.max_rel_error, max_rel_error(values(g2), ny));
  }
  return res;
}

GradCheckResult check_loss(int configs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  GradCheckResult res{"compound_loss", configs, 0, 0};
  for (int t = 0; t < configs; ++t) {
    const int rank = pick(rng, 2, 3);
    Shape s{1, pick(rng, 1, 3)};
    for (int a = 0; a < rank; ++a) s.push_back(pick(rng, 2, 4));
    const Tensor<double> pred = random_tensor(s, rng, 0.05, 0.95);
    Tensor<double> target = random_tensor(s, rng, 0, 1);
    if (t % 2 == 0)
      for (std::size_t i = 0; i < target.numel(); ++i) target[i] = target[i] > 0.5 ? 1.0 : 0.0;
    const LossResult<double> r = compound_loss(pred, target);
    const auto np = numeric_gradient(
        [&](const std::vector<double>& v) { return compound_loss(with_values(pred, v), target).loss; }, values(pred));
    res.max_rel_error = std::max(res.max_rel_error, max_rel_error(values(r.grad), np));
  }
  return res;
}

std::vector<GradCheckResult> check_all_primitives(int configs, std::uint64_t seed) {
  std::vector<GradCheckResult> out;
  out.push_back(check_conv(configs, seed + 1));
  out.push_back(check_transposed_conv(configs, seed + 2));
  out.push_back(check_norm(NormMode::batch, configs, seed + 3));
  out.push_back(check_norm(NormMode::instance, configs, seed + 4));
  std::uint64_t s = seed + 10;
  for (Activation a : {Activation::identity, Activation::relu, Activation::silu, Activation::sigmoid,
                       Activation::softmax}) {
    out.push_back(check_activation(a, configs, s++));
  }
  out.push_back(check_upsample(configs, seed + 5));
  out.push_back(check_concat(configs, seed + 6));
  out.push_back(check_fold(configs, seed + 7));
  out.push_back(check_loss(configs, seed + 8));
  return out;
}

ArchConfig tiny_arch(ArchKind kind) {
  ArchConfig c = default_arch_config(kind);
  c.encoder_widths = {2, 3, 4};
  switch (kind) {
    case ArchKind::omnia_net:
      c.stem_filters = 2;
      c.input_extents = {8, 8};
      break;
    case ArchKind::dx_net:
      c.stem_filters = 2;
      c.input_extents = {8, 8, 8};
      break;
    case ArchKind::ds_net:
      c.stack_width = 2;
      c.depth_fold = 4;
      c.budget_channels = 3;
      // 16x16 planes keep the deepest 2D batch norm above two samples per channel.
      c.input_extents = {8, 16, 16};
      break;
  }
  return c;
}

GradCheckResult check_network(const ArchConfig& cfg, std::uint64_t seed, double step) {
  const NetworkGraph g = build_network(cfg);
  WeightStore<double> store = init_store<double>(g, seed);
  std::mt19937_64 rng(seed);
  const Tensor<double> x = random_tensor(cfg.input_shape(), rng);
  const Tape<double> tape0 = run_graph(g, store, x, RunMode::train);
  Tensor<double> target(tape0.output().shape());
  for (std::size_t i = 0; i < target.numel(); ++i) target[i] = std::uniform_real_distribution<double>(0, 1)(rng) > 0.5;
  const LossResult<double> loss = compound_loss(tape0.output(), target);
  store.drop_grads();
  run_backward(g, tape0, store, loss.grad);

  GradCheckResult res{"network:" + to_string(cfg.kind), 1, count_parameters(g), 0};
  for (auto& e : store.entries()) {
    if (!is_trainable_role(e.role)) continue;
    const std::vector<double> analytic(e.value.grad().begin(), e.value.grad().end());
    Tensor<double> keep = e.value;
    const auto numeric = numeric_gradient(
        [&](const std::vector<double>& v) {
          e.value = with_values(keep, v);
          return compound_loss(forward(g, store, x, RunMode::train), target).loss;
        },
        values(keep), step);
    e.value = keep;
    res.max_rel_error = std::max(res.max_rel_error, max_rel_error(analytic, numeric));
  }
  return res;
}

}  // namespace crossdim::oracle
