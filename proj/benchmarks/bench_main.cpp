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

#include <benchmark/benchmark.h>

#include <random>

#include "crossdim/builders.hpp"
#include "crossdim/graph.hpp"
#include "crossdim/inflate.hpp"
#include "crossdim/metrics.hpp"
#include "crossdim/ops.hpp"
#include "crossdim/synthetic.hpp"
#include "crossdim/trainer.hpp"

namespace crossdim {
namespace {

Tensor<float> random_tensor(const Shape& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1, 1);
  Tensor<float> t(shape);
  for (float& v : t.data()) v = u(rng);
  return t;
}

// Args: channels, spatial extent.
void BM_Conv3dForward(benchmark::State& state) {
  const std::int64_t c = state.range(0), n = state.range(1);
  const auto x = random_tensor({1, c, n, n, n}, 1);
  const auto k = random_tensor({c, c, 3, 3, 3}, 2);
  const auto cfg = ConvConfig::same(3, 3);
  for (auto _ : state) benchmark::DoNotOptimize(conv_forward<float>(x, k, nullptr, cfg));
  state.SetItemsProcessed(state.iterations() * c * c * 27 * n * n * n);
}
BENCHMARK(BM_Conv3dForward)->Args({8, 16})->Args({8, 32})->Args({16, 32})->Unit(benchmark::kMillisecond);

void BM_Conv3dBackward(benchmark::State& state) {
  const std::int64_t c = state.range(0), n = state.range(1);
  const auto x = random_tensor({1, c, n, n, n}, 1);
  const auto k = random_tensor({c, c, 3, 3, 3}, 2);
  const auto g = random_tensor({1, c, n, n, n}, 3);
  const auto cfg = ConvConfig::same(3, 3);
  for (auto _ : state) benchmark::DoNotOptimize(conv_backward<float>(x, k, false, cfg, g));
  state.SetItemsProcessed(state.iterations() * c * c * 27 * n * n * n);
}
BENCHMARK(BM_Conv3dBackward)->Args({8, 16})->Args({8, 32})->Unit(benchmark::kMillisecond);

void BM_Conv2dForward(benchmark::State& state) {
  const std::int64_t c = state.range(0), n = state.range(1);
  const auto x = random_tensor({1, c, n, n}, 1);
  const auto k = random_tensor({c, c, 3, 3}, 2);
  const auto cfg = ConvConfig::same(2, 3);
  for (auto _ : state) benchmark::DoNotOptimize(conv_forward<float>(x, k, nullptr, cfg));
  state.SetItemsProcessed(state.iterations() * c * c * 9 * n * n);
}
BENCHMARK(BM_Conv2dForward)->Args({16, 64})->Args({32, 128})->Unit(benchmark::kMillisecond);

void BM_InflateKernel(benchmark::State& state) {
  const auto k = random_tensor({64, 64, 3, 3}, 4);
  for (auto _ : state) benchmark::DoNotOptimize(inflate_kernel(k, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_InflateKernel)->Arg(3)->Arg(5);

// Surface extraction plus exact distance transform on a sphere of side n.
void BM_SurfaceDistances(benchmark::State& state) {
  const std::int64_t n = state.range(0);
  const Extents e{n, n, n};
  const auto a = sphere_case(e, 1, 1), b = sphere_case(e, 1, 2);
  Mask ma(e), mb(e);
  for (std::size_t i = 0; i < ma.size(); ++i) {
    ma.data[i] = a.labels->data[i] != 0;
    mb.data[i] = b.labels->data[i] != 0;
  }
  const Spacing spacing{2.0, 0.8, 0.8};
  for (auto _ : state) {
    const auto sa = extract_surface(ma, spacing), sb = extract_surface(mb, spacing);
    benchmark::DoNotOptimize(surface_distances(sa, sb));
  }
}
BENCHMARK(BM_SurfaceDistances)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

// One optimizer step of a small 3D network on a 32^3 patch.
void BM_TrainStepDx(benchmark::State& state) {
  ArchConfig a = default_arch_config(ArchKind::dx_net);
  a.stem_filters = 4;
  a.encoder_widths = {4, 8, 8, 8};
  a.n_classes = 1;
  const NetworkGraph g = build_network(a);
  Trainer<float> trainer(g, init_store<float>(g, 1), OptimSection{}, LossConfig{});
  const auto x = random_tensor({1, 1, 32, 32, 32}, 5);
  Tensor<float> y({1, 1, 32, 32, 32});
  for (std::size_t i = 0; i < y.numel(); i += 3) y[i] = 1;
  for (auto _ : state) benchmark::DoNotOptimize(trainer.step(x, y));
}
BENCHMARK(BM_TrainStepDx)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace crossdim

BENCHMARK_MAIN();
