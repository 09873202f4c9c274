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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "crossdim/labels.hpp"
#include "crossdim/loss.hpp"
#include "oracles.hpp"

namespace crossdim {
namespace {

// Direct transcription of the objective: per-class overlap ratios summed over
// the batch, plus the mean clamped cross-entropy over every element.
double reference_loss(const Tensor<double>& y, const Tensor<double>& g, double eps = 1e-6, double floor = 1e-7) {
  const auto n = y.dim(0), c = y.dim(1);
  const auto plane = static_cast<std::int64_t>(y.numel()) / (n * c);
  double overlap = 0, bce = 0;
  for (std::int64_t k = 0; k < c; ++k) {
    double num = 0, sy = 0, sg = 0;
    for (std::int64_t b = 0; b < n; ++b)
      for (std::int64_t i = 0; i < plane; ++i) {
        const auto at = static_cast<std::size_t>((b * c + k) * plane + i);
        num += y[at] * g[at];
        sy += y[at];
        sg += g[at];
        bce += -(g[at] * std::log(std::max(y[at], floor)) + (1 - g[at]) * std::log(std::max(1 - y[at], floor)));
      }
    overlap += num / (sy + sg + eps);
  }
  return 1 - 2.0 / static_cast<double>(c) * overlap + bce / static_cast<double>(y.numel());
}

Tensor<double> random_binary(const Shape& s, std::mt19937_64& rng, double p = 0.4) {
  Tensor<double> t(s);
  std::bernoulli_distribution coin(p);
  for (auto& v : t.data()) v = coin(rng) ? 1.0 : 0.0;
  return t;
}

Tensor<double> random_probs(const Shape& s, std::mt19937_64& rng) {
  return oracle::random_tensor(s, rng, 0.02, 0.98);
}

LabelMap labels_of(std::vector<std::int32_t> v) {
  LabelMap m(Extents{1, 1, static_cast<std::int64_t>(v.size())});
  m.data = std::move(v);
  return m;
}

// --- compound loss -------------------------------------------------------------

TEST(CompoundLoss, HandEvaluatedHalfProbabilityCase) {
  const Tensor<double> y({1, 1, 2, 2}, 0.5);
  const Tensor<double> g({1, 1, 2, 2}, {1, 1, 0, 0});
  const auto r = compound_loss(y, g);
  EXPECT_NEAR(r.dice_term, 1 - 2.0 / (4 + 1e-6), 1e-15);
  EXPECT_NEAR(r.bce_term, std::log(2.0), 1e-15);
  EXPECT_NEAR(r.loss, 1.1931471805599453, 1e-6);
}

TEST(CompoundLoss, ComplementPredictionHitsTheClampFloor) {
  const Tensor<double> g({1, 1, 1, 2}, {1, 0});
  const Tensor<double> y({1, 1, 1, 2}, {0, 1});
  const auto r = compound_loss(y, g);
  EXPECT_DOUBLE_EQ(r.dice_term, 1.0);
  EXPECT_NEAR(r.bce_term, -std::log(1e-7), 1e-12);
}

TEST(CompoundLoss, MatchesDirectTranscriptionOnRandomInputs) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 30; ++t) {
    const Shape s = t % 2 ? Shape{1 + t % 2, 1 + t % 3, 3, 4} : Shape{1, 1 + t % 3, 2, 3, 3};
    const auto y = random_probs(s, rng);
    const auto g = random_binary(s, rng);
    EXPECT_NEAR(compound_loss(y, g).loss, reference_loss(y, g), 1e-12) << t;
  }
}

TEST(CompoundLoss, PerfectPredictionOnNonEmptySupportIsNearZero) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 50; ++t) {
    const Shape s{1, 1 + t % 3, 4, 5};
    auto g = random_binary(s, rng, 0.1 + 0.8 * (t % 5) / 4.0);
    const std::int64_t plane = 20;
    for (std::int64_t c = 0; c < s[1]; ++c) g[static_cast<std::size_t>(c * plane)] = 1.0;  // every class non-empty
    const auto r = compound_loss(g, g);
    EXPECT_GE(r.loss, 0.0);
    EXPECT_LE(r.dice_term, 1e-5);
    EXPECT_LE(r.bce_term, 1e-12);
    EXPECT_LE(r.loss, 1e-4);
  }
}

TEST(CompoundLoss, EmptySupportKeepsTheFullDiceTerm) {
  // With epsilon only in the denominator, an all-background class contributes
  // a zero overlap ratio even when predicted perfectly.
  const Tensor<double> zeros({1, 1, 3, 3}, 0.0);
  const auto r = compound_loss(zeros, zeros);
  EXPECT_DOUBLE_EQ(r.dice_term, 1.0);
  EXPECT_DOUBLE_EQ(r.bce_term, 0.0);
}

TEST(CompoundLoss, NonNegativeOnRandomInputs) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 200; ++t) {
    const Shape s{1, 1 + t % 3, 3, 3};
    EXPECT_GE(compound_loss(oracle::random_tensor(s, rng, 0.0, 1.0), random_binary(s, rng)).loss, 0.0);
  }
}

TEST(CompoundLoss, FlippingACorrectVoxelStrictlyIncreasesTheLoss) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 40; ++t) {
    const Shape s{1, 1 + t % 3, 3, 4};
    const auto g = random_binary(s, rng);
    auto y = g;
    // Start from a binary prediction that agrees on most voxels.
    std::bernoulli_distribution wrong(0.2);
    for (auto& v : y.data())
      if (wrong(rng)) v = 1 - v;
    const double base = compound_loss(y, g).loss;
    for (std::size_t i = 0; i < y.numel(); ++i) {
      if (y[i] != g[i]) continue;
      auto flipped = y;
      flipped[i] = 1 - flipped[i];
      EXPECT_GT(compound_loss(flipped, g).loss, base) << "case " << t << " voxel " << i;
    }
  }
}

TEST(CompoundLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    const Shape s{1 + t % 2, 1 + t % 3, 3, 3};
    const auto y = random_probs(s, rng);
    const auto g = random_binary(s, rng);
    const auto r = compound_loss(y, g);
    const std::vector<double> analytic(r.grad.data().begin(), r.grad.data().end());
    const auto numeric = oracle::numeric_gradient(
        [&](const std::vector<double>& v) { return reference_loss(oracle::with_values(y, v), g); }, oracle::values(y));
    EXPECT_LE(oracle::max_rel_error(analytic, numeric), 1e-6) << t;
  }
}

TEST(CompoundLoss, FloatMatchesDouble) {
  std::mt19937_64 rng(6);
  const auto y = random_probs({1, 2, 4, 4}, rng);
  const auto g = random_binary({1, 2, 4, 4}, rng);
  EXPECT_NEAR(compound_loss(y.cast<float>(), g.cast<float>()).loss, compound_loss(y, g).loss, 1e-5);
}

TEST(CompoundLoss, RejectsInvalidInputs) {
  const Tensor<double> ok({1, 1, 2, 2}, 0.5);
  EXPECT_THROW(compound_loss(Tensor<double>({1, 1, 2, 2}, 1.5), ok), DomainError);
  EXPECT_THROW(compound_loss(Tensor<double>({1, 1, 2, 2}, -0.1), ok), DomainError);
  EXPECT_THROW(compound_loss(Tensor<double>({1, 1, 2, 2}, std::nan("")), ok), DomainError);
  EXPECT_THROW(compound_loss(Tensor<double>({1, 2, 2, 2}, 0.5), ok), DimensionError);
  LossConfig bad;
  bad.epsilon = 0;
  EXPECT_THROW(compound_loss(ok, ok, bad), ConfigError);
}

// --- region remapping and reconstruction ------------------------------------------

TEST(RegionRemap, DefinitionPerLabel) {
  const auto ch = region_remap(labels_of({0, 1, 2, 4}));
  EXPECT_EQ(ch.wt.data, (std::vector<std::uint8_t>{0, 1, 1, 1}));
  EXPECT_EQ(ch.tc.data, (std::vector<std::uint8_t>{0, 1, 0, 1}));
  EXPECT_EQ(ch.et.data, (std::vector<std::uint8_t>{0, 0, 0, 1}));
  const auto zero = region_remap(labels_of({0, 0, 0}));
  EXPECT_EQ(count_foreground(zero.wt) + count_foreground(zero.tc) + count_foreground(zero.et), 0);
}

TEST(RegionRemap, UnknownLabelsAreListed) {
  try {
    region_remap(labels_of({0, 3, 7, 3, 4}));
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("3"), std::string::npos);
    EXPECT_NE(msg.find("7"), std::string::npos);
  }
}

TEST(Reconstruct, RemapRoundTripIsExhaustivelyTheIdentity) {
  static const std::int32_t alphabet[4] = {0, 1, 2, 4};
  std::int64_t maps = 0;
  for (int k = 1; k <= 8; ++k) {
    const std::int64_t total = std::int64_t{1} << (2 * k);
    for (std::int64_t code = 0; code < total; ++code) {
      std::vector<std::int32_t> v(static_cast<std::size_t>(k));
      for (int i = 0; i < k; ++i) v[static_cast<std::size_t>(i)] = alphabet[(code >> (2 * i)) & 3];
      const auto m = labels_of(v);
      const auto r = reconstruct_labels(region_remap(m));
      ASSERT_EQ(r.labels, m) << "k=" << k << " code=" << code;
      ASSERT_EQ(r.repaired_voxels, 0);
      ++maps;
    }
  }
  EXPECT_EQ(maps, 87380);  // sum of 4^k for k = 1..8
}

TEST(Reconstruct, TruthTableOverChannelCombinations) {
  // (wt, tc, et) -> label after repair by OR-down.
  const int want[8] = {0, 4, 1, 4, 2, 4, 1, 4};
  RegionChannels ch{Mask({1, 1, 8}), Mask({1, 1, 8}), Mask({1, 1, 8})};
  for (int combo = 0; combo < 8; ++combo) {
    ch.wt.data[static_cast<std::size_t>(combo)] = (combo >> 2) & 1;
    ch.tc.data[static_cast<std::size_t>(combo)] = (combo >> 1) & 1;
    ch.et.data[static_cast<std::size_t>(combo)] = combo & 1;
  }
  const auto r = reconstruct_labels(ch);
  for (int combo = 0; combo < 8; ++combo) EXPECT_EQ(r.labels.data[static_cast<std::size_t>(combo)], want[combo]) << combo;
  // Repairs: et without tc (combos 1, 5), anything without wt (1, 2, 3).
  EXPECT_EQ(r.repaired_voxels, 5);
  const auto back = region_remap(r.labels);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_LE(back.et.data[i], back.tc.data[i]);
    EXPECT_LE(back.tc.data[i], back.wt.data[i]);
  }
}

TEST(Reconstruct, OutputRegionsAreAlwaysNested) {
  std::mt19937_64 rng(7);
  std::bernoulli_distribution coin(0.4);
  for (int t = 0; t < 200; ++t) {
    const Extents e{2, 3, 3};
    RegionChannels ch{Mask(e), Mask(e), Mask(e)};
    for (Mask* m : {&ch.wt, &ch.tc, &ch.et})
      for (auto& v : m->data) v = coin(rng);
    ReconstructOptions opts;
    opts.et_min_volume = t % 3 == 0 ? 4 : 0;
    const auto back = region_remap(reconstruct_labels(ch, opts).labels);
    for (std::size_t i = 0; i < back.wt.size(); ++i) {
      ASSERT_LE(back.et.data[i], back.tc.data[i]);
      ASSERT_LE(back.tc.data[i], back.wt.data[i]);
      ASSERT_GE(back.wt.data[i], ch.wt.data[i]);
    }
  }
}

TEST(Reconstruct, SmallEnhancingRegionBecomesNecroticCore) {
  auto m = labels_of({2, 2, 1, 4, 4, 4, 0, 0});
  ReconstructOptions opts;
  opts.et_min_volume = 50;
  const auto r = reconstruct_labels(region_remap(m), opts);
  EXPECT_TRUE(r.et_suppressed);
  EXPECT_DOUBLE_EQ(r.et_volume, 3);
  EXPECT_EQ(r.labels.data, (std::vector<std::int32_t>{2, 2, 1, 1, 1, 1, 0, 0}));

  opts.et_min_volume = 3;  // not strictly below
  EXPECT_FALSE(reconstruct_labels(region_remap(m), opts).et_suppressed);
}

TEST(Reconstruct, VolumeInCubicMillimetres) {
  const auto ch = region_remap(labels_of({4, 4, 1}));
  ReconstructOptions opts;
  opts.unit = VolumeUnit::mm3;
  opts.spacing = {2.0, 1.5, 1.0};
  opts.et_min_volume = 6.5;
  const auto r = reconstruct_labels(ch, opts);
  EXPECT_DOUBLE_EQ(r.et_volume, 6.0);
  EXPECT_TRUE(r.et_suppressed);
  opts.et_min_volume = 6.0;
  EXPECT_FALSE(reconstruct_labels(ch, opts).et_suppressed);
}

TEST(Reconstruct, BinarizationHappensAtHalf) {
  Tensor<double> probs({1, 3, 1, 1, 4});
  const double wt[4] = {0.49, 0.5, 0.9, 0.2}, tc[4] = {0.1, 0.1, 0.7, 0.6}, et[4] = {0, 0, 0.51, 0.2};
  for (std::size_t i = 0; i < 4; ++i) {
    probs[i] = wt[i];
    probs[4 + i] = tc[i];
    probs[8 + i] = et[i];
  }
  const auto r = reconstruct_labels(binarize_regions(probs));
  EXPECT_EQ(r.labels.data, (std::vector<std::int32_t>{0, 2, 4, 1}));
  const auto ch = region_remap(r.labels);
  EXPECT_EQ(regions_to_tensor<double>(ch).shape(), (Shape{1, 3, 1, 1, 4}));
  EXPECT_THROW(binarize_regions(Tensor<double>({1, 2, 1, 1, 4})), DimensionError);
}

}  // namespace
}  // namespace crossdim
