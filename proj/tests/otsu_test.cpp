// Copyright 2026 The fluxmem Authors.
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

#include <vector>

#include "fluxmem/oracle.hpp"
#include "fluxmem/otsu.hpp"
#include "fluxmem/random.hpp"

namespace fluxmem {
namespace {

std::vector<double> random_samples(Xoshiro256& rng) {
  const auto n = static_cast<std::size_t>(8 + rng.below(505));
  const bool bimodal = rng.below(2) == 1;
  std::vector<double> s(n);
  for (auto& x : s) x = 0.1 * rng.normal() + (bimodal && rng.below(2) ? 0.7 : 0.0);
  return s;
}

TEST(Otsu, TwoPointMassesSplitEvenly) {
  const std::vector<double> s = {0, 0, 0, 1, 1, 1};
  const auto r = otsu_threshold(s, 256);
  EXPECT_FALSE(r.degenerate);
  EXPECT_GT(r.threshold, 0.0);
  EXPECT_LE(r.threshold, 1.0);
  EXPECT_DOUBLE_EQ(r.omega1, 0.5);
  EXPECT_DOUBLE_EQ(r.omega2, 0.5);
  EXPECT_DOUBLE_EQ(r.inter_class_variance, 0.25);
  EXPECT_DOUBLE_EQ(r.bin_width, 1.0 / 256);
}

TEST(Otsu, MatchesFrozenExhaustiveValues) {
  // Python exhaustive search over sample-gap midpoints.
  const std::vector<double> a = {0.1, 0.2, 0.25, 0.7, 0.8, 0.95, 1.0};
  const auto ra = otsu_threshold(a);
  EXPECT_NEAR(ra.threshold, 0.47499999999999998, 1e-15);
  EXPECT_NEAR(ra.inter_class_variance, 0.11296343537414966, 1e-15);
  const std::vector<double> b = {0.05, 0.06, 0.4, 0.41, 0.42, 0.9, 0.93, 0.97, 0.99, 1.3};
  const auto rb = otsu_threshold(b);
  EXPECT_NEAR(rb.threshold, 0.66, 1e-15);
  EXPECT_NEAR(rb.inter_class_variance, 0.140625, 1e-15);
}

TEST(Otsu, ConstantInputIsDegenerate) {
  const std::vector<double> s(100, 0.3);
  const auto r = otsu_threshold(s);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.threshold, 0.3);
  const std::vector<double> narrow = {0.5, 0.5 + 1e-7, 0.5 + 5e-7};
  EXPECT_TRUE(otsu_threshold(narrow).degenerate);
  const std::vector<double> one = {4.0};
  EXPECT_TRUE(otsu_threshold(one).degenerate);
}

TEST(Otsu, RejectsBadInput) {
  EXPECT_THROW(otsu_threshold(std::vector<double>{}), std::invalid_argument);
  EXPECT_THROW(otsu_threshold(std::vector<double>{1.0, std::nan("")}), std::invalid_argument);
  EXPECT_THROW(otsu_threshold(std::vector<double>{1.0, 2.0}, 1u), std::invalid_argument);
}

TEST(Otsu, BimodalClustersMatchExactSweep) {
  Xoshiro256 rng(5);
  std::vector<double> s;
  for (int i = 0; i < 200; ++i) s.push_back(0.1 + 0.03 * rng.normal());
  for (int i = 0; i < 200; ++i) s.push_back(0.9 + 0.03 * rng.normal());
  const auto fast = otsu_threshold(s);
  const auto exact = oracle::exact_otsu(s);
  EXPECT_LE(std::abs(fast.threshold - exact.threshold), fast.bin_width);
  EXPECT_GE(oracle::split_variance(s, fast.threshold), 0.999 * exact.inter_class_variance);
  EXPECT_GT(fast.threshold, 0.3);
  EXPECT_LT(fast.threshold, 0.7);
}

TEST(Otsu, TiesResolveToSmallerThreshold) {
  // Splits {0 | 1 2} and {0 1 | 2} have equal variance 2/9.
  const std::vector<double> s = {0, 1, 2};
  const auto r = otsu_threshold(s);
  EXPECT_DOUBLE_EQ(r.threshold, 0.5);
  EXPECT_DOUBLE_EQ(oracle::exact_otsu(s).threshold, 0.5);
}

TEST(Otsu, PropertyOracleCloseness) {
  Xoshiro256 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = random_samples(rng);
    const auto bins = static_cast<std::uint32_t>(2 + rng.below(500));
    const auto fast = otsu_threshold(s, bins);
    const auto exact = oracle::exact_otsu(s);
    ASSERT_FALSE(fast.degenerate);
    EXPECT_LE(std::abs(fast.threshold - exact.threshold), fast.bin_width) << trial;
    EXPECT_GE(oracle::split_variance(s, fast.threshold), (1.0 - 1e-3) * exact.inter_class_variance);
  }
}

TEST(Otsu, PropertyReportIdentity) {
  Xoshiro256 rng(22);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = random_samples(rng);
    const auto r = otsu_threshold(s);
    const double d = r.mu1 - r.mu2;
    EXPECT_NEAR(r.inter_class_variance, r.omega1 * r.omega2 * d * d, 1e-9);
    EXPECT_NEAR(r.omega1 + r.omega2, 1.0, 1e-12);
    std::size_t below = 0;
    for (double x : s) below += x <= r.threshold;
    EXPECT_DOUBLE_EQ(r.omega1, static_cast<double>(below) / s.size());
  }
}

TEST(Otsu, PropertyShiftEquivariance) {
  Xoshiro256 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    auto s = random_samples(rng);
    const double c = 4.0 * rng.uniform() - 2.0;
    const auto base = otsu_threshold(s);
    for (auto& x : s) x += c;
    const auto shifted = otsu_threshold(s);
    EXPECT_NEAR(shifted.threshold, base.threshold + c, base.bin_width) << trial;
  }
}

TEST(Otsu, PropertyDeterministicAndOrderFree) {
  Xoshiro256 rng(24);
  for (int trial = 0; trial < 50; ++trial) {
    auto s = random_samples(rng);
    const auto a = otsu_threshold(s);
    EXPECT_EQ(otsu_threshold(s), a);
    std::reverse(s.begin(), s.end());
    EXPECT_EQ(otsu_threshold(s).threshold, a.threshold);
  }
}

TEST(Otsu, PropertyDegenerateMeansNarrowRange) {
  Xoshiro256 rng(25);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(1 + rng.below(40));
    const double base = rng.uniform();
    const double spread = trial % 2 ? 1e-8 : 1e-3;
    for (auto& x : s) x = base + spread * rng.uniform();
    const auto r = otsu_threshold(s);
    const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
    EXPECT_EQ(r.degenerate, *hi - *lo < 1e-6);
  }
}

}  // namespace
}  // namespace fluxmem
