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

#include <algorithm>
#include <map>
#include <set>

#include "fluxmem/oracle.hpp"
#include "fluxmem/sdc.hpp"

namespace fluxmem {
namespace {

RetainedToken tok(std::uint32_t r, std::uint32_t c, std::vector<float> f, std::uint32_t w = 1) {
  return {std::move(f), Origin{0, r, c}, w};
}

TEST(DisjointSets, UnitesBySize) {
  DisjointSets s(6);
  EXPECT_TRUE(s.unite(0, 1));
  EXPECT_TRUE(s.unite(2, 1));
  EXPECT_FALSE(s.unite(0, 2));
  EXPECT_EQ(s.component_size(2), 3u);
  EXPECT_EQ(s.component_size(5), 1u);
  EXPECT_EQ(s.find(0), s.find(2));
  EXPECT_NE(s.find(0), s.find(3));
}

TEST(NeighborPairs, DistantTokensHaveNoPairs) {
  FrameEntry e{0, {tok(0, 0, {1, 0}), tok(5, 5, {1, 0})}};
  EXPECT_TRUE(neighbor_pairs(e).empty());
  const auto r = sdc_consolidate(e);
  EXPECT_TRUE(r.report.degenerate);
  ASSERT_EQ(r.anchors.size(), 2u);
  EXPECT_EQ(r.anchors.tokens[0].feature, e.tokens[0].feature);
  EXPECT_EQ(r.anchors.tokens[1].weight, 1u);
}

TEST(NeighborPairs, FullBlockHasTwentyPairs) {
  FrameEntry e{0, {}};
  for (std::uint32_t r = 0; r < 3; ++r) {
    for (std::uint32_t c = 0; c < 3; ++c) e.tokens.push_back(tok(r, c, {float(r), float(c) + 1}));
  }
  const auto pairs = neighbor_pairs(e);
  EXPECT_EQ(pairs.size(), 20u);
  std::size_t rook = 0;
  for (const auto& p : pairs) {
    const auto& a = e.tokens[p.a].origin;
    const auto& b = e.tokens[p.b].origin;
    EXPECT_LT(p.a, p.b);
    rook += a.row == b.row || a.col == b.col;
  }
  EXPECT_EQ(rook, 12u);
}

TEST(NeighborPairs, IdenticalAdjacentFeaturesHaveZeroDistance) {
  FrameEntry e{0, {tok(2, 3, {0.5f, -1}), tok(3, 4, {0.5f, -1})}};
  const auto pairs = neighbor_pairs(e);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].distance, 0.0);
}

TEST(Sdc, IdenticalBlockCollapsesToOneAnchor) {
  FrameEntry e{7, {tok(0, 0, {1, 2, 3}), tok(0, 1, {1, 2, 3}), tok(1, 0, {1, 2, 3}), tok(1, 1, {1, 2, 3})}};
  const auto r = sdc_consolidate(e);
  ASSERT_EQ(r.anchors.size(), 1u);
  EXPECT_EQ(r.anchors.tokens[0].feature, (std::vector<float>{1, 2, 3}));
  EXPECT_EQ(r.anchors.tokens[0].weight, 4u);
  EXPECT_EQ(r.anchors.tokens[0].origin, (Origin{0, 0, 0}));
  EXPECT_EQ(r.anchors.frame_index, 7u);
  EXPECT_TRUE(r.report.degenerate);
}

TEST(Sdc, MatchesFrozenComponents) {
  // Python union-find over Otsu-thresholded 8-adjacency edges.
  FrameEntry e{0, {tok(0, 0, {1, 0}), tok(0, 1, {1, 0.1f}), tok(0, 3, {0, 1}), tok(1, 0, {0.9f, 0.05f}),
                   tok(1, 2, {0.1f, 1}), tok(1, 3, {0, 1.2f}), tok(2, 1, {-1, 0.2f}), tok(2, 2, {1, 1}),
                   tok(2, 3, {0.05f, 1})}};
  const auto r = sdc_consolidate(e);
  EXPECT_EQ(r.pair_count, 15u);
  EXPECT_NEAR(r.report.threshold, 0.54743670841662728, 1e-6);
  ASSERT_EQ(r.anchors.size(), 3u);
  EXPECT_EQ(r.component, (std::vector<std::uint32_t>{0, 0, 1, 0, 1, 1, 2, 1, 1}));
  EXPECT_EQ(r.anchors.tokens[0].weight, 3u);
  EXPECT_NEAR(r.anchors.tokens[0].feature[0], 0.9666666666666667, 1e-6);
  EXPECT_NEAR(r.anchors.tokens[0].feature[1], 0.05, 1e-6);
  EXPECT_EQ(r.anchors.tokens[1].origin, (Origin{0, 0, 3}));
  EXPECT_EQ(r.anchors.tokens[1].weight, 5u);
  EXPECT_NEAR(r.anchors.tokens[1].feature[0], 0.23, 1e-6);
  EXPECT_NEAR(r.anchors.tokens[1].feature[1], 1.04, 1e-6);
  EXPECT_EQ(r.anchors.tokens[2].feature, (std::vector<float>{-1, 0.2f}));
}

TEST(Sdc, FixedThresholdLinksAtEquality) {
  FrameEntry e{0, {tok(0, 0, {1, 0}), tok(0, 1, {0, 1})}};
  EXPECT_EQ(sdc_consolidate_fixed(e, 1.0).anchors.size(), 1u);
  EXPECT_EQ(sdc_consolidate_fixed(e, 0.999).anchors.size(), 2u);
  EXPECT_TRUE(sdc_consolidate(FrameEntry{}).anchors.empty());
}

TEST(Sdc, PropertyMatchesBfsOracle) {
  Xoshiro256 rng(51);
  for (int trial = 0; trial < 60; ++trial) {
    const auto h = static_cast<std::uint32_t>(1 + rng.below(10));
    const auto w = static_cast<std::uint32_t>(1 + rng.below(10));
    const auto e = oracle::random_retained_set(rng, h, w, 12);
    const auto fast = sdc_consolidate(e);
    const auto slow = oracle::sdc_components(e);
    ASSERT_EQ(fast.anchors.size(), slow.means.size()) << trial;
    EXPECT_EQ(fast.component, slow.label) << trial;
    for (std::size_t a = 0; a < slow.means.size(); ++a) {
      for (std::size_t k = 0; k < 12; ++k) {
        EXPECT_NEAR(fast.anchors.tokens[a].feature[k], slow.means[a][k], 1e-6 * std::abs(slow.means[a][k]) + 1e-7);
      }
    }
  }
}

TEST(Sdc, PropertyMassConservationAndBound) {
  Xoshiro256 rng(52);
  for (int trial = 0; trial < 60; ++trial) {
    auto e = oracle::random_retained_set(rng, 9, 9, 8);
    for (auto& t : e.tokens) t.weight = static_cast<std::uint32_t>(1 + rng.below(4));
    const auto theta = 2.0 * rng.uniform();
    for (const auto& r : {sdc_consolidate(e), sdc_consolidate_fixed(e, theta)}) {
      EXPECT_EQ(r.anchors.total_weight(), e.total_weight());
      EXPECT_LE(r.anchors.size(), e.size());
      EXPECT_TRUE(std::is_sorted(r.anchors.tokens.begin(), r.anchors.tokens.end(),
                                 [](const auto& a, const auto& b) { return a.origin < b.origin; }));
    }
    // Equality iff no pair is linked.
    const auto pairs = neighbor_pairs(e);
    const bool any_link = std::any_of(pairs.begin(), pairs.end(), [&](const auto& p) { return p.distance <= theta; });
    EXPECT_EQ(sdc_consolidate_fixed(e, theta).anchors.size() == e.size(), !any_link);
  }
}

TEST(Sdc, PropertyEdgeOrderDoesNotMatter) {
  Xoshiro256 rng(53);
  for (int trial = 0; trial < 30; ++trial) {
    const auto e = oracle::random_retained_set(rng, 8, 8, 8);
    auto pairs = neighbor_pairs(e);
    const double theta = 0.5;
    const auto link = [theta](double d) { return d <= theta; };
    const auto base = detail::consolidate(e, pairs, link);
    for (std::size_t i = pairs.size(); i > 1; --i) std::swap(pairs[i - 1], pairs[rng.below(i)]);
    const auto shuffled = detail::consolidate(e, pairs, link);
    EXPECT_EQ(shuffled.component, base.component);
    EXPECT_EQ(shuffled.anchors.tokens, base.anchors.tokens);
  }
}

}  // namespace
}  // namespace fluxmem
