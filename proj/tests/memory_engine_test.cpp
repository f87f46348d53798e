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

#include <set>

#include "fluxmem/memory_engine.hpp"
#include "fluxmem/oracle.hpp"
#include "fluxmem/sdc.hpp"
#include "fluxmem/synth_stream.hpp"
#include "test_util.hpp"

namespace fluxmem {
namespace {

MemoryConfig small_config(std::uint32_t cs, std::uint64_t cm, std::uint64_t cl) {
  MemoryConfig c;
  c.short_capacity = cs;
  c.mid_capacity = cm;
  c.long_capacity = cl;
  return c;
}

std::vector<TokenGrid> scene(SceneKind kind, std::uint32_t h, std::uint32_t w, std::uint32_t d,
                             std::uint64_t frames, std::uint64_t seed, double noise = 0.0) {
  SceneSpec s;
  s.kind = kind;
  s.height = h;
  s.width = w;
  s.dim = d;
  s.num_frames = frames;
  s.seed = seed;
  s.noise_sigma = noise;
  s.blob_size = std::min<std::uint32_t>(2, std::min(h, w));
  s.cut_period = 5;
  return generate_grids(s);
}

TEST(MemoryConfig, Validates) {
  EXPECT_THROW(MemoryEngine(small_config(1, 4, 4)), std::invalid_argument);
  EXPECT_THROW(MemoryEngine(small_config(2, 0, 4)), std::invalid_argument);
  MemoryConfig c;
  c.gamma = 1.5;
  EXPECT_THROW(MemoryEngine{c}, std::invalid_argument);
  EXPECT_EQ(parse_capacity_unit("tokens"), CapacityUnit::tokens);
  EXPECT_THROW(parse_capacity_unit("bytes"), std::invalid_argument);
}

TEST(MemoryEngine, EmptyStats) {
  MemoryEngine engine;
  const auto s = engine.stats();
  EXPECT_EQ(s.held_tokens, 0u);
  EXPECT_EQ(s.drop_ratio, 0.0);
  EXPECT_THROW(engine.handle_query(0), std::logic_error);
}

TEST(MemoryEngine, ShortCapacityTwoExample) {
  MemoryEngine engine(small_config(2, 8, 8));
  const auto frames = scene(SceneKind::noise, 3, 4, 8, 3, 1);
  for (const auto& f : frames) engine.ingest(f);
  const auto short_tier = engine.short_tier();
  ASSERT_EQ(short_tier.size(), 2u);
  EXPECT_EQ(short_tier[0]->frame_index(), 1u);
  EXPECT_EQ(short_tier[1]->frame_index(), 2u);
  ASSERT_EQ(engine.mid_tier().size(), 1u);
  EXPECT_EQ(engine.mid_tier()[0], entry_from_grid(frames[0]));

  const auto ctx = engine.handle_query(2);
  ASSERT_EQ(ctx.size(), 36u);
  for (std::size_t i = 0; i < 36; ++i) {
    const auto& t = ctx.tokens[i];
    EXPECT_EQ(t.token.origin.frame_index, i / 12);
    EXPECT_EQ(t.token.origin.row, (i % 12) / 4);
    EXPECT_EQ(t.tier, i < 12 ? Tier::mid_term : Tier::short_term);
    const auto src = frames[i / 12].token(i % 12);
    EXPECT_TRUE(std::equal(src.begin(), src.end(), t.token.feature.begin()));
  }
  EXPECT_EQ(engine.last_activation(), 2u);
}

TEST(MemoryEngine, StaticTenFramesDropEverythingAfterFrameZero) {
  MemoryEngine engine(small_config(2, 4, 100));
  for (const auto& f : scene(SceneKind::static_scene, 4, 4, 16, 10, 3)) engine.ingest(f);
  const auto s = engine.stats();
  // Frames 0..7 left short; 4..7 are in mid, 0..3 in long.
  ASSERT_EQ(engine.mid_tier().size(), 4u);
  for (const auto& e : engine.mid_tier()) EXPECT_TRUE(e.empty()) << e.frame_index;
  ASSERT_EQ(engine.long_tier().size(), 4u);
  for (std::size_t i = 1; i < 4; ++i) EXPECT_TRUE(engine.long_tier()[i].empty());
  EXPECT_EQ(s.tas_input_tokens, 8u * 16);
  EXPECT_EQ(s.tas_kept_tokens, 16u);  // frame 0 only
}

TEST(MemoryEngine, StaticStreamClosedForm) {
  const std::uint32_t cs = 8;
  const auto frames = scene(SceneKind::static_scene, 16, 16, 32, 100, 4);
  MemoryEngine engine(small_config(cs, 64, 1024));
  for (const auto& f : frames) engine.ingest(f);
  const std::uint64_t hw = 256;
  // Frame 0 passed through SDC on its way to long.
  const auto frame0 = sdc_consolidate(entry_from_grid(frames[0])).anchors.size();
  const auto s = engine.stats();
  EXPECT_EQ(s.held_tokens, cs * hw + frame0);
  EXPECT_EQ(s.ingested_tokens, 100 * hw);
  EXPECT_DOUBLE_EQ(s.drop_ratio, 1.0 - static_cast<double>(cs * hw + frame0) / (100.0 * hw));
}

TEST(MemoryEngine, RejectsOutOfOrderAndShapeChanges) {
  MemoryEngine engine;
  EXPECT_THROW(engine.ingest(testing::random_grid(1, 1, 2, 2, 2)), std::invalid_argument);
  engine.ingest(testing::random_grid(1, 0, 2, 2, 2));
  EXPECT_THROW(engine.ingest(testing::random_grid(1, 1, 2, 3, 2)), std::invalid_argument);
  EXPECT_THROW(engine.ingest(testing::random_grid(1, 2, 2, 2, 2)), std::invalid_argument);
  EXPECT_THROW(engine.handle_query(1), std::invalid_argument);
}

TEST(MemoryEngine, NeverFiresWithoutActivation) {
  MemoryConfig c = small_config(4, 8, 8);
  c.gamma = 0.0;
  MemoryEngine engine(c);
  for (const auto& f : scene(SceneKind::noise, 4, 4, 8, 20, 5)) EXPECT_FALSE(engine.ingest(f).trigger.fired);
  EXPECT_EQ(engine.stats().triggers_fired, 0u);
}

TEST(MemoryEngine, PropertyCapacityAndFlattenOrder) {
  Xoshiro256 rng(61);
  for (int trial = 0; trial < 20; ++trial) {
    MemoryConfig c = small_config(static_cast<std::uint32_t>(2 + rng.below(4)), 1 + rng.below(6), 1 + rng.below(6));
    c.unit = trial % 2 ? CapacityUnit::tokens : CapacityUnit::frames;
    if (c.unit == CapacityUnit::tokens) {
      c.mid_capacity *= 20;
      c.long_capacity *= 20;
    }
    MemoryEngine engine(c);
    const auto kind = static_cast<SceneKind>(rng.below(4));
    for (const auto& f : scene(kind, 4, 5, 8, 30, trial, 0.05)) {
      engine.ingest(f);
      const auto s = engine.stats();
      EXPECT_LE(s.short_frames, c.short_capacity);
      if (c.unit == CapacityUnit::frames) {
        EXPECT_LE(s.mid_frames, c.mid_capacity);
        EXPECT_LE(s.long_frames, c.long_capacity);
      } else {
        EXPECT_LE(s.mid_tokens, c.mid_capacity);
        EXPECT_LE(s.long_tokens, c.long_capacity);
      }
      const auto ctx = engine.flatten();
      EXPECT_EQ(ctx.size(), s.held_tokens);
      for (std::size_t i = 1; i < ctx.size(); ++i) {
        EXPECT_LE(ctx.tokens[i - 1].token.origin.frame_index, ctx.tokens[i].token.origin.frame_index);
        EXPECT_LE(ctx.tokens[i - 1].tier, ctx.tokens[i].tier);
      }
    }
  }
}

TEST(MemoryEngine, PropertyPrefixStateIgnoresFuture) {
  Xoshiro256 rng(62);
  for (int trial = 0; trial < 10; ++trial) {
    const auto frames = scene(static_cast<SceneKind>(rng.below(4)), 5, 5, 8, 24, 100 + trial, 0.02);
    const auto t = static_cast<std::size_t>(rng.below(frames.size()));
    const MemoryConfig c = small_config(3, 4, 5);
    const auto run = [&](std::size_t upto, std::size_t snapshot) {
      MemoryEngine engine(c);
      std::string state;
      for (std::size_t i = 0; i < upto; ++i) {
        engine.ingest(frames[i]);
        if (i % 7 == 0) engine.handle_query(i);
        if (i == snapshot) state = engine.serialize();
      }
      return state;
    };
    EXPECT_EQ(run(t + 1, t), run(frames.size(), t)) << trial;
  }
}

TEST(MemoryEngine, PropertyTriggerNestedInGamma) {
  const auto frames = scene(SceneKind::scene_cuts, 6, 6, 16, 40, 7, 0.05);
  std::vector<std::set<std::uint64_t>> fired;
  for (double gamma : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
    MemoryConfig c;
    c.gamma = gamma;
    MemoryEngine engine(c);
    std::set<std::uint64_t> f;
    for (const auto& g : frames) {
      if (engine.ingest(g).trigger.fired) f.insert(g.frame_index());
      if (g.frame_index() == 0) engine.handle_query(0);
    }
    fired.push_back(std::move(f));
  }
  for (std::size_t i = 1; i < fired.size(); ++i) {
    EXPECT_TRUE(std::includes(fired[i - 1].begin(), fired[i - 1].end(), fired[i].begin(), fired[i].end()));
  }
  EXPECT_FALSE(fired.front().empty());
  EXPECT_TRUE(fired.back().empty());
}

TEST(MemoryEngine, TriggerAddsNoDistanceWork) {
  const auto frames = scene(SceneKind::noise, 8, 8, 16, 30, 8);
  std::vector<std::uint64_t> totals;
  for (double gamma : {0.0, 1.0}) {
    MemoryConfig c = small_config(4, 3, 3);
    c.gamma = gamma;
    MemoryEngine engine(c);
    engine.ingest(frames[0]);
    engine.handle_query(0);
    for (std::size_t i = 1; i < frames.size(); ++i) {
      const auto before = distance_evaluations();
      const auto r = engine.ingest(frames[i]);
      EXPECT_EQ(distance_evaluations() - before, r.distance_evaluations);
    }
    totals.push_back(engine.stats().distance_evaluations);
  }
  EXPECT_EQ(totals[0], totals[1]);

  MemoryConfig roomy = small_config(100, 1, 1);
  roomy.gamma = 0.0;
  MemoryEngine engine(roomy);
  engine.ingest(frames[0]);
  engine.handle_query(0);
  for (std::size_t i = 1; i < frames.size(); ++i) {
    const auto before = distance_evaluations();
    engine.ingest(frames[i]);
    EXPECT_EQ(distance_evaluations() - before, neighborhood_pair_count(8, 8));
  }
}

TEST(MemoryEngine, StatsMonotone) {
  MemoryEngine engine(small_config(2, 2, 2));
  MemoryStats prev;
  for (const auto& f : scene(SceneKind::moving_blob, 4, 4, 8, 20, 9)) {
    engine.ingest(f);
    const auto s = engine.stats();
    EXPECT_GE(s.ingested_tokens, prev.ingested_tokens);
    EXPECT_GE(s.tas_input_tokens, prev.tas_input_tokens);
    EXPECT_GE(s.sdc_input_tokens, prev.sdc_input_tokens);
    EXPECT_GE(s.distance_evaluations, prev.distance_evaluations);
    prev = s;
  }
}

}  // namespace
}  // namespace fluxmem
