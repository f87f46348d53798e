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

#pragma once

#include <bit>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fluxmem/baselines.hpp"
#include "fluxmem/otsu.hpp"
#include "fluxmem/scoring.hpp"
#include "fluxmem/token_model.hpp"

namespace fluxmem {

enum class CapacityUnit { frames, tokens };

inline std::string_view to_string(CapacityUnit u) { return u == CapacityUnit::frames ? "frames" : "tokens"; }

inline CapacityUnit parse_capacity_unit(std::string_view s) {
  if (s == "frames") return CapacityUnit::frames;
  if (s == "tokens") return CapacityUnit::tokens;
  throw std::invalid_argument("capacity unit must be 'frames' or 'tokens', got '" + std::string(s) + "'");
}

struct MemoryConfig {
  std::uint32_t short_capacity = 8;   // frames, always
  std::uint64_t mid_capacity = 64;    // in `unit`
  std::uint64_t long_capacity = 1024; // in `unit`
  CapacityUnit unit = CapacityUnit::frames;
  double gamma = 0.5;
  std::uint32_t bins = 256;
  double flat_epsilon = 1e-6;

  OtsuOptions otsu() const noexcept { return {bins, flat_epsilon}; }

  void validate() const {
    // TAS needs the evicted frame's successor to still be in the short tier.
    if (short_capacity < 2) throw std::invalid_argument("short-term capacity must be >= 2");
    if (mid_capacity < 1 || long_capacity < 1) throw std::invalid_argument("capacities must be >= 1");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must be in [0, 1]");
    if (bins < 2) throw std::invalid_argument("bins must be >= 2");
    if (!(flat_epsilon > 0.0)) throw std::invalid_argument("flat_epsilon must be positive");
  }
};

struct TriggerEvent {
  std::uint64_t frame_index = 0;
  double ratio = 0.0;                    // fraction of backward scores above threshold
  std::optional<double> threshold_used;  // absent for the first frame
  bool degenerate = false;
  bool fired = false;
};

enum class EvictionStage { short_to_mid, mid_to_long, long_dropped };

struct EvictionRecord {
  EvictionStage stage;
  std::uint64_t frame_index = 0;
  std::uint64_t tokens_in = 0;
  std::uint64_t tokens_out = 0;
};

// Accumulated wall time per pipeline stage, nanoseconds.
struct StageTimes {
  std::uint64_t scoring_ns = 0;  // backward and forward scores, both at ingest
  std::uint64_t otsu_ns = 0;     // trigger threshold at ingest
  std::uint64_t tas_ns = 0;
  std::uint64_t sdc_ns = 0;

  StageTimes& operator+=(const StageTimes& o) noexcept {
    scoring_ns += o.scoring_ns;
    otsu_ns += o.otsu_ns;
    tas_ns += o.tas_ns;
    sdc_ns += o.sdc_ns;
    return *this;
  }
};

struct IngestResult {
  TriggerEvent trigger;
  std::vector<EvictionRecord> evictions;
  StageTimes times;
  std::uint64_t distance_evaluations = 0;
};

enum class Tier : std::uint8_t { long_term, mid_term, short_term };

struct ContextToken {
  RetainedToken token;
  Tier tier;
};

// Snapshot handed to the language model: long ++ mid ++ short, each tier
// oldest first, row-major within a frame.
struct FlattenedContext {
  std::uint64_t frame_index = 0;
  std::vector<ContextToken> tokens;
  std::size_t size() const noexcept { return tokens.size(); }
};

struct MemoryStats {
  std::uint64_t short_frames = 0, mid_frames = 0, long_frames = 0;
  std::uint64_t short_tokens = 0, mid_tokens = 0, long_tokens = 0;
  std::uint64_t frames_ingested = 0;
  std::uint64_t ingested_tokens = 0;
  std::uint64_t held_tokens = 0;
  std::uint64_t tas_input_tokens = 0, tas_kept_tokens = 0;
  std::uint64_t sdc_input_tokens = 0, sdc_output_tokens = 0;
  std::uint64_t long_dropped_tokens = 0;
  std::uint64_t triggers_fired = 0;
  std::uint64_t queries = 0;
  std::uint64_t distance_evaluations = 0;
  double drop_ratio = 0.0;  // 1 - held / ingested
  StageTimes times;
};

// Streaming three-tier memory. Single writer: one ingest or query at a time.
class MemoryEngine {
 public:
  explicit MemoryEngine(MemoryConfig config = {}, Policy policy = {})
      : config_(config), policy_(policy) {
    config_.validate();
    policy_.validate();
  }

  const MemoryConfig& config() const noexcept { return config_; }
  const Policy& policy() const noexcept { return policy_; }
  std::optional<std::uint64_t> last_activation() const noexcept { return last_activation_; }
  std::optional<std::uint64_t> last_frame_index() const noexcept { return last_index_; }

  IngestResult ingest(TokenGrid grid) {
    validate_incoming(grid);
    using clock = std::chrono::steady_clock;
    IngestResult result;
    const std::uint64_t t = grid.frame_index();
    const auto elapsed = [](clock::time_point since) {
      return static_cast<std::uint64_t>(
          std::chrono::duration_cast<std::chrono::nanoseconds>(clock::now() - since).count());
    };

    // One pass over the window pairs of (previous, current) yields this
    // frame's backward scores, used by the trigger and later by TAS, and the
    // previous frame's forward scores, used when it is evicted.
    ScoreField scores{t, std::nullopt, std::nullopt};
    if (!short_.empty()) {
      const auto t0 = clock::now();
      auto both = adjacent_scores(grid, short_.back().grid);
      scores.backward = std::move(both.backward);
      short_.back().scores.forward = std::move(both.forward);
      result.times.scoring_ns += elapsed(t0);
      result.distance_evaluations += neighborhood_pair_count(grid.height(), grid.width());
    }

    result.trigger.frame_index = t;
    if (scores.backward) {
      const auto t0 = clock::now();
      const auto report = otsu_threshold(scores.backward->values, config_.otsu());
      std::uint64_t above = 0;
      if (!report.degenerate) {
        for (double s : scores.backward->values) above += s > report.threshold;
      }
      result.trigger.threshold_used = report.threshold;
      result.trigger.degenerate = report.degenerate;
      result.trigger.ratio = static_cast<double>(above) / static_cast<double>(grid.token_count());
      result.trigger.fired = last_activation_.has_value() && result.trigger.ratio > config_.gamma;
      result.times.otsu_ns += elapsed(t0);
    }
    if (result.trigger.fired) {
      last_activation_ = t;
      ++triggers_fired_;
    }

    if (!dims_) dims_ = Dims{grid.height(), grid.width(), grid.dim()};
    ingested_tokens_ += grid.token_count();
    ++frames_ingested_;
    last_index_ = t;
    short_.push_back(ShortSlot{std::move(grid), std::move(scores)});

    while (short_.size() > config_.short_capacity) {
      ShortSlot slot = std::move(short_.front());
      short_.pop_front();
      const auto t0 = clock::now();
      FrameEntry entry = apply_policy(policy_, slot.grid, slot.scores, config_.otsu());
      result.times.tas_ns += elapsed(t0);
      tas_input_tokens_ += slot.grid.token_count();
      tas_kept_tokens_ += entry.size();
      result.evictions.push_back({EvictionStage::short_to_mid, slot.grid.frame_index(),
                                  slot.grid.token_count(), entry.size()});
      mid_tokens_ += entry.size();
      mid_.push_back(std::move(entry));
    }

    while (!mid_.empty() && over_capacity(mid_.size(), mid_tokens_, config_.mid_capacity)) {
      FrameEntry entry = std::move(mid_.front());
      mid_.pop_front();
      mid_tokens_ -= entry.size();
      const auto t0 = clock::now();
      Consolidation merged = consolidate_with_policy(policy_, entry, config_.otsu());
      FrameEntry anchors = std::move(merged.anchors);
      result.distance_evaluations += merged.pair_count;
      result.times.sdc_ns += elapsed(t0);
      sdc_input_tokens_ += entry.size();
      sdc_output_tokens_ += anchors.size();
      result.evictions.push_back(
          {EvictionStage::mid_to_long, entry.frame_index, entry.size(), anchors.size()});
      long_tokens_ += anchors.size();
      long_.push_back(std::move(anchors));
    }

    while (!long_.empty() && over_capacity(long_.size(), long_tokens_, config_.long_capacity)) {
      const FrameEntry& oldest = long_.front();
      result.evictions.push_back({EvictionStage::long_dropped, oldest.frame_index, oldest.size(), 0});
      long_tokens_ -= oldest.size();
      long_dropped_tokens_ += oldest.size();
      long_.pop_front();
    }

    times_ += result.times;
    distance_evals_ += result.distance_evaluations;
    return result;
  }

  // Answers a query raised at `frame_index` (at most the newest ingested
  // frame) and records it as the latest activation.
  FlattenedContext handle_query(std::uint64_t frame_index) {
    if (!last_index_) throw std::logic_error("handle_query: no frame has been ingested");
    if (frame_index > *last_index_) {
      throw std::invalid_argument("handle_query: frame " + std::to_string(frame_index) +
                                  " has not been ingested yet");
    }
    last_activation_ = frame_index;
    ++queries_;
    return flatten();
  }

  FlattenedContext flatten() const {
    FlattenedContext ctx;
    ctx.frame_index = last_index_.value_or(0);
    ctx.tokens.reserve(held_tokens());
    for (const auto& e : long_) {
      for (const auto& tok : e.tokens) ctx.tokens.push_back({tok, Tier::long_term});
    }
    for (const auto& e : mid_) {
      for (const auto& tok : e.tokens) ctx.tokens.push_back({tok, Tier::mid_term});
    }
    for (const auto& s : short_) {
      for (std::uint32_t h = 0; h < s.grid.height(); ++h) {
        for (std::uint32_t w = 0; w < s.grid.width(); ++w) {
          ctx.tokens.push_back({retain(s.grid, h, w), Tier::short_term});
        }
      }
    }
    return ctx;
  }

  MemoryStats stats() const {
    MemoryStats s;
    s.short_frames = short_.size();
    s.mid_frames = mid_.size();
    s.long_frames = long_.size();
    for (const auto& slot : short_) s.short_tokens += slot.grid.token_count();
    s.mid_tokens = mid_tokens_;
    s.long_tokens = long_tokens_;
    s.frames_ingested = frames_ingested_;
    s.ingested_tokens = ingested_tokens_;
    s.held_tokens = s.short_tokens + s.mid_tokens + s.long_tokens;
    s.tas_input_tokens = tas_input_tokens_;
    s.tas_kept_tokens = tas_kept_tokens_;
    s.sdc_input_tokens = sdc_input_tokens_;
    s.sdc_output_tokens = sdc_output_tokens_;
    s.long_dropped_tokens = long_dropped_tokens_;
    s.triggers_fired = triggers_fired_;
    s.queries = queries_;
    s.distance_evaluations = distance_evals_;
    s.drop_ratio = ingested_tokens_ == 0
                       ? 0.0
                       : 1.0 - static_cast<double>(s.held_tokens) / static_cast<double>(ingested_tokens_);
    s.times = times_;
    return s;
  }

  const std::deque<FrameEntry>& mid_tier() const noexcept { return mid_; }
  const std::deque<FrameEntry>& long_tier() const noexcept { return long_; }
  std::vector<const TokenGrid*> short_tier() const {
    std::vector<const TokenGrid*> out;
    for (const auto& s : short_) out.push_back(&s.grid);
    return out;
  }

  // Deterministic byte image of everything that influences future behaviour
  // (timing excluded).
  std::string serialize() const {
    Bytes b;
    b.u64(config_.short_capacity).u64(config_.mid_capacity).u64(config_.long_capacity);
    b.u64(static_cast<std::uint64_t>(config_.unit)).f64(config_.gamma).u64(config_.bins).f64(config_.flat_epsilon);
    b.u64(static_cast<std::uint64_t>(policy_.kind)).f64(policy_.ratio).f64(policy_.theta_backward);
    b.f64(policy_.theta_forward).f64(policy_.theta_sdc).u64(policy_.seed);
    b.opt(last_index_).opt(last_activation_);
    b.u64(frames_ingested_).u64(ingested_tokens_).u64(tas_input_tokens_).u64(tas_kept_tokens_);
    b.u64(sdc_input_tokens_).u64(sdc_output_tokens_).u64(long_dropped_tokens_);
    b.u64(triggers_fired_).u64(queries_).u64(distance_evals_);
    b.u64(short_.size());
    for (const auto& s : short_) {
      b.u64(s.grid.frame_index()).u64(s.grid.height()).u64(s.grid.width()).u64(s.grid.dim());
      for (float v : s.grid.data()) b.f32(v);
      b.scores(s.scores.backward).scores(s.scores.forward);
    }
    for (const auto* tier : {&mid_, &long_}) {
      b.u64(tier->size());
      for (const auto& e : *tier) {
        b.u64(e.frame_index).u64(e.tokens.size());
        for (const auto& tok : e.tokens) {
          b.u64(tok.origin.frame_index).u64(tok.origin.row).u64(tok.origin.col).u64(tok.weight);
          b.u64(tok.feature.size());
          for (float v : tok.feature) b.f32(v);
        }
      }
    }
    return std::move(b.out);
  }

 private:
  struct ShortSlot {
    TokenGrid grid;
    ScoreField scores;
  };
  struct Dims {
    std::uint32_t height, width, dim;
  };

  struct Bytes {
    std::string out;
    Bytes& u64(std::uint64_t v) {
      for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
      return *this;
    }
    Bytes& f64(double v) { return u64(std::bit_cast<std::uint64_t>(v)); }
    Bytes& f32(float v) { return u64(std::bit_cast<std::uint32_t>(v)); }
    Bytes& opt(const std::optional<std::uint64_t>& v) {
      u64(v.has_value());
      return u64(v.value_or(0));
    }
    Bytes& scores(const std::optional<ScoreGrid>& g) {
      u64(g.has_value());
      if (g) {
        u64(g->values.size());
        for (double v : g->values) f64(v);
      }
      return *this;
    }
  };

  bool over_capacity(std::size_t frames, std::uint64_t tokens, std::uint64_t capacity) const noexcept {
    return config_.unit == CapacityUnit::frames ? frames > capacity : tokens > capacity;
  }

  std::uint64_t held_tokens() const noexcept {
    std::uint64_t n = mid_tokens_ + long_tokens_;
    for (const auto& s : short_) n += s.grid.token_count();
    return n;
  }

  void validate_incoming(const TokenGrid& grid) const {
    const std::uint64_t expected = last_index_ ? *last_index_ + 1 : 0;
    if (grid.frame_index() != expected) {
      throw std::invalid_argument("ingest: expected frame_index " + std::to_string(expected) +
                                  ", got " + std::to_string(grid.frame_index()));
    }
    if (dims_ && (grid.height() != dims_->height || grid.width() != dims_->width ||
                  grid.dim() != dims_->dim)) {
      throw std::invalid_argument("ingest: frame " + std::to_string(grid.frame_index()) +
                                  " changes the stream's dimensions");
    }
  }

  MemoryConfig config_;
  Policy policy_;
  std::deque<ShortSlot> short_;
  std::deque<FrameEntry> mid_;
  std::deque<FrameEntry> long_;
  std::optional<Dims> dims_;
  std::optional<std::uint64_t> last_index_;
  std::optional<std::uint64_t> last_activation_;
  std::uint64_t mid_tokens_ = 0;
  std::uint64_t long_tokens_ = 0;
  std::uint64_t frames_ingested_ = 0;
  std::uint64_t ingested_tokens_ = 0;
  std::uint64_t tas_input_tokens_ = 0;
  std::uint64_t tas_kept_tokens_ = 0;
  std::uint64_t sdc_input_tokens_ = 0;
  std::uint64_t sdc_output_tokens_ = 0;
  std::uint64_t long_dropped_tokens_ = 0;
  std::uint64_t triggers_fired_ = 0;
  std::uint64_t queries_ = 0;
  std::uint64_t distance_evals_ = 0;
  StageTimes times_;
};

}  // namespace fluxmem
