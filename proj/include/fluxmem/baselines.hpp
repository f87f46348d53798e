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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fluxmem/random.hpp"
#include "fluxmem/sdc.hpp"
#include "fluxmem/tas.hpp"

namespace fluxmem {

// Reduction policies that can stand in for adaptive TAS/SDC.
//
//   fluxmem          adaptive TAS at short->mid, adaptive SDC at mid->long
//   fifo             keep every token; loss happens only through tier eviction
//   uniform          evenly strided per-frame keep set of the target size
//   random           seeded uniform sample of the target size per frame
//   fixed_threshold  TAS/SDC rules with constant thresholds instead of Otsu
//
// Budgets are per frame: target = round((1 - ratio) * H * W).
enum class PolicyKind { fluxmem, fifo, uniform, random, fixed_threshold };

inline std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::fluxmem: return "fluxmem";
    case PolicyKind::fifo: return "fifo";
    case PolicyKind::uniform: return "uniform";
    case PolicyKind::random: return "random";
    case PolicyKind::fixed_threshold: return "fixed_threshold";
  }
  return "unknown";
}

inline PolicyKind parse_policy_kind(std::string_view name) {
  for (auto k : {PolicyKind::fluxmem, PolicyKind::fifo, PolicyKind::uniform, PolicyKind::random,
                 PolicyKind::fixed_threshold}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown policy '" + std::string(name) + "'");
}

struct Policy {
  PolicyKind kind = PolicyKind::fluxmem;
  double ratio = 0.0;  // drop ratio, uniform and random only
  double theta_backward = 0.0;
  double theta_forward = 0.0;
  double theta_sdc = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(ratio >= 0.0 && ratio <= 1.0)) throw std::invalid_argument("policy ratio must be in [0, 1]");
    for (double t : {theta_backward, theta_forward, theta_sdc}) {
      if (!(t >= 0.0 && t <= 2.0)) {
        throw std::invalid_argument("fixed thresholds must be in [0, 2]");
      }
    }
  }

  bool needs_scores() const noexcept {
    return kind == PolicyKind::fluxmem || kind == PolicyKind::fixed_threshold;
  }
};

inline std::uint32_t target_keep_count(std::uint32_t n, double ratio) {
  return static_cast<std::uint32_t>(std::llround((1.0 - ratio) * n));
}

// Keeps index i exactly when floor(i * K / N) steps up at i (i = 0 included),
// which is (i * K) mod N < K. Yields exactly K evenly strided indices.
inline KeepMask uniform_keep_mask(std::uint32_t n, std::uint32_t keep) {
  KeepMask mask(n, 0);
  for (std::uint64_t i = 0; i < n; ++i) mask[i] = (i * keep) % n < keep;
  return mask;
}

inline KeepMask random_keep_mask(std::uint32_t n, std::uint32_t keep, std::uint64_t seed,
                                 std::uint64_t frame_index) {
  Xoshiro256 rng(mix_seed(seed, frame_index));
  KeepMask mask(n, 0);
  for (auto i : sample_indices(rng, n, keep)) mask[i] = 1;
  return mask;
}

// Short->mid reduction of one evicted frame.
inline FrameEntry apply_policy(const Policy& policy, const TokenGrid& frame, const ScoreField& scores,
                               const OtsuOptions& options = {}) {
  const auto n = static_cast<std::uint32_t>(frame.token_count());
  switch (policy.kind) {
    case PolicyKind::fluxmem:
      return tas_select(frame, scores, options).entry;
    case PolicyKind::fifo:
      return entry_from_grid(frame);
    case PolicyKind::uniform:
      return entry_from_mask(frame, uniform_keep_mask(n, target_keep_count(n, policy.ratio)));
    case PolicyKind::random:
      return entry_from_mask(frame, random_keep_mask(n, target_keep_count(n, policy.ratio),
                                                     policy.seed, frame.frame_index()));
    case PolicyKind::fixed_threshold:
      detail::check_scores_match(frame, scores, "apply_policy");
      return entry_from_mask(frame,
                             survivor_mask(scores, policy.theta_backward, policy.theta_forward));
  }
  throw std::logic_error("apply_policy: unhandled policy kind");
}

struct Consolidation {
  FrameEntry anchors;
  std::size_t pair_count = 0;  // distance evaluations spent
};

// Mid->long consolidation of one evicted entry. Ratio-based baselines pass
// entries through unmerged.
inline Consolidation consolidate_with_policy(const Policy& policy, const FrameEntry& entry,
                                             const OtsuOptions& options = {}) {
  switch (policy.kind) {
    case PolicyKind::fluxmem: {
      auto r = sdc_consolidate(entry, options);
      return {std::move(r.anchors), r.pair_count};
    }
    case PolicyKind::fixed_threshold: {
      auto r = sdc_consolidate_fixed(entry, policy.theta_sdc);
      return {std::move(r.anchors), r.pair_count};
    }
    default:
      return {entry, 0};
  }
}

}  // namespace fluxmem
