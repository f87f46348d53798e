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

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

#include "fluxmem/otsu.hpp"
#include "fluxmem/scoring.hpp"
#include "fluxmem/token_model.hpp"

namespace fluxmem {

// Temporal adjacency selection: keep a token when it is novel against either
// neighbouring frame, i.e. s- > theta- or s+ > theta+.

struct TasResult {
  FrameEntry entry;
  std::optional<ThresholdReport> backward;  // absent when the frame has no predecessor
  std::optional<ThresholdReport> forward;   // absent when the frame has no successor
};

// Survivor mask for explicit per-side thresholds. A side whose threshold is
// nullopt keeps nothing. Without backward scores every token survives.
inline KeepMask survivor_mask(const ScoreField& scores, std::optional<double> backward_threshold,
                              std::optional<double> forward_threshold) {
  if (!scores.backward && !scores.forward) {
    throw std::invalid_argument("survivor_mask: frame " + std::to_string(scores.frame_index) +
                                " has neither backward nor forward scores");
  }
  if (!scores.backward) return KeepMask(scores.forward->size(), 1);

  const auto& b = scores.backward->values;
  KeepMask keep(b.size(), 0);
  if (backward_threshold) {
    for (std::size_t i = 0; i < b.size(); ++i) keep[i] = b[i] > *backward_threshold;
  }
  if (scores.forward && forward_threshold) {
    const auto& f = scores.forward->values;
    if (f.size() != b.size()) throw std::invalid_argument("survivor_mask: score grids differ in size");
    for (std::size_t i = 0; i < f.size(); ++i) keep[i] = keep[i] || f[i] > *forward_threshold;
  }
  return keep;
}

namespace detail {
inline void check_scores_match(const TokenGrid& frame, const ScoreField& scores, const char* who) {
  if (scores.frame_index != frame.frame_index()) {
    throw std::invalid_argument(std::string(who) + ": scores belong to frame " +
                                std::to_string(scores.frame_index) + ", not " +
                                std::to_string(frame.frame_index()));
  }
  for (const auto* g : {scores.backward ? &*scores.backward : nullptr,
                        scores.forward ? &*scores.forward : nullptr}) {
    if (g && (g->height != frame.height() || g->width != frame.width())) {
      throw std::invalid_argument(std::string(who) + ": score grid shape does not match frame");
    }
  }
}
}  // namespace detail

inline TasResult tas_select(const TokenGrid& frame, const ScoreField& scores,
                            const OtsuOptions& options = {}) {
  detail::check_scores_match(frame, scores, "tas_select");
  TasResult result;
  std::optional<double> bt;
  std::optional<double> ft;
  if (scores.backward) {
    result.backward = otsu_threshold(scores.backward->values, options);
    if (!result.backward->degenerate) bt = result.backward->threshold;
  }
  if (scores.forward) {
    result.forward = otsu_threshold(scores.forward->values, options);
    if (!result.forward->degenerate) ft = result.forward->threshold;
  }
  const auto keep = survivor_mask(scores, bt, ft);
  result.entry = entry_from_mask(frame, keep);
  return result;
}

}  // namespace fluxmem
