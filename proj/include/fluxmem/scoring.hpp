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

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fluxmem/parallel.hpp"
#include "fluxmem/token_model.hpp"

namespace fluxmem {

// Norms below this are treated as zero vectors.
inline constexpr double kZeroNormEpsilon = 1e-12;

// Process-wide count of cosine distance evaluations. Instrumentation only.
inline std::atomic<std::uint64_t>& distance_counter() noexcept {
  static std::atomic<std::uint64_t> counter{0};
  return counter;
}
inline std::uint64_t distance_evaluations() noexcept {
  return distance_counter().load(std::memory_order_relaxed);
}

namespace detail {

// Float products are exact in double; the sum runs over eight fixed lanes so
// the reduction order, and therefore the result, never depends on the caller.
inline double dot(std::span<const float> x, std::span<const float> y) noexcept {
  const std::size_t n = x.size();
  double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t k = 0; k < 8; ++k) {
      acc[k] += static_cast<double>(x[i + k]) * static_cast<double>(y[i + k]);
    }
  }
  for (std::size_t k = 0; i < n; ++i, ++k) {
    acc[k] += static_cast<double>(x[i]) * static_cast<double>(y[i]);
  }
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

inline double distance_from_parts(double xy, double xx, double yy) noexcept {
  constexpr double kMinSq = kZeroNormEpsilon * kZeroNormEpsilon;
  if (xx < kMinSq || yy < kMinSq) return 1.0;
  // sqrt(xx * yy) rather than sqrt(xx) * sqrt(yy): d(x, x) is then exactly 0.
  const double c = std::clamp(xy / std::sqrt(xx * yy), -1.0, 1.0);
  return 1.0 - c;
}

}  // namespace detail

// d(x, y) = 1 - cos(x, y), in [0, 2]. Zero vectors are at distance 1 from
// everything.
inline double cosine_distance(std::span<const float> x, std::span<const float> y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("cosine_distance: dimension mismatch (" +
                                std::to_string(x.size()) + " vs " + std::to_string(y.size()) + ")");
  }
  distance_counter().fetch_add(1, std::memory_order_relaxed);
  return detail::distance_from_parts(detail::dot(x, y), detail::dot(x, x), detail::dot(y, y));
}

// H x W grid of scores, row-major.
struct ScoreGrid {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<double> values;

  double at(std::uint32_t row, std::uint32_t col) const { return values[std::size_t{row} * width + col]; }
  std::size_t size() const noexcept { return values.size(); }

  friend bool operator==(const ScoreGrid&, const ScoreGrid&) = default;
};

// Backward/forward novelty scores of one frame. Backward is absent for the
// first frame; forward is absent until the successor frame is known.
struct ScoreField {
  std::uint64_t frame_index = 0;
  std::optional<ScoreGrid> backward;
  std::optional<ScoreGrid> forward;

  friend bool operator==(const ScoreField&, const ScoreField&) = default;
};

// Number of (position, neighbour) pairs visited by a clipped 3x3 scan of an
// H x W grid: each axis contributes 3n - 2 (or 1 when n == 1).
inline std::uint64_t neighborhood_pair_count(std::uint32_t height, std::uint32_t width) noexcept {
  const auto axis = [](std::uint64_t n) { return n == 1 ? std::uint64_t{1} : 3 * n - 2; };
  return axis(height) * axis(width);
}

namespace detail {

inline std::vector<double> squared_norms(const TokenGrid& g) {
  std::vector<double> out(g.token_count());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = dot(g.token(i), g.token(i));
  return out;
}

// For every position of `a`, the minimum cosine distance to the tokens of `b`
// inside the 3x3 window around the same position, clipped at the borders.
inline ScoreGrid neighborhood_min_distance(const TokenGrid& a, const TokenGrid& b) {
  const std::uint32_t H = a.height();
  const std::uint32_t W = a.width();
  const auto na = squared_norms(a);
  const auto nb = squared_norms(b);
  ScoreGrid out{H, W, std::vector<double>(a.token_count())};

  parallel_for(H, 16, [&](std::size_t row_begin, std::size_t row_end) {
    for (std::size_t h = row_begin; h < row_end; ++h) {
      const std::uint32_t i0 = h == 0 ? 0 : static_cast<std::uint32_t>(h - 1);
      const std::uint32_t i1 = std::min<std::uint32_t>(H - 1, static_cast<std::uint32_t>(h + 1));
      for (std::uint32_t w = 0; w < W; ++w) {
        const std::uint32_t j0 = w == 0 ? 0 : w - 1;
        const std::uint32_t j1 = std::min<std::uint32_t>(W - 1, w + 1);
        const std::size_t ai = h * W + w;
        const auto x = a.token(ai);
        double best = std::numeric_limits<double>::infinity();
        for (std::uint32_t i = i0; i <= i1; ++i) {
          for (std::uint32_t j = j0; j <= j1; ++j) {
            const std::size_t bi = std::size_t{i} * W + j;
            best = std::min(best, distance_from_parts(dot(x, b.token(bi)), na[ai], nb[bi]));
          }
        }
        out.values[ai] = best;
      }
    }
  });
  distance_counter().fetch_add(neighborhood_pair_count(H, W), std::memory_order_relaxed);
  return out;
}

inline void require_same_shape(const TokenGrid& a, const TokenGrid& b, const char* who) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(who) + ": dimension mismatch between frames " +
                                std::to_string(a.frame_index()) + " and " +
                                std::to_string(b.frame_index()));
  }
}

}  // namespace detail

// s-(h, w): novelty of `current` against the preceding frame.
inline ScoreGrid backward_scores(const TokenGrid& current, const TokenGrid& previous) {
  detail::require_same_shape(current, previous, "backward_scores");
  if (previous.frame_index() + 1 != current.frame_index()) {
    throw std::invalid_argument("backward_scores: previous frame must immediately precede current");
  }
  return detail::neighborhood_min_distance(current, previous);
}

// s+(h, w): novelty of `current` against the following frame.
inline ScoreGrid forward_scores(const TokenGrid& current, const TokenGrid& next) {
  detail::require_same_shape(current, next, "forward_scores");
  if (current.frame_index() + 1 != next.frame_index()) {
    throw std::invalid_argument("forward_scores: next frame must immediately follow current");
  }
  return detail::neighborhood_min_distance(current, next);
}

struct AdjacentScores {
  ScoreGrid backward;  // s- of `current`
  ScoreGrid forward;   // s+ of `previous`
};

// Both score fields of an adjacent frame pair from one pass over their
// window pairs. The window relation is symmetric and so is the distance, so
// each field is bit-identical to backward_scores / forward_scores.
inline AdjacentScores adjacent_scores(const TokenGrid& current, const TokenGrid& previous) {
  detail::require_same_shape(current, previous, "adjacent_scores");
  if (previous.frame_index() + 1 != current.frame_index()) {
    throw std::invalid_argument("adjacent_scores: previous frame must immediately precede current");
  }
  const std::uint32_t H = current.height();
  const std::uint32_t W = current.width();
  const auto nc = detail::squared_norms(current);
  const auto np = detail::squared_norms(previous);
  constexpr double inf = std::numeric_limits<double>::infinity();
  // dist[9 * c + 3 * (di + 1) + (dj + 1)]: current c against previous at offset (di, dj).
  std::vector<double> dist(current.token_count() * 9, inf);

  parallel_for(H, 16, [&](std::size_t row_begin, std::size_t row_end) {
    for (std::size_t h = row_begin; h < row_end; ++h) {
      for (std::uint32_t w = 0; w < W; ++w) {
        const std::size_t c = h * W + w;
        const auto x = current.token(c);
        for (int di = -1; di <= 1; ++di) {
          const auto i = static_cast<std::int64_t>(h) + di;
          if (i < 0 || i >= H) continue;
          for (int dj = -1; dj <= 1; ++dj) {
            const auto j = static_cast<std::int64_t>(w) + dj;
            if (j < 0 || j >= W) continue;
            const auto p = static_cast<std::size_t>(i * W + j);
            dist[9 * c + static_cast<std::size_t>(3 * (di + 1) + dj + 1)] =
                detail::distance_from_parts(detail::dot(x, previous.token(p)), nc[c], np[p]);
          }
        }
      }
    }
  });

  AdjacentScores out{ScoreGrid{H, W, std::vector<double>(current.token_count(), inf)},
                     ScoreGrid{H, W, std::vector<double>(current.token_count(), inf)}};
  for (std::uint32_t h = 0; h < H; ++h) {
    for (std::uint32_t w = 0; w < W; ++w) {
      const std::size_t c = std::size_t{h} * W + w;
      for (int di = -1; di <= 1; ++di) {
        for (int dj = -1; dj <= 1; ++dj) {
          const double d = dist[9 * c + static_cast<std::size_t>(3 * (di + 1) + dj + 1)];
          if (d == inf) continue;
          const auto p = static_cast<std::size_t>((static_cast<std::int64_t>(h) + di) * W + w + dj);
          out.backward.values[c] = std::min(out.backward.values[c], d);
          out.forward.values[p] = std::min(out.forward.values[p], d);
        }
      }
    }
  }
  distance_counter().fetch_add(neighborhood_pair_count(H, W), std::memory_order_relaxed);
  return out;
}

}  // namespace fluxmem
