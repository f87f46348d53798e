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

// Brute-force reference implementations and the comparison harness behind
// `fluxmem oracle`. Everything here is deliberately slow and shares no code
// with the fast paths beyond the cosine distance itself.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fluxmem/otsu.hpp"
#include "fluxmem/random.hpp"
#include "fluxmem/scoring.hpp"
#include "fluxmem/sdc.hpp"
#include "fluxmem/tas.hpp"
#include "fluxmem/token_model.hpp"

namespace fluxmem::oracle {

struct ExactOtsu {
  double threshold = 0.0;  // midpoint of the optimal gap, or min for flat input
  double inter_class_variance = 0.0;
  bool degenerate = false;
};

// Evaluates w1 * w2 * (mu1 - mu2)^2 from scratch at every midpoint between
// consecutive distinct sample values. O(n^2).
inline ExactOtsu exact_otsu(std::vector<double> samples, double flat_epsilon = 1e-6) {
  std::sort(samples.begin(), samples.end());
  ExactOtsu best;
  if (samples.empty() || !(samples.back() - samples.front() >= flat_epsilon)) {
    best.degenerate = true;
    best.threshold = samples.empty() ? 0.0 : samples.front();
    return best;
  }
  std::vector<double> distinct = samples;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  best.inter_class_variance = -1.0;
  const double n = static_cast<double>(samples.size());
  for (std::size_t g = 0; g + 1 < distinct.size(); ++g) {
    double theta = distinct[g] + (distinct[g + 1] - distinct[g]) / 2;
    if (!(theta < distinct[g + 1])) theta = distinct[g];
    double n1 = 0, s1 = 0, n2 = 0, s2 = 0;
    for (double x : samples) {
      if (x <= theta) {
        n1 += 1;
        s1 += x;
      } else {
        n2 += 1;
        s2 += x;
      }
    }
    const double m1 = s1 / n1;
    const double m2 = s2 / n2;
    const double var = (n1 / n) * (n2 / n) * (m1 - m2) * (m1 - m2);
    if (var > best.inter_class_variance * (1.0 + kOtsuTieTolerance)) {
      best.inter_class_variance = var;
      best.threshold = theta;
    }
  }
  return best;
}

// sigma_B^2 of the partition {x <= theta} / {x > theta}.
inline double split_variance(const std::vector<double>& samples, double theta) {
  double n1 = 0, s1 = 0, n2 = 0, s2 = 0;
  for (double x : samples) {
    if (x <= theta) {
      n1 += 1;
      s1 += x;
    } else {
      n2 += 1;
      s2 += x;
    }
  }
  if (n1 == 0 || n2 == 0) return 0.0;
  const double n = n1 + n2;
  const double d = s1 / n1 - s2 / n2;
  return (n1 / n) * (n2 / n) * d * d;
}

// Min cosine distance from each token of `a` to any token of `b` whose
// position is within Chebyshev distance 1, found by scanning all of `b`.
inline std::vector<double> nested_loop_scores(const TokenGrid& a, const TokenGrid& b) {
  std::vector<double> out(a.token_count());
  for (std::uint32_t h = 0; h < a.height(); ++h) {
    for (std::uint32_t w = 0; w < a.width(); ++w) {
      double best = 1e300;
      for (std::uint32_t i = 0; i < b.height(); ++i) {
        for (std::uint32_t j = 0; j < b.width(); ++j) {
          const auto dh = static_cast<std::int64_t>(i) - h;
          const auto dw = static_cast<std::int64_t>(j) - w;
          if (dh < -1 || dh > 1 || dw < -1 || dw > 1) continue;
          best = std::min(best, cosine_distance(a.token(h, w), b.token(i, j)));
        }
      }
      out[std::size_t{h} * a.width() + w] = best;
    }
  }
  return out;
}

// Survivor mask of temporal selection recomputed from first principles.
inline KeepMask tas_mask(const TokenGrid* prev, const TokenGrid& cur, const TokenGrid* next,
                         double flat_epsilon = 1e-6) {
  const std::size_t n = cur.token_count();
  if (!prev) return KeepMask(n, 1);
  KeepMask keep(n, 0);
  const auto side = [&](const TokenGrid& other) {
    const auto s = nested_loop_scores(cur, other);
    const auto t = exact_otsu(s, flat_epsilon);
    if (t.degenerate) return;
    for (std::size_t i = 0; i < n; ++i) keep[i] = keep[i] || s[i] > t.threshold;
  };
  side(*prev);
  if (next) side(*next);
  return keep;
}

struct OracleComponents {
  std::vector<std::uint32_t> label;  // component id per token, ids in order of first member
  std::vector<std::vector<double>> means;
  std::optional<double> threshold;   // nullopt: no pairs, or flat distances (link all)
};

// Connected components of retained tokens via BFS over thresholded
// 8-adjacency edges, all pairs enumerated directly.
inline OracleComponents sdc_components(const FrameEntry& entry, double flat_epsilon = 1e-6,
                                       std::optional<double> fixed_theta = std::nullopt) {
  const std::size_t n = entry.tokens.size();
  struct Edge {
    std::size_t a, b;
    double d;
  };
  std::vector<Edge> edges;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const auto& oa = entry.tokens[a].origin;
      const auto& ob = entry.tokens[b].origin;
      const auto dr = std::llabs(static_cast<long long>(oa.row) - ob.row);
      const auto dc = std::llabs(static_cast<long long>(oa.col) - ob.col);
      if (std::max(dr, dc) == 1) {
        edges.push_back({a, b, cosine_distance(entry.tokens[a].feature, entry.tokens[b].feature)});
      }
    }
  }
  OracleComponents out;
  bool link_all = false;
  if (fixed_theta) {
    out.threshold = fixed_theta;
  } else if (!edges.empty()) {
    std::vector<double> d;
    for (const auto& e : edges) d.push_back(e.d);
    const auto t = exact_otsu(d, flat_epsilon);
    if (t.degenerate) link_all = true;
    else out.threshold = t.threshold;
  }
  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& e : edges) {
    if (link_all || (out.threshold && e.d <= *out.threshold)) {
      adj[e.a].push_back(e.b);
      adj[e.b].push_back(e.a);
    }
  }
  constexpr std::uint32_t kUnset = 0xFFFFFFFFu;
  out.label.assign(n, kUnset);
  std::uint32_t next_id = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (out.label[s] != kUnset) continue;
    const std::size_t dim = entry.tokens[s].feature.size();
    std::vector<double> sum(dim, 0.0);
    std::size_t members = 0;
    std::deque<std::size_t> q{s};
    out.label[s] = next_id;
    while (!q.empty()) {
      const auto u = q.front();
      q.pop_front();
      ++members;
      for (std::size_t d = 0; d < dim; ++d) sum[d] += entry.tokens[u].feature[d];
      for (auto v : adj[u]) {
        if (out.label[v] == kUnset) {
          out.label[v] = next_id;
          q.push_back(v);
        }
      }
    }
    for (auto& x : sum) x /= static_cast<double>(members);
    out.means.push_back(std::move(sum));
    ++next_id;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Comparison harness

struct Mismatch {
  std::string what;
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  std::string detail;

  std::string describe() const {
    std::ostringstream os;
    os << what << " mismatch at (" << row << ", " << col << ")";
    if (!detail.empty()) os << ": " << detail;
    return os.str();
  }
};

using ScoreFn = std::function<ScoreGrid(const TokenGrid&, const TokenGrid&)>;

// First row-major position where `fast` disagrees with the nested-loop scores.
inline std::optional<Mismatch> check_scores(const TokenGrid& cur, const TokenGrid& other,
                                            const ScoreFn& fast) {
  const auto expected = nested_loop_scores(cur, other);
  const auto got = fast(cur, other);
  for (std::uint32_t h = 0; h < cur.height(); ++h) {
    for (std::uint32_t w = 0; w < cur.width(); ++w) {
      const std::size_t i = std::size_t{h} * cur.width() + w;
      if (i >= got.values.size() || got.values[i] != expected[i]) {
        std::ostringstream os;
        os.precision(17);
        os << "expected " << expected[i] << ", got "
           << (i < got.values.size() ? got.values[i] : std::nan(""));
        return Mismatch{"score", h, w, os.str()};
      }
    }
  }
  return std::nullopt;
}

struct CheckOutcome {
  std::string name;
  std::size_t trials = 0;
  std::size_t failures = 0;
  std::string first_failure;
  bool passed() const noexcept { return failures == 0; }
};

inline TokenGrid random_grid(Xoshiro256& rng, std::uint64_t index, std::uint32_t h, std::uint32_t w,
                             std::uint32_t d) {
  std::vector<float> v(std::size_t{h} * w * d);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return TokenGrid(index, h, w, d, std::move(v));
}

// Fast Otsu against the exact sweep on random unimodal/bimodal sample sets.
inline CheckOutcome check_otsu(std::uint64_t seed, std::size_t trials, std::uint32_t bins = 256) {
  CheckOutcome out{"otsu", trials, 0, {}};
  Xoshiro256 rng(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    const auto n = static_cast<std::size_t>(8 + rng.below(505));
    std::vector<double> s(n);
    const bool bimodal = rng.below(2) == 1;
    const double gap = 0.2 + 0.6 * rng.uniform();
    for (auto& x : s) x = rng.normal() * 0.1 + (bimodal && rng.below(2) ? gap : 0.0);
    const auto fast = otsu_threshold(s, OtsuOptions{bins, 1e-6});
    const auto exact = exact_otsu(s);
    const double achieved = split_variance(s, fast.threshold);
    const bool ok = std::abs(fast.threshold - exact.threshold) <= fast.bin_width &&
                    achieved >= (1.0 - 1e-3) * exact.inter_class_variance;
    if (!ok && out.failures++ == 0) {
      std::ostringstream os;
      os.precision(17);
      os << "trial " << t << ": fast " << fast.threshold << " exact " << exact.threshold
         << " bin_width " << fast.bin_width;
      out.first_failure = os.str();
    }
  }
  return out;
}

// Scores, thresholds and survivor masks on random (prev, cur, next) triples.
inline CheckOutcome check_tas(std::uint64_t seed, std::size_t trials, std::uint32_t h, std::uint32_t w,
                              std::uint32_t d, const ScoreFn& backward = backward_scores,
                              const ScoreFn& forward = forward_scores) {
  CheckOutcome out{"tas " + std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(d), trials, 0, {}};
  Xoshiro256 rng(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    const auto prev = random_grid(rng, 0, h, w, d);
    const auto cur = random_grid(rng, 1, h, w, d);
    const auto next = random_grid(rng, 2, h, w, d);
    std::optional<std::string> failure;
    if (auto m = check_scores(cur, prev, backward)) failure = "backward " + m->describe();
    else if (auto m2 = check_scores(cur, next, forward)) failure = "forward " + m2->describe();
    if (!failure) {
      ScoreField field{1, backward(cur, prev), forward(cur, next)};
      const auto fast = tas_select(cur, field).entry;
      KeepMask got(cur.token_count(), 0);
      for (const auto& tok : fast.tokens) got[std::size_t{tok.origin.row} * w + tok.origin.col] = 1;
      const auto expected = tas_mask(&prev, cur, &next);
      for (std::size_t i = 0; i < got.size() && !failure; ++i) {
        if (got[i] != expected[i]) {
          failure = Mismatch{"survivor", static_cast<std::uint32_t>(i / w),
                             static_cast<std::uint32_t>(i % w),
                             expected[i] ? "oracle keeps, fast drops" : "oracle drops, fast keeps"}
                        .describe();
        }
      }
    }
    if (failure && out.failures++ == 0) out.first_failure = "trial " + std::to_string(t) + ": " + *failure;
  }
  return out;
}

// A random row-major retained subset of an h x w grid; features drawn so
// that roughly half the neighbouring pairs are near-duplicates.
inline FrameEntry random_retained_set(Xoshiro256& rng, std::uint32_t h, std::uint32_t w, std::uint32_t d) {
  FrameEntry e{0, {}};
  const double keep_p = 0.3 + 0.6 * rng.uniform();
  std::vector<std::vector<float>> prototypes(4, std::vector<float>(d));
  for (auto& p : prototypes) {
    for (auto& x : p) x = static_cast<float>(rng.normal());
  }
  for (std::uint32_t r = 0; r < h; ++r) {
    for (std::uint32_t c = 0; c < w; ++c) {
      if (rng.uniform() >= keep_p) continue;
      const auto& proto = prototypes[(r / 3 + c / 3) % prototypes.size()];
      std::vector<float> f(d);
      for (std::uint32_t k = 0; k < d; ++k) f[k] = proto[k] + static_cast<float>(0.3 * rng.normal());
      e.tokens.push_back({std::move(f), Origin{0, r, c}, 1});
    }
  }
  return e;
}

inline CheckOutcome check_sdc(std::uint64_t seed, std::size_t trials, std::uint32_t h = 8,
                              std::uint32_t w = 8, std::uint32_t d = 16) {
  CheckOutcome out{"sdc " + std::to_string(h) + "x" + std::to_string(w), trials, 0, {}};
  Xoshiro256 rng(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    const auto entry = random_retained_set(rng, h, w, d);
    const auto fast = sdc_consolidate(entry);
    const auto expected = sdc_components(entry);
    std::optional<std::string> failure;
    if (fast.anchors.size() != expected.means.size()) {
      failure = "component count " + std::to_string(fast.anchors.size()) + " vs " +
                std::to_string(expected.means.size());
    }
    for (std::size_t i = 0; i < entry.size() && !failure; ++i) {
      if (fast.component[i] != expected.label[i]) {
        failure = Mismatch{"component", entry.tokens[i].origin.row, entry.tokens[i].origin.col, ""}.describe();
      }
    }
    std::uint64_t weight = 0;
    for (std::size_t a = 0; a < fast.anchors.size() && !failure; ++a) {
      weight += fast.anchors.tokens[a].weight;
      for (std::size_t k = 0; k < d; ++k) {
        const double want = expected.means[a][k];
        const double got = fast.anchors.tokens[a].feature[k];
        if (std::abs(got - want) > 1e-6 * std::abs(want) + 1e-12) {
          failure = "anchor " + std::to_string(a) + " mean differs in dim " + std::to_string(k);
          break;
        }
      }
    }
    if (!failure && weight != entry.total_weight()) failure = "weight not conserved";
    if (failure && out.failures++ == 0) out.first_failure = "trial " + std::to_string(t) + ": " + *failure;
  }
  return out;
}

}  // namespace fluxmem::oracle
