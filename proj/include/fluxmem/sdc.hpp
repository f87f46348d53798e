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
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <vector>

#include "fluxmem/otsu.hpp"
#include "fluxmem/scoring.hpp"
#include "fluxmem/token_model.hpp"

namespace fluxmem {

// Spatial domain consolidation: link 8-adjacent retained tokens whose
// distance is <= theta, then replace each connected component by its mean.

struct NeighborPair {
  std::uint32_t a = 0;  // index into FrameEntry::tokens, a < b
  std::uint32_t b = 0;
  double distance = 0.0;

  friend bool operator==(const NeighborPair&, const NeighborPair&) = default;
};

// Disjoint sets with union by size and path compression.
class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), std::uint32_t{0});
  }

  std::uint32_t find(std::uint32_t x) {
    std::uint32_t root = x;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[x] != root) {
      const std::uint32_t next = parent_[x];
      parent_[x] = root;
      x = next;
    }
    return root;
  }

  bool unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    return true;
  }

  std::uint32_t component_size(std::uint32_t x) { return size_[find(x)]; }
  std::size_t size() const noexcept { return parent_.size(); }

 private:
  std::vector<std::uint32_t> parent_;
  std::vector<std::uint32_t> size_;
};

// Every unordered pair of retained tokens whose origins are at Chebyshev
// distance 1, ordered by (a, b).
inline std::vector<NeighborPair> neighbor_pairs(const FrameEntry& entry) {
  std::vector<NeighborPair> pairs;
  if (entry.tokens.size() < 2) return pairs;
  std::uint32_t max_row = 0;
  std::uint32_t max_col = 0;
  for (const auto& t : entry.tokens) {
    max_row = std::max(max_row, t.origin.row);
    max_col = std::max(max_col, t.origin.col);
  }
  // Dense position lookup padded by one column on each side and one row below.
  const std::size_t cols = std::size_t{max_col} + 3;
  std::vector<std::int32_t> slot((std::size_t{max_row} + 2) * cols, -1);
  const auto key = [cols](std::uint32_t r, std::uint32_t c) { return std::size_t{r} * cols + c + 1; };
  for (std::size_t i = 0; i < entry.tokens.size(); ++i) {
    slot[key(entry.tokens[i].origin.row, entry.tokens[i].origin.col)] = static_cast<std::int32_t>(i);
  }
  pairs.reserve(entry.tokens.size() * 4);
  for (std::uint32_t i = 0; i < entry.tokens.size(); ++i) {
    const auto& t = entry.tokens[i];
    const std::size_t here = key(t.origin.row, t.origin.col);
    // Forward half of the 8-neighbourhood: east, then the three cells below.
    const std::size_t candidates[4] = {here + 1, here + cols - 1, here + cols, here + cols + 1};
    for (const std::size_t k : candidates) {
      const std::int32_t j = slot[k];
      if (j < 0) continue;
      pairs.push_back({i, static_cast<std::uint32_t>(j),
                       cosine_distance(t.feature, entry.tokens[static_cast<std::size_t>(j)].feature)});
    }
  }
  return pairs;
}

struct SdcResult {
  FrameEntry anchors;                   // one token per component, sorted by origin
  ThresholdReport report;               // degenerate when no pairs exist
  std::vector<std::uint32_t> component;  // anchor index of every input token
  std::size_t pair_count = 0;
};

namespace detail {

template <typename LinkFn>
SdcResult consolidate(const FrameEntry& entry, const std::vector<NeighborPair>& pairs, LinkFn&& link) {
  const std::size_t n = entry.tokens.size();
  DisjointSets sets(n);
  for (const auto& p : pairs) {
    if (link(p.distance)) sets.unite(p.a, p.b);
  }

  SdcResult out;
  out.pair_count = pairs.size();
  out.anchors.frame_index = entry.frame_index;
  out.component.assign(n, 0);
  // Tokens are sorted by origin, so the first member reached for each root is
  // its smallest origin and anchors come out already in origin order.
  std::vector<std::int64_t> anchor_of_root(n, -1);
  std::vector<std::vector<double>> sums;
  std::vector<std::uint32_t> counts;
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t root = sets.find(i);
    if (anchor_of_root[root] < 0) {
      anchor_of_root[root] = static_cast<std::int64_t>(out.anchors.tokens.size());
      out.anchors.tokens.push_back(RetainedToken{{}, entry.tokens[i].origin, 0});
      sums.emplace_back(entry.tokens[i].feature.size(), 0.0);
      counts.push_back(0);
    }
    const auto a = static_cast<std::size_t>(anchor_of_root[root]);
    out.component[i] = static_cast<std::uint32_t>(a);
    out.anchors.tokens[a].weight += entry.tokens[i].weight;
    ++counts[a];
    const auto& f = entry.tokens[i].feature;
    for (std::size_t d = 0; d < f.size(); ++d) sums[a][d] += f[d];
  }
  for (std::size_t a = 0; a < out.anchors.tokens.size(); ++a) {
    auto& feature = out.anchors.tokens[a].feature;
    feature.resize(sums[a].size());
    for (std::size_t d = 0; d < feature.size(); ++d) {
      feature[d] = static_cast<float>(sums[a][d] / counts[a]);
    }
  }
  return out;
}

inline std::vector<double> pair_distances(const std::vector<NeighborPair>& pairs) {
  std::vector<double> d(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) d[i] = pairs[i].distance;
  return d;
}

}  // namespace detail

// Adaptive variant: theta is the Otsu threshold of this frame's pair
// distances. A flat distance distribution links every pair.
inline SdcResult sdc_consolidate(const FrameEntry& entry, const OtsuOptions& options = {}) {
  const auto pairs = neighbor_pairs(entry);
  if (pairs.empty()) {
    auto out = detail::consolidate(entry, pairs, [](double) { return false; });
    out.report = degenerate_report({});
    return out;
  }
  const auto distances = detail::pair_distances(pairs);
  const ThresholdReport report = otsu_threshold(distances, options);
  auto out = report.degenerate
                 ? detail::consolidate(entry, pairs, [](double) { return true; })
                 : detail::consolidate(entry, pairs,
                                       [theta = report.threshold](double d) { return d <= theta; });
  out.report = report;
  return out;
}

// Fixed-threshold variant used by the baseline policies.
inline SdcResult sdc_consolidate_fixed(const FrameEntry& entry, double theta) {
  const auto pairs = neighbor_pairs(entry);
  auto out = detail::consolidate(entry, pairs, [theta](double d) { return d <= theta; });
  out.report = degenerate_report({});
  out.report.degenerate = pairs.empty();
  out.report.threshold = theta;
  return out;
}

}  // namespace fluxmem
