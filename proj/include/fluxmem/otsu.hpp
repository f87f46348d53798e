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
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fluxmem {

struct OtsuOptions {
  std::uint32_t bins = 256;
  double flat_epsilon = 1e-6;
};

// Result of a two-class split. Class 1 is every sample <= threshold, class 2
// every sample > threshold.
struct ThresholdReport {
  double threshold = 0.0;
  double omega1 = 0.0;
  double omega2 = 0.0;
  double mu1 = 0.0;
  double mu2 = 0.0;
  double inter_class_variance = 0.0;
  bool degenerate = false;
  double bin_width = 0.0;

  friend bool operator==(const ThresholdReport&, const ThresholdReport&) = default;
};

// Relative margin a candidate split must beat the incumbent by. Candidates are
// visited in ascending threshold order, so near-ties resolve to the smaller
// threshold regardless of last-bit rounding in the variance.
inline constexpr double kOtsuTieTolerance = 1e-12;

namespace detail {

inline void validate_samples(std::span<const double> samples, std::uint32_t bins) {
  if (samples.empty()) throw std::invalid_argument("otsu_threshold: empty sample set");
  if (bins < 2) throw std::invalid_argument("otsu_threshold: bins must be >= 2");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!std::isfinite(samples[i])) {
      throw std::invalid_argument("otsu_threshold: non-finite sample at index " + std::to_string(i));
    }
  }
}

// Orders samples by bucketing them into `bins` equal-width bins over
// [lo, hi] and sorting within each bin; O(n) for well-spread data.
inline std::vector<double> bucket_sort(std::span<const double> samples, double lo, double hi,
                                       std::uint32_t bins) {
  const double scale = static_cast<double>(bins) / (hi - lo);
  const auto bin_of = [&](double x) {
    const auto b = static_cast<std::int64_t>((x - lo) * scale);
    return static_cast<std::uint32_t>(std::clamp<std::int64_t>(b, 0, bins - 1));
  };
  std::vector<std::size_t> offset(std::size_t{bins} + 1, 0);
  for (double x : samples) ++offset[bin_of(x) + 1];
  for (std::uint32_t b = 0; b < bins; ++b) offset[b + 1] += offset[b];
  std::vector<double> sorted(samples.size());
  std::vector<std::size_t> cursor(offset.begin(), offset.end() - 1);
  for (double x : samples) sorted[cursor[bin_of(x)]++] = x;
  for (std::uint32_t b = 0; b < bins; ++b) {
    std::sort(sorted.begin() + static_cast<std::ptrdiff_t>(offset[b]),
              sorted.begin() + static_cast<std::ptrdiff_t>(offset[b + 1]));
  }
  return sorted;
}

// A value strictly between a and b when one exists, else a; a < b required.
inline double split_point(double a, double b) noexcept {
  const double mid = a + (b - a) / 2;
  return mid < b ? mid : a;
}

}  // namespace detail

inline ThresholdReport degenerate_report(std::span<const double> samples, double bin_width = 0.0) {
  ThresholdReport r;
  r.degenerate = true;
  r.bin_width = bin_width;
  if (samples.empty()) return r;
  double sum = 0.0;
  for (double x : samples) sum += x;
  r.threshold = *std::min_element(samples.begin(), samples.end());
  r.omega1 = 1.0;
  r.omega2 = 0.0;
  r.mu1 = r.mu2 = sum / static_cast<double>(samples.size());
  return r;
}

// Otsu's method: the threshold maximising w1 * w2 * (mu1 - mu2)^2.
//
// Every gap between consecutive distinct sample values is a candidate, so the
// returned split is the exact optimum over all two-class partitions; the
// `bins`-bin histogram orders the samples and sets the reported bin_width.
// The threshold is the midpoint of the winning gap. Ranges narrower than
// flat_epsilon are reported as degenerate with threshold = min(samples).
inline ThresholdReport otsu_threshold(std::span<const double> samples, const OtsuOptions& options = {}) {
  detail::validate_samples(samples, options.bins);
  const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  const double range = hi - lo;
  const double bin_width = range / options.bins;
  if (!(range >= options.flat_epsilon)) return degenerate_report(samples, bin_width);

  const auto sorted = detail::bucket_sort(samples, lo, hi, options.bins);
  const std::size_t n = sorted.size();
  const double total = static_cast<double>(n);
  double sum = 0.0;
  for (double x : sorted) sum += x;

  ThresholdReport best;
  best.bin_width = bin_width;
  best.inter_class_variance = -1.0;
  double prefix = 0.0;
  for (std::size_t k = 1; k < n; ++k) {
    prefix += sorted[k - 1];
    if (!(sorted[k - 1] < sorted[k])) continue;
    const double n1 = static_cast<double>(k);
    const double n2 = total - n1;
    const double w1 = n1 / total;
    const double w2 = n2 / total;
    const double m1 = prefix / n1;
    const double m2 = (sum - prefix) / n2;
    const double var = w1 * w2 * (m1 - m2) * (m1 - m2);
    if (var > best.inter_class_variance * (1.0 + kOtsuTieTolerance)) {
      best.threshold = detail::split_point(sorted[k - 1], sorted[k]);
      best.omega1 = w1;
      best.omega2 = w2;
      best.mu1 = m1;
      best.mu2 = m2;
      best.inter_class_variance = var;
    }
  }
  return best;
}

inline ThresholdReport otsu_threshold(std::span<const double> samples, std::uint32_t bins) {
  return otsu_threshold(samples, OtsuOptions{bins, OtsuOptions{}.flat_epsilon});
}

}  // namespace fluxmem
