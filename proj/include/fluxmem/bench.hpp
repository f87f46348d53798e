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

// Replay, sweep and reporting utilities behind the `fluxmem` command line.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"  // nlohmann/json, vendored

#include "fluxmem/baselines.hpp"
#include "fluxmem/memory_engine.hpp"
#include "fluxmem/scoring.hpp"
#include "fluxmem/token_model.hpp"

namespace fluxmem {

// Event sidecar: one JSON object per line, {"frame": <u64>, "event": "query"}.
// Blank lines and lines starting with '#' are skipped.
inline std::set<std::uint64_t> parse_event_timeline(std::istream& in) {
  std::set<std::uint64_t> queries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::invalid_argument("events line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!rec.is_object() || !rec.contains("frame") || !rec["frame"].is_number_unsigned() ||
        !rec.contains("event") || !rec["event"].is_string()) {
      throw std::invalid_argument("events line " + std::to_string(lineno) +
                                  ": expected {\"frame\": u64, \"event\": \"query\"}");
    }
    if (rec["event"].get<std::string>() != "query") {
      throw std::invalid_argument("events line " + std::to_string(lineno) + ": unknown event '" +
                                  rec["event"].get<std::string>() + "'");
    }
    queries.insert(rec["frame"].get<std::uint64_t>());
  }
  return queries;
}

struct FrameRecord {
  std::uint64_t frame = 0;
  std::uint64_t short_frames = 0, mid_frames = 0, long_frames = 0;
  std::uint64_t short_tokens = 0, mid_tokens = 0, long_tokens = 0;
  std::uint64_t held_tokens = 0, ingested_tokens = 0;
  double drop_ratio = 0.0;
  double trigger_ratio = 0.0;
  double trigger_threshold = 0.0;
  bool trigger_fired = false;
  bool query = false;
  std::uint64_t context_tokens = 0;  // tokens delivered when a response happened this frame
  double scoring_us = 0, otsu_us = 0, tas_us = 0, sdc_us = 0, ingest_us = 0;
};

struct RunAggregates {
  double mean_ingest_us = 0.0;
  double p95_ingest_us = 0.0;
  double final_drop_ratio = 0.0;
  std::uint64_t total_anchors = 0;  // tokens in the long tier at the end
  std::uint64_t trigger_events = 0;
  std::uint64_t queries = 0;
  std::uint64_t frames = 0;
};

struct RunReport {
  MemoryConfig config;
  Policy policy;
  std::vector<FrameRecord> records;
  RunAggregates aggregates;
};

struct RunOptions {
  MemoryConfig config;
  Policy policy;
  bool timing = true;  // false zeroes every wall-clock field
};

// Nearest-rank percentile, q in [0, 1].
inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  return v[std::min(v.size() - 1, rank == 0 ? 0 : rank - 1)];
}

inline RunAggregates aggregate(const std::vector<FrameRecord>& records) {
  RunAggregates a;
  a.frames = records.size();
  std::vector<double> lat;
  lat.reserve(records.size());
  double sum = 0.0;
  for (const auto& r : records) {
    lat.push_back(r.ingest_us);
    sum += r.ingest_us;
    a.trigger_events += r.trigger_fired;
    a.queries += r.query;
  }
  if (!records.empty()) {
    a.mean_ingest_us = sum / static_cast<double>(records.size());
    a.p95_ingest_us = percentile(lat, 0.95);
    a.final_drop_ratio = records.back().drop_ratio;
    a.total_anchors = records.back().long_tokens;
  }
  return a;
}

// Pulls frames from `next_frame` until it returns nullopt, answering queries
// from `queries` after the matching frame has been ingested.
inline RunReport run_replay(const std::function<std::optional<TokenGrid>()>& next_frame,
                            const std::set<std::uint64_t>& queries, const RunOptions& options) {
  using clock = std::chrono::steady_clock;
  MemoryEngine engine(options.config, options.policy);
  RunReport report{options.config, options.policy, {}, {}};
  const auto us = [](std::uint64_t ns) { return static_cast<double>(ns) / 1000.0; };
  while (auto grid = next_frame()) {
    const std::uint64_t t = grid->frame_index();
    const auto t0 = clock::now();
    const IngestResult ingest = engine.ingest(std::move(*grid));
    const auto wall = std::chrono::duration_cast<std::chrono::nanoseconds>(clock::now() - t0).count();

    FrameRecord rec;
    rec.frame = t;
    rec.trigger_ratio = ingest.trigger.ratio;
    rec.trigger_threshold = ingest.trigger.threshold_used.value_or(0.0);
    rec.trigger_fired = ingest.trigger.fired;
    rec.query = queries.count(t) > 0;
    if (rec.query) rec.context_tokens = engine.handle_query(t).size();
    else if (rec.trigger_fired) rec.context_tokens = engine.flatten().size();

    const auto s = engine.stats();
    rec.short_frames = s.short_frames;
    rec.mid_frames = s.mid_frames;
    rec.long_frames = s.long_frames;
    rec.short_tokens = s.short_tokens;
    rec.mid_tokens = s.mid_tokens;
    rec.long_tokens = s.long_tokens;
    rec.held_tokens = s.held_tokens;
    rec.ingested_tokens = s.ingested_tokens;
    rec.drop_ratio = s.drop_ratio;
    if (options.timing) {
      rec.scoring_us = us(ingest.times.scoring_ns);
      rec.otsu_us = us(ingest.times.otsu_ns);
      rec.tas_us = us(ingest.times.tas_ns);
      rec.sdc_us = us(ingest.times.sdc_ns);
      rec.ingest_us = us(static_cast<std::uint64_t>(wall));
    }
    report.records.push_back(rec);
  }
  report.aggregates = aggregate(report.records);
  return report;
}

inline constexpr const char* kRunCsvHeader =
    "frame,short_frames,mid_frames,long_frames,short_tokens,mid_tokens,long_tokens,held_tokens,"
    "ingested_tokens,drop_ratio,trigger_ratio,trigger_threshold,trigger_fired,query,context_tokens,"
    "scoring_us,otsu_us,tas_us,sdc_us,ingest_us";

namespace detail {
inline std::string fmt_real(double v) {
  std::ostringstream os;
  os.precision(9);
  os << v;
  return os.str();
}
}  // namespace detail

inline void write_run_csv(std::ostream& out, const RunReport& report) {
  using detail::fmt_real;
  out << kRunCsvHeader << '\n';
  for (const auto& r : report.records) {
    out << r.frame << ',' << r.short_frames << ',' << r.mid_frames << ',' << r.long_frames << ','
        << r.short_tokens << ',' << r.mid_tokens << ',' << r.long_tokens << ',' << r.held_tokens << ','
        << r.ingested_tokens << ',' << fmt_real(r.drop_ratio) << ',' << fmt_real(r.trigger_ratio) << ','
        << fmt_real(r.trigger_threshold) << ',' << int{r.trigger_fired} << ',' << int{r.query} << ','
        << r.context_tokens << ',' << fmt_real(r.scoring_us) << ',' << fmt_real(r.otsu_us) << ','
        << fmt_real(r.tas_us) << ',' << fmt_real(r.sdc_us) << ',' << fmt_real(r.ingest_us) << '\n';
  }
}

inline nlohmann::json config_json(const MemoryConfig& c, const Policy& p) {
  return {{"cs", c.short_capacity},
          {"cm", c.mid_capacity},
          {"cl", c.long_capacity},
          {"capacity_unit", std::string(to_string(c.unit))},
          {"gamma", c.gamma},
          {"bins", c.bins},
          {"flat_epsilon", c.flat_epsilon},
          {"policy", std::string(to_string(p.kind))},
          {"ratio", p.ratio},
          {"theta_backward", p.theta_backward},
          {"theta_forward", p.theta_forward},
          {"theta_sdc", p.theta_sdc},
          {"seed", p.seed}};
}

inline nlohmann::json run_summary_json(const RunReport& report) {
  const auto& a = report.aggregates;
  return {{"config", config_json(report.config, report.policy)},
          {"frames", a.frames},
          {"mean_ingest_us", a.mean_ingest_us},
          {"p95_ingest_us", a.p95_ingest_us},
          {"final_drop_ratio", a.final_drop_ratio},
          {"total_anchors", a.total_anchors},
          {"trigger_events", a.trigger_events},
          {"queries", a.queries}};
}

// ---------------------------------------------------------------------------
// Policy sweep

struct BenchCell {
  std::string policy;
  double parameter = 0.0;  // target drop ratio, or theta for fixed_threshold
  std::uint64_t total_tokens = 0;
  std::uint64_t kept_tokens = 0;
  double drop_ratio = 0.0;  // achieved
  double proxy_fidelity = 0.0;
};

// Mean cosine distance from every dropped token to its nearest kept token in
// the same frame; 1.0 per dropped token when the frame keeps nothing. This is
// a stand-in for downstream accuracy, not a measure of it.
inline double dropped_to_kept_distance_sum(const TokenGrid& frame, const FrameEntry& kept,
                                           std::uint64_t& dropped_count) {
  KeepMask is_kept(frame.token_count(), 0);
  for (const auto& t : kept.tokens) is_kept[std::size_t{t.origin.row} * frame.width() + t.origin.col] = 1;
  double sum = 0.0;
  for (std::size_t i = 0; i < frame.token_count(); ++i) {
    if (is_kept[i]) continue;
    ++dropped_count;
    double best = 1.0;
    for (const auto& t : kept.tokens) best = std::min(best, cosine_distance(frame.token(i), t.feature));
    sum += kept.empty() ? 1.0 : best;
  }
  return sum;
}

// Runs one policy over every frame of `frames` with per-frame budgets. Score
// fields use both neighbours where they exist.
inline BenchCell bench_policy(const std::vector<TokenGrid>& frames, const Policy& policy,
                              double parameter, const OtsuOptions& options = {}) {
  BenchCell cell;
  cell.policy = std::string(to_string(policy.kind));
  cell.parameter = parameter;
  double dist_sum = 0.0;
  std::uint64_t dropped = 0;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    ScoreField scores{frames[t].frame_index(), std::nullopt, std::nullopt};
    if (policy.needs_scores()) {
      if (t > 0) scores.backward = backward_scores(frames[t], frames[t - 1]);
      if (t + 1 < frames.size()) scores.forward = forward_scores(frames[t], frames[t + 1]);
    }
    FrameEntry kept = (policy.needs_scores() && !scores.backward && !scores.forward)
                          ? entry_from_grid(frames[t])
                          : apply_policy(policy, frames[t], scores, options);
    cell.total_tokens += frames[t].token_count();
    cell.kept_tokens += kept.size();
    dist_sum += dropped_to_kept_distance_sum(frames[t], kept, dropped);
  }
  cell.drop_ratio = cell.total_tokens == 0
                        ? 0.0
                        : 1.0 - static_cast<double>(cell.kept_tokens) / static_cast<double>(cell.total_tokens);
  cell.proxy_fidelity = dropped == 0 ? 0.0 : dist_sum / static_cast<double>(dropped);
  return cell;
}

// Sweeps policies over a parameter grid. Ratio policies take their drop
// ratio from `ratios`, fixed_threshold takes theta from `thetas` (all three
// thresholds set equal), fluxmem (self-determined ratio) and fifo get a single row.
inline std::vector<BenchCell> run_bench(const std::vector<TokenGrid>& frames,
                                        const std::vector<PolicyKind>& policies,
                                        const std::vector<double>& ratios,
                                        const std::vector<double>& thetas, std::uint64_t seed,
                                        const OtsuOptions& options = {}) {
  std::vector<BenchCell> cells;
  for (auto kind : policies) {
    Policy p;
    p.kind = kind;
    p.seed = seed;
    switch (kind) {
      case PolicyKind::fluxmem:
        cells.push_back(bench_policy(frames, p, std::numeric_limits<double>::quiet_NaN(), options));
        break;
      case PolicyKind::fifo:
        cells.push_back(bench_policy(frames, p, 0.0, options));
        break;
      case PolicyKind::uniform:
      case PolicyKind::random:
        for (double r : ratios) {
          p.ratio = r;
          p.validate();
          cells.push_back(bench_policy(frames, p, r, options));
        }
        break;
      case PolicyKind::fixed_threshold:
        for (double th : thetas) {
          p.theta_backward = p.theta_forward = p.theta_sdc = th;
          p.validate();
          cells.push_back(bench_policy(frames, p, th, options));
        }
        break;
    }
  }
  return cells;
}

inline constexpr const char* kBenchCsvHeader =
    "policy,parameter,total_tokens,kept_tokens,drop_ratio,proxy_fidelity_mean_dropped_to_nearest_kept_"
    "cosine";

inline void write_bench_csv(std::ostream& out, const std::vector<BenchCell>& cells) {
  using detail::fmt_real;
  out << kBenchCsvHeader << '\n';
  for (const auto& c : cells) {
    out << c.policy << ',' << (std::isnan(c.parameter) ? std::string("adaptive") : fmt_real(c.parameter))
        << ',' << c.total_tokens << ',' << c.kept_tokens << ',' << fmt_real(c.drop_ratio) << ','
        << fmt_real(c.proxy_fidelity) << '\n';
  }
}

}  // namespace fluxmem
