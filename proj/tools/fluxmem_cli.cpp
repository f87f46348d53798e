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

// fluxmem: generate synthetic token streams, replay them through the tiered
// memory, sweep baseline policies and run the brute-force oracles.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fluxmem/bench.hpp"
#include "fluxmem/fluxmem.hpp"
#include "fluxmem/oracle.hpp"

namespace {

using namespace fluxmem;

struct EngineFlags {
  std::uint32_t cs = 8;
  std::uint64_t cm = 64;
  std::uint64_t cl = 1024;
  std::string capacity_unit = "frames";
  double gamma = 0.5;
  std::uint32_t bins = 256;
  std::string policy = "fluxmem";
  double ratio = 0.0;
  double theta_backward = 0.0;
  double theta_forward = 0.0;
  double theta_sdc = 0.0;
  std::uint64_t seed = 0;
};

void add_engine_flags(CLI::App* cmd, EngineFlags& f) {
  cmd->add_option("--cs", f.cs, "Short-term capacity in frames (>= 2)")->capture_default_str();
  cmd->add_option("--cm", f.cm, "Mid-term capacity")->capture_default_str();
  cmd->add_option("--cl", f.cl, "Long-term capacity")->capture_default_str();
  cmd->add_option("--capacity-unit", f.capacity_unit, "frames | tokens")->capture_default_str();
  cmd->add_option("--gamma", f.gamma, "Proactive trigger sensitivity in [0, 1]")->capture_default_str();
  cmd->add_option("--bins", f.bins, "Otsu histogram bins")->capture_default_str();
  cmd->add_option("--policy", f.policy, "fluxmem | fifo | uniform | random | fixed_threshold")
      ->capture_default_str();
  cmd->add_option("--ratio", f.ratio, "Drop ratio for uniform/random")->capture_default_str();
  cmd->add_option("--theta-backward", f.theta_backward, "fixed_threshold: backward threshold");
  cmd->add_option("--theta-forward", f.theta_forward, "fixed_threshold: forward threshold");
  cmd->add_option("--theta-sdc", f.theta_sdc, "fixed_threshold: merge threshold");
  cmd->add_option("--seed", f.seed, "Seed for the random policy")->capture_default_str();
}

MemoryConfig to_config(const EngineFlags& f) {
  MemoryConfig c;
  c.short_capacity = f.cs;
  c.mid_capacity = f.cm;
  c.long_capacity = f.cl;
  c.unit = parse_capacity_unit(f.capacity_unit);
  c.gamma = f.gamma;
  c.bins = f.bins;
  c.validate();
  return c;
}

Policy to_policy(const EngineFlags& f) {
  Policy p;
  p.kind = parse_policy_kind(f.policy);
  p.ratio = f.ratio;
  p.theta_backward = f.theta_backward;
  p.theta_forward = f.theta_forward;
  p.theta_sdc = f.theta_sdc;
  p.seed = f.seed;
  p.validate();
  return p;
}

SceneSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scene spec " + path);
  return parse_scene_spec(in);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  return out;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

int cmd_gen(const std::string& spec_path, const std::string& out_path) {
  const SceneSpec spec = load_spec(spec_path);
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + out_path + " for writing");
  StreamWriter writer(out, StreamHeader{spec.height, spec.width, spec.dim, spec.num_frames});
  SceneGenerator gen(spec);
  while (auto f = gen.next()) writer.write(f->grid);
  const auto bytes = writer.finish();
  std::cout << "wrote " << spec.num_frames << " frames (" << bytes << " bytes) to " << out_path << "\n";
  return 0;
}

int cmd_run(const EngineFlags& flags, const std::string& input, const std::string& spec_path,
            const std::string& events_path, const std::string& out_prefix, bool no_timing) {
  RunOptions options{to_config(flags), to_policy(flags), !no_timing};

  std::set<std::uint64_t> queries;
  if (!events_path.empty()) {
    std::ifstream ev(events_path);
    if (!ev) throw std::runtime_error("cannot open events file " + events_path);
    queries = parse_event_timeline(ev);
  }

  RunReport report;
  if (!input.empty()) {
    std::ifstream in(input, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + input);
    StreamReader reader(in);
    report = run_replay([&] { return reader.next(); }, queries, options);
  } else {
    SceneGenerator gen(load_spec(spec_path));
    report = run_replay(
        [&]() -> std::optional<TokenGrid> {
          auto f = gen.next();
          if (!f) return std::nullopt;
          return std::move(f->grid);
        },
        queries, options);
  }

  const auto summary = run_summary_json(report);
  if (!out_prefix.empty()) {
    auto csv = open_out(out_prefix + ".csv");
    write_run_csv(csv, report);
    auto json = open_out(out_prefix + ".json");
    json << summary.dump(2) << "\n";
  }
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_bench(const std::string& spec_path, const std::string& policies_arg,
              const std::string& ratios_arg, const std::string& thetas_arg, std::uint64_t seed,
              std::uint32_t bins, const std::string& out_path) {
  const auto frames = generate_grids(load_spec(spec_path));
  std::vector<PolicyKind> policies;
  std::stringstream ss(policies_arg);
  for (std::string name; std::getline(ss, name, ',');) {
    if (!name.empty()) policies.push_back(parse_policy_kind(name));
  }
  const auto cells = run_bench(frames, policies, parse_list(ratios_arg), parse_list(thetas_arg), seed,
                               OtsuOptions{bins, 1e-6});
  if (out_path.empty()) {
    write_bench_csv(std::cout, cells);
  } else {
    auto out = open_out(out_path);
    write_bench_csv(out, cells);
    std::cout << "wrote " << cells.size() << " rows to " << out_path << "\n";
  }
  return 0;
}

int cmd_oracle(std::uint64_t seed, const std::string& sizes_arg, std::size_t trials,
               std::uint32_t dim) {
  std::vector<oracle::CheckOutcome> outcomes;
  outcomes.push_back(oracle::check_otsu(seed, trials * 5));
  for (double s : parse_list(sizes_arg)) {
    const auto n = static_cast<std::uint32_t>(s);
    outcomes.push_back(oracle::check_tas(seed + n, trials, n, n, dim));
    outcomes.push_back(oracle::check_sdc(seed + 7 * n, trials, n, n, dim));
  }
  bool ok = true;
  for (const auto& o : outcomes) {
    std::cout << (o.passed() ? "PASS " : "FAIL ") << o.name << " (" << o.trials << " trials, "
              << o.failures << " failures)";
    if (!o.passed()) std::cout << " first: " << o.first_failure;
    std::cout << "\n";
    ok = ok && o.passed();
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tiered streaming token memory: generate, replay, benchmark, verify"};
  app.require_subcommand(1);

  std::string spec_path, out_path, input, events, out_prefix;
  bool no_timing = false;
  EngineFlags flags;

  auto* gen = app.add_subcommand("gen", "Write a synthetic scene to an FMTS file");
  gen->add_option("--spec", spec_path, "Scene spec (key = value)")->required();
  gen->add_option("--out", out_path, "Output FMTS file")->required();

  auto* run = app.add_subcommand("run", "Replay a stream through the memory engine");
  add_engine_flags(run, flags);
  auto* in_opt = run->add_option("--input", input, "FMTS input file");
  auto* spec_opt = run->add_option("--spec", spec_path, "Scene spec to generate on the fly");
  in_opt->excludes(spec_opt);
  run->add_option("--events", events, "Event timeline (JSON lines)");
  run->add_option("--out", out_prefix, "Output prefix; writes <prefix>.csv and <prefix>.json");
  run->add_flag("--no-timing", no_timing, "Zero all wall-clock fields");

  std::string policies = "fluxmem,fifo,uniform,random", ratios = "0,0.25,0.5,0.75",
              thetas = "0.01,0.02,0.05,0.1,0.2,0.4";
  std::uint64_t bench_seed = 0;
  std::uint32_t bench_bins = 256;
  auto* bench = app.add_subcommand("bench", "Sweep policies over drop ratios / thresholds");
  bench->add_option("--spec", spec_path, "Scene spec")->required();
  bench->add_option("--policy", policies, "Comma-separated policies")->capture_default_str();
  bench->add_option("--ratio", ratios, "Comma-separated drop ratios")->capture_default_str();
  bench->add_option("--theta", thetas, "Comma-separated thresholds for fixed_threshold")
      ->capture_default_str();
  bench->add_option("--seed", bench_seed, "Seed for the random policy")->capture_default_str();
  bench->add_option("--bins", bench_bins, "Otsu histogram bins")->capture_default_str();
  bench->add_option("--out", out_path, "Output CSV (stdout when omitted)");

  std::uint64_t oracle_seed = 0;
  std::string sizes = "8,16";
  std::size_t trials = 100;
  std::uint32_t dim = 16;
  auto* orc = app.add_subcommand("oracle", "Check fast paths against brute-force oracles");
  orc->add_option("--seed", oracle_seed)->capture_default_str();
  orc->add_option("--sizes", sizes, "Comma-separated grid side lengths")->capture_default_str();
  orc->add_option("--trials", trials, "Trials per check")->capture_default_str();
  orc->add_option("--dim", dim, "Feature dimension")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(spec_path, out_path);
    if (run->parsed()) {
      if (input.empty() && spec_path.empty()) throw std::invalid_argument("run needs --input or --spec");
      return cmd_run(flags, input, spec_path, events, out_prefix, no_timing);
    }
    if (bench->parsed()) return cmd_bench(spec_path, policies, ratios, thetas, bench_seed, bench_bins, out_path);
    if (orc->parsed()) return cmd_oracle(oracle_seed, sizes, trials, dim);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
