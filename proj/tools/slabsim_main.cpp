// Copyright 2026 The slabsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "selftest.hpp"
#include "slabsim/scenario.hpp"
#include "slabsim/simulator.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitSelftest = 3;

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<std::string> policy;
  std::string sweep;
};

std::vector<slabsim::Bytes> parse_sweep(const std::string& text) {
  std::vector<slabsim::Bytes> sizes;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    sizes.push_back(std::stoull(item));
  }
  return sizes;
}

slabsim::ScenarioConfig load_config(const CommonArgs& args) {
  slabsim::ScenarioConfig cfg = slabsim::parse_scenario_file(args.config_path);
  if (args.seed) cfg.seed = *args.seed;
  if (args.mode) cfg.mode = *args.mode;
  if (args.policy) cfg.policy = *args.policy;
  slabsim::validate_scenario(cfg);
  return cfg;
}

std::filesystem::path out_path(const CommonArgs& args, const std::string& configured,
                               const std::string& fallback) {
  const std::string name = configured.empty() ? fallback : configured;
  return std::filesystem::path(args.out_dir) / name;
}

slabsim::MetricsReport run_one(const slabsim::ScenarioConfig& cfg,
                               const slabsim::PlacementPlan& plan,
                               const slabsim::ProfileMap& profiles,
                               const std::vector<slabsim::Request>& requests,
                               const CommonArgs& args,
                               std::optional<slabsim::Bytes> pool_override) {
  slabsim::SimulationOptions opt = slabsim::build_sim_options(cfg);
  if (pool_override) {
    opt.kv_pool.residual = false;
    opt.kv_pool.explicit_bytes = *pool_override;
  }
  std::ofstream decision_log, alloc_log;
  if (!cfg.output.decision_log_path.empty()) {
    decision_log.open(out_path(args, cfg.output.decision_log_path, ""));
    opt.decision_log = &decision_log;
  }
  if (!cfg.output.alloc_log_path.empty()) {
    alloc_log.open(out_path(args, cfg.output.alloc_log_path, ""));
    opt.alloc_log = &alloc_log;
  }
  return slabsim::run_simulation(plan, profiles, requests, opt);
}

void write_file(const std::filesystem::path& path,
                const std::function<void(std::ostream&)>& writer) {
  std::ofstream out(path);
  if (!out) {
    throw slabsim::InvalidConfigError("cannot write output file: " +
                                      path.string());
  }
  writer(out);
}

int cmd_place(const CommonArgs& args) {
  const slabsim::ScenarioConfig cfg = load_config(args);
  const slabsim::PlacementPlan plan = slabsim::resolve_placement(cfg);
  slabsim::write_placement_report(plan, std::cout);
  std::filesystem::create_directories(args.out_dir);
  write_file(out_path(args, "", "placement.json"), [&](std::ostream& out) {
    slabsim::write_placement_report(plan, out);
  });
  return kExitOk;
}

int cmd_simulate(const CommonArgs& args) {
  const slabsim::ScenarioConfig cfg = load_config(args);
  const slabsim::PlacementPlan plan = slabsim::resolve_placement(cfg);
  const slabsim::ProfileMap profiles =
      slabsim::make_profile_map(slabsim::expand_replicas(cfg.models));
  const auto requests = slabsim::resolve_requests(cfg, slabsim::make_profile_map(cfg.models));
  std::filesystem::create_directories(args.out_dir);

  const std::vector<slabsim::Bytes> sweep = parse_sweep(args.sweep);
  if (sweep.empty()) {
    const slabsim::MetricsReport report =
        run_one(cfg, plan, profiles, requests, args, std::nullopt);
    write_file(out_path(args, cfg.output.summary_path, "summary.json"),
               [&](std::ostream& out) { slabsim::write_summary_json(report, out); });
    write_file(out_path(args, cfg.output.series_path, "series.csv"),
               [&](std::ostream& out) { slabsim::write_series_csv(report, out); });
    if (!cfg.output.request_log_path.empty()) {
      write_file(out_path(args, cfg.output.request_log_path, ""),
                 [&](std::ostream& out) { slabsim::write_request_log_csv(report, out); });
    }
    std::cout << "aggregate attainment "
              << report.aggregate.ttft_slo_attainment << ", throughput "
              << report.aggregate.throughput_rps << " req/s, token throughput "
              << report.aggregate.token_gen_tps << " tok/s\n";
    return kExitOk;
  }

  // Pool-size sweep: one run per size plus finite-difference slopes.
  std::vector<slabsim::MetricsReport> reports;
  for (slabsim::Bytes pool : sweep) {
    reports.push_back(run_one(cfg, plan, profiles, requests, args, pool));
    const std::string name = "summary_" + std::to_string(pool) + ".json";
    const slabsim::MetricsReport& report = reports.back();
    write_file(out_path(args, "", name), [&](std::ostream& out) {
      slabsim::write_summary_json(report, out);
    });
  }
  std::ostringstream table;
  table << "{\n  \"slopes_tokens_per_byte\": {\n";
  bool first_model = true;
  for (const auto& [model_id, metrics] : reports.front().per_model) {
    (void)metrics;
    if (!first_model) table << ",\n";
    first_model = false;
    table << "    \"" << model_id << "\": [";
    for (std::size_t i = 0; i + 1 < reports.size(); ++i) {
      if (i) table << ", ";
      table << slabsim::measure_mme(reports[i], reports[i + 1], model_id);
    }
    table << "]";
  }
  table << "\n  },\n  \"pool_bytes\": [";
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    if (i) table << ", ";
    table << sweep[i];
  }
  table << "]\n}\n";
  write_file(out_path(args, "", "mme_sweep.json"),
             [&](std::ostream& out) { out << table.str(); });
  std::cout << table.str();
  return kExitOk;
}

int cmd_selftest(const CommonArgs& args) {
  const std::uint64_t seed = args.seed.value_or(1);
  const int failures = slabsim::run_selftest(std::cout, seed);
  return failures == 0 ? kExitOk : kExitSelftest;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KV slab pool and SLO-aware scheduling simulator"};
  app.require_subcommand(1);

  CommonArgs args;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* config_opt = sub->add_option("--config", args.config_path,
                                       "scenario configuration file (JSON)");
    if (needs_config) config_opt->required();
    sub->add_option("--out-dir", args.out_dir, "output directory");
    sub->add_option("--seed", args.seed, "override the scenario seed");
    sub->add_option("--mode", args.mode, "dynamic | static")
        ->check(CLI::IsMember({"dynamic", "static"}));
    sub->add_option("--policy", args.policy, "adaptive | fcfs")
        ->check(CLI::IsMember({"adaptive", "fcfs"}));
  };

  CLI::App* place = app.add_subcommand("place", "compute a model-to-GPU placement");
  add_common(place, true);

  CLI::App* simulate = app.add_subcommand("simulate", "run the trace-driven simulation");
  add_common(simulate, true);
  simulate->add_option("--sweep", args.sweep,
                       "comma-separated KV pool sizes in bytes; runs one "
                       "simulation per size and reports efficiency slopes");

  CLI::App* mme = app.add_subcommand(
      "mme-sweep", "pool-size sweep reporting cached-token slopes");
  add_common(mme, true);
  mme->add_option("--sweep", args.sweep, "comma-separated KV pool sizes in bytes")
      ->required();

  CLI::App* selftest = app.add_subcommand("selftest", "run the bundled oracle suites");
  add_common(selftest, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (place->parsed()) return cmd_place(args);
    if (simulate->parsed()) return cmd_simulate(args);
    if (mme->parsed()) return cmd_simulate(args);
    if (selftest->parsed()) return cmd_selftest(args);
  } catch (const slabsim::InfeasibleRateError& e) {
    std::cerr << "infeasible: " << e.what()
              << " (max achievable " << e.max_achievable_rps << " req/s)\n";
    return kExitInfeasible;
  } catch (const slabsim::PlacementInfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const slabsim::InfeasibleSloError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const slabsim::InfeasibleCandidateError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const slabsim::InvalidScenarioError& e) {
    std::cerr << "infeasible scenario: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const slabsim::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
