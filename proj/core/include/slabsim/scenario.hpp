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

#pragma once

#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "slabsim/common.hpp"
#include "slabsim/placement.hpp"
#include "slabsim/precision.hpp"
#include "slabsim/simulator.hpp"
#include "slabsim/workload.hpp"

namespace slabsim {

struct GpuSpec {
  std::string id;
  Bytes memory_bytes = 0;
  bool operator==(const GpuSpec&) const = default;
};

struct GroupSpec {
  std::string id;
  std::vector<std::string> gpus;
  bool operator==(const GroupSpec&) const = default;
};

struct OutputSpec {
  std::string summary_path;
  std::string series_path;
  std::string decision_log_path;
  std::string alloc_log_path;
  std::string request_log_path;
  bool operator==(const OutputSpec&) const = default;
};

// One self-contained experiment: cluster, model profiles, workload, memory
// management knobs and output paths. See the README for the JSON schema.
struct ScenarioConfig {
  std::uint64_t seed = 0;
  Seconds duration_s = 0.0;
  std::string mode = "dynamic";            // dynamic | static
  std::string policy = "adaptive";         // adaptive | fcfs
  std::string block_policy = "per-model";  // per-model | unified-max
  SlabSizing slab;
  KvPoolSizing kv_pool;
  std::vector<GpuSpec> gpus;
  std::vector<GroupSpec> groups;
  std::vector<ModelProfile> models;
  std::map<std::string, std::string> placement;  // optional; empty = compute
  std::vector<ModelWorkload> workload;
  std::string trace_file;  // optional; replaces generation
  OutputSpec output;

  bool operator==(const ScenarioConfig&) const = default;
};

// Parsing reports the offending JSON path in the error message.
ScenarioConfig parse_scenario_json(const std::string& text);
ScenarioConfig parse_scenario_file(const std::string& path);
std::string serialize_scenario(const ScenarioConfig& config);

// Structural validation beyond per-field parsing: id resolution, group
// symmetry, cap/distribution sanity. Throws InvalidConfigError.
void validate_scenario(const ScenarioConfig& config);

std::vector<GpuGroup> build_groups(const ScenarioConfig& config);
WorkloadSpec build_workload_spec(const ScenarioConfig& config);
SimulationOptions build_sim_options(const ScenarioConfig& config);

// Explicit placement from the config when present, otherwise the greedy
// placement over the configured cluster.
PlacementPlan resolve_placement(const ScenarioConfig& config);

// Generated workload, or the trace file when configured.
std::vector<Request> resolve_requests(const ScenarioConfig& config,
                                      const ProfileMap& profiles);

void write_placement_report(const PlacementPlan& plan, std::ostream& out);
void write_summary_json(const MetricsReport& report, std::ostream& out);
void write_series_csv(const MetricsReport& report, std::ostream& out);
void write_request_log_csv(const MetricsReport& report, std::ostream& out);

// Serialized summary + series, used for byte-identity checks.
std::string report_fingerprint(const MetricsReport& report);

}  // namespace slabsim
