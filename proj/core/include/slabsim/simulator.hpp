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

#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "slabsim/batching.hpp"
#include "slabsim/common.hpp"
#include "slabsim/placement.hpp"
#include "slabsim/precision.hpp"
#include "slabsim/slab_pool.hpp"

namespace slabsim {

// dynamic: co-located models draw blocks from one shared pool per GPU group.
// static: each model owns a private partition sized proportional to its base
// footprint.
enum class MemoryMode { kDynamicSlab, kStaticPartition };

// adaptive: deadline-aware batching with drops and deferrals.
// fcfs: admit in arrival order up to capacity caps, never drop.
enum class SchedPolicy { kAdaptive, kFcfs };

// per_model: every model allocates blocks of its own natural size.
// unified_max: every co-located model is forced onto the largest resident
// block size (the fixed-block baseline used for fragmentation comparisons).
enum class BlockPolicy { kPerModel, kUnifiedMax };

struct SlabSizing {
  bool auto_lcm = true;        // slab = lcm(co-located keys) * multiplier
  std::uint64_t multiplier = 1;
  Bytes explicit_bytes = 0;    // used when auto_lcm is false

  bool operator==(const SlabSizing&) const = default;
};

struct KvPoolSizing {
  // true: pool = group memory - sum(footprint - kv reservation) per group.
  bool residual = true;
  Bytes explicit_bytes = 0;  // used when residual is false; applied per group

  bool operator==(const KvPoolSizing&) const = default;
};

struct SimulationOptions {
  MemoryMode mode = MemoryMode::kDynamicSlab;
  SchedPolicy policy = SchedPolicy::kAdaptive;
  BlockPolicy block_policy = BlockPolicy::kPerModel;
  SlabSizing slab;
  KvPoolSizing kv_pool;
  Seconds duration_s = 0.0;
  std::uint64_t seed = 0;  // echoed into the report
  // Re-checks block conservation and pool integrity after every event.
  bool verify_invariants = false;
  // Minimum spacing between per-model time-series rows; 0 records every event.
  Seconds series_min_dt = 0.0;
  std::ostream* decision_log = nullptr;  // JSON lines, one per scheduling tick
  std::ostream* alloc_log = nullptr;     // one line per block alloc/free
};

struct RequestRecord {
  std::uint64_t request_id = 0;
  std::string model_id;
  Seconds arrival_time = 0.0;
  Tokens prompt_tokens = 0;
  Tokens output_tokens = 0;
  bool dropped = false;
  bool completed = false;
  bool on_time = false;  // first token within the TTFT SLO
  Seconds first_token_time = std::nan("");
  Seconds ttft = std::nan("");
  Seconds completion_time = std::nan("");
  Seconds admit_time = std::nan("");
  Seconds predicted_ttft_at_admit = std::nan("");
};

struct SeriesRow {
  Seconds time = 0.0;
  std::string model_id;
  std::uint64_t queue_len = 0;
  std::uint64_t running = 0;
  std::uint64_t held_blocks = 0;
  Tokens cached_tokens = 0;
  Bytes internal_frag_bytes = 0;
  FragmentationStats pool;
};

struct ModelMetrics {
  std::string model_id;
  std::string group_id;
  Bytes pool_bytes = 0;  // capacity of the pool (or partition) it draws from
  std::uint64_t arrived = 0;
  std::uint64_t completed = 0;
  std::uint64_t dropped = 0;
  std::uint64_t on_time = 0;
  std::uint64_t evictions = 0;
  std::uint64_t generated_tokens = 0;
  double ttft_slo_attainment = 1.0;
  double throughput_rps = 0.0;
  double slo_attained_throughput_rps = 0.0;
  double token_gen_tps = 0.0;
  double mean_cached_tokens = 0.0;
  double mean_internal_frag_bytes = 0.0;
  double mean_queue_len = 0.0;
  std::uint64_t peak_queue_len = 0;
};

struct GroupPoolInfo {
  std::string group_id;
  Bytes pool_bytes = 0;
  Bytes slab_size_bytes = 0;
  std::vector<Bytes> keys;
  FragmentationStats final_stats;
};

struct MetricsReport {
  std::uint64_t seed = 0;
  Seconds duration_s = 0.0;
  std::string mode;
  std::string policy;
  std::map<std::string, ModelMetrics> per_model;
  ModelMetrics aggregate;
  std::vector<GroupPoolInfo> pools;
  std::vector<RequestRecord> requests;
  std::vector<SeriesRow> series;
  std::uint64_t anchor_violations = 0;

  // Highest sampled queue length for `model_id` in [t0, t1).
  std::uint64_t peak_queue(const std::string& model_id, Seconds t0,
                           Seconds t1) const;
};

// Trace-driven event loop over the placed models. Each GPU group is a serial
// resource; resident engines take turns round-robin, one work item per turn.
// A work item is either an admitted batch's whole chunked prefill or one
// decode step, so an admitted batch's prefill finish time equals its
// prediction. Requests arriving mid-item queue until the item completes.
// Blocks are held per request (ceil(tokens / tokens_per_block)) and released
// in full on completion, drop or eviction. Pool exhaustion stalls the
// affected requests until frees occur; a fully stalled engine evicts its
// latest-deadline running request back to the queue as a last resort.
// Deterministic for a fixed (requests, options) input.
MetricsReport run_simulation(const PlacementPlan& plan,
                             const ProfileMap& profiles,
                             const std::vector<Request>& requests,
                             const SimulationOptions& options);

// Finite-difference memory-efficiency slope between two runs that differ
// only in pool size: delta mean cached tokens / delta pool bytes. Feeds
// back into ModelProfile::profiled_mme_tokens_per_byte.
double measure_mme(const MetricsReport& smaller, const MetricsReport& larger,
                   const std::string& model_id);

}  // namespace slabsim
