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

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "slabsim/common.hpp"
#include "slabsim/precision.hpp"

namespace slabsim {

// A placement candidate: a single GPU, or the TP-sized group a sharded model
// spans. total_memory is the per-GPU budget of the identical members; the
// residents' footprints are per-shard, so the accounting is per GPU.
struct GpuGroup {
  std::string group_id;
  std::vector<std::string> member_gpus;
  Bytes total_memory = 0;

  struct Resident {
    std::string model_id;
    Bytes footprint_bytes = 0;
    bool operator==(const Resident&) const = default;
  };
  std::vector<Resident> residents;

  Bytes footprint_total() const {
    Bytes sum = 0;
    for (const auto& r : residents) sum += r.footprint_bytes;
    return sum;
  }
  // Contested memory left after charging base footprints.
  Bytes residual() const { return total_memory - footprint_total(); }

  bool operator==(const GpuGroup&) const = default;
};

// Memory-efficiency provider, injectable so tests can pin slopes.
using MmeFn = std::function<double(const ModelProfile&, const GpuGroup&)>;

MmeFn default_mme_fn();

struct ScoreTraceEntry {
  std::string model_id;
  Bytes footprint_bytes = 0;
  // group_id -> score; nullopt when the candidate does not fit there.
  std::vector<std::pair<std::string, std::optional<double>>> candidate_scores;
  std::string chosen_group;
};

struct PlacementPlan {
  std::map<std::string, std::string> assignments;  // model -> group
  std::vector<GpuGroup> groups;                    // post-placement snapshot
  std::vector<ScoreTraceEntry> trace;

  Bytes group_residual(const std::string& group_id) const;
};

// Placement score of `candidate` on `group`: the candidate joins the
// residents, the residual is recomputed after charging its footprint, and
// the score is the residents' mean memory-efficiency slope times that
// residual:
//   score = (1/|G|) * sum_m mme(m) * residual(G)   over the joined group G.
// Throws InfeasibleCandidateError when the candidate does not fit.
double score_proxy(const GpuGroup& group, const ModelProfile& candidate,
                   const ProfileMap& profiles, const MmeFn& mme = default_mme_fn());

// Reference upper bound: maximizes sum_m mme(m) * dk_m over grid allocations
// with every dk_m >= grid_step_bytes and sum dk_m <= residual. Exhaustive
// over compositions, so keep the joined group small; fine grids approach
// residual * max_m mme(m).
double score_exact(const GpuGroup& group, const ModelProfile& candidate,
                   const ProfileMap& profiles, Bytes grid_step_bytes,
                   const MmeFn& mme = default_mme_fn());

// Expands models whose rate needs data-parallel replication into independent
// per-replica profiles ("id#0", "id#1", ...) with the rate split evenly.
// Throws InfeasibleSloError when replication cannot help.
std::vector<ModelProfile> expand_replicas(const std::vector<ModelProfile>& models);

// Greedy placement: replicas expanded, models sorted by descending base
// footprint (ties by model_id), each assigned to the feasible group with the
// highest score (ties by lowest group_id). Residents and residuals update
// between models. Throws PlacementInfeasibleError naming the first model
// that fits nowhere.
PlacementPlan place_models(const std::vector<ModelProfile>& models,
                           std::vector<GpuGroup> groups,
                           const MmeFn& mme = default_mme_fn());

}  // namespace slabsim
