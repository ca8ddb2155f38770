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

#include "slabsim/placement.hpp"

#include <algorithm>

namespace slabsim {

MmeFn default_mme_fn() {
  return [](const ModelProfile& p, const GpuGroup& g) {
    return estimate_mme(p, g.group_id).tokens_per_byte;
  };
}

Bytes PlacementPlan::group_residual(const std::string& group_id) const {
  for (const auto& g : groups) {
    if (g.group_id == group_id) return g.residual();
  }
  throw InvalidConfigError("unknown group: " + group_id);
}

namespace {

// The group after accommodating the candidate, with the residual recomputed.
GpuGroup joined_group(const GpuGroup& group, const ModelProfile& candidate,
                      Bytes candidate_footprint) {
  if (candidate_footprint > group.residual()) {
    throw InfeasibleCandidateError("model '" + candidate.model_id +
                                   "' does not fit on group '" +
                                   group.group_id + "'");
  }
  GpuGroup after = group;
  after.residents.push_back({candidate.model_id, candidate_footprint});
  return after;
}

std::vector<double> member_slopes(const GpuGroup& after,
                                  const ModelProfile& candidate,
                                  const ProfileMap& profiles,
                                  const MmeFn& mme) {
  std::vector<double> slopes;
  slopes.reserve(after.residents.size());
  for (const auto& r : after.residents) {
    if (r.model_id == candidate.model_id) {
      slopes.push_back(mme(candidate, after));
    } else {
      slopes.push_back(mme(profiles.at(r.model_id), after));
    }
  }
  return slopes;
}

}  // namespace

double score_proxy(const GpuGroup& group, const ModelProfile& candidate,
                   const ProfileMap& profiles, const MmeFn& mme) {
  const GpuGroup after = joined_group(group, candidate, base_footprint(candidate));
  const std::vector<double> slopes = member_slopes(after, candidate, profiles, mme);
  double sum = 0.0;
  for (double s : slopes) sum += s;
  return sum / static_cast<double>(slopes.size()) *
         static_cast<double>(after.residual());
}

double score_exact(const GpuGroup& group, const ModelProfile& candidate,
                   const ProfileMap& profiles, Bytes grid_step_bytes,
                   const MmeFn& mme) {
  if (grid_step_bytes == 0) {
    throw InvalidConfigError("score_exact: grid step must be >= 1 byte");
  }
  const GpuGroup after = joined_group(group, candidate, base_footprint(candidate));
  const std::vector<double> slopes = member_slopes(after, candidate, profiles, mme);
  const std::uint64_t units = after.residual() / grid_step_bytes;
  const std::size_t n = slopes.size();
  if (units < n) {
    return 0.0;  // no allocation can give every model a positive share
  }
  // Exhaustive search over compositions of `units` grid steps into n
  // positive parts. The objective is linear, so the total always uses all
  // units; recursion enumerates the split.
  double best = 0.0;
  std::vector<std::uint64_t> parts(n, 0);
  auto recurse = [&](auto&& self, std::size_t idx, std::uint64_t left) -> void {
    if (idx + 1 == n) {
      parts[idx] = left;
      double value = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        value += slopes[i] *
                 static_cast<double>(parts[i] * grid_step_bytes);
      }
      best = std::max(best, value);
      return;
    }
    const std::uint64_t reserve = n - idx - 1;  // one unit per later model
    for (std::uint64_t take = 1; take + reserve <= left; ++take) {
      parts[idx] = take;
      self(self, idx + 1, left - take);
    }
  };
  recurse(recurse, 0, units);
  return best;
}

std::vector<ModelProfile> expand_replicas(const std::vector<ModelProfile>& models) {
  std::vector<ModelProfile> expanded;
  expanded.reserve(models.size());
  for (const ModelProfile& m : models) {
    const std::uint32_t replicas = required_replicas(m);
    if (replicas == 1) {
      expanded.push_back(m);
      continue;
    }
    for (std::uint32_t i = 0; i < replicas; ++i) {
      ModelProfile replica = m;
      replica.model_id = m.model_id + "#" + std::to_string(i);
      replica.request_rate_rps = m.request_rate_rps / replicas;
      expanded.push_back(replica);
    }
  }
  return expanded;
}

PlacementPlan place_models(const std::vector<ModelProfile>& models,
                           std::vector<GpuGroup> groups,
                           const MmeFn& mme) {
  std::vector<ModelProfile> expanded = expand_replicas(models);
  for (const ModelProfile& m : expanded) {
    validate_profile(m);
  }
  const ProfileMap profiles = make_profile_map(expanded);

  struct Item {
    const ModelProfile* profile;
    Bytes footprint;
  };
  std::vector<Item> order;
  order.reserve(expanded.size());
  for (const ModelProfile& m : expanded) {
    order.push_back({&m, base_footprint(m)});
  }
  std::sort(order.begin(), order.end(), [](const Item& a, const Item& b) {
    if (a.footprint != b.footprint) return a.footprint > b.footprint;
    return a.profile->model_id < b.profile->model_id;
  });

  PlacementPlan plan;
  for (const Item& item : order) {
    const ModelProfile& m = *item.profile;
    ScoreTraceEntry trace;
    trace.model_id = m.model_id;
    trace.footprint_bytes = item.footprint;

    GpuGroup* best_group = nullptr;
    double best_score = 0.0;
    for (GpuGroup& g : groups) {
      if (g.member_gpus.size() != m.tp_degree) {
        trace.candidate_scores.emplace_back(g.group_id, std::nullopt);
        continue;
      }
      double score;
      try {
        score = score_proxy(g, m, profiles, mme);
      } catch (const InfeasibleCandidateError&) {
        trace.candidate_scores.emplace_back(g.group_id, std::nullopt);
        continue;
      }
      trace.candidate_scores.emplace_back(g.group_id, score);
      if (best_group == nullptr || score > best_score ||
          (score == best_score && g.group_id < best_group->group_id)) {
        best_group = &g;
        best_score = score;
      }
    }
    if (best_group == nullptr) {
      throw PlacementInfeasibleError(
          "model '" + m.model_id + "' fits on no candidate group", m.model_id);
    }
    best_group->residents.push_back({m.model_id, item.footprint});
    trace.chosen_group = best_group->group_id;
    plan.assignments[m.model_id] = best_group->group_id;
    plan.trace.push_back(std::move(trace));
  }

  for (const auto& [model_id, group_id] : plan.assignments) {
    if (!slo_feasible(profiles.at(model_id))) {
      throw InfeasibleSloError("model '" + model_id +
                               "' has no SLO-safe operating point");
    }
    (void)group_id;
  }
  plan.groups = std::move(groups);
  return plan;
}

}  // namespace slabsim
