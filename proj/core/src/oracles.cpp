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

#include "slabsim/oracles.hpp"

#include <algorithm>

namespace slabsim {

WholeSlabRefModel::WholeSlabRefModel(const SlabPoolConfig& config)
    : slab_size_(config.slab_size_bytes) {
  const std::uint64_t num_slabs = config.capacity_bytes / config.slab_size_bytes;
  slots_.resize(num_slabs);
  for (Bytes key : config.block_size_keys) {
    blocks_per_slab_[key] = config.slab_size_bytes / key;
  }
  ledger_.free_slab_bytes = num_slabs * config.slab_size_bytes;
}

bool WholeSlabRefModel::would_succeed(Bytes key) const {
  const std::uint64_t per_slab = blocks_per_slab_.at(key);
  for (const Slot& s : slots_) {
    if (s.key == 0) return true;  // a free slab serves any key
    if (s.key == key && s.used < per_slab) return true;
  }
  return false;
}

std::uint32_t WholeSlabRefModel::on_alloc(Bytes key) {
  const std::uint64_t per_slab = blocks_per_slab_.at(key);
  std::optional<std::uint32_t> partial;
  std::optional<std::uint32_t> free_slot;
  for (std::uint32_t i = 0; i < slots_.size(); ++i) {
    const Slot& s = slots_[i];
    if (s.key == key && s.used < per_slab && !partial) partial = i;
    if (s.key == 0 && !free_slot) free_slot = i;
  }
  std::uint32_t chosen;
  if (partial) {
    chosen = *partial;
  } else if (free_slot) {
    chosen = *free_slot;
    Slot& s = slots_[chosen];
    s.key = key;
    const Bytes block_bytes = per_slab * key;
    ledger_.free_slab_bytes -= slab_size_;
    ledger_.free_block_bytes += block_bytes;
    ledger_.slab_residue_bytes += slab_size_ - block_bytes;
  } else {
    throw PoolExhaustedError("reference model: no capacity for key " +
                             std::to_string(key));
  }
  ++slots_[chosen].used;
  ledger_.allocated_bytes += key;
  ledger_.free_block_bytes -= key;
  return chosen;
}

void WholeSlabRefModel::on_free(Bytes key, std::uint32_t slab_id) {
  Slot& s = slots_.at(slab_id);
  if (s.key != key || s.used == 0) {
    throw InvalidFreeError("reference model: bad free");
  }
  --s.used;
  ledger_.allocated_bytes -= key;
  ledger_.free_block_bytes += key;
  if (s.used == 0) {
    const Bytes block_bytes = blocks_per_slab_.at(key) * key;
    ledger_.free_block_bytes -= block_bytes;
    ledger_.slab_residue_bytes -= slab_size_ - block_bytes;
    ledger_.free_slab_bytes += slab_size_;
    s.key = 0;
  }
}

std::size_t max_on_time_exhaustive(std::span<const Request> requests,
                                   Seconds now, const CostModel& cost,
                                   Tokens t_max) {
  const std::size_t n = requests.size();
  if (n > 20) {
    throw Error("exhaustive oracle limited to 20 requests");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (requests[a].deadline != requests[b].deadline) {
      return requests[a].deadline < requests[b].deadline;
    }
    return requests[a].request_id < requests[b].request_id;
  });

  std::size_t best = 0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    Seconds t = now;
    std::size_t count = 0;
    bool feasible = true;
    for (std::size_t idx : order) {
      if (!(mask & (1u << idx))) continue;
      const Request& r = requests[idx];
      t += chunked_prefill_seconds(cost.alpha, cost.beta, r.prompt_tokens,
                                   t_max);
      if (t >= r.deadline) {
        feasible = false;
        break;
      }
      ++count;
    }
    if (feasible) best = std::max(best, count);
  }
  return best;
}

std::size_t adaptive_on_time_count(std::vector<Request> waiting, Seconds now,
                                   const CostModel& cost, Tokens t_max) {
  std::size_t on_time = 0;
  while (!waiting.empty()) {
    const BatchDecision d = schedule_batch(waiting, now, cost, 1, t_max);
    auto take = [&](std::uint64_t id) {
      auto it = std::find_if(waiting.begin(), waiting.end(),
                             [id](const Request& r) { return r.request_id == id; });
      Request r = *it;
      waiting.erase(it);
      return r;
    };
    for (std::uint64_t id : d.dropped) take(id);
    if (d.admitted.empty()) {
      if (d.dropped.empty()) break;  // nothing admissible, nothing to drop
      continue;
    }
    const Request r = take(d.admitted.front());
    now += chunked_prefill_seconds(cost.alpha, cost.beta, r.prompt_tokens,
                                   t_max);
    if (now < r.deadline) ++on_time;
  }
  return on_time;
}

std::map<std::string, std::string> naive_greedy_placement(
    const std::vector<ModelProfile>& models, std::vector<GpuGroup> groups,
    const MmeFn& mme) {
  std::vector<ModelProfile> order = models;
  std::sort(order.begin(), order.end(),
            [](const ModelProfile& a, const ModelProfile& b) {
              const Bytes fa = base_footprint(a);
              const Bytes fb = base_footprint(b);
              if (fa != fb) return fa > fb;
              return a.model_id < b.model_id;
            });

  std::map<std::string, std::string> assignments;
  for (const ModelProfile& m : order) {
    const Bytes footprint = base_footprint(m);
    std::string best_group;
    double best_score = 0.0;
    for (const GpuGroup& g : groups) {
      if (g.member_gpus.size() != m.tp_degree) continue;
      Bytes charged = footprint;
      for (const auto& r : g.residents) charged += r.footprint_bytes;
      if (charged > g.total_memory) continue;
      const Bytes residual = g.total_memory - charged;

      GpuGroup joined = g;
      joined.residents.push_back({m.model_id, footprint});
      double slope_sum = mme(m, joined);
      for (const auto& r : g.residents) {
        auto rit = std::find_if(models.begin(), models.end(),
                                [&](const ModelProfile& p) {
                                  return p.model_id == r.model_id;
                                });
        slope_sum += mme(*rit, joined);
      }
      const double score = slope_sum /
                           static_cast<double>(joined.residents.size()) *
                           static_cast<double>(residual);
      if (best_group.empty() || score > best_score ||
          (score == best_score && g.group_id < best_group)) {
        best_group = g.group_id;
        best_score = score;
      }
    }
    if (best_group.empty()) {
      throw PlacementInfeasibleError("no group fits model " + m.model_id,
                                     m.model_id);
    }
    for (GpuGroup& g : groups) {
      if (g.group_id == best_group) {
        g.residents.push_back({m.model_id, footprint});
        break;
      }
    }
    assignments[m.model_id] = best_group;
  }
  return assignments;
}

}  // namespace slabsim
