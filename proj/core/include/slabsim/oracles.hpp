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
//
// Deliberately naive reference implementations. They re-derive results the
// optimized paths must match and are shared by the unit tests, the
// acceptance suite and the CLI selftest. Keep them simple; speed does not
// matter here.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slabsim/batching.hpp"
#include "slabsim/common.hpp"
#include "slabsim/placement.hpp"
#include "slabsim/slab_pool.hpp"

namespace slabsim {

// Mirror of the slab pool that tracks only whole-slab availability: per slab
// a key and a used-block count, no bitmaps and no block ids. Predicts
// allocation success, chooses slabs by the same lowest-id rule, and keeps an
// independent byte ledger for the conservation comparison.
class WholeSlabRefModel {
 public:
  explicit WholeSlabRefModel(const SlabPoolConfig& config);

  bool would_succeed(Bytes key) const;
  // Returns the slab id the reference policy picks.
  std::uint32_t on_alloc(Bytes key);
  void on_free(Bytes key, std::uint32_t slab_id);

  FragmentationStats ledger() const { return ledger_; }

 private:
  struct Slot {
    Bytes key = 0;
    std::uint64_t used = 0;
  };
  Bytes slab_size_;
  std::map<Bytes, std::uint64_t> blocks_per_slab_;
  std::vector<Slot> slots_;
  FragmentationStats ledger_;
};

// Maximum on-time count over all subsets served one request at a time in
// deadline order starting at `now`. Exponential; inputs must stay small.
std::size_t max_on_time_exhaustive(std::span<const Request> requests,
                                   Seconds now, const CostModel& cost,
                                   Tokens t_max);

// Drives schedule_batch with n_max = 1 over the waiting set, serving each
// admitted request to completion before the next tick, and returns how many
// finished before their deadline.
std::size_t adaptive_on_time_count(std::vector<Request> waiting, Seconds now,
                                   const CostModel& cost, Tokens t_max);

// Plain re-execution of the greedy placement loop: sort by descending
// footprint, rescore every candidate group per model with the mean-slope
// proxy written out longhand, assign to the best (ties to the lower group
// id). No shared code with place_models beyond the arithmetic primitives.
std::map<std::string, std::string> naive_greedy_placement(
    const std::vector<ModelProfile>& models, std::vector<GpuGroup> groups,
    const MmeFn& mme = default_mme_fn());

}  // namespace slabsim
