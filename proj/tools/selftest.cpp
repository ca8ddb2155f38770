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

#include "selftest.hpp"

#include <functional>
#include <string>
#include <vector>

#include "slabsim/batching.hpp"
#include "slabsim/oracles.hpp"
#include "slabsim/placement.hpp"
#include "slabsim/slab_pool.hpp"
#include "slabsim/workload.hpp"

namespace slabsim {

namespace {

bool allocator_replay_suite(std::string* detail, std::uint64_t seed) {
  SlabPoolConfig cfg;
  cfg.capacity_bytes = 16 * 24 * 1024;
  cfg.slab_size_bytes = 24 * 1024;
  cfg.block_size_keys = {2 * 1024, 3 * 1024, 4 * 1024};
  SlabPool pool(cfg);
  WholeSlabRefModel ref(cfg);
  Rng rng(seed);
  std::vector<BlockHandle> live;
  for (int i = 0; i < 20000; ++i) {
    if (!live.empty() && rng.uniform01() < 0.45) {
      const std::size_t pick = static_cast<std::size_t>(rng.uniform01() * live.size());
      pool.free_block(live[pick]);
      ref.on_free(live[pick].key, live[pick].slab_id);
      live.erase(live.begin() + pick);
    } else {
      const Bytes key =
          cfg.block_size_keys[static_cast<std::size_t>(rng.uniform01() * 3)];
      const bool expect = ref.would_succeed(key);
      auto h = pool.try_alloc_block(key);
      if (h.has_value() != expect) {
        *detail = "success/failure disagrees with the reference model";
        return false;
      }
      if (h) {
        if (h->slab_id != ref.on_alloc(key)) {
          *detail = "slab choice disagrees with the reference model";
          return false;
        }
        live.push_back(*h);
      }
    }
    if (!(pool.snapshot_stats() == ref.ledger())) {
      *detail = "byte ledgers diverged at op " + std::to_string(i);
      return false;
    }
  }
  std::string why;
  if (!pool.check_integrity(&why)) {
    *detail = why;
    return false;
  }
  return true;
}

bool corruption_detection_suite(std::string* detail, std::uint64_t) {
  SlabPoolConfig cfg;
  cfg.capacity_bytes = 4 * 64 * 1024;
  cfg.slab_size_bytes = 64 * 1024;
  cfg.block_size_keys = {16 * 1024};
  SlabPool pool(cfg);
  pool.alloc_block(16 * 1024);
  if (!pool.check_integrity()) {
    *detail = "clean pool failed its integrity check";
    return false;
  }
  pool.debug_flip_occupancy_bit(0, 2);
  if (pool.check_integrity()) {
    *detail = "injected bitmap corruption went undetected";
    return false;
  }
  return true;
}

bool batching_oracle_suite(std::string* detail, std::uint64_t seed) {
  const CostModel cost{0.01, 1e-4, 0.002, 1e-4, 0.0};
  Rng rng(seed);
  int equal = 0;
  const int trials = 100;
  for (int trial = 0; trial < trials; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform01() * 11);
    std::vector<Request> reqs;
    for (std::size_t i = 0; i < n; ++i) {
      Request r;
      r.request_id = i;
      r.prompt_tokens = 1 + static_cast<Tokens>(rng.uniform01() * 2000);
      r.deadline = rng.uniform01() * 0.6;
      reqs.push_back(r);
    }
    std::vector<std::pair<Seconds, Seconds>> jobs;
    for (const Request& r : reqs) {
      jobs.emplace_back(cost.alpha + cost.beta * static_cast<double>(r.prompt_tokens),
                        r.deadline);
    }
    const std::size_t mh = moore_hodgson(jobs);
    const std::size_t best = max_on_time_exhaustive(reqs, 0.0, cost, 1 << 20);
    const std::size_t got = adaptive_on_time_count(reqs, 0.0, cost, 1 << 20);
    if (mh != best) {
      *detail = "classical rule missed the exhaustive optimum";
      return false;
    }
    if (got + 1 < mh) {
      *detail = "scheduler fell more than one request behind the optimum";
      return false;
    }
    if (got == mh) ++equal;
  }
  if (equal < trials * 95 / 100) {
    *detail = "scheduler matched the optimum on only " + std::to_string(equal) +
              "/" + std::to_string(trials) + " instances";
    return false;
  }
  return true;
}

bool placement_oracle_suite(std::string* detail, std::uint64_t seed) {
  Rng rng(seed);
  for (int trial = 0; trial < 50; ++trial) {
    const int n_models = 1 + static_cast<int>(rng.uniform01() * 3);
    const int n_groups = 1 + static_cast<int>(rng.uniform01() * 2);
    std::vector<ModelProfile> models;
    for (int i = 0; i < n_models; ++i) {
      ModelProfile p;
      p.model_id = "m" + std::to_string(i);
      p.precision = {16, 16, rng.uniform01() < 0.5 ? 16 : 8};
      p.num_kv_heads = 8;
      p.head_dim = 128;
      p.num_layers = 1 + static_cast<std::uint32_t>(rng.uniform01() * 8);
      p.tokens_per_block = 16;
      p.weight_bytes = (5 + static_cast<Bytes>(rng.uniform01() * 30)) * 1024;
      p.avg_activation_bytes = 0;
      p.avg_kv_bytes = 0;
      p.request_rate_rps = 1.0;
      p.ttft_slo_s = 10.0;
      p.prefill_cost = {0.001, 1e-5};
      p.decode_cost = {0.002, 1e-4, 0.0};
      p.throughput_table = {{1, 10.0}};
      models.push_back(p);
    }
    std::vector<GpuGroup> groups;
    for (int i = 0; i < n_groups; ++i) {
      GpuGroup g;
      g.group_id = "g" + std::to_string(i);
      g.member_gpus = {"gpu" + std::to_string(i)};
      g.total_memory = (60 + static_cast<Bytes>(rng.uniform01() * 60)) * 1024;
      groups.push_back(g);
    }
    bool naive_ok = true;
    std::map<std::string, std::string> naive;
    try {
      naive = naive_greedy_placement(models, groups);
    } catch (const PlacementInfeasibleError&) {
      naive_ok = false;
    }
    try {
      const PlacementPlan plan = place_models(models, groups);
      if (!naive_ok || plan.assignments != naive) {
        *detail = "greedy placement diverged from the re-execution at trial " +
                  std::to_string(trial);
        return false;
      }
    } catch (const PlacementInfeasibleError&) {
      if (naive_ok) {
        *detail = "placement infeasible where the re-execution succeeded";
        return false;
      }
    }
  }
  return true;
}

}  // namespace

int run_selftest(std::ostream& out, std::uint64_t seed) {
  struct Suite {
    const char* name;
    std::function<bool(std::string*, std::uint64_t)> run;
  };
  const std::vector<Suite> suites = {
      {"allocator-replay-ledger", allocator_replay_suite},
      {"allocator-corruption-detect", corruption_detection_suite},
      {"batching-on-time-oracle", batching_oracle_suite},
      {"placement-re-execution", placement_oracle_suite},
  };
  int failures = 0;
  for (const Suite& suite : suites) {
    std::string detail;
    bool ok = false;
    try {
      ok = suite.run(&detail, seed);
    } catch (const std::exception& e) {
      detail = e.what();
    }
    out << (ok ? "[PASS] " : "[FAIL] ") << suite.name;
    if (!ok && !detail.empty()) out << ": " << detail;
    out << "\n";
    if (!ok) ++failures;
  }
  return failures;
}

}  // namespace slabsim
