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

#include <vector>

#include "benchmark/benchmark.h"
#include "slabsim/slab_pool.hpp"
#include "slabsim/workload.hpp"

namespace {

using namespace slabsim;

SlabPoolConfig pool_config(int num_keys) {
  SlabPoolConfig cfg;
  cfg.slab_size_bytes = 12 * 4096;
  cfg.capacity_bytes = 1024 * cfg.slab_size_bytes;
  const std::vector<Bytes> keys = {4096, 2 * 4096, 3 * 4096, 6 * 4096};
  cfg.block_size_keys.assign(keys.begin(), keys.begin() + num_keys);
  return cfg;
}

void bm_alloc_free_churn(benchmark::State& state) {
  const SlabPoolConfig cfg = pool_config(static_cast<int>(state.range(0)));
  SlabPool pool(cfg);
  Rng rng(42);
  std::vector<BlockHandle> live;
  live.reserve(1 << 16);
  for (auto _ : state) {
    if (!live.empty() && rng.uniform01() < 0.5) {
      const std::size_t pick =
          static_cast<std::size_t>(rng.uniform01() * live.size());
      pool.free_block(live[pick]);
      live[pick] = live.back();
      live.pop_back();
    } else {
      const Bytes key = cfg.block_size_keys[static_cast<std::size_t>(
          rng.uniform01() * cfg.block_size_keys.size())];
      auto h = pool.try_alloc_block(key);
      if (h) {
        live.push_back(*h);
      }
    }
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(bm_alloc_free_churn)->Arg(1)->Arg(2)->Arg(4);

void bm_format_unformat_cycle(benchmark::State& state) {
  const SlabPoolConfig cfg = pool_config(2);
  SlabPool pool(cfg);
  for (auto _ : state) {
    // One block per slab boundary: each pair formats and releases a slab.
    const BlockHandle h = pool.alloc_block(cfg.block_size_keys[0]);
    pool.free_block(h);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(bm_format_unformat_cycle);

void bm_snapshot_stats(benchmark::State& state) {
  const SlabPoolConfig cfg = pool_config(4);
  SlabPool pool(cfg);
  Rng rng(7);
  std::vector<BlockHandle> live;
  for (int i = 0; i < 2000; ++i) {
    auto h = pool.try_alloc_block(cfg.block_size_keys[static_cast<std::size_t>(
        rng.uniform01() * cfg.block_size_keys.size())]);
    if (h) live.push_back(*h);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(pool.snapshot_stats());
  }
  for (const BlockHandle& h : live) pool.free_block(h);
}
BENCHMARK(bm_snapshot_stats);

}  // namespace
