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

#include "doctest.h"
#include "slabsim/oracles.hpp"
#include "slabsim/slab_pool.hpp"
#include "slabsim/workload.hpp"

using namespace slabsim;

namespace {

constexpr Bytes kKiB = 1024;

SlabPoolConfig two_key_config() {
  SlabPoolConfig cfg;
  cfg.capacity_bytes = 4 * 64 * kKiB;
  cfg.slab_size_bytes = 64 * kKiB;
  cfg.block_size_keys = {64 * kKiB, 32 * kKiB};
  return cfg;
}

}  // namespace

TEST_CASE("pool creation validates slab and key geometry") {
  SlabPool pool(two_key_config());
  CHECK(pool.slab_count() == 4);
  for (std::uint32_t i = 0; i < 4; ++i) {
    CHECK(pool.slab_state(i) == SlabState::kFree);
    CHECK(pool.slab_key(i) == 0);
  }
  CHECK(pool.snapshot_stats().free_slab_bytes == 4 * 64 * kKiB);

  SlabPoolConfig coprime;
  coprime.capacity_bytes = 45;
  coprime.slab_size_bytes = 15;
  coprime.block_size_keys = {3, 5};  // lcm 15
  CHECK_NOTHROW(SlabPool{coprime});

  SlabPoolConfig not_multiple;
  not_multiple.capacity_bytes = 96 * kKiB;
  not_multiple.slab_size_bytes = 48 * kKiB;
  not_multiple.block_size_keys = {64 * kKiB};
  CHECK_THROWS_AS(SlabPool{not_multiple}, InvalidConfigError);

  SlabPoolConfig oversized_key;
  oversized_key.capacity_bytes = 64;
  oversized_key.slab_size_bytes = 16;
  oversized_key.block_size_keys = {32};
  CHECK_THROWS_AS(SlabPool{oversized_key}, InvalidConfigError);
}

TEST_CASE("capacity tail smaller than one slab is reported as unusable") {
  SlabPoolConfig cfg;
  cfg.capacity_bytes = 100;
  cfg.slab_size_bytes = 30;
  cfg.block_size_keys = {10, 15};
  SlabPool pool(cfg);
  CHECK(pool.slab_count() == 3);
  CHECK(pool.tail_remainder_bytes() == 10);
  CHECK(pool.usable_capacity_bytes() == 90);
  CHECK(pool.snapshot_stats().usable_capacity() == 90);
}

TEST_CASE("global block ids follow slab arithmetic") {
  SlabPoolConfig cfg;
  cfg.capacity_bytes = 4 * 64 * kKiB;
  cfg.slab_size_bytes = 64 * kKiB;
  cfg.block_size_keys = {32 * kKiB};  // 2 blocks per slab
  SlabPool pool(cfg);
  CHECK(pool.blocks_per_slab(32 * kKiB) == 2);

  const BlockHandle a = pool.alloc_block(32 * kKiB);
  CHECK(a.slab_id == 0);
  CHECK(a.local_block_id == 0);
  CHECK(a.global_block_id == 0);  // first allocation of an empty pool

  const BlockHandle b = pool.alloc_block(32 * kKiB);
  CHECK(b.global_block_id == 1);

  // Slab 0 is full; the next allocation formats slab 1 and lands on its
  // local block 0, so the engine-visible id is 1 * 2 + 0 = 2.
  const BlockHandle c = pool.alloc_block(32 * kKiB);
  CHECK(c.slab_id == 1);
  CHECK(c.local_block_id == 0);
  CHECK(c.global_block_id == 2);
}

TEST_CASE("allocation prefers the lowest partial slab of the key") {
  SlabPoolConfig cfg;
  cfg.capacity_bytes = 4 * 64 * kKiB;
  cfg.slab_size_bytes = 64 * kKiB;
  cfg.block_size_keys = {32 * kKiB};
  SlabPool pool(cfg);
  const BlockHandle a = pool.alloc_block(32 * kKiB);
  pool.alloc_block(32 * kKiB);           // slab 0 FULL
  pool.alloc_block(32 * kKiB);           // slab 1
  pool.free_block(a);                    // slab 0 PARTIAL again
  const BlockHandle d = pool.alloc_block(32 * kKiB);
  CHECK(d.slab_id == 0);
  CHECK(d.local_block_id == 0);
}

TEST_CASE("exhaustion and key mismatch") {
  SlabPool pool(two_key_config());
  const Bytes big = 64 * kKiB;
  const Bytes small = 32 * kKiB;
  // Three slabs formatted to the large key, one to the small key.
  for (int i = 0; i < 3; ++i) pool.alloc_block(big);
  pool.alloc_block(small);
  // The small-key slab still has a free block, but a large-key request can
  // use neither it nor any FREE slab.
  CHECK(pool.free_blocks_for_key(small) == 1);
  CHECK(pool.try_alloc_block(big) == std::nullopt);
  CHECK_THROWS_AS(pool.alloc_block(big), PoolExhaustedError);
  CHECK_THROWS_AS(pool.alloc_block(1234), InvalidKeyError);
}

TEST_CASE("free transitions and error paths") {
  SlabPoolConfig cfg;
  cfg.capacity_bytes = 2 * 64 * kKiB;
  cfg.slab_size_bytes = 64 * kKiB;
  cfg.block_size_keys = {32 * kKiB, 64 * kKiB};
  SlabPool pool(cfg);

  const BlockHandle a = pool.alloc_block(32 * kKiB);
  const BlockHandle b = pool.alloc_block(32 * kKiB);
  CHECK(pool.slab_state(a.slab_id) == SlabState::kFull);
  pool.free_block(a);
  CHECK(pool.slab_state(a.slab_id) == SlabState::kPartial);
  pool.free_block(b);
  CHECK(pool.slab_state(a.slab_id) == SlabState::kFree);
  CHECK(pool.slab_key(a.slab_id) == 0);

  // The emptied slab is reusable under the other key.
  const BlockHandle c = pool.alloc_block(64 * kKiB);
  CHECK(c.slab_id == 0);

  CHECK_THROWS_AS(pool.free_block(b), InvalidFreeError);  // stale handle
  pool.free_block(c);
  CHECK_THROWS_AS(pool.free_block(c), InvalidFreeError);  // double free

  BlockHandle bogus;
  bogus.slab_id = 99;
  bogus.key = 32 * kKiB;
  CHECK_THROWS_AS(pool.free_block(bogus), InvalidFreeError);
}

TEST_CASE("blocks_per_slab and slab residue accounting") {
  SlabPool pool(two_key_config());
  CHECK(pool.blocks_per_slab(32 * kKiB) == 2);
  CHECK(pool.blocks_per_slab(64 * kKiB) == 1);
  CHECK_THROWS_AS(pool.blocks_per_slab(7), InvalidKeyError);

  // Unaligned slabs are rejected by default and accounted as residue when
  // alignment is explicitly relaxed.
  SlabPoolConfig unaligned;
  unaligned.capacity_bytes = 45;
  unaligned.slab_size_bytes = 15;
  unaligned.block_size_keys = {4};
  CHECK_THROWS_AS(SlabPool{unaligned}, InvalidConfigError);

  unaligned.require_lcm_alignment = false;
  SlabPool relaxed(unaligned);
  CHECK(relaxed.blocks_per_slab(4) == 3);
  relaxed.alloc_block(4);
  const FragmentationStats stats = relaxed.snapshot_stats();
  CHECK(stats.slab_residue_bytes == 3);  // 15 mod 4 in the formatted slab
  CHECK(stats.allocated_bytes == 4);
  CHECK(stats.free_block_bytes == 8);
  CHECK(stats.free_slab_bytes == 30);
  CHECK(stats.usable_capacity() == 45);
}

TEST_CASE("snapshot stats track single steps") {
  SlabPool pool(two_key_config());
  FragmentationStats fresh = pool.snapshot_stats();
  CHECK(fresh.allocated_bytes == 0);
  CHECK(fresh.free_block_bytes == 0);
  CHECK(fresh.slab_residue_bytes == 0);
  CHECK(fresh.free_slab_bytes == pool.usable_capacity_bytes());

  pool.alloc_block(32 * kKiB);
  FragmentationStats one = pool.snapshot_stats();
  CHECK(one.allocated_bytes == 32 * kKiB);
  CHECK(one.free_block_bytes == 1 * 32 * kKiB);  // (blocks_total - 1) * key
  CHECK(one.free_slab_bytes == 3 * 64 * kKiB);
  CHECK(one.usable_capacity() == pool.usable_capacity_bytes());
}

TEST_CASE("alloc then free restores the exact prior state") {
  SlabPool pool(two_key_config());
  pool.alloc_block(32 * kKiB);
  const SlabPool before = pool;
  const BlockHandle h = pool.alloc_block(64 * kKiB);
  CHECK_FALSE(pool == before);
  pool.free_block(h);
  CHECK(pool == before);
}

TEST_CASE("identical operation sequences yield identical handles") {
  auto run = [] {
    SlabPool pool(two_key_config());
    std::vector<BlockHandle> handles;
    Rng rng(99);
    std::vector<BlockHandle> live;
    for (int i = 0; i < 500; ++i) {
      if (!live.empty() && rng.uniform01() < 0.4) {
        const std::size_t pick =
            static_cast<std::size_t>(rng.uniform01() * live.size());
        pool.free_block(live[pick]);
        live.erase(live.begin() + pick);
        continue;
      }
      const Bytes key = rng.uniform01() < 0.5 ? 32 * kKiB : 64 * kKiB;
      auto h = pool.try_alloc_block(key);
      if (h) {
        live.push_back(*h);
        handles.push_back(*h);
      }
    }
    return handles;
  };
  CHECK(run() == run());
}

TEST_CASE("randomized churn matches the whole-slab reference model") {
  SlabPoolConfig cfg;
  cfg.capacity_bytes = 16 * 24 * kKiB;
  cfg.slab_size_bytes = 24 * kKiB;
  cfg.block_size_keys = {2 * kKiB, 3 * kKiB, 4 * kKiB};
  SlabPool pool(cfg);
  WholeSlabRefModel ref(cfg);

  Rng rng(1234);
  std::vector<BlockHandle> live;
  int checked = 0;
  for (int i = 0; i < 20000; ++i) {
    const bool do_free = !live.empty() && rng.uniform01() < 0.45;
    if (do_free) {
      const std::size_t pick =
          static_cast<std::size_t>(rng.uniform01() * live.size());
      const BlockHandle h = live[pick];
      pool.free_block(h);
      ref.on_free(h.key, h.slab_id);
      live.erase(live.begin() + pick);
    } else {
      const Bytes key =
          cfg.block_size_keys[static_cast<std::size_t>(rng.uniform01() * 3)];
      const bool expect = ref.would_succeed(key);
      auto h = pool.try_alloc_block(key);
      REQUIRE(h.has_value() == expect);
      if (h) {
        const std::uint32_t ref_slab = ref.on_alloc(key);
        REQUIRE(h->slab_id == ref_slab);
        // Id formula and its inverse.
        const auto bps = pool.blocks_per_slab(key);
        REQUIRE(h->global_block_id ==
                SlabPool::global_block_id(h->slab_id, h->local_block_id, bps));
        const auto [sid, lid] =
            SlabPool::split_global_block_id(h->global_block_id, bps);
        REQUIRE(sid == h->slab_id);
        REQUIRE(lid == h->local_block_id);
        live.push_back(*h);
      }
    }
    const FragmentationStats stats = pool.snapshot_stats();
    REQUIRE(stats == ref.ledger());
    REQUIRE(stats.usable_capacity() == pool.usable_capacity_bytes());
    if (i % 1000 == 0) {
      std::string why;
      REQUIRE_MESSAGE(pool.check_integrity(&why), why);
      ++checked;
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("corrupted occupancy bitmap fails the integrity check") {
  SlabPool pool(two_key_config());
  pool.alloc_block(32 * kKiB);
  REQUIRE(pool.check_integrity());
  pool.debug_flip_occupancy_bit(0, 1);
  std::string why;
  CHECK_FALSE(pool.check_integrity(&why));
  CHECK_FALSE(why.empty());
}

TEST_CASE("op log records allocs and frees in order") {
  SlabPool pool(two_key_config());
  std::vector<OpLogRecord> log;
  pool.set_op_log([&](const OpLogRecord& r) { log.push_back(r); });
  const BlockHandle h = pool.alloc_block(32 * kKiB);
  pool.free_block(h);
  REQUIRE(log.size() == 2);
  CHECK(log[0].op == std::string("alloc"));
  CHECK(log[1].op == std::string("free"));
  CHECK(log[0].seq < log[1].seq);
  CHECK(log[0].key == 32 * kKiB);
}
