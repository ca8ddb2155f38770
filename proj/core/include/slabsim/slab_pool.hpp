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

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "slabsim/common.hpp"

namespace slabsim {

enum class SlabState { kFree, kPartial, kFull };

// Configuration of one per-GPU KV byte pool. The pool is carved once into
// uniform slabs of slab_size_bytes; each slab can be formatted to exactly one
// of the registered block-size keys at a time. By default slab_size_bytes
// must be a positive multiple of lcm(block_size_keys), which makes every key
// divide the slab exactly (zero per-slab residue). Clearing
// require_lcm_alignment keeps any slab size >= every key and accounts the
// per-slab remainder (slab_size mod key) as slab_residue_bytes. A capacity
// tail smaller than one slab is recorded as permanently unusable and
// excluded from the accounting base.
struct SlabPoolConfig {
  Bytes capacity_bytes = 0;
  Bytes slab_size_bytes = 0;
  std::vector<Bytes> block_size_keys;
  bool require_lcm_alignment = true;
};

// Handle to one allocated KV block. The global id is what an engine stores
// in its logical block table:
//   global_block_id = slab_id * blocks_per_slab(key) + local_block_id.
// Global ids are namespaced per key; different keys may produce the same
// numeric id because each engine owns its own logical table.
struct BlockHandle {
  std::uint32_t slab_id = 0;
  std::uint32_t local_block_id = 0;
  std::uint64_t global_block_id = 0;
  Bytes key = 0;

  bool operator==(const BlockHandle&) const = default;
};

// Byte-exact partition of the pool's usable capacity.
//   allocated_bytes    bytes inside live blocks
//   free_block_bytes   free blocks of formatted slabs
//   slab_residue_bytes slab_size mod key, summed over formatted slabs
//   free_slab_bytes    unformatted slabs, reusable under any key
struct FragmentationStats {
  Bytes allocated_bytes = 0;
  Bytes free_block_bytes = 0;
  Bytes slab_residue_bytes = 0;
  Bytes free_slab_bytes = 0;

  Bytes usable_capacity() const {
    return allocated_bytes + free_block_bytes + slab_residue_bytes +
           free_slab_bytes;
  }
  bool operator==(const FragmentationStats&) const = default;
};

struct OpLogRecord {
  std::uint64_t seq = 0;
  double time = 0.0;
  // "alloc" or "free"
  const char* op = "";
  Bytes key = 0;
  std::uint32_t slab_id = 0;
  std::uint32_t local_block_id = 0;
  std::uint64_t global_block_id = 0;
};

void write_op_log_line(std::ostream& out, const OpLogRecord& rec);

// Slab-table allocator over a pre-allocated shared KV byte pool.
//
// All slabs have the same size. A FREE slab is unformatted and can serve any
// registered key; formatting it fixes its key and block count until every
// block is released, at which point it returns to the free list. Allocation
// prefers the lowest-id PARTIAL slab of the requested key and otherwise
// formats the lowest-id FREE slab, so identical operation sequences yield
// identical handles. No memory is ever requested after construction.
class SlabPool {
 public:
  explicit SlabPool(const SlabPoolConfig& config);

  // Allocates one block of `key`. Throws InvalidKeyError for unregistered
  // keys and PoolExhaustedError when no PARTIAL slab of the key and no FREE
  // slab remains; the caller decides whether to queue or shed load.
  BlockHandle alloc_block(Bytes key);

  // Same as alloc_block but reports exhaustion as nullopt.
  std::optional<BlockHandle> try_alloc_block(Bytes key);

  // Releases a block. FULL slabs become PARTIAL; a slab whose last block is
  // released is unformatted and returned to the free-slab list. Throws
  // InvalidFreeError on double frees and handles that were never issued.
  void free_block(const BlockHandle& handle);

  // floor(slab_size / key); constant for the pool's lifetime.
  std::uint64_t blocks_per_slab(Bytes key) const;

  // O(1) snapshot of the incrementally maintained counters.
  FragmentationStats snapshot_stats() const { return stats_; }

  const SlabPoolConfig& config() const { return config_; }
  std::uint32_t slab_count() const;
  Bytes slab_size() const { return config_.slab_size_bytes; }
  Bytes tail_remainder_bytes() const { return tail_remainder_; }
  Bytes usable_capacity_bytes() const { return usable_capacity_; }

  SlabState slab_state(std::uint32_t slab_id) const;
  // 0 when unformatted.
  Bytes slab_key(std::uint32_t slab_id) const;

  // Blocks of `key` allocatable right now: free blocks in PARTIAL slabs of
  // the key plus the capacity of FREE slabs.
  std::uint64_t free_blocks_for_key(Bytes key) const;
  std::uint64_t allocated_block_count() const { return allocated_blocks_; }
  std::uint64_t allocated_block_count(Bytes key) const;

  static std::uint64_t global_block_id(std::uint32_t slab_id,
                                       std::uint32_t local_block_id,
                                       std::uint64_t blocks_per_slab) {
    return static_cast<std::uint64_t>(slab_id) * blocks_per_slab +
           local_block_id;
  }
  // Inverse of the id formula: global -> (slab_id, local_block_id).
  static std::pair<std::uint32_t, std::uint32_t> split_global_block_id(
      std::uint64_t global_id, std::uint64_t blocks_per_slab) {
    return {static_cast<std::uint32_t>(global_id / blocks_per_slab),
            static_cast<std::uint32_t>(global_id % blocks_per_slab)};
  }

  // Structural equality: slab contents, free lists and counters. The op-log
  // sequence number is excluded so an alloc/free round trip compares equal
  // to the prior state.
  bool operator==(const SlabPool& other) const;

  // Recomputes every counter and list from the bitmaps and compares with the
  // maintained state; returns false and fills `why` on any mismatch.
  bool check_integrity(std::string* why = nullptr) const;

  void set_op_log(std::function<void(const OpLogRecord&)> sink) {
    op_log_ = std::move(sink);
  }
  void set_clock(std::function<double()> clock) { clock_ = std::move(clock); }

  // Test hook: flips one occupancy bit without touching any counter, so
  // check_integrity() must fail afterwards.
  void debug_flip_occupancy_bit(std::uint32_t slab_id,
                                std::uint32_t local_block_id);

 private:
  struct Slab {
    Bytes key = 0;  // 0 = unformatted
    std::uint32_t blocks_total = 0;
    std::uint32_t blocks_used = 0;
    std::uint32_t first_free_hint = 0;
    std::vector<std::uint64_t> occupancy;

    bool operator==(const Slab&) const = default;
  };

  void format_slab(std::uint32_t slab_id, Bytes key);
  void unformat_slab(std::uint32_t slab_id);
  std::uint32_t take_first_free(Slab& slab);
  void log_op(const char* op, const BlockHandle& handle);

  SlabPoolConfig config_;
  Bytes tail_remainder_ = 0;
  Bytes usable_capacity_ = 0;
  std::vector<Slab> slabs_;
  // key -> PARTIAL slab ids, lowest first.
  std::map<Bytes, std::set<std::uint32_t>> partial_by_key_;
  std::set<std::uint32_t> free_slabs_;
  std::map<Bytes, std::uint64_t> blocks_per_slab_;
  std::map<Bytes, std::uint64_t> allocated_blocks_by_key_;
  FragmentationStats stats_;
  std::uint64_t allocated_blocks_ = 0;
  std::uint64_t op_seq_ = 0;
  std::function<void(const OpLogRecord&)> op_log_;
  std::function<double()> clock_;
};

}  // namespace slabsim
