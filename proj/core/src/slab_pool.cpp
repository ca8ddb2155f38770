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

#include "slabsim/slab_pool.hpp"

#include <algorithm>
#include <bit>
#include <numeric>
#include <sstream>

namespace slabsim {

namespace {

constexpr std::uint32_t kBitsPerWord = 64;

std::uint64_t checked_lcm(const std::vector<Bytes>& keys, Bytes limit) {
  std::uint64_t l = 1;
  for (Bytes k : keys) {
    l = std::lcm(l, k);
    if (l > limit) {
      return 0;  // cannot divide anything <= limit
    }
  }
  return l;
}

bool bit_set(const std::vector<std::uint64_t>& words, std::uint32_t idx) {
  return (words[idx / kBitsPerWord] >> (idx % kBitsPerWord)) & 1u;
}

}  // namespace

void write_op_log_line(std::ostream& out, const OpLogRecord& rec) {
  out << rec.seq << ' ' << rec.time << ' ' << rec.op << ' ' << rec.key << ' '
      << rec.slab_id << ' ' << rec.local_block_id << ' '
      << rec.global_block_id << '\n';
}

SlabPool::SlabPool(const SlabPoolConfig& config) : config_(config) {
  if (config_.slab_size_bytes == 0) {
    throw InvalidConfigError("slab size must be positive");
  }
  if (config_.block_size_keys.empty()) {
    throw InvalidConfigError("at least one block-size key must be registered");
  }
  std::sort(config_.block_size_keys.begin(), config_.block_size_keys.end());
  config_.block_size_keys.erase(std::unique(config_.block_size_keys.begin(),
                                            config_.block_size_keys.end()),
                                config_.block_size_keys.end());
  for (Bytes key : config_.block_size_keys) {
    if (key == 0) {
      throw InvalidConfigError("block-size key must be >= 1");
    }
    if (key > config_.slab_size_bytes) {
      throw InvalidConfigError("block-size key " + std::to_string(key) +
                               " exceeds slab size " +
                               std::to_string(config_.slab_size_bytes));
    }
  }
  if (config_.require_lcm_alignment) {
    const std::uint64_t lcm =
        checked_lcm(config_.block_size_keys, config_.slab_size_bytes);
    if (lcm == 0 || config_.slab_size_bytes % lcm != 0) {
      throw InvalidConfigError(
          "slab size " + std::to_string(config_.slab_size_bytes) +
          " is not a multiple of lcm(block-size keys)");
    }
  }
  const std::uint64_t num_slabs = config_.capacity_bytes / config_.slab_size_bytes;
  if (num_slabs == 0) {
    throw InvalidConfigError("capacity smaller than one slab");
  }
  tail_remainder_ = config_.capacity_bytes % config_.slab_size_bytes;
  usable_capacity_ = num_slabs * config_.slab_size_bytes;

  slabs_.resize(num_slabs);
  for (std::uint32_t i = 0; i < num_slabs; ++i) {
    free_slabs_.insert(i);
  }
  for (Bytes key : config_.block_size_keys) {
    blocks_per_slab_[key] = config_.slab_size_bytes / key;
    partial_by_key_[key] = {};
    allocated_blocks_by_key_[key] = 0;
  }
  stats_.free_slab_bytes = usable_capacity_;
}

std::uint32_t SlabPool::slab_count() const {
  return static_cast<std::uint32_t>(slabs_.size());
}

SlabState SlabPool::slab_state(std::uint32_t slab_id) const {
  const Slab& s = slabs_.at(slab_id);
  if (s.key == 0) return SlabState::kFree;
  return s.blocks_used == s.blocks_total ? SlabState::kFull
                                         : SlabState::kPartial;
}

Bytes SlabPool::slab_key(std::uint32_t slab_id) const {
  return slabs_.at(slab_id).key;
}

std::uint64_t SlabPool::blocks_per_slab(Bytes key) const {
  auto it = blocks_per_slab_.find(key);
  if (it == blocks_per_slab_.end()) {
    throw InvalidKeyError("block-size key " + std::to_string(key) +
                          " is not registered");
  }
  return it->second;
}

std::uint64_t SlabPool::free_blocks_for_key(Bytes key) const {
  const std::uint64_t per_slab = blocks_per_slab(key);
  std::uint64_t free_blocks = free_slabs_.size() * per_slab;
  for (std::uint32_t sid : partial_by_key_.at(key)) {
    const Slab& s = slabs_[sid];
    free_blocks += s.blocks_total - s.blocks_used;
  }
  return free_blocks;
}

std::uint64_t SlabPool::allocated_block_count(Bytes key) const {
  auto it = allocated_blocks_by_key_.find(key);
  if (it == allocated_blocks_by_key_.end()) {
    throw InvalidKeyError("block-size key " + std::to_string(key) +
                          " is not registered");
  }
  return it->second;
}

void SlabPool::format_slab(std::uint32_t slab_id, Bytes key) {
  Slab& s = slabs_[slab_id];
  const std::uint64_t total = blocks_per_slab_.at(key);
  s.key = key;
  s.blocks_total = static_cast<std::uint32_t>(total);
  s.blocks_used = 0;
  s.first_free_hint = 0;
  s.occupancy.assign((total + kBitsPerWord - 1) / kBitsPerWord, 0);
  free_slabs_.erase(slab_id);
  partial_by_key_[key].insert(slab_id);

  const Bytes block_bytes = total * key;
  stats_.free_slab_bytes -= config_.slab_size_bytes;
  stats_.free_block_bytes += block_bytes;
  stats_.slab_residue_bytes += config_.slab_size_bytes - block_bytes;
}

void SlabPool::unformat_slab(std::uint32_t slab_id) {
  Slab& s = slabs_[slab_id];
  const Bytes block_bytes = static_cast<Bytes>(s.blocks_total) * s.key;
  stats_.free_block_bytes -= block_bytes;
  stats_.slab_residue_bytes -= config_.slab_size_bytes - block_bytes;
  stats_.free_slab_bytes += config_.slab_size_bytes;
  partial_by_key_[s.key].erase(slab_id);
  s = Slab{};
  free_slabs_.insert(slab_id);
}

std::uint32_t SlabPool::take_first_free(Slab& s) {
  for (std::uint32_t word = s.first_free_hint / kBitsPerWord;
       word < s.occupancy.size(); ++word) {
    std::uint64_t bits = s.occupancy[word];
    // Mask padding beyond blocks_total in the last word as occupied.
    const std::uint32_t valid =
        std::min<std::uint32_t>(kBitsPerWord, s.blocks_total - word * kBitsPerWord);
    if (valid < kBitsPerWord) {
      bits |= ~std::uint64_t{0} << valid;
    }
    if (bits != ~std::uint64_t{0}) {
      const std::uint32_t bit = static_cast<std::uint32_t>(std::countr_one(bits));
      const std::uint32_t local = word * kBitsPerWord + bit;
      s.occupancy[word] |= std::uint64_t{1} << bit;
      ++s.blocks_used;
      s.first_free_hint = local + 1;
      return local;
    }
  }
  throw Error("internal: slab advertised a free block but none found");
}

std::optional<BlockHandle> SlabPool::try_alloc_block(Bytes key) {
  auto pit = partial_by_key_.find(key);
  if (pit == partial_by_key_.end()) {
    throw InvalidKeyError("block-size key " + std::to_string(key) +
                          " is not registered");
  }
  std::uint32_t slab_id;
  if (!pit->second.empty()) {
    slab_id = *pit->second.begin();
  } else if (!free_slabs_.empty()) {
    slab_id = *free_slabs_.begin();
    format_slab(slab_id, key);
  } else {
    return std::nullopt;
  }

  Slab& s = slabs_[slab_id];
  const std::uint32_t local = take_first_free(s);
  if (s.blocks_used == s.blocks_total) {
    pit->second.erase(slab_id);
  }
  stats_.allocated_bytes += key;
  stats_.free_block_bytes -= key;
  ++allocated_blocks_;
  ++allocated_blocks_by_key_[key];

  BlockHandle handle;
  handle.slab_id = slab_id;
  handle.local_block_id = local;
  handle.global_block_id = global_block_id(slab_id, local, s.blocks_total);
  handle.key = key;
  log_op("alloc", handle);
  return handle;
}

BlockHandle SlabPool::alloc_block(Bytes key) {
  auto handle = try_alloc_block(key);
  if (!handle) {
    throw PoolExhaustedError("pool exhausted: no PARTIAL slab of key " +
                             std::to_string(key) + " and no FREE slab");
  }
  return *handle;
}

void SlabPool::free_block(const BlockHandle& handle) {
  if (handle.slab_id >= slabs_.size()) {
    throw InvalidFreeError("free of unknown slab id " +
                           std::to_string(handle.slab_id));
  }
  Slab& s = slabs_[handle.slab_id];
  if (s.key == 0 || s.key != handle.key ||
      handle.local_block_id >= s.blocks_total ||
      handle.global_block_id !=
          global_block_id(handle.slab_id, handle.local_block_id, s.blocks_total)) {
    throw InvalidFreeError("free of handle that was never issued");
  }
  if (!bit_set(s.occupancy, handle.local_block_id)) {
    throw InvalidFreeError("double free of block " +
                           std::to_string(handle.global_block_id) + " (key " +
                           std::to_string(handle.key) + ")");
  }

  const bool was_full = s.blocks_used == s.blocks_total;
  s.occupancy[handle.local_block_id / kBitsPerWord] &=
      ~(std::uint64_t{1} << (handle.local_block_id % kBitsPerWord));
  --s.blocks_used;
  s.first_free_hint = std::min(s.first_free_hint, handle.local_block_id);
  stats_.allocated_bytes -= handle.key;
  stats_.free_block_bytes += handle.key;
  --allocated_blocks_;
  --allocated_blocks_by_key_[handle.key];

  if (was_full) {
    partial_by_key_[handle.key].insert(handle.slab_id);
  }
  log_op("free", handle);
  if (s.blocks_used == 0) {
    unformat_slab(handle.slab_id);
  }
}

void SlabPool::log_op(const char* op, const BlockHandle& handle) {
  ++op_seq_;
  if (!op_log_) return;
  OpLogRecord rec;
  rec.seq = op_seq_;
  rec.time = clock_ ? clock_() : static_cast<double>(op_seq_);
  rec.op = op;
  rec.key = handle.key;
  rec.slab_id = handle.slab_id;
  rec.local_block_id = handle.local_block_id;
  rec.global_block_id = handle.global_block_id;
  op_log_(rec);
}

bool SlabPool::operator==(const SlabPool& other) const {
  return config_.capacity_bytes == other.config_.capacity_bytes &&
         config_.slab_size_bytes == other.config_.slab_size_bytes &&
         config_.block_size_keys == other.config_.block_size_keys &&
         slabs_ == other.slabs_ && partial_by_key_ == other.partial_by_key_ &&
         free_slabs_ == other.free_slabs_ && stats_ == other.stats_ &&
         allocated_blocks_ == other.allocated_blocks_ &&
         allocated_blocks_by_key_ == other.allocated_blocks_by_key_;
}

bool SlabPool::check_integrity(std::string* why) const {
  auto fail = [&](const std::string& reason) {
    if (why) *why = reason;
    return false;
  };
  FragmentationStats recomputed;
  std::uint64_t total_used_blocks = 0;
  std::map<Bytes, std::uint64_t> used_by_key;
  for (const auto& [key, n] : allocated_blocks_by_key_) {
    used_by_key[key] = 0;
  }

  for (std::uint32_t sid = 0; sid < slabs_.size(); ++sid) {
    const Slab& s = slabs_[sid];
    if (s.key == 0) {
      if (s.blocks_used != 0 || s.blocks_total != 0 || !s.occupancy.empty()) {
        return fail("unformatted slab " + std::to_string(sid) +
                    " has residual metadata");
      }
      if (!free_slabs_.count(sid)) {
        return fail("FREE slab " + std::to_string(sid) +
                    " missing from free-slab list");
      }
      recomputed.free_slab_bytes += config_.slab_size_bytes;
      continue;
    }
    if (!blocks_per_slab_.count(s.key)) {
      return fail("slab " + std::to_string(sid) + " has unregistered key");
    }
    if (s.blocks_total != blocks_per_slab_.at(s.key)) {
      return fail("slab " + std::to_string(sid) + " has wrong block count");
    }
    std::uint64_t pop = 0;
    for (std::size_t w = 0; w < s.occupancy.size(); ++w) {
      pop += static_cast<std::uint64_t>(std::popcount(s.occupancy[w]));
    }
    // Bits beyond blocks_total must stay clear.
    for (std::uint32_t b = s.blocks_total; b < s.occupancy.size() * kBitsPerWord;
         ++b) {
      if (bit_set(s.occupancy, b)) {
        return fail("slab " + std::to_string(sid) + " has out-of-range bit set");
      }
    }
    if (pop != s.blocks_used) {
      return fail("slab " + std::to_string(sid) +
                  " blocks_used disagrees with bitmap");
    }
    if (pop == 0) {
      return fail("formatted slab " + std::to_string(sid) + " is empty");
    }
    const bool partial = pop < s.blocks_total;
    const bool in_partial_list = partial_by_key_.at(s.key).count(sid) > 0;
    if (partial != in_partial_list) {
      return fail("slab " + std::to_string(sid) +
                  " partial-list membership disagrees with state");
    }
    if (free_slabs_.count(sid)) {
      return fail("formatted slab " + std::to_string(sid) +
                  " present in free-slab list");
    }
    const Bytes block_bytes = static_cast<Bytes>(s.blocks_total) * s.key;
    recomputed.allocated_bytes += pop * s.key;
    recomputed.free_block_bytes += (s.blocks_total - pop) * s.key;
    recomputed.slab_residue_bytes += config_.slab_size_bytes - block_bytes;
    total_used_blocks += pop;
    used_by_key[s.key] += pop;
  }

  if (!(recomputed == stats_)) {
    return fail("fragmentation counters disagree with recomputation");
  }
  if (recomputed.usable_capacity() != usable_capacity_) {
    return fail("conservation violated: components do not sum to capacity");
  }
  if (total_used_blocks != allocated_blocks_) {
    return fail("allocated block count disagrees with bitmaps");
  }
  if (used_by_key != allocated_blocks_by_key_) {
    return fail("per-key allocated counts disagree with bitmaps");
  }
  return true;
}

void SlabPool::debug_flip_occupancy_bit(std::uint32_t slab_id,
                                        std::uint32_t local_block_id) {
  Slab& s = slabs_.at(slab_id);
  s.occupancy.at(local_block_id / kBitsPerWord) ^=
      std::uint64_t{1} << (local_block_id % kBitsPerWord);
}

}  // namespace slabsim
