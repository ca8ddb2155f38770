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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "slabsim/common.hpp"

namespace slabsim {

// Bit-widths of one quantization variant: weights, activations, KV cache.
// Each must be 4, 8 or 16 bits.
struct PrecisionSpec {
  int weight_bits = 16;
  int activation_bits = 16;
  int kv_bits = 16;

  bool operator==(const PrecisionSpec&) const = default;
};

struct PrefillCost {
  double alpha_s = 0.0;           // fixed overhead per prefill chunk
  double beta_s_per_token = 0.0;  // marginal cost per prompt token

  bool operator==(const PrefillCost&) const = default;
};

struct DecodeCost {
  double gamma_s = 0.0;                  // fixed cost per decode step
  double delta_s_per_seq = 0.0;          // per running sequence
  double epsilon_s_per_cached_token = 0.0;  // per cached token read

  bool operator==(const DecodeCost&) const = default;
};

// Per-model architecture, precision, parallelism, cost-model coefficients,
// demand and SLO. avg_activation_bytes / avg_kv_bytes are profiled per-shard
// per-sequence averages; the operating batch size scales them into the base
// footprint. throughput_table maps profiled batch size to sustained req/s.
struct ModelProfile {
  std::string model_id;
  PrecisionSpec precision;
  std::uint32_t num_kv_heads = 0;
  std::uint32_t head_dim = 0;
  std::uint32_t num_layers = 1;
  std::uint32_t tp_degree = 1;
  Tokens tokens_per_block = 16;
  Bytes quant_param_bytes_per_block = 0;
  Bytes weight_bytes = 0;
  Bytes avg_activation_bytes = 0;
  Bytes avg_kv_bytes = 0;
  Tokens avg_prompt_tokens = 256;
  Tokens avg_seq_tokens = 512;
  double request_rate_rps = 1.0;
  Seconds ttft_slo_s = 1.0;
  PrefillCost prefill_cost;
  DecodeCost decode_cost;
  std::map<std::uint32_t, double> throughput_table;
  std::uint32_t max_batch_requests = 256;
  Tokens max_batched_tokens = 8192;
  // Externally measured memory-efficiency slope; when present it overrides
  // the analytic estimate in estimate_mme.
  std::optional<double> profiled_mme_tokens_per_byte;

  bool operator==(const ModelProfile&) const = default;
};

// Marginal memory efficiency of a model on a GPU group: extra generated
// tokens per extra byte of KV memory.
struct MmeEstimate {
  std::string model_id;
  std::string group_id;
  double tokens_per_byte = 0.0;
};

using ProfileMap = std::map<std::string, ModelProfile>;

ProfileMap make_profile_map(const std::vector<ModelProfile>& models);

// Throws InvalidProfileError when any structural invariant is violated.
void validate_profile(const ModelProfile& profile);

// Bytes of KV cache one token occupies on one shard:
// (num_kv_heads / tp_degree) * head_dim * 2 * (kv_bits / 8), computed in
// bits so a 4-bit KV stays exact. Throws InvalidProfileError when the head
// count does not divide by the TP degree or the size is fractional.
Bytes token_size(const ModelProfile& profile);

// Byte size of one logical KV block spanning all layers:
// num_layers * (tokens_per_block * token_size + quant_param_bytes_per_block).
Bytes kv_block_size(const ModelProfile& profile);

// Smallest profiled batch size whose throughput meets the request rate.
// Throws InfeasibleRateError (carrying the best achievable rate) when none
// does; the caller escalates to data-parallel replication.
std::uint32_t operating_batch_size(const ModelProfile& profile);

// Base footprint per GPU shard: weights / tp_degree plus activation and KV
// averages charged at the operating batch size.
Bytes base_footprint(const ModelProfile& profile);

// KV component of the base footprint (avg_kv_bytes at the operating batch).
Bytes kv_reservation(const ModelProfile& profile);

// Chunked prefill latency of a batch of `batch_size` average-length prompts.
Seconds predicted_ttft_at_batch(const ModelProfile& profile,
                                std::uint32_t batch_size);

// True when some profiled batch size meets the request rate with predicted
// TTFT within the SLO.
bool slo_feasible(const ModelProfile& profile);

// Minimum data-parallel replica count so that rate / replicas is met at a
// batch size whose predicted TTFT fits the SLO. Throws InfeasibleSloError
// when even batch size 1 cannot meet the deadline.
std::uint32_t required_replicas(const ModelProfile& profile);

// Analytic memory-efficiency slope: the reciprocal of the per-token KV cost,
// amortizing half a block of expected internal waste over the mean sequence.
double default_mme_tokens_per_byte(const ModelProfile& profile);

// Uses the profiled slope when the profile carries one, otherwise the
// analytic estimate.
MmeEstimate estimate_mme(const ModelProfile& profile, std::string_view group_id);

}  // namespace slabsim
