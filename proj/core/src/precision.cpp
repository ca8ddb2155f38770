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

#include "slabsim/precision.hpp"

#include <algorithm>
#include <cmath>

namespace slabsim {

namespace {

bool valid_bits(int bits) { return bits == 4 || bits == 8 || bits == 16; }

}  // namespace

ProfileMap make_profile_map(const std::vector<ModelProfile>& models) {
  ProfileMap map;
  for (const auto& m : models) {
    if (!map.emplace(m.model_id, m).second) {
      throw InvalidProfileError("duplicate model_id: " + m.model_id);
    }
  }
  return map;
}

void validate_profile(const ModelProfile& p) {
  auto fail = [&](const std::string& why) {
    throw InvalidProfileError("model '" + p.model_id + "': " + why);
  };
  if (p.model_id.empty()) fail("empty model_id");
  if (!valid_bits(p.precision.weight_bits) ||
      !valid_bits(p.precision.activation_bits) ||
      !valid_bits(p.precision.kv_bits)) {
    fail("precision bits must be 4, 8 or 16");
  }
  if (p.num_kv_heads == 0 || p.head_dim == 0 || p.num_layers == 0) {
    fail("architecture counts must be positive");
  }
  if (p.tp_degree == 0) fail("tp_degree must be positive");
  if (p.num_kv_heads % p.tp_degree != 0) {
    fail("num_kv_heads not divisible by tp_degree");
  }
  if (p.tokens_per_block < 1) fail("tokens_per_block must be >= 1");
  if (p.request_rate_rps <= 0.0) fail("request_rate must be positive");
  if (p.ttft_slo_s <= 0.0) fail("ttft_slo must be positive");
  if (p.prefill_cost.alpha_s < 0.0 || p.prefill_cost.beta_s_per_token <= 0.0) {
    fail("prefill cost requires alpha >= 0 and beta > 0");
  }
  if (p.decode_cost.gamma_s < 0.0 || p.decode_cost.delta_s_per_seq < 0.0 ||
      p.decode_cost.epsilon_s_per_cached_token < 0.0) {
    fail("decode cost coefficients must be non-negative");
  }
  if (p.avg_prompt_tokens < 1 || p.avg_seq_tokens < 1) {
    fail("average token counts must be >= 1");
  }
  if (p.max_batch_requests < 1 || p.max_batched_tokens < 1) {
    fail("batch caps must be >= 1");
  }
  if (p.profiled_mme_tokens_per_byte && *p.profiled_mme_tokens_per_byte <= 0.0) {
    fail("profiled MME slope must be positive");
  }
}

Bytes token_size(const ModelProfile& p) {
  if (p.tp_degree == 0 || p.num_kv_heads % p.tp_degree != 0) {
    throw InvalidProfileError("model '" + p.model_id +
                              "': num_kv_heads not divisible by tp_degree");
  }
  // Keys and values for every head on this shard, in bits for exactness.
  const std::uint64_t bits = static_cast<std::uint64_t>(p.num_kv_heads / p.tp_degree) *
                             p.head_dim * 2 * static_cast<std::uint64_t>(p.precision.kv_bits);
  if (bits % 8 != 0) {
    throw InvalidProfileError("model '" + p.model_id +
                              "': fractional-byte token size rejected");
  }
  return bits / 8;
}

Bytes kv_block_size(const ModelProfile& p) {
  if (p.tokens_per_block < 1) {
    throw InvalidProfileError("model '" + p.model_id +
                              "': tokens_per_block must be >= 1");
  }
  const Bytes per_layer =
      p.tokens_per_block * token_size(p) + p.quant_param_bytes_per_block;
  return static_cast<Bytes>(p.num_layers) * per_layer;
}

std::uint32_t operating_batch_size(const ModelProfile& p) {
  if (p.throughput_table.empty()) {
    throw InvalidProfileError("model '" + p.model_id +
                              "': empty throughput table");
  }
  double best = 0.0;
  for (const auto& [batch, rps] : p.throughput_table) {
    best = std::max(best, rps);
    if (rps >= p.request_rate_rps) {
      return batch;
    }
  }
  throw InfeasibleRateError("model '" + p.model_id +
                                "': no profiled batch size sustains " +
                                std::to_string(p.request_rate_rps) + " req/s",
                            best);
}

Bytes base_footprint(const ModelProfile& p) {
  const std::uint32_t b = operating_batch_size(p);
  return p.weight_bytes / p.tp_degree +
         (p.avg_activation_bytes + p.avg_kv_bytes) * b;
}

Bytes kv_reservation(const ModelProfile& p) {
  return p.avg_kv_bytes * operating_batch_size(p);
}

Seconds predicted_ttft_at_batch(const ModelProfile& p, std::uint32_t batch_size) {
  const Tokens tokens = static_cast<Tokens>(batch_size) * p.avg_prompt_tokens;
  return chunked_prefill_seconds(p.prefill_cost.alpha_s,
                                 p.prefill_cost.beta_s_per_token, tokens,
                                 p.max_batched_tokens);
}

bool slo_feasible(const ModelProfile& p) {
  for (const auto& [batch, rps] : p.throughput_table) {
    if (rps >= p.request_rate_rps &&
        predicted_ttft_at_batch(p, batch) <= p.ttft_slo_s) {
      return true;
    }
  }
  return false;
}

std::uint32_t required_replicas(const ModelProfile& p) {
  if (p.throughput_table.empty()) {
    throw InvalidProfileError("model '" + p.model_id +
                              "': empty throughput table");
  }
  // Best sustained rate among SLO-safe batch sizes; replication divides the
  // offered rate but cannot shorten prefill.
  double best_safe = 0.0;
  for (const auto& [batch, rps] : p.throughput_table) {
    if (predicted_ttft_at_batch(p, batch) <= p.ttft_slo_s) {
      best_safe = std::max(best_safe, rps);
    }
  }
  if (best_safe <= 0.0) {
    throw InfeasibleSloError("model '" + p.model_id +
                             "': no batch size meets the TTFT SLO");
  }
  std::uint32_t replicas =
      static_cast<std::uint32_t>(std::ceil(p.request_rate_rps / best_safe));
  replicas = std::max<std::uint32_t>(replicas, 1);
  // Guard against floating-point boundary effects in the ceiling.
  while (p.request_rate_rps / replicas > best_safe) {
    ++replicas;
  }
  return replicas;
}

double default_mme_tokens_per_byte(const ModelProfile& p) {
  const double block = static_cast<double>(kv_block_size(p));
  const double tpb = static_cast<double>(p.tokens_per_block);
  // Uniform sequence lengths leave half a block unused on average; amortize
  // that waste over the mean sequence.
  const double frag_factor = 1.0 + tpb / (2.0 * static_cast<double>(p.avg_seq_tokens));
  const double bytes_per_token = block / tpb * frag_factor;
  return 1.0 / bytes_per_token;
}

MmeEstimate estimate_mme(const ModelProfile& p, std::string_view group_id) {
  MmeEstimate est;
  est.model_id = p.model_id;
  est.group_id = std::string(group_id);
  est.tokens_per_byte = p.profiled_mme_tokens_per_byte
                            ? *p.profiled_mme_tokens_per_byte
                            : default_mme_tokens_per_byte(p);
  return est;
}

}  // namespace slabsim
