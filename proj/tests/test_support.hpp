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
#include <string>

#include "slabsim/batching.hpp"
#include "slabsim/precision.hpp"

namespace slabsim::test {

// 8-head / 128-dim / single-layer reference architecture; kv_bits selects
// the variant. Token size: kv16 -> 4096 B, kv8 -> 2048 B, kv4 -> 1024 B.
inline ModelProfile make_profile(const std::string& id, int kv_bits,
                                 std::uint32_t num_layers = 1,
                                 std::uint32_t tp_degree = 1) {
  ModelProfile p;
  p.model_id = id;
  p.precision = {16, 16, kv_bits};
  p.num_kv_heads = 8;
  p.head_dim = 128;
  p.num_layers = num_layers;
  p.tp_degree = tp_degree;
  p.tokens_per_block = 16;
  p.quant_param_bytes_per_block = 0;
  p.weight_bytes = 1'000'000;
  p.avg_activation_bytes = 1'000;
  p.avg_kv_bytes = 2'000;
  p.avg_prompt_tokens = 64;
  p.avg_seq_tokens = 256;
  p.request_rate_rps = 1.0;
  p.ttft_slo_s = 1.0;
  p.prefill_cost = {0.01, 1e-4};
  p.decode_cost = {0.002, 1e-4, 1e-9};
  p.throughput_table = {{1, 1.0}, {4, 4.0}, {16, 16.0}};
  p.max_batch_requests = 64;
  p.max_batched_tokens = 8192;
  return p;
}

inline Request make_request(std::uint64_t id, Seconds arrival, Tokens prompt,
                            Seconds deadline, Tokens output = 1,
                            const std::string& model = "m") {
  Request r;
  r.request_id = id;
  r.model_id = model;
  r.arrival_time = arrival;
  r.prompt_tokens = prompt;
  r.output_tokens = output;
  r.deadline = deadline;
  return r;
}

}  // namespace slabsim::test
