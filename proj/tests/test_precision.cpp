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

#include "doctest.h"
#include "slabsim/precision.hpp"
#include "slabsim/workload.hpp"
#include "test_support.hpp"

using namespace slabsim;
using test::make_profile;

TEST_CASE("token_size matches hand arithmetic") {
  CHECK(token_size(make_profile("fp16", 16)) == 4096);
  CHECK(token_size(make_profile("fp8", 8)) == 2048);
  CHECK(token_size(make_profile("kv4", 4)) == 1024);
  CHECK(token_size(make_profile("fp16-tp2", 16, 1, 2)) == 2048);
}

TEST_CASE("token_size rejects head counts not divisible by TP") {
  ModelProfile p = make_profile("bad", 16);
  p.num_kv_heads = 9;
  p.tp_degree = 2;
  CHECK_THROWS_AS(token_size(p), InvalidProfileError);
}

TEST_CASE("kv_block_size matches hand arithmetic") {
  ModelProfile fp16 = make_profile("fp16", 16);
  CHECK(kv_block_size(fp16) == 65536);  // 16 tokens x 4096 B, one layer

  ModelProfile fp8 = make_profile("fp8", 8);
  fp8.quant_param_bytes_per_block = 64;
  CHECK(kv_block_size(fp8) == 32832);  // 16 x 2048 + 64

  ModelProfile layered = make_profile("fp16-l4", 16, 4);
  CHECK(kv_block_size(layered) == 4 * 65536);

  ModelProfile bad = make_profile("bad", 16);
  bad.tokens_per_block = 0;
  CHECK_THROWS_AS(kv_block_size(bad), InvalidProfileError);
}

TEST_CASE("kv_block_size is strictly monotone in tokens and quant params") {
  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    ModelProfile p = make_profile("m", 8);
    p.tokens_per_block = 1 + static_cast<Tokens>(rng.uniform01() * 64);
    p.quant_param_bytes_per_block = static_cast<Bytes>(rng.uniform01() * 256);
    ModelProfile more_tokens = p;
    more_tokens.tokens_per_block += 1;
    ModelProfile more_params = p;
    more_params.quant_param_bytes_per_block += 1;
    CHECK(kv_block_size(more_tokens) > kv_block_size(p));
    CHECK(kv_block_size(more_params) > kv_block_size(p));
  }
}

TEST_CASE("token_size scaling laws") {
  Rng rng(13);
  for (int i = 0; i < 50; ++i) {
    ModelProfile p = make_profile("m", 16);
    p.tp_degree = 1 + static_cast<std::uint32_t>(rng.uniform01() * 4);
    p.num_kv_heads = p.tp_degree * (1 + static_cast<std::uint32_t>(rng.uniform01() * 8));
    p.head_dim = 2 * (1 + static_cast<std::uint32_t>(rng.uniform01() * 128));

    ModelProfile heads2 = p;
    heads2.num_kv_heads *= 2;
    CHECK(token_size(heads2) == 2 * token_size(p));

    ModelProfile dim2 = p;
    dim2.head_dim *= 2;
    CHECK(token_size(dim2) == 2 * token_size(p));

    ModelProfile tp1 = p;
    tp1.tp_degree = 1;
    CHECK(token_size(tp1) == p.tp_degree * token_size(p));

    ModelProfile kv8 = p;
    kv8.precision.kv_bits = 8;
    CHECK(2 * token_size(kv8) == token_size(p));
  }
}

TEST_CASE("operating batch size picks the smallest satisfying entry") {
  ModelProfile p = make_profile("m", 16);
  p.throughput_table = {{1, 1.0}, {4, 3.0}, {8, 5.0}};
  p.request_rate_rps = 2.0;
  CHECK(operating_batch_size(p) == 4);

  p.request_rate_rps = 1.0;
  p.throughput_table = {{1, 1.0}};
  CHECK(operating_batch_size(p) == 1);  // boundary equality admits

  p.request_rate_rps = 6.0;
  p.throughput_table = {{1, 1.0}, {8, 5.0}};
  try {
    operating_batch_size(p);
    FAIL("expected InfeasibleRateError");
  } catch (const InfeasibleRateError& e) {
    CHECK(e.max_achievable_rps == doctest::Approx(5.0));
  }
}

TEST_CASE("base footprint charges averages at the operating batch size") {
  ModelProfile p = make_profile("m", 16);
  p.weight_bytes = 1000;
  p.avg_activation_bytes = 10;
  p.avg_kv_bytes = 20;
  p.throughput_table = {{1, 1.0}, {4, 3.0}, {8, 5.0}};
  p.request_rate_rps = 2.0;
  CHECK(base_footprint(p) == 1000 + 30 * 4);
  CHECK(kv_reservation(p) == 20 * 4);

  p.tp_degree = 2;
  p.num_kv_heads = 8;
  CHECK(base_footprint(p) == 500 + 30 * 4);  // weights sharded
}

TEST_CASE("base footprint is non-decreasing in the request rate") {
  ModelProfile p = make_profile("m", 16);
  p.throughput_table = {{1, 1.0}, {2, 2.0}, {4, 4.0}, {8, 8.0}};
  double prev = 0.0;
  for (double rate : {0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 8.0}) {
    p.request_rate_rps = rate;
    const double fp = static_cast<double>(base_footprint(p));
    CHECK(fp >= prev);
    prev = fp;
  }
}

TEST_CASE("required replicas") {
  ModelProfile p = make_profile("m", 16);
  p.prefill_cost = {0.01, 1e-4};
  p.avg_prompt_tokens = 100;
  p.max_batched_tokens = 8192;
  // ttft(b) = 0.01 + 0.01 * b
  p.throughput_table = {{1, 1.0}, {2, 2.5}, {4, 5.0}};

  p.ttft_slo_s = 0.06;  // every batch size safe
  p.request_rate_rps = 4.0;
  CHECK(required_replicas(p) == 1);

  p.ttft_slo_s = 0.025;  // only batch size 1 is SLO-safe
  CHECK(required_replicas(p) == 4);

  p.ttft_slo_s = 0.005;  // below the fixed prefill overhead
  CHECK_THROWS_AS(required_replicas(p), InfeasibleSloError);
}

TEST_CASE("memory-efficiency estimates scale with KV precision") {
  const ModelProfile fp16 = make_profile("fp16", 16);
  const ModelProfile fp8 = make_profile("fp8", 8);
  const ModelProfile kv4 = make_profile("kv4", 4);

  const double r8 = estimate_mme(fp8, "g0").tokens_per_byte /
                    estimate_mme(fp16, "g0").tokens_per_byte;
  const double r4 = estimate_mme(kv4, "g0").tokens_per_byte /
                    estimate_mme(fp16, "g0").tokens_per_byte;
  CHECK(r8 == doctest::Approx(2.0).epsilon(0.005));
  CHECK(r4 == doctest::Approx(4.0).epsilon(0.005));
}

TEST_CASE("profiled slope passes through unchanged") {
  ModelProfile p = make_profile("m", 16);
  p.profiled_mme_tokens_per_byte = 0.25 / 1024.0;  // 0.25 tokens per KiB
  const MmeEstimate est = estimate_mme(p, "g1");
  CHECK(est.tokens_per_byte == 0.25 / 1024.0);
  CHECK(est.group_id == "g1");
}

TEST_CASE("lower KV precision gives strictly higher efficiency") {
  Rng rng(29);
  for (int i = 0; i < 50; ++i) {
    ModelProfile p = make_profile("m", 16);
    p.num_layers = 1 + static_cast<std::uint32_t>(rng.uniform01() * 40);
    p.tokens_per_block = 1 + static_cast<Tokens>(rng.uniform01() * 64);
    p.quant_param_bytes_per_block = static_cast<Bytes>(rng.uniform01() * 128);
    ModelProfile lower = p;
    lower.precision.kv_bits = 8;
    CHECK(default_mme_tokens_per_byte(lower) > default_mme_tokens_per_byte(p));
  }
}
