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
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "slabsim/common.hpp"
#include "slabsim/precision.hpp"

namespace slabsim {

// One inference request. output_tokens is ground truth owned by the
// simulator; scheduling decisions must never read it.
struct Request {
  std::uint64_t request_id = 0;
  std::string model_id;
  Seconds arrival_time = 0.0;
  Tokens prompt_tokens = 1;
  Tokens output_tokens = 1;
  Seconds deadline = 0.0;  // arrival_time + model TTFT SLO

  bool operator==(const Request&) const = default;
};

// Affine chunked-prefill / decode-step latency model.
struct CostModel {
  double alpha = 0.0;    // fixed prefill overhead per chunk (s)
  double beta = 0.0;     // prefill per prompt token (s)
  double gamma = 0.0;    // fixed decode step (s)
  double delta = 0.0;    // decode per running sequence (s)
  double epsilon = 0.0;  // decode per cached token (s)
};

inline CostModel cost_model(const ModelProfile& p) {
  return CostModel{p.prefill_cost.alpha_s, p.prefill_cost.beta_s_per_token,
                   p.decode_cost.gamma_s, p.decode_cost.delta_s_per_seq,
                   p.decode_cost.epsilon_s_per_cached_token};
}

// Admitted / dropped / deferred partition of one scheduling tick's waiting
// set. admitted is ordered by ascending deadline. dropped requests provably
// miss their deadline even served alone and immediately; deferred requests
// return to the queue unchanged.
struct BatchDecision {
  std::vector<std::uint64_t> admitted;
  std::vector<std::uint64_t> dropped;
  std::vector<std::uint64_t> deferred;
  std::optional<Seconds> predicted_ttft;    // of the admitted batch
  std::optional<Seconds> anchor_deadline;   // earliest admitted deadline
};

// Prefill finish time of a batch under chunked prefill: total prompt tokens
// are processed in chunks of at most t_max tokens, each chunk costing
// alpha + beta * chunk_tokens. Monotone in total tokens and chunk count.
Seconds predict_ttft(std::span<const Request> requests, const CostModel& cost,
                     Tokens t_max);

// SLO-aware adaptive batching over the waiting set:
//   1. drop every request that misses its deadline even served alone now,
//   2. sort survivors by deadline (EDF),
//   3. form the earliest-deadline prefix that fits the caps (at most n_max
//      requests, at most t_max batched prompt tokens),
//   4. while that batch's prefill finish time would reach the earliest
//      admitted deadline, move the longest considered request (largest
//      prompt) to deferred and re-form the batch.
// Deferred requests stay in the caller's queue; only step-1 failures drop.
// Every non-empty admitted batch finishes prefill strictly before its
// earliest deadline.
BatchDecision schedule_batch(std::span<const Request> waiting, Seconds now,
                             const CostModel& cost, std::uint64_t n_max,
                             Tokens t_max);

// Classical single-machine maximum-on-time-jobs rule: process in deadline
// order and evict the largest job scheduled so far whenever the current job
// finishes at or past its deadline. Jobs are (processing_time, deadline);
// returns the on-time count. Completion strictly before the deadline counts
// as on time, matching the admission predicate above.
std::size_t moore_hodgson(std::span<const std::pair<Seconds, Seconds>> jobs);

}  // namespace slabsim
