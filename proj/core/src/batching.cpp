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

#include "slabsim/batching.hpp"

#include <algorithm>
#include <queue>

namespace slabsim {

Seconds predict_ttft(std::span<const Request> requests, const CostModel& cost,
                     Tokens t_max) {
  if (t_max < 1) {
    throw Error("predict_ttft: t_max must be >= 1");
  }
  Tokens total = 0;
  for (const Request& r : requests) {
    total += r.prompt_tokens;
  }
  return chunked_prefill_seconds(cost.alpha, cost.beta, total, t_max);
}

namespace {

Seconds solo_ttft(const Request& r, const CostModel& cost, Tokens t_max) {
  return chunked_prefill_seconds(cost.alpha, cost.beta, r.prompt_tokens, t_max);
}

bool edf_before(const Request* a, const Request* b) {
  if (a->deadline != b->deadline) return a->deadline < b->deadline;
  return a->request_id < b->request_id;
}

// Largest prompt; ties go to the latest deadline, then the larger id.
bool evict_before(const Request* a, const Request* b) {
  if (a->prompt_tokens != b->prompt_tokens) {
    return a->prompt_tokens > b->prompt_tokens;
  }
  if (a->deadline != b->deadline) return a->deadline > b->deadline;
  return a->request_id > b->request_id;
}

// Planning pass over the EDF-sorted survivors: walk the sequential service
// timeline from `now` and evict the longest request considered so far
// whenever the current one would finish at or past its deadline. This is
// the classical largest-job eviction rule applied to the waiting set; what
// remains is a set the service loop can keep on time, so the batch former
// below never chases requests that crowd out the rest of the queue.
std::vector<const Request*> plan_on_time_set(std::vector<const Request*> edf,
                                             Seconds now, const CostModel& cost,
                                             Tokens chunk_tokens,
                                             std::vector<const Request*>* evicted) {
  std::vector<const Request*> kept;
  Seconds t = now;
  for (const Request* r : edf) {
    kept.push_back(r);
    t += solo_ttft(*r, cost, chunk_tokens);
    if (t >= r->deadline) {
      auto longest = std::min_element(kept.begin(), kept.end(), evict_before);
      t -= solo_ttft(**longest, cost, chunk_tokens);
      evicted->push_back(*longest);
      kept.erase(longest);
    }
  }
  return kept;
}

}  // namespace

BatchDecision schedule_batch(std::span<const Request> waiting, Seconds now,
                             const CostModel& cost, std::uint64_t n_max,
                             Tokens t_max) {
  BatchDecision decision;
  const Tokens chunk_tokens = std::max<Tokens>(t_max, 1);

  // Requests that cannot meet their deadline even served alone and
  // immediately are dropped at once.
  std::vector<const Request*> pool;
  pool.reserve(waiting.size());
  for (const Request& r : waiting) {
    if (now + solo_ttft(r, cost, chunk_tokens) < r.deadline) {
      pool.push_back(&r);
    } else {
      decision.dropped.push_back(r.request_id);
    }
  }
  std::sort(pool.begin(), pool.end(), edf_before);

  std::vector<const Request*> evicted;
  pool = plan_on_time_set(std::move(pool), now, cost, chunk_tokens, &evicted);

  // Tentative batch: the earliest-deadline prefix that fits the request and
  // token caps. While its prefill would finish at or past the anchor's
  // (earliest admitted) deadline, evict the longest request from
  // consideration and re-form; evictions are deferred, not dropped. The
  // batch only ever shrinks toward the front, so the loop terminates and
  // every non-empty result satisfies the anchor guarantee.
  std::size_t batch_len = 0;
  for (;;) {
    batch_len = 0;
    Tokens tokens = 0;
    for (const Request* r : pool) {
      if (batch_len + 1 > n_max || tokens + r->prompt_tokens > t_max) break;
      tokens += r->prompt_tokens;
      ++batch_len;
    }
    if (batch_len == 0) break;
    const Seconds finish = now + chunked_prefill_seconds(cost.alpha, cost.beta,
                                                         tokens, chunk_tokens);
    if (finish < pool.front()->deadline) {
      decision.predicted_ttft = finish - now;
      decision.anchor_deadline = pool.front()->deadline;
      break;
    }
    auto longest = std::min_element(pool.begin(), pool.begin() + batch_len,
                                    evict_before);
    evicted.push_back(*longest);
    pool.erase(longest);
  }

  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (i < batch_len) {
      decision.admitted.push_back(pool[i]->request_id);
    } else {
      decision.deferred.push_back(pool[i]->request_id);
    }
  }
  for (const Request* r : evicted) {
    decision.deferred.push_back(r->request_id);
  }
  return decision;
}

std::size_t moore_hodgson(std::span<const std::pair<Seconds, Seconds>> jobs) {
  std::vector<std::pair<Seconds, Seconds>> order(jobs.begin(), jobs.end());
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) {
                     return a.second < b.second;
                   });
  // Max-heap keyed by processing time, then deadline.
  std::priority_queue<std::pair<Seconds, Seconds>> scheduled;
  Seconds t = 0.0;
  for (const auto& job : order) {
    scheduled.push(job);
    t += job.first;
    if (t >= job.second) {
      t -= scheduled.top().first;
      scheduled.pop();
    }
  }
  return scheduled.size();
}

}  // namespace slabsim
