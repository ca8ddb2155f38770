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
#include "slabsim/batching.hpp"
#include "slabsim/workload.hpp"

namespace {

using namespace slabsim;

std::vector<Request> waiting_set(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Request> reqs;
  reqs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Request r;
    r.request_id = i;
    r.prompt_tokens = 1 + static_cast<Tokens>(rng.uniform01() * 2048);
    r.arrival_time = rng.uniform01();
    r.deadline = r.arrival_time + 0.2 + rng.uniform01() * 2.0;
    reqs.push_back(r);
  }
  return reqs;
}

void bm_schedule_batch(benchmark::State& state) {
  const CostModel cost{0.01, 1e-4, 0.002, 1e-4, 0.0};
  const auto waiting = waiting_set(static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(schedule_batch(waiting, 1.0, cost, 64, 8192));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_schedule_batch)->Arg(16)->Arg(64)->Arg(256)->Arg(1024);

void bm_moore_hodgson(benchmark::State& state) {
  Rng rng(11);
  std::vector<std::pair<Seconds, Seconds>> jobs;
  for (int i = 0; i < state.range(0); ++i) {
    jobs.emplace_back(0.01 + rng.uniform01() * 0.2, rng.uniform01() * 10.0);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(moore_hodgson(jobs));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_moore_hodgson)->Arg(64)->Arg(1024);

}  // namespace

BENCHMARK_MAIN();
