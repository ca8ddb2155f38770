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

#include <map>

#include "doctest.h"
#include "slabsim/oracles.hpp"
#include "slabsim/placement.hpp"
#include "slabsim/workload.hpp"
#include "test_support.hpp"

using namespace slabsim;
using test::make_profile;

namespace {

constexpr Bytes kKiB = 1024;

// Profile whose base footprint is exactly `footprint` bytes (weights only,
// batch size 1, zero profiled averages).
ModelProfile sized_profile(const std::string& id, Bytes footprint) {
  ModelProfile p = make_profile(id, 16);
  p.weight_bytes = footprint;
  p.avg_activation_bytes = 0;
  p.avg_kv_bytes = 0;
  p.throughput_table = {{1, 10.0}};
  p.request_rate_rps = 1.0;
  p.ttft_slo_s = 10.0;
  return p;
}

GpuGroup make_group(const std::string& id, Bytes memory) {
  GpuGroup g;
  g.group_id = id;
  g.member_gpus = {id + "-gpu0"};
  g.total_memory = memory;
  return g;
}

// Pins slopes by model id, in tokens per byte.
MmeFn fixed_mme(std::map<std::string, double> slopes) {
  return [slopes = std::move(slopes)](const ModelProfile& p, const GpuGroup&) {
    return slopes.at(p.model_id);
  };
}

}  // namespace

TEST_CASE("score_proxy evaluates the mean-slope times residual") {
  // Resident a (1 token/KiB) plus candidate b (2 tokens/KiB), 10 KiB left
  // after charging b: (1/2) * (1 + 2)/KiB * 10 KiB = 15 tokens.
  ModelProfile a = sized_profile("a", 40 * kKiB);
  ModelProfile b = sized_profile("b", 30 * kKiB);
  GpuGroup g = make_group("g0", 80 * kKiB);
  g.residents.push_back({"a", base_footprint(a)});
  const ProfileMap profiles = make_profile_map({a, b});
  const MmeFn mme = fixed_mme({{"a", 1.0 / kKiB}, {"b", 2.0 / kKiB}});

  CHECK(score_proxy(g, b, profiles, mme) == doctest::Approx(15.0));

  GpuGroup empty = make_group("g1", 40 * kKiB);
  CHECK(score_proxy(empty, b, profiles, mme) == doctest::Approx(20.0));

  ModelProfile exact_fit = sized_profile("b", 40 * kKiB);
  CHECK(score_proxy(empty, exact_fit, profiles, mme) == doctest::Approx(0.0));

  ModelProfile too_big = sized_profile("b", 41 * kKiB);
  CHECK_THROWS_AS(score_proxy(empty, too_big, profiles, mme),
                  InfeasibleCandidateError);
}

TEST_CASE("score_exact brute force over the allocation grid") {
  ModelProfile a = sized_profile("a", 40 * kKiB);
  ModelProfile b = sized_profile("b", 30 * kKiB);
  GpuGroup g = make_group("g0", 80 * kKiB);
  g.residents.push_back({"a", base_footprint(a)});
  const ProfileMap profiles = make_profile_map({a, b});
  const MmeFn mme = fixed_mme({{"a", 1.0 / kKiB}, {"b", 2.0 / kKiB}});

  // 10 units of 1 KiB, every model gets at least one: 9 to the better
  // slope, 1 to the worse: 9*2 + 1*1 = 19 tokens.
  CHECK(score_exact(g, b, profiles, kKiB, mme) == doctest::Approx(19.0));

  GpuGroup empty = make_group("g1", 40 * kKiB);
  CHECK(score_exact(empty, b, profiles, kKiB, mme) == doctest::Approx(20.0));

  ModelProfile exact_fit = sized_profile("b", 40 * kKiB);
  CHECK(score_exact(empty, exact_fit, profiles, kKiB, mme) ==
        doctest::Approx(0.0));
}

TEST_CASE("proxy never exceeds the exact score") {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const int residents = static_cast<int>(rng.uniform01() * 2);  // 0..1
    std::vector<ModelProfile> models;
    std::map<std::string, double> slopes;
    GpuGroup g = make_group("g", 0);

    Bytes charged = 0;
    for (int i = 0; i < residents; ++i) {
      const std::string id = "r" + std::to_string(i);
      const Bytes fp = (1 + static_cast<Bytes>(rng.uniform01() * 20)) * kKiB;
      models.push_back(sized_profile(id, fp));
      slopes[id] = 0.5 + rng.uniform01() * 3.0;
      g.residents.push_back({id, fp});
      charged += fp;
    }
    const Bytes cand_fp = (1 + static_cast<Bytes>(rng.uniform01() * 20)) * kKiB;
    ModelProfile cand = sized_profile("cand", cand_fp);
    slopes["cand"] = 0.5 + rng.uniform01() * 3.0;
    models.push_back(cand);

    // Residual divisible by 100 so the grid covers it exactly.
    const Bytes k_rem = 100 * (1 + static_cast<Bytes>(rng.uniform01() * 500));
    g.total_memory = charged + cand_fp + k_rem;

    const ProfileMap profiles = make_profile_map(models);
    const MmeFn mme = fixed_mme(slopes);
    const double proxy = score_proxy(g, cand, profiles, mme);
    const double exact = score_exact(g, cand, profiles, k_rem / 100, mme);
    REQUIRE(proxy <= exact * (1 + 1e-12) + 1e-9);
  }
}

TEST_CASE("fewer residents score higher for the same slopes and residual") {
  Rng rng(37);
  for (int trial = 0; trial < 100; ++trial) {
    const double resident_slope = 0.5 + rng.uniform01() * 2.0;
    // Candidate at or above the resident slope pulls the average up more
    // in a smaller group.
    const double cand_slope = resident_slope + rng.uniform01() * 2.0;
    const Bytes k_rem = (10 + static_cast<Bytes>(rng.uniform01() * 100)) * kKiB;
    const Bytes fp = 10 * kKiB;

    auto score_with_n = [&](int n_residents) {
      std::vector<ModelProfile> models;
      std::map<std::string, double> slopes;
      GpuGroup g = make_group("g", 0);
      Bytes charged = 0;
      for (int i = 0; i < n_residents; ++i) {
        const std::string id = "r" + std::to_string(i);
        models.push_back(sized_profile(id, fp));
        slopes[id] = resident_slope;
        g.residents.push_back({id, fp});
        charged += fp;
      }
      ModelProfile cand = sized_profile("cand", fp);
      slopes["cand"] = cand_slope;
      models.push_back(cand);
      g.total_memory = charged + fp + k_rem;  // equal residual in both cases
      return score_proxy(g, cand, make_profile_map(models), fixed_mme(slopes));
    };

    const double small_group = score_with_n(1);
    const double large_group = score_with_n(3);
    if (cand_slope > resident_slope) {
      REQUIRE(small_group > large_group);
    } else {
      REQUIRE(small_group == doctest::Approx(large_group));
    }
  }
}

TEST_CASE("adding an above-average slope raises the group mean") {
  Rng rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform01() * 5);
    std::vector<double> slopes;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      slopes.push_back(0.1 + rng.uniform01() * 3.0);
      sum += slopes.back();
    }
    const double mean = sum / n;
    const double above = mean + 0.01 + rng.uniform01();
    const double new_mean = (sum + above) / (n + 1);
    REQUIRE(new_mean > mean);
  }
}

TEST_CASE("greedy placement handles ties and identical models") {
  const ProfileMap profiles;

  SUBCASE("single model lands on the lexicographically first empty group") {
    std::vector<ModelProfile> models = {sized_profile("m", 10 * kKiB)};
    std::vector<GpuGroup> groups = {make_group("g0", 40 * kKiB),
                                    make_group("g1", 40 * kKiB)};
    const PlacementPlan plan = place_models(models, groups);
    CHECK(plan.assignments.at("m") == "g0");
  }

  SUBCASE("two identical models spread across two identical groups") {
    std::vector<ModelProfile> models = {sized_profile("a", 10 * kKiB),
                                        sized_profile("b", 10 * kKiB)};
    std::vector<GpuGroup> groups = {make_group("g0", 40 * kKiB),
                                    make_group("g1", 40 * kKiB)};
    const PlacementPlan plan = place_models(models, groups);
    CHECK(plan.assignments.at("a") != plan.assignments.at("b"));
  }

  SUBCASE("model fitting nowhere names itself in the error") {
    std::vector<ModelProfile> models = {sized_profile("huge", 100 * kKiB)};
    std::vector<GpuGroup> groups = {make_group("g0", 40 * kKiB)};
    try {
      place_models(models, groups);
      FAIL("expected PlacementInfeasibleError");
    } catch (const PlacementInfeasibleError& e) {
      CHECK(e.model_id == "huge");
    }
  }
}

TEST_CASE("largest model placed alone; efficient pair co-located") {
  // One big KV16 model and two small 8B-class variants (KV16 and KV8) on
  // two equal groups: the big model takes one group, the pair shares the
  // other because the emptier group scores higher for both small models.
  ModelProfile big = sized_profile("c-large-awq", 40 * kKiB);
  big.num_layers = 4;  // lower slope via larger per-token bytes
  ModelProfile fp16 = sized_profile("a-small-fp16", 18 * kKiB);
  ModelProfile fp8 = sized_profile("b-small-fp8", 10 * kKiB);
  fp8.precision.kv_bits = 8;

  std::vector<GpuGroup> groups = {make_group("g0", 80 * kKiB),
                                  make_group("g1", 80 * kKiB)};
  const PlacementPlan plan = place_models({big, fp16, fp8}, groups);
  CHECK(plan.assignments.at("c-large-awq") == "g0");
  CHECK(plan.assignments.at("a-small-fp16") == "g1");
  CHECK(plan.assignments.at("b-small-fp8") == "g1");
}

TEST_CASE("placement matches the naive re-execution on random instances") {
  Rng rng(43);
  for (int trial = 0; trial < 100; ++trial) {
    const int n_models = 1 + static_cast<int>(rng.uniform01() * 3);
    const int n_groups = 1 + static_cast<int>(rng.uniform01() * 2);
    std::vector<ModelProfile> models;
    for (int i = 0; i < n_models; ++i) {
      ModelProfile p = sized_profile("m" + std::to_string(i),
                                     (5 + static_cast<Bytes>(rng.uniform01() * 30)) * kKiB);
      p.precision.kv_bits = rng.uniform01() < 0.5 ? 16 : 8;
      p.num_layers = 1 + static_cast<std::uint32_t>(rng.uniform01() * 8);
      models.push_back(p);
    }
    std::vector<GpuGroup> groups;
    for (int i = 0; i < n_groups; ++i) {
      groups.push_back(make_group("g" + std::to_string(i),
                                  (60 + static_cast<Bytes>(rng.uniform01() * 60)) * kKiB));
    }
    std::map<std::string, std::string> naive;
    bool naive_feasible = true;
    try {
      naive = naive_greedy_placement(models, groups);
    } catch (const PlacementInfeasibleError&) {
      naive_feasible = false;
    }
    try {
      const PlacementPlan plan = place_models(models, groups);
      REQUIRE(naive_feasible);
      REQUIRE(plan.assignments == naive);
      for (const GpuGroup& g : plan.groups) {
        REQUIRE(g.footprint_total() <= g.total_memory);
      }
    } catch (const PlacementInfeasibleError&) {
      REQUIRE_FALSE(naive_feasible);
    }
  }
}

TEST_CASE("replica expansion splits the rate across independent profiles") {
  ModelProfile p = make_profile("m", 16);
  p.prefill_cost = {0.01, 1e-4};
  p.avg_prompt_tokens = 100;
  p.throughput_table = {{1, 1.0}, {2, 2.5}, {4, 5.0}};
  p.ttft_slo_s = 0.025;  // only batch size 1 is SLO-safe
  p.request_rate_rps = 4.0;

  const std::vector<ModelProfile> expanded = expand_replicas({p});
  REQUIRE(expanded.size() == 4);
  for (std::size_t i = 0; i < expanded.size(); ++i) {
    CHECK(expanded[i].model_id == "m#" + std::to_string(i));
    CHECK(expanded[i].request_rate_rps == doctest::Approx(1.0));
  }

  // TP-degree mismatch disqualifies a group entirely.
  ModelProfile tp2 = sized_profile("wide", 10 * kKiB);
  tp2.tp_degree = 2;
  tp2.num_kv_heads = 8;
  std::vector<GpuGroup> groups = {make_group("g0", 40 * kKiB)};
  CHECK_THROWS_AS(place_models({tp2}, groups), PlacementInfeasibleError);
}
