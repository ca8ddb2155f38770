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
#include <istream>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "slabsim/batching.hpp"
#include "slabsim/common.hpp"
#include "slabsim/precision.hpp"

namespace slabsim {

// Uniform/exponential/normal draws built on raw mt19937_64 words so traces
// are reproducible across standard-library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  double exponential(double rate) {
    return -std::log1p(-uniform01()) / rate;
  }
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t stable_hash(std::string_view text);  // FNV-1a
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

struct LengthDistribution {
  enum class Kind { kFixed, kUniform, kLogNormal, kEmpirical };
  Kind kind = Kind::kFixed;
  Tokens fixed_value = 1;
  Tokens uniform_min = 1;
  Tokens uniform_max = 1;
  double lognormal_mu = 0.0;
  double lognormal_sigma = 0.0;
  Tokens clamp_max = 1 << 20;
  std::vector<Tokens> empirical_values;
  std::vector<double> empirical_weights;

  void validate() const;  // throws InvalidConfigError
  Tokens sample(Rng& rng) const;
  Tokens max_support() const;

  bool operator==(const LengthDistribution&) const = default;
};

struct RatePhase {
  Seconds start_s = 0.0;
  Seconds end_s = 0.0;
  double rate_rps = 0.0;  // 0 = idle window

  bool operator==(const RatePhase&) const = default;
};

struct ModelWorkload {
  std::string model_id;
  double rate_scale = 1.0;
  std::vector<RatePhase> phases;
  LengthDistribution prompt_tokens;
  LengthDistribution output_tokens;

  bool operator==(const ModelWorkload&) const = default;
};

struct WorkloadSpec {
  std::uint64_t seed = 0;
  Seconds duration_s = 0.0;
  std::vector<ModelWorkload> models;

  bool operator==(const WorkloadSpec&) const = default;
};

// Per-model Poisson arrivals (exponential inter-arrival gaps at the phase
// rate times rate_scale) with lengths sampled from the configured
// distributions. Deadlines come from each model's TTFT SLO. The result is
// sorted by arrival time and fully determined by the seed.
std::vector<Request> generate_workload(const WorkloadSpec& spec,
                                       const ProfileMap& profiles);

// Line format: arrival_time_s model_id prompt_tokens output_tokens
// (whitespace separated; '#' starts a comment). Ids and deadlines are
// assigned here.
std::vector<Request> load_trace(std::istream& in, const ProfileMap& profiles);
void write_trace(std::ostream& out, const std::vector<Request>& requests);

}  // namespace slabsim
