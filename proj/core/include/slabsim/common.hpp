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
#include <stdexcept>
#include <string>
#include <utility>

namespace slabsim {

using Bytes = std::uint64_t;
using Tokens = std::uint64_t;
using Seconds = double;

// Every failure the library reports derives from Error; subclasses
// distinguish conditions callers branch on (bad input vs. infeasibility
// vs. runtime exhaustion).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidProfileError : public Error {
 public:
  using Error::Error;
};

class InvalidConfigError : public Error {
 public:
  using Error::Error;
};

class InvalidKeyError : public Error {
 public:
  using Error::Error;
};

class InvalidFreeError : public Error {
 public:
  using Error::Error;
};

class PoolExhaustedError : public Error {
 public:
  using Error::Error;
};

// Thrown when no profiled batch size sustains the requested rate; carries
// the best achievable rate so the caller can size data-parallel replicas.
class InfeasibleRateError : public Error {
 public:
  InfeasibleRateError(const std::string& what, double max_achievable)
      : Error(what), max_achievable_rps(max_achievable) {}
  double max_achievable_rps;
};

class InfeasibleSloError : public Error {
 public:
  using Error::Error;
};

class InfeasibleCandidateError : public Error {
 public:
  using Error::Error;
};

class PlacementInfeasibleError : public Error {
 public:
  PlacementInfeasibleError(const std::string& what, std::string model)
      : Error(what), model_id(std::move(model)) {}
  std::string model_id;
};

class InvalidScenarioError : public Error {
 public:
  using Error::Error;
};

class InvalidMeasurementError : public Error {
 public:
  using Error::Error;
};

// Chunked prefill latency: total_tokens are processed in chunks of at most
// max_chunk_tokens, each chunk costing alpha_s + beta_s_per_token * tokens.
// max_chunk_tokens must be >= 1.
inline Seconds chunked_prefill_seconds(double alpha_s, double beta_s_per_token,
                                       Tokens total_tokens,
                                       Tokens max_chunk_tokens) {
  if (total_tokens == 0) {
    return 0.0;
  }
  const Tokens chunks = (total_tokens + max_chunk_tokens - 1) / max_chunk_tokens;
  return static_cast<double>(chunks) * alpha_s +
         beta_s_per_token * static_cast<double>(total_tokens);
}

}  // namespace slabsim
