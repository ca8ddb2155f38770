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

#include "slabsim/workload.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace slabsim {

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller on raw uniforms keeps the stream portable.
  double u1 = uniform01();
  while (u1 <= 0.0) u1 = uniform01();
  const double u2 = uniform01();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * 3.14159265358979323846 * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::uint64_t stable_hash(std::string_view text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed ^ (salt + 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

void LengthDistribution::validate() const {
  switch (kind) {
    case Kind::kFixed:
      if (fixed_value < 1) {
        throw InvalidConfigError("fixed length must be >= 1 token");
      }
      break;
    case Kind::kUniform:
      if (uniform_min < 1 || uniform_max < uniform_min) {
        throw InvalidConfigError("uniform length bounds invalid");
      }
      break;
    case Kind::kLogNormal:
      if (lognormal_sigma < 0.0 || clamp_max < 1) {
        throw InvalidConfigError("lognormal parameters invalid");
      }
      break;
    case Kind::kEmpirical:
      if (empirical_values.empty() ||
          empirical_values.size() != empirical_weights.size()) {
        throw InvalidConfigError("empirical histogram malformed");
      }
      for (Tokens v : empirical_values) {
        if (v < 1) throw InvalidConfigError("empirical value must be >= 1");
      }
      for (double w : empirical_weights) {
        if (w < 0.0) throw InvalidConfigError("empirical weight must be >= 0");
      }
      break;
  }
}

Tokens LengthDistribution::sample(Rng& rng) const {
  switch (kind) {
    case Kind::kFixed:
      return fixed_value;
    case Kind::kUniform: {
      const std::uint64_t span = uniform_max - uniform_min + 1;
      const auto offset =
          static_cast<std::uint64_t>(rng.uniform01() * static_cast<double>(span));
      return uniform_min + std::min(offset, span - 1);
    }
    case Kind::kLogNormal: {
      const double value = std::exp(lognormal_mu + lognormal_sigma * rng.normal());
      const auto tokens = static_cast<Tokens>(std::llround(value));
      return std::clamp<Tokens>(tokens, 1, clamp_max);
    }
    case Kind::kEmpirical: {
      double total = 0.0;
      for (double w : empirical_weights) total += w;
      double pick = rng.uniform01() * total;
      for (std::size_t i = 0; i < empirical_values.size(); ++i) {
        pick -= empirical_weights[i];
        if (pick < 0.0) return empirical_values[i];
      }
      return empirical_values.back();
    }
  }
  return 1;
}

Tokens LengthDistribution::max_support() const {
  switch (kind) {
    case Kind::kFixed:
      return fixed_value;
    case Kind::kUniform:
      return uniform_max;
    case Kind::kLogNormal:
      return clamp_max;
    case Kind::kEmpirical:
      return *std::max_element(empirical_values.begin(), empirical_values.end());
  }
  return 1;
}

std::vector<Request> generate_workload(const WorkloadSpec& spec,
                                       const ProfileMap& profiles) {
  struct Pending {
    Seconds arrival;
    std::string model_id;
    Tokens prompt;
    Tokens output;
    std::uint64_t seq;
  };
  std::vector<Pending> pending;

  for (const ModelWorkload& mw : spec.models) {
    auto pit = profiles.find(mw.model_id);
    if (pit == profiles.end()) {
      throw InvalidConfigError("workload references unknown model: " +
                               mw.model_id);
    }
    mw.prompt_tokens.validate();
    mw.output_tokens.validate();
    Rng rng(mix_seed(spec.seed, stable_hash(mw.model_id)));
    std::uint64_t seq = 0;
    for (const RatePhase& phase : mw.phases) {
      const double rate = phase.rate_rps * mw.rate_scale;
      if (rate <= 0.0) continue;
      const Seconds end = std::min(phase.end_s, spec.duration_s);
      Seconds t = phase.start_s;
      for (;;) {
        t += rng.exponential(rate);
        if (t >= end) break;
        Pending p;
        p.arrival = t;
        p.model_id = mw.model_id;
        p.prompt = mw.prompt_tokens.sample(rng);
        p.output = mw.output_tokens.sample(rng);
        p.seq = seq++;
        pending.push_back(std::move(p));
      }
    }
  }

  std::sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) {
    if (a.arrival != b.arrival) return a.arrival < b.arrival;
    if (a.model_id != b.model_id) return a.model_id < b.model_id;
    return a.seq < b.seq;
  });

  std::vector<Request> requests;
  requests.reserve(pending.size());
  std::uint64_t next_id = 0;
  for (const Pending& p : pending) {
    Request r;
    r.request_id = next_id++;
    r.model_id = p.model_id;
    r.arrival_time = p.arrival;
    r.prompt_tokens = p.prompt;
    r.output_tokens = p.output;
    r.deadline = p.arrival + profiles.at(p.model_id).ttft_slo_s;
    requests.push_back(std::move(r));
  }
  return requests;
}

std::vector<Request> load_trace(std::istream& in, const ProfileMap& profiles) {
  std::vector<Request> requests;
  std::string line;
  std::uint64_t next_id = 0;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    Seconds arrival;
    std::string model_id;
    Tokens prompt, output;
    if (!(fields >> arrival)) continue;  // blank line
    if (!(fields >> model_id >> prompt >> output)) {
      throw InvalidConfigError("trace line " + std::to_string(line_no) +
                               ": expected arrival model prompt output");
    }
    auto pit = profiles.find(model_id);
    if (pit == profiles.end()) {
      throw InvalidConfigError("trace line " + std::to_string(line_no) +
                               ": unknown model " + model_id);
    }
    if (prompt < 1 || output < 1) {
      throw InvalidConfigError("trace line " + std::to_string(line_no) +
                               ": token counts must be >= 1");
    }
    Request r;
    r.request_id = next_id++;
    r.model_id = model_id;
    r.arrival_time = arrival;
    r.prompt_tokens = prompt;
    r.output_tokens = output;
    r.deadline = arrival + pit->second.ttft_slo_s;
    requests.push_back(std::move(r));
  }
  std::stable_sort(requests.begin(), requests.end(),
                   [](const Request& a, const Request& b) {
                     return a.arrival_time < b.arrival_time;
                   });
  return requests;
}

void write_trace(std::ostream& out, const std::vector<Request>& requests) {
  const auto flags = out.flags();
  const auto precision = out.precision();
  out.precision(17);
  for (const Request& r : requests) {
    out << r.arrival_time << ' ' << r.model_id << ' ' << r.prompt_tokens << ' '
        << r.output_tokens << '\n';
  }
  out.flags(flags);
  out.precision(precision);
}

}  // namespace slabsim
