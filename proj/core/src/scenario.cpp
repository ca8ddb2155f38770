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

#include "slabsim/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"

namespace slabsim {

namespace {

using nlohmann::json;

[[noreturn]] void parse_fail(const std::string& where, const std::string& why) {
  throw InvalidConfigError("config error at " + where + ": " + why);
}

template <typename T>
T get_field(const json& j, const std::string& where, const std::string& key) {
  if (!j.contains(key)) parse_fail(where, "missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    parse_fail(where + "." + key, e.what());
  }
}

template <typename T>
T get_or(const json& j, const std::string& where, const std::string& key,
         T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    parse_fail(where + "." + key, e.what());
  }
}

LengthDistribution parse_distribution(const json& j, const std::string& where) {
  LengthDistribution d;
  const std::string type = get_field<std::string>(j, where, "type");
  if (type == "fixed") {
    d.kind = LengthDistribution::Kind::kFixed;
    d.fixed_value = get_field<Tokens>(j, where, "value");
  } else if (type == "uniform") {
    d.kind = LengthDistribution::Kind::kUniform;
    d.uniform_min = get_field<Tokens>(j, where, "min");
    d.uniform_max = get_field<Tokens>(j, where, "max");
  } else if (type == "lognormal") {
    d.kind = LengthDistribution::Kind::kLogNormal;
    d.lognormal_mu = get_field<double>(j, where, "mu");
    d.lognormal_sigma = get_field<double>(j, where, "sigma");
    d.clamp_max = get_field<Tokens>(j, where, "max");
  } else if (type == "empirical") {
    d.kind = LengthDistribution::Kind::kEmpirical;
    d.empirical_values = get_field<std::vector<Tokens>>(j, where, "values");
    d.empirical_weights = get_field<std::vector<double>>(j, where, "weights");
  } else {
    parse_fail(where, "unknown distribution type '" + type + "'");
  }
  d.validate();
  return d;
}

json distribution_to_json(const LengthDistribution& d) {
  json j;
  switch (d.kind) {
    case LengthDistribution::Kind::kFixed:
      j["type"] = "fixed";
      j["value"] = d.fixed_value;
      break;
    case LengthDistribution::Kind::kUniform:
      j["type"] = "uniform";
      j["min"] = d.uniform_min;
      j["max"] = d.uniform_max;
      break;
    case LengthDistribution::Kind::kLogNormal:
      j["type"] = "lognormal";
      j["mu"] = d.lognormal_mu;
      j["sigma"] = d.lognormal_sigma;
      j["max"] = d.clamp_max;
      break;
    case LengthDistribution::Kind::kEmpirical:
      j["type"] = "empirical";
      j["values"] = d.empirical_values;
      j["weights"] = d.empirical_weights;
      break;
  }
  return j;
}

ModelProfile parse_model(const json& j, const std::string& where) {
  ModelProfile m;
  m.model_id = get_field<std::string>(j, where, "id");
  if (j.contains("precision")) {
    const json& p = j.at("precision");
    m.precision.weight_bits = get_or<int>(p, where, "weight_bits", 16);
    m.precision.activation_bits = get_or<int>(p, where, "activation_bits", 16);
    m.precision.kv_bits = get_or<int>(p, where, "kv_bits", 16);
  }
  m.num_kv_heads = get_field<std::uint32_t>(j, where, "num_kv_heads");
  m.head_dim = get_field<std::uint32_t>(j, where, "head_dim");
  m.num_layers = get_field<std::uint32_t>(j, where, "num_layers");
  m.tp_degree = get_or<std::uint32_t>(j, where, "tp_degree", 1);
  m.tokens_per_block = get_field<Tokens>(j, where, "tokens_per_block");
  m.quant_param_bytes_per_block =
      get_or<Bytes>(j, where, "quant_param_bytes_per_block", 0);
  m.weight_bytes = get_field<Bytes>(j, where, "weight_bytes");
  m.avg_activation_bytes = get_field<Bytes>(j, where, "avg_activation_bytes");
  m.avg_kv_bytes = get_field<Bytes>(j, where, "avg_kv_bytes");
  m.avg_prompt_tokens = get_or<Tokens>(j, where, "avg_prompt_tokens", 256);
  m.avg_seq_tokens = get_or<Tokens>(j, where, "avg_seq_tokens", 512);
  m.request_rate_rps = get_field<double>(j, where, "request_rate_rps");
  m.ttft_slo_s = get_field<double>(j, where, "ttft_slo_s");
  if (j.contains("prefill_cost")) {
    const json& c = j.at("prefill_cost");
    m.prefill_cost.alpha_s = get_field<double>(c, where + ".prefill_cost", "alpha_s");
    m.prefill_cost.beta_s_per_token =
        get_field<double>(c, where + ".prefill_cost", "beta_s_per_token");
  }
  if (j.contains("decode_cost")) {
    const json& c = j.at("decode_cost");
    m.decode_cost.gamma_s = get_field<double>(c, where + ".decode_cost", "gamma_s");
    m.decode_cost.delta_s_per_seq =
        get_field<double>(c, where + ".decode_cost", "delta_s_per_seq");
    m.decode_cost.epsilon_s_per_cached_token = get_or<double>(
        c, where + ".decode_cost", "epsilon_s_per_cached_token", 0.0);
  }
  if (!j.contains("throughput_table") || !j.at("throughput_table").is_object()) {
    parse_fail(where, "missing throughput_table object");
  }
  for (const auto& [batch, rps] : j.at("throughput_table").items()) {
    try {
      m.throughput_table[static_cast<std::uint32_t>(std::stoul(batch))] =
          rps.get<double>();
    } catch (const std::exception&) {
      parse_fail(where + ".throughput_table", "bad entry '" + batch + "'");
    }
  }
  m.max_batch_requests = get_or<std::uint32_t>(j, where, "max_batch_requests", 256);
  m.max_batched_tokens = get_or<Tokens>(j, where, "max_batched_tokens", 8192);
  if (j.contains("profiled_mme_tokens_per_byte") &&
      !j.at("profiled_mme_tokens_per_byte").is_null()) {
    m.profiled_mme_tokens_per_byte =
        j.at("profiled_mme_tokens_per_byte").get<double>();
  }
  return m;
}

json model_to_json(const ModelProfile& m) {
  json j;
  j["id"] = m.model_id;
  j["precision"] = {{"weight_bits", m.precision.weight_bits},
                    {"activation_bits", m.precision.activation_bits},
                    {"kv_bits", m.precision.kv_bits}};
  j["num_kv_heads"] = m.num_kv_heads;
  j["head_dim"] = m.head_dim;
  j["num_layers"] = m.num_layers;
  j["tp_degree"] = m.tp_degree;
  j["tokens_per_block"] = m.tokens_per_block;
  j["quant_param_bytes_per_block"] = m.quant_param_bytes_per_block;
  j["weight_bytes"] = m.weight_bytes;
  j["avg_activation_bytes"] = m.avg_activation_bytes;
  j["avg_kv_bytes"] = m.avg_kv_bytes;
  j["avg_prompt_tokens"] = m.avg_prompt_tokens;
  j["avg_seq_tokens"] = m.avg_seq_tokens;
  j["request_rate_rps"] = m.request_rate_rps;
  j["ttft_slo_s"] = m.ttft_slo_s;
  j["prefill_cost"] = {{"alpha_s", m.prefill_cost.alpha_s},
                       {"beta_s_per_token", m.prefill_cost.beta_s_per_token}};
  j["decode_cost"] = {
      {"gamma_s", m.decode_cost.gamma_s},
      {"delta_s_per_seq", m.decode_cost.delta_s_per_seq},
      {"epsilon_s_per_cached_token", m.decode_cost.epsilon_s_per_cached_token}};
  json table = json::object();
  for (const auto& [batch, rps] : m.throughput_table) {
    table[std::to_string(batch)] = rps;
  }
  j["throughput_table"] = table;
  j["max_batch_requests"] = m.max_batch_requests;
  j["max_batched_tokens"] = m.max_batched_tokens;
  if (m.profiled_mme_tokens_per_byte) {
    j["profiled_mme_tokens_per_byte"] = *m.profiled_mme_tokens_per_byte;
  } else {
    j["profiled_mme_tokens_per_byte"] = nullptr;
  }
  return j;
}

}  // namespace

ScenarioConfig parse_scenario_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidConfigError(std::string("config is not valid JSON: ") +
                             e.what());
  }
  ScenarioConfig cfg;
  cfg.seed = get_or<std::uint64_t>(root, "$", "seed", 0);
  cfg.duration_s = get_field<double>(root, "$", "duration_s");
  cfg.mode = get_or<std::string>(root, "$", "mode", "dynamic");
  cfg.policy = get_or<std::string>(root, "$", "policy", "adaptive");
  cfg.block_policy = get_or<std::string>(root, "$", "block_policy", "per-model");

  if (root.contains("slab")) {
    const json& s = root.at("slab");
    const std::string policy = get_or<std::string>(s, "$.slab", "policy", "auto-lcm");
    if (policy == "auto-lcm") {
      cfg.slab.auto_lcm = true;
      cfg.slab.multiplier = get_or<std::uint64_t>(s, "$.slab", "multiplier", 1);
      if (cfg.slab.multiplier < 1) parse_fail("$.slab.multiplier", "must be >= 1");
    } else if (policy == "explicit") {
      cfg.slab.auto_lcm = false;
      cfg.slab.explicit_bytes = get_field<Bytes>(s, "$.slab", "slab_size_bytes");
    } else {
      parse_fail("$.slab.policy", "expected 'auto-lcm' or 'explicit'");
    }
  }
  if (root.contains("kv_pool")) {
    const json& k = root.at("kv_pool");
    const std::string policy =
        get_or<std::string>(k, "$.kv_pool", "policy", "residual");
    if (policy == "residual") {
      cfg.kv_pool.residual = true;
    } else if (policy == "explicit") {
      cfg.kv_pool.residual = false;
      cfg.kv_pool.explicit_bytes = get_field<Bytes>(k, "$.kv_pool", "bytes");
    } else {
      parse_fail("$.kv_pool.policy", "expected 'residual' or 'explicit'");
    }
  }

  if (!root.contains("cluster")) parse_fail("$", "missing cluster");
  const json& cluster = root.at("cluster");
  for (const json& g : get_field<json>(cluster, "$.cluster", "gpus")) {
    GpuSpec gpu;
    gpu.id = get_field<std::string>(g, "$.cluster.gpus[]", "id");
    gpu.memory_bytes = get_field<Bytes>(g, "$.cluster.gpus[]", "memory_bytes");
    cfg.gpus.push_back(std::move(gpu));
  }
  for (const json& g : get_field<json>(cluster, "$.cluster", "groups")) {
    GroupSpec group;
    group.id = get_field<std::string>(g, "$.cluster.groups[]", "id");
    group.gpus =
        get_field<std::vector<std::string>>(g, "$.cluster.groups[]", "gpus");
    cfg.groups.push_back(std::move(group));
  }

  if (!root.contains("models") || !root.at("models").is_array()) {
    parse_fail("$", "missing models array");
  }
  for (std::size_t i = 0; i < root.at("models").size(); ++i) {
    cfg.models.push_back(parse_model(root.at("models")[i],
                                     "$.models[" + std::to_string(i) + "]"));
  }

  if (root.contains("placement") && !root.at("placement").is_null()) {
    for (const auto& [model, group] : root.at("placement").items()) {
      cfg.placement[model] = group.get<std::string>();
    }
  }

  if (root.contains("workload")) {
    const json& w = root.at("workload");
    cfg.trace_file = get_or<std::string>(w, "$.workload", "trace_file", "");
    if (w.contains("models")) {
      for (const auto& [model_id, mw_json] : w.at("models").items()) {
        const std::string where = "$.workload.models." + model_id;
        ModelWorkload mw;
        mw.model_id = model_id;
        mw.rate_scale = get_or<double>(mw_json, where, "rate_scale", 1.0);
        if (!mw_json.contains("phases")) parse_fail(where, "missing phases");
        for (const json& ph : mw_json.at("phases")) {
          RatePhase phase;
          phase.start_s = get_field<double>(ph, where + ".phases[]", "start_s");
          phase.end_s = get_field<double>(ph, where + ".phases[]", "end_s");
          phase.rate_rps = get_field<double>(ph, where + ".phases[]", "rate_rps");
          if (phase.end_s < phase.start_s) {
            parse_fail(where + ".phases[]", "end_s before start_s");
          }
          if (phase.rate_rps < 0.0) {
            parse_fail(where + ".phases[]", "rate_rps must be >= 0");
          }
          mw.phases.push_back(phase);
        }
        mw.prompt_tokens = parse_distribution(mw_json.at("prompt_tokens"),
                                              where + ".prompt_tokens");
        mw.output_tokens = parse_distribution(mw_json.at("output_tokens"),
                                              where + ".output_tokens");
        cfg.workload.push_back(std::move(mw));
      }
    }
  }

  if (root.contains("output")) {
    const json& o = root.at("output");
    cfg.output.summary_path = get_or<std::string>(o, "$.output", "summary", "");
    cfg.output.series_path = get_or<std::string>(o, "$.output", "series", "");
    cfg.output.decision_log_path =
        get_or<std::string>(o, "$.output", "decision_log", "");
    cfg.output.alloc_log_path = get_or<std::string>(o, "$.output", "alloc_log", "");
    cfg.output.request_log_path =
        get_or<std::string>(o, "$.output", "request_log", "");
  }
  return cfg;
}

ScenarioConfig parse_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw InvalidConfigError("cannot open config file: " + path);
  }
  std::ostringstream text;
  text << in.rdbuf();
  return parse_scenario_json(text.str());
}

std::string serialize_scenario(const ScenarioConfig& cfg) {
  json root;
  root["seed"] = cfg.seed;
  root["duration_s"] = cfg.duration_s;
  root["mode"] = cfg.mode;
  root["policy"] = cfg.policy;
  root["block_policy"] = cfg.block_policy;
  if (cfg.slab.auto_lcm) {
    root["slab"] = {{"policy", "auto-lcm"}, {"multiplier", cfg.slab.multiplier}};
  } else {
    root["slab"] = {{"policy", "explicit"},
                    {"slab_size_bytes", cfg.slab.explicit_bytes}};
  }
  if (cfg.kv_pool.residual) {
    root["kv_pool"] = {{"policy", "residual"}};
  } else {
    root["kv_pool"] = {{"policy", "explicit"}, {"bytes", cfg.kv_pool.explicit_bytes}};
  }
  json gpus = json::array();
  for (const GpuSpec& g : cfg.gpus) {
    gpus.push_back({{"id", g.id}, {"memory_bytes", g.memory_bytes}});
  }
  json groups = json::array();
  for (const GroupSpec& g : cfg.groups) {
    groups.push_back({{"id", g.id}, {"gpus", g.gpus}});
  }
  root["cluster"] = {{"gpus", gpus}, {"groups", groups}};
  json models = json::array();
  for (const ModelProfile& m : cfg.models) {
    models.push_back(model_to_json(m));
  }
  root["models"] = models;
  if (!cfg.placement.empty()) {
    root["placement"] = cfg.placement;
  }
  json workload;
  if (!cfg.trace_file.empty()) workload["trace_file"] = cfg.trace_file;
  json workload_models = json::object();
  for (const ModelWorkload& mw : cfg.workload) {
    json phases = json::array();
    for (const RatePhase& ph : mw.phases) {
      phases.push_back({{"start_s", ph.start_s},
                        {"end_s", ph.end_s},
                        {"rate_rps", ph.rate_rps}});
    }
    workload_models[mw.model_id] = {
        {"rate_scale", mw.rate_scale},
        {"phases", phases},
        {"prompt_tokens", distribution_to_json(mw.prompt_tokens)},
        {"output_tokens", distribution_to_json(mw.output_tokens)}};
  }
  workload["models"] = workload_models;
  root["workload"] = workload;
  root["output"] = {{"summary", cfg.output.summary_path},
                    {"series", cfg.output.series_path},
                    {"decision_log", cfg.output.decision_log_path},
                    {"alloc_log", cfg.output.alloc_log_path},
                    {"request_log", cfg.output.request_log_path}};
  return root.dump(2) + "\n";
}

void validate_scenario(const ScenarioConfig& cfg) {
  if (cfg.duration_s <= 0.0) {
    throw InvalidConfigError("duration_s must be positive");
  }
  if (cfg.mode != "dynamic" && cfg.mode != "static") {
    throw InvalidConfigError("mode must be 'dynamic' or 'static'");
  }
  if (cfg.policy != "adaptive" && cfg.policy != "fcfs") {
    throw InvalidConfigError("policy must be 'adaptive' or 'fcfs'");
  }
  if (cfg.block_policy != "per-model" && cfg.block_policy != "unified-max") {
    throw InvalidConfigError("block_policy must be 'per-model' or 'unified-max'");
  }
  std::map<std::string, Bytes> gpu_memory;
  for (const GpuSpec& g : cfg.gpus) {
    if (!gpu_memory.emplace(g.id, g.memory_bytes).second) {
      throw InvalidConfigError("duplicate gpu id: " + g.id);
    }
    if (g.memory_bytes == 0) {
      throw InvalidConfigError("gpu '" + g.id + "' has zero memory");
    }
  }
  std::map<std::string, const GroupSpec*> group_by_id;
  std::map<std::string, int> gpu_use;
  for (const GroupSpec& g : cfg.groups) {
    if (!group_by_id.emplace(g.id, &g).second) {
      throw InvalidConfigError("duplicate group id: " + g.id);
    }
    if (g.gpus.empty()) {
      throw InvalidConfigError("group '" + g.id + "' has no gpus");
    }
    std::optional<Bytes> memory;
    for (const std::string& gpu : g.gpus) {
      auto it = gpu_memory.find(gpu);
      if (it == gpu_memory.end()) {
        throw InvalidConfigError("group '" + g.id + "' references unknown gpu " +
                                 gpu);
      }
      if (++gpu_use[gpu] > 1) {
        throw InvalidConfigError("gpu '" + gpu + "' appears in multiple groups");
      }
      if (memory && *memory != it->second) {
        throw InvalidConfigError("group '" + g.id +
                                 "' mixes gpus of different memory sizes");
      }
      memory = it->second;
    }
  }
  std::map<std::string, const ModelProfile*> model_by_id;
  for (const ModelProfile& m : cfg.models) {
    if (m.model_id.find('#') != std::string::npos) {
      throw InvalidConfigError("model id may not contain '#': " + m.model_id);
    }
    if (!model_by_id.emplace(m.model_id, &m).second) {
      throw InvalidConfigError("duplicate model id: " + m.model_id);
    }
    validate_profile(m);
  }
  for (const auto& [model, group] : cfg.placement) {
    if (!model_by_id.count(model)) {
      throw InvalidConfigError("placement references unknown model: " + model);
    }
    if (!group_by_id.count(group)) {
      throw InvalidConfigError("placement references unknown group: " + group);
    }
  }
  for (const ModelWorkload& mw : cfg.workload) {
    auto it = model_by_id.find(mw.model_id);
    if (it == model_by_id.end()) {
      throw InvalidConfigError("workload references unknown model: " +
                               mw.model_id);
    }
    mw.prompt_tokens.validate();
    mw.output_tokens.validate();
    if (mw.prompt_tokens.max_support() > it->second->max_batched_tokens) {
      throw InvalidConfigError(
          "model '" + mw.model_id +
          "': prompt distribution exceeds max_batched_tokens");
    }
    if (mw.rate_scale <= 0.0) {
      throw InvalidConfigError("model '" + mw.model_id +
                               "': rate_scale must be positive");
    }
  }
}

std::vector<GpuGroup> build_groups(const ScenarioConfig& cfg) {
  std::map<std::string, Bytes> gpu_memory;
  for (const GpuSpec& g : cfg.gpus) gpu_memory[g.id] = g.memory_bytes;
  std::vector<GpuGroup> groups;
  for (const GroupSpec& spec : cfg.groups) {
    GpuGroup g;
    g.group_id = spec.id;
    g.member_gpus = spec.gpus;
    g.total_memory = gpu_memory.at(spec.gpus.front());
    groups.push_back(std::move(g));
  }
  return groups;
}

WorkloadSpec build_workload_spec(const ScenarioConfig& cfg) {
  WorkloadSpec spec;
  spec.seed = cfg.seed;
  spec.duration_s = cfg.duration_s;
  spec.models = cfg.workload;
  return spec;
}

SimulationOptions build_sim_options(const ScenarioConfig& cfg) {
  SimulationOptions opt;
  opt.mode = cfg.mode == "static" ? MemoryMode::kStaticPartition
                                  : MemoryMode::kDynamicSlab;
  opt.policy = cfg.policy == "fcfs" ? SchedPolicy::kFcfs : SchedPolicy::kAdaptive;
  opt.block_policy = cfg.block_policy == "unified-max" ? BlockPolicy::kUnifiedMax
                                                       : BlockPolicy::kPerModel;
  opt.slab = cfg.slab;
  opt.kv_pool = cfg.kv_pool;
  opt.duration_s = cfg.duration_s;
  opt.seed = cfg.seed;
  return opt;
}

PlacementPlan resolve_placement(const ScenarioConfig& cfg) {
  std::vector<GpuGroup> groups = build_groups(cfg);
  if (cfg.placement.empty()) {
    return place_models(cfg.models, std::move(groups));
  }
  PlacementPlan plan;
  plan.assignments = cfg.placement;
  for (const auto& [model_id, group_id] : cfg.placement) {
    auto mit = std::find_if(cfg.models.begin(), cfg.models.end(),
                            [&](const ModelProfile& m) {
                              return m.model_id == model_id;
                            });
    auto git = std::find_if(groups.begin(), groups.end(), [&](const GpuGroup& g) {
      return g.group_id == group_id;
    });
    const Bytes footprint = base_footprint(*mit);
    if (git->member_gpus.size() != mit->tp_degree) {
      throw InvalidScenarioError("model '" + model_id +
                                 "' placed on group of wrong TP size");
    }
    if (footprint > git->residual()) {
      throw InvalidScenarioError("explicit placement overcommits group '" +
                                 group_id + "'");
    }
    git->residents.push_back({model_id, footprint});
  }
  plan.groups = std::move(groups);
  return plan;
}

std::vector<Request> resolve_requests(const ScenarioConfig& cfg,
                                      const ProfileMap& profiles) {
  if (!cfg.trace_file.empty()) {
    std::ifstream in(cfg.trace_file);
    if (!in) {
      throw InvalidConfigError("cannot open trace file: " + cfg.trace_file);
    }
    return load_trace(in, profiles);
  }
  return generate_workload(build_workload_spec(cfg), profiles);
}

void write_placement_report(const PlacementPlan& plan, std::ostream& out) {
  json root;
  root["assignments"] = plan.assignments;
  json groups = json::array();
  for (const GpuGroup& g : plan.groups) {
    json residents = json::array();
    for (const auto& r : g.residents) {
      residents.push_back(
          {{"model", r.model_id}, {"footprint_bytes", r.footprint_bytes}});
    }
    groups.push_back({{"id", g.group_id},
                      {"total_memory_bytes", g.total_memory},
                      {"residual_bytes", g.residual()},
                      {"residents", residents}});
  }
  root["groups"] = groups;
  json trace = json::array();
  for (const ScoreTraceEntry& t : plan.trace) {
    json scores = json::array();
    for (const auto& [group_id, score] : t.candidate_scores) {
      json entry;
      entry["group"] = group_id;
      if (score) {
        entry["score_tokens"] = *score;
      } else {
        entry["score_tokens"] = nullptr;
      }
      scores.push_back(entry);
    }
    trace.push_back({{"model", t.model_id},
                     {"footprint_bytes", t.footprint_bytes},
                     {"scores", scores},
                     {"chosen_group", t.chosen_group}});
  }
  root["score_trace"] = trace;
  out << root.dump(2) << "\n";
}

namespace {

json metrics_to_json(const ModelMetrics& m) {
  json j;
  j["group"] = m.group_id;
  j["pool_bytes"] = m.pool_bytes;
  j["arrived"] = m.arrived;
  j["completed"] = m.completed;
  j["dropped"] = m.dropped;
  j["on_time"] = m.on_time;
  j["evictions"] = m.evictions;
  j["generated_tokens"] = m.generated_tokens;
  j["ttft_slo_attainment"] = m.ttft_slo_attainment;
  j["throughput_rps"] = m.throughput_rps;
  j["slo_attained_throughput_rps"] = m.slo_attained_throughput_rps;
  j["token_gen_tps"] = m.token_gen_tps;
  j["mean_cached_tokens"] = m.mean_cached_tokens;
  j["mean_internal_frag_bytes"] = m.mean_internal_frag_bytes;
  j["mean_queue_len"] = m.mean_queue_len;
  j["peak_queue_len"] = m.peak_queue_len;
  return j;
}

}  // namespace

void write_summary_json(const MetricsReport& report, std::ostream& out) {
  json root;
  root["schema_version"] = 1;
  root["seed"] = report.seed;
  root["duration_s"] = report.duration_s;
  root["mode"] = report.mode;
  root["policy"] = report.policy;
  root["anchor_violations"] = report.anchor_violations;
  json models = json::object();
  for (const auto& [id, m] : report.per_model) {
    models[id] = metrics_to_json(m);
  }
  root["models"] = models;
  root["aggregate"] = metrics_to_json(report.aggregate);
  json pools = json::array();
  for (const GroupPoolInfo& p : report.pools) {
    pools.push_back({{"group", p.group_id},
                     {"pool_bytes", p.pool_bytes},
                     {"slab_size_bytes", p.slab_size_bytes},
                     {"keys", p.keys},
                     {"final", {{"allocated_bytes", p.final_stats.allocated_bytes},
                                {"free_block_bytes", p.final_stats.free_block_bytes},
                                {"slab_residue_bytes", p.final_stats.slab_residue_bytes},
                                {"free_slab_bytes", p.final_stats.free_slab_bytes}}}});
  }
  root["pools"] = pools;
  out << root.dump(2) << "\n";
}

void write_series_csv(const MetricsReport& report, std::ostream& out) {
  out << "time_s,model,queue_len,running,held_blocks,cached_tokens,"
         "internal_frag_bytes,pool_allocated_bytes,pool_free_block_bytes,"
         "pool_slab_residue_bytes,pool_free_slab_bytes\n";
  std::ostringstream row;
  row << std::setprecision(17);
  for (const SeriesRow& r : report.series) {
    row.str("");
    row << r.time << ',' << r.model_id << ',' << r.queue_len << ',' << r.running
        << ',' << r.held_blocks << ',' << r.cached_tokens << ','
        << r.internal_frag_bytes << ',' << r.pool.allocated_bytes << ','
        << r.pool.free_block_bytes << ',' << r.pool.slab_residue_bytes << ','
        << r.pool.free_slab_bytes << '\n';
    out << row.str();
  }
}

void write_request_log_csv(const MetricsReport& report, std::ostream& out) {
  out << "request_id,model,arrival_s,prompt_tokens,output_tokens,dropped,"
         "completed,on_time,first_token_s,ttft_s,completion_s\n";
  std::ostringstream row;
  row << std::setprecision(17);
  for (const RequestRecord& r : report.requests) {
    row.str("");
    row << r.request_id << ',' << r.model_id << ',' << r.arrival_time << ','
        << r.prompt_tokens << ',' << r.output_tokens << ',' << (r.dropped ? 1 : 0)
        << ',' << (r.completed ? 1 : 0) << ',' << (r.on_time ? 1 : 0) << ',';
    if (std::isnan(r.first_token_time)) {
      row << "";
    } else {
      row << r.first_token_time;
    }
    row << ',';
    if (std::isnan(r.ttft)) {
      row << "";
    } else {
      row << r.ttft;
    }
    row << ',';
    if (std::isnan(r.completion_time)) {
      row << "";
    } else {
      row << r.completion_time;
    }
    row << '\n';
    out << row.str();
  }
}

std::string report_fingerprint(const MetricsReport& report) {
  std::ostringstream out;
  out << std::setprecision(17);
  write_summary_json(report, out);
  write_series_csv(report, out);
  write_request_log_csv(report, out);
  return out.str();
}

}  // namespace slabsim
