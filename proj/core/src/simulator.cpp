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

#include "slabsim/simulator.hpp"

#include <algorithm>
#include <memory>
#include <numeric>
#include <sstream>

namespace slabsim {

namespace {

std::string base_model_id(const std::string& replica_id) {
  const auto pos = replica_id.rfind('#');
  return pos == std::string::npos ? replica_id : replica_id.substr(0, pos);
}

Tokens ceil_div(Tokens a, Tokens b) { return (a + b - 1) / b; }

struct LiveRequest {
  Request req;
  Tokens generated = 0;
  std::vector<BlockHandle> blocks;
  bool stalled = false;

  Tokens cached_tokens() const { return req.prompt_tokens + generated; }
};

// One model engine bound to a GPU group and a block pool (shared in dynamic
// mode, private in static mode).
struct EngineSim {
  std::string model_id;
  std::string group_id;
  const ModelProfile* profile = nullptr;
  CostModel cost;
  SlabPool* pool = nullptr;
  Bytes key = 0;
  Tokens tpb = 16;
  Tokens avg_blocks_per_req = 1;
  Bytes useful_token_bytes = 0;  // num_layers * token_size
  Bytes block_metadata_bytes = 0;  // num_layers * quant params per block

  std::vector<Request> waiting;  // ascending (arrival_time, request_id)
  std::vector<LiveRequest> running;
  bool prefer_decode = false;
  bool admission_blocked = false;

  // time-weighted accumulators
  Seconds integral_t = 0.0;
  double cached_integral = 0.0;
  double frag_integral = 0.0;
  double queue_integral = 0.0;
  Seconds last_series_t = -1.0;

  ModelMetrics metrics;

  Tokens cached_total() const {
    Tokens sum = 0;
    for (const auto& lr : running) sum += lr.cached_tokens();
    return sum;
  }
  std::uint64_t held_blocks_total() const {
    std::uint64_t sum = 0;
    for (const auto& lr : running) sum += lr.blocks.size();
    return sum;
  }
  Bytes internal_frag_bytes() const {
    Bytes frag = 0;
    for (const auto& lr : running) {
      const Bytes held = static_cast<Bytes>(lr.blocks.size());
      const Bytes used = lr.cached_tokens() * useful_token_bytes +
                         held * block_metadata_bytes;
      frag += held * key - used;
    }
    return frag;
  }

  void integrate_to(Seconds t) {
    const Seconds dt = t - integral_t;
    if (dt <= 0.0) return;
    cached_integral += static_cast<double>(cached_total()) * dt;
    frag_integral += static_cast<double>(internal_frag_bytes()) * dt;
    queue_integral += static_cast<double>(waiting.size()) * dt;
    integral_t = t;
  }

  void note_queue_len() {
    metrics.peak_queue_len =
        std::max<std::uint64_t>(metrics.peak_queue_len, waiting.size());
  }

  void insert_waiting(Request r) {
    auto pos = std::upper_bound(waiting.begin(), waiting.end(), r,
                                [](const Request& a, const Request& b) {
                                  if (a.arrival_time != b.arrival_time) {
                                    return a.arrival_time < b.arrival_time;
                                  }
                                  return a.request_id < b.request_id;
                                });
    waiting.insert(pos, std::move(r));
    note_queue_len();
  }
};

struct GroupSim {
  const GpuGroup* group = nullptr;
  std::vector<std::size_t> engine_indices;
  std::vector<std::unique_ptr<SlabPool>> pools;  // one (dynamic) or per engine
  std::vector<Request> arrivals;  // ascending arrival
  std::size_t next_arrival = 0;
  std::size_t rr = 0;
  Seconds now = 0.0;
};

enum class TurnKind { kNone, kChanged, kExecuted };

struct TurnResult {
  TurnKind kind = TurnKind::kNone;
  Seconds duration = 0.0;
};

class Simulation {
 public:
  Simulation(const PlacementPlan& plan, const ProfileMap& profiles,
             const std::vector<Request>& requests,
             const SimulationOptions& options);

  MetricsReport run();

 private:
  void build_engines(const PlacementPlan& plan, const ProfileMap& profiles);
  void build_pools();
  void route_requests(const std::vector<Request>& requests);
  void run_group(GroupSim& gs);
  TurnResult engine_turn(GroupSim& gs, EngineSim& e);
  TurnResult do_admission(GroupSim& gs, EngineSim& e);
  TurnResult do_decode(GroupSim& gs, EngineSim& e);
  BatchDecision fcfs_schedule(const EngineSim& e, std::uint64_t n_max,
                              Tokens t_max) const;
  void log_decision(const EngineSim& e, Seconds now, const BatchDecision& d);
  void unblock_group(GroupSim& gs);
  void emit_series_row(GroupSim& gs, EngineSim& e);
  void verify_group(const GroupSim& gs) const;
  void finalize(MetricsReport& report);
  RequestRecord& record_of(std::uint64_t request_id) {
    return records_[record_index_.at(request_id)];
  }

  const SimulationOptions& options_;
  std::vector<EngineSim> engines_;
  std::vector<GroupSim> groups_;
  std::vector<RequestRecord> records_;
  std::map<std::uint64_t, std::size_t> record_index_;
  std::vector<SeriesRow> series_;
  std::uint64_t anchor_violations_ = 0;
  std::vector<GroupPoolInfo> pool_info_;
};

Simulation::Simulation(const PlacementPlan& plan, const ProfileMap& profiles,
                       const std::vector<Request>& requests,
                       const SimulationOptions& options)
    : options_(options) {
  if (options_.duration_s <= 0.0) {
    throw InvalidScenarioError("simulation duration must be positive");
  }
  build_engines(plan, profiles);
  build_pools();
  route_requests(requests);
}

void Simulation::build_engines(const PlacementPlan& plan,
                               const ProfileMap& profiles) {
  groups_.resize(plan.groups.size());
  for (std::size_t gi = 0; gi < plan.groups.size(); ++gi) {
    groups_[gi].group = &plan.groups[gi];
  }

  for (const auto& [model_id, group_id] : plan.assignments) {
    auto pit = profiles.find(model_id);
    if (pit == profiles.end()) {
      throw InvalidScenarioError("placed model has no profile: " + model_id);
    }
    const ModelProfile& p = pit->second;
    validate_profile(p);
    if (p.decode_cost.gamma_s <= 0.0 && p.decode_cost.delta_s_per_seq <= 0.0) {
      throw InvalidScenarioError("model '" + model_id +
                                 "': decode step needs gamma > 0 or delta > 0");
    }
    EngineSim e;
    e.model_id = model_id;
    e.group_id = group_id;
    e.profile = &p;
    e.cost = cost_model(p);
    e.key = kv_block_size(p);
    e.tpb = p.tokens_per_block;
    e.avg_blocks_per_req = std::max<Tokens>(1, ceil_div(p.avg_seq_tokens, e.tpb));
    e.useful_token_bytes = static_cast<Bytes>(p.num_layers) * token_size(p);
    e.block_metadata_bytes =
        static_cast<Bytes>(p.num_layers) * p.quant_param_bytes_per_block;
    e.metrics.model_id = model_id;
    e.metrics.group_id = group_id;
    engines_.push_back(std::move(e));
  }
  std::sort(engines_.begin(), engines_.end(),
            [](const EngineSim& a, const EngineSim& b) {
              return a.model_id < b.model_id;
            });

  for (std::size_t ei = 0; ei < engines_.size(); ++ei) {
    bool found = false;
    for (GroupSim& gs : groups_) {
      if (gs.group->group_id == engines_[ei].group_id) {
        gs.engine_indices.push_back(ei);
        found = true;
        break;
      }
    }
    if (!found) {
      throw InvalidScenarioError("assignment references unknown group: " +
                                 engines_[ei].group_id);
    }
  }
}

void Simulation::build_pools() {
  for (GroupSim& gs : groups_) {
    if (gs.engine_indices.empty()) continue;
    const GpuGroup& group = *gs.group;
    if (group.footprint_total() > group.total_memory) {
      throw InvalidScenarioError("group '" + group.group_id +
                                 "': resident footprints exceed memory");
    }

    // Effective allocation keys, optionally unified to the largest resident
    // block size (fixed-block baseline).
    Bytes max_key = 0;
    for (std::size_t ei : gs.engine_indices) {
      max_key = std::max(max_key, engines_[ei].key);
    }
    std::vector<Bytes> keys;
    for (std::size_t ei : gs.engine_indices) {
      EngineSim& e = engines_[ei];
      if (options_.block_policy == BlockPolicy::kUnifiedMax) {
        e.key = max_key;
      }
      keys.push_back(e.key);
    }
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

    Bytes pool_bytes;
    if (options_.kv_pool.residual) {
      Bytes charged = 0;
      Bytes kv_back = 0;
      for (std::size_t ei : gs.engine_indices) {
        charged += base_footprint(*engines_[ei].profile);
        kv_back += kv_reservation(*engines_[ei].profile);
      }
      if (charged > group.total_memory) {
        throw InvalidScenarioError("group '" + group.group_id +
                                   "': footprints exceed memory");
      }
      pool_bytes = group.total_memory - charged + kv_back;
    } else {
      pool_bytes = options_.kv_pool.explicit_bytes;
    }

    auto slab_size_for = [&](const std::vector<Bytes>& pool_keys) -> Bytes {
      if (!options_.slab.auto_lcm) {
        return options_.slab.explicit_bytes;
      }
      std::uint64_t l = 1;
      for (Bytes k : pool_keys) {
        l = std::lcm(l, k);
      }
      return l * options_.slab.multiplier;
    };

    GroupPoolInfo info;
    info.group_id = group.group_id;
    info.keys = keys;

    if (options_.mode == MemoryMode::kDynamicSlab) {
      SlabPoolConfig cfg;
      cfg.capacity_bytes = pool_bytes;
      cfg.slab_size_bytes = slab_size_for(keys);
      cfg.block_size_keys = keys;
      auto pool = std::make_unique<SlabPool>(cfg);
      for (std::size_t ei : gs.engine_indices) {
        engines_[ei].pool = pool.get();
        engines_[ei].metrics.pool_bytes = pool_bytes;
      }
      info.pool_bytes = pool_bytes;
      info.slab_size_bytes = cfg.slab_size_bytes;
      gs.pools.push_back(std::move(pool));
    } else {
      // Private partitions proportional to base footprints.
      Bytes footprint_sum = 0;
      for (std::size_t ei : gs.engine_indices) {
        footprint_sum += base_footprint(*engines_[ei].profile);
      }
      Bytes slab_ref = 0;
      for (std::size_t ei : gs.engine_indices) {
        EngineSim& e = engines_[ei];
        const Bytes fp = base_footprint(*e.profile);
        const Bytes share = static_cast<Bytes>(
            static_cast<unsigned __int128>(pool_bytes) * fp / footprint_sum);
        SlabPoolConfig cfg;
        cfg.capacity_bytes = share;
        cfg.slab_size_bytes = slab_size_for({e.key});
        cfg.block_size_keys = {e.key};
        if (share < cfg.slab_size_bytes) {
          throw InvalidScenarioError("static partition of model '" +
                                     e.model_id + "' is smaller than one slab");
        }
        auto pool = std::make_unique<SlabPool>(cfg);
        e.pool = pool.get();
        e.metrics.pool_bytes = share;
        slab_ref = cfg.slab_size_bytes;
        gs.pools.push_back(std::move(pool));
      }
      info.pool_bytes = pool_bytes;
      info.slab_size_bytes = slab_ref;
    }
    pool_info_.push_back(std::move(info));

    if (options_.alloc_log) {
      for (auto& pool : gs.pools) {
        pool->set_clock([&gs]() { return gs.now; });
        pool->set_op_log([this](const OpLogRecord& rec) {
          write_op_log_line(*options_.alloc_log, rec);
        });
      }
    }
  }
}

void Simulation::route_requests(const std::vector<Request>& requests) {
  // Replicas of one model round-robin the base model's arrivals.
  std::map<std::string, std::vector<std::size_t>> replicas_by_base;
  for (std::size_t ei = 0; ei < engines_.size(); ++ei) {
    replicas_by_base[base_model_id(engines_[ei].model_id)].push_back(ei);
  }
  std::map<std::string, std::size_t> rr_by_base;

  for (const Request& r : requests) {
    if (r.arrival_time >= options_.duration_s) continue;
    auto bit = replicas_by_base.find(r.model_id);
    if (bit == replicas_by_base.end()) {
      throw InvalidScenarioError("request for model without engine: " +
                                 r.model_id);
    }
    const std::size_t ei = bit->second[rr_by_base[r.model_id]++ %
                                      bit->second.size()];
    Request routed = r;
    routed.model_id = engines_[ei].model_id;

    RequestRecord rec;
    rec.request_id = routed.request_id;
    rec.model_id = routed.model_id;
    rec.arrival_time = routed.arrival_time;
    rec.prompt_tokens = routed.prompt_tokens;
    rec.output_tokens = routed.output_tokens;
    record_index_[routed.request_id] = records_.size();
    records_.push_back(std::move(rec));

    for (GroupSim& gs : groups_) {
      if (gs.group->group_id == engines_[ei].group_id) {
        gs.arrivals.push_back(std::move(routed));
        break;
      }
    }
  }
  for (GroupSim& gs : groups_) {
    std::stable_sort(gs.arrivals.begin(), gs.arrivals.end(),
                     [](const Request& a, const Request& b) {
                       if (a.arrival_time != b.arrival_time) {
                         return a.arrival_time < b.arrival_time;
                       }
                       return a.request_id < b.request_id;
                     });
  }
}

void Simulation::unblock_group(GroupSim& gs) {
  for (std::size_t ei : gs.engine_indices) {
    engines_[ei].admission_blocked = false;
  }
}

BatchDecision Simulation::fcfs_schedule(const EngineSim& e, std::uint64_t n_max,
                                        Tokens t_max) const {
  BatchDecision d;
  Tokens tokens = 0;
  std::size_t taken = 0;
  for (const Request& r : e.waiting) {
    if (taken + 1 > n_max || tokens + r.prompt_tokens > t_max) break;
    d.admitted.push_back(r.request_id);
    tokens += r.prompt_tokens;
    ++taken;
  }
  for (std::size_t i = taken; i < e.waiting.size(); ++i) {
    d.deferred.push_back(e.waiting[i].request_id);
  }
  if (!d.admitted.empty()) {
    d.predicted_ttft = chunked_prefill_seconds(e.cost.alpha, e.cost.beta,
                                               tokens, std::max<Tokens>(t_max, 1));
    Seconds anchor = e.waiting.front().deadline;
    for (std::size_t i = 0; i < taken; ++i) {
      anchor = std::min(anchor, e.waiting[i].deadline);
    }
    d.anchor_deadline = anchor;
  }
  return d;
}

void Simulation::log_decision(const EngineSim& e, Seconds now,
                              const BatchDecision& d) {
  if (!options_.decision_log) return;
  std::ostream& out = *options_.decision_log;
  out << "{\"t\":" << now << ",\"model\":\"" << e.model_id << "\",\"admitted\":[";
  for (std::size_t i = 0; i < d.admitted.size(); ++i) {
    out << (i ? "," : "") << d.admitted[i];
  }
  out << "],\"dropped\":[";
  for (std::size_t i = 0; i < d.dropped.size(); ++i) {
    out << (i ? "," : "") << d.dropped[i];
  }
  out << "],\"deferred\":[";
  for (std::size_t i = 0; i < d.deferred.size(); ++i) {
    out << (i ? "," : "") << d.deferred[i];
  }
  out << "],\"predicted_ttft\":";
  if (d.predicted_ttft) {
    out << *d.predicted_ttft;
  } else {
    out << "null";
  }
  out << ",\"anchor_deadline\":";
  if (d.anchor_deadline) {
    out << *d.anchor_deadline;
  } else {
    out << "null";
  }
  out << "}\n";
}

TurnResult Simulation::do_admission(GroupSim& gs, EngineSim& e) {
  const std::uint64_t in_flight = e.running.size();
  const std::uint64_t room =
      e.profile->max_batch_requests > in_flight
          ? e.profile->max_batch_requests - in_flight
          : 0;
  const std::uint64_t free_blocks = e.pool->free_blocks_for_key(e.key);
  const std::uint64_t n_max =
      std::min<std::uint64_t>(room, free_blocks / e.avg_blocks_per_req);
  const Tokens t_max =
      std::min<Tokens>(e.profile->max_batched_tokens, free_blocks * e.tpb);
  if (n_max == 0 || t_max == 0) {
    e.admission_blocked = true;
    return {};
  }

  const BatchDecision decision =
      options_.policy == SchedPolicy::kAdaptive
          ? schedule_batch(e.waiting, gs.now, e.cost, n_max, t_max)
          : fcfs_schedule(e, n_max, t_max);
  log_decision(e, gs.now, decision);

  if (options_.policy == SchedPolicy::kAdaptive && !decision.admitted.empty()) {
    if (!(gs.now + *decision.predicted_ttft < *decision.anchor_deadline)) {
      ++anchor_violations_;
    }
  }

  bool changed = false;
  for (std::uint64_t id : decision.dropped) {
    auto it = std::find_if(e.waiting.begin(), e.waiting.end(),
                           [id](const Request& r) { return r.request_id == id; });
    RequestRecord& rec = record_of(id);
    rec.dropped = true;
    ++e.metrics.dropped;
    e.waiting.erase(it);
    changed = true;
  }

  // Claim prompt blocks in EDF order; requests the pool cannot back stay in
  // the waiting queue until frees occur.
  std::vector<LiveRequest> started;
  Tokens started_tokens = 0;
  for (std::uint64_t id : decision.admitted) {
    auto it = std::find_if(e.waiting.begin(), e.waiting.end(),
                           [id](const Request& r) { return r.request_id == id; });
    const Tokens need = ceil_div(it->prompt_tokens, e.tpb);
    LiveRequest lr;
    lr.req = *it;
    bool ok = true;
    for (Tokens b = 0; b < need; ++b) {
      auto handle = e.pool->try_alloc_block(e.key);
      if (!handle) {
        ok = false;
        break;
      }
      lr.blocks.push_back(*handle);
    }
    if (!ok) {
      for (const BlockHandle& h : lr.blocks) e.pool->free_block(h);
      continue;  // deferred by memory; request stays in waiting
    }
    started_tokens += it->prompt_tokens;
    started.push_back(std::move(lr));
    e.waiting.erase(it);
  }

  if (started.empty()) {
    if (!changed) {
      e.admission_blocked = true;
      return {};
    }
    return {TurnKind::kChanged, 0.0};
  }

  const Seconds dur = chunked_prefill_seconds(e.cost.alpha, e.cost.beta,
                                              started_tokens,
                                              std::max<Tokens>(t_max, 1));
  const Seconds finish = gs.now + dur;
  e.integrate_to(finish);
  for (LiveRequest& lr : started) {
    RequestRecord& rec = record_of(lr.req.request_id);
    // An evicted request can be re-admitted; its first token already counted.
    if (std::isnan(rec.admit_time)) {
      rec.admit_time = gs.now;
      rec.predicted_ttft_at_admit = *decision.predicted_ttft;
      rec.first_token_time = finish;
      rec.ttft = finish - lr.req.arrival_time;
      rec.on_time = rec.ttft <= e.profile->ttft_slo_s;
      if (rec.on_time) ++e.metrics.on_time;
    }
    e.running.push_back(std::move(lr));
  }
  e.prefer_decode = true;
  return {TurnKind::kExecuted, dur};
}

TurnResult Simulation::do_decode(GroupSim& gs, EngineSim& e) {
  // Grow KV for requests crossing a block boundary; the rest of the batch
  // proceeds even when some requests cannot get a block this step.
  std::size_t active = 0;
  Tokens active_cached = 0;
  for (LiveRequest& lr : e.running) {
    lr.stalled = false;
    const Tokens need = ceil_div(lr.cached_tokens() + 1, e.tpb);
    while (lr.blocks.size() < need) {
      auto handle = e.pool->try_alloc_block(e.key);
      if (!handle) {
        lr.stalled = true;
        break;
      }
      lr.blocks.push_back(*handle);
    }
    if (!lr.stalled) {
      ++active;
      active_cached += lr.cached_tokens();
    }
  }

  if (active == 0) {
    // Every running request is blocked on memory: evict the latest-deadline
    // one so the rest of the system can make progress.
    auto victim = std::max_element(
        e.running.begin(), e.running.end(),
        [](const LiveRequest& a, const LiveRequest& b) {
          if (a.req.deadline != b.req.deadline) {
            return a.req.deadline < b.req.deadline;
          }
          return a.req.request_id < b.req.request_id;
        });
    e.integrate_to(gs.now);
    for (const BlockHandle& h : victim->blocks) e.pool->free_block(h);
    Request back = victim->req;
    ++e.metrics.evictions;
    e.running.erase(victim);
    e.insert_waiting(std::move(back));
    unblock_group(gs);
    emit_series_row(gs, e);
    return {TurnKind::kChanged, 0.0};
  }

  const Seconds dur = e.cost.gamma +
                      e.cost.delta * static_cast<double>(active) +
                      e.cost.epsilon * static_cast<double>(active_cached);
  const Seconds finish = gs.now + dur;
  e.integrate_to(finish);
  e.metrics.generated_tokens += active;

  bool freed = false;
  for (auto it = e.running.begin(); it != e.running.end();) {
    if (it->stalled) {
      ++it;
      continue;
    }
    ++it->generated;
    if (it->generated >= it->req.output_tokens) {
      RequestRecord& rec = record_of(it->req.request_id);
      rec.completed = true;
      rec.completion_time = finish;
      ++e.metrics.completed;
      for (const BlockHandle& h : it->blocks) e.pool->free_block(h);
      freed = true;
      it = e.running.erase(it);
    } else {
      ++it;
    }
  }
  if (freed) {
    unblock_group(gs);
  }
  e.prefer_decode = false;
  return {TurnKind::kExecuted, dur};
}

TurnResult Simulation::engine_turn(GroupSim& gs, EngineSim& e) {
  const bool can_decode = !e.running.empty();
  const bool can_admit = !e.waiting.empty() && !e.admission_blocked;
  if (!can_decode && !can_admit) return {};

  // Alternate between admitting new work and decoding so neither phase
  // starves under sustained load.
  if (e.prefer_decode && can_decode) {
    return do_decode(gs, e);
  }
  if (can_admit) {
    TurnResult r = do_admission(gs, e);
    if (r.kind != TurnKind::kNone) return r;
  }
  if (can_decode) {
    return do_decode(gs, e);
  }
  return {};
}

void Simulation::emit_series_row(GroupSim& gs, EngineSim& e) {
  if (e.last_series_t >= 0.0 &&
      gs.now - e.last_series_t < options_.series_min_dt) {
    return;
  }
  e.last_series_t = gs.now;
  SeriesRow row;
  row.time = gs.now;
  row.model_id = e.model_id;
  row.queue_len = e.waiting.size();
  row.running = e.running.size();
  row.held_blocks = e.held_blocks_total();
  row.cached_tokens = e.cached_total();
  row.internal_frag_bytes = e.internal_frag_bytes();
  row.pool = e.pool->snapshot_stats();
  series_.push_back(std::move(row));
}

void Simulation::verify_group(const GroupSim& gs) const {
  for (const auto& pool : gs.pools) {
    std::string why;
    if (!pool->check_integrity(&why)) {
      throw Error("pool integrity violated: " + why);
    }
    std::uint64_t held = 0;
    for (std::size_t ei : gs.engine_indices) {
      if (engines_[ei].pool == pool.get()) {
        held += engines_[ei].held_blocks_total();
      }
    }
    if (held != pool->allocated_block_count()) {
      throw Error("block conservation violated: engines hold " +
                  std::to_string(held) + " blocks, pool reports " +
                  std::to_string(pool->allocated_block_count()));
    }
  }
}

void Simulation::run_group(GroupSim& gs) {
  if (gs.engine_indices.empty()) return;
  const Seconds duration = options_.duration_s;
  for (;;) {
    while (gs.next_arrival < gs.arrivals.size() &&
           gs.arrivals[gs.next_arrival].arrival_time <= gs.now) {
      const Request& r = gs.arrivals[gs.next_arrival];
      for (std::size_t ei : gs.engine_indices) {
        EngineSim& e = engines_[ei];
        if (e.model_id == r.model_id) {
          e.integrate_to(std::min(gs.now, duration));
          ++e.metrics.arrived;
          e.insert_waiting(r);
          e.admission_blocked = false;
          emit_series_row(gs, e);
          break;
        }
      }
      ++gs.next_arrival;
    }
    if (gs.now >= duration) break;

    bool progressed = false;
    const std::size_t n = gs.engine_indices.size();
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t slot = (gs.rr + k) % n;
      EngineSim& e = engines_[gs.engine_indices[slot]];
      const TurnResult r = engine_turn(gs, e);
      if (r.kind == TurnKind::kNone) continue;
      gs.rr = (slot + 1) % n;
      progressed = true;
      if (r.kind == TurnKind::kExecuted) {
        gs.now += r.duration;
        emit_series_row(gs, e);
      }
      if (options_.verify_invariants) verify_group(gs);
      break;
    }
    if (progressed) continue;

    if (gs.next_arrival < gs.arrivals.size()) {
      gs.now = gs.arrivals[gs.next_arrival].arrival_time;
      continue;
    }
    break;
  }

  // Hard stop: release everything still in flight.
  gs.now = std::max(gs.now, duration);
  for (std::size_t ei : gs.engine_indices) {
    EngineSim& e = engines_[ei];
    e.integrate_to(duration);
    for (LiveRequest& lr : e.running) {
      for (const BlockHandle& h : lr.blocks) e.pool->free_block(h);
    }
    e.running.clear();
    e.waiting.clear();
  }
  if (options_.verify_invariants) {
    verify_group(gs);
    for (const auto& pool : gs.pools) {
      if (pool->allocated_block_count() != 0) {
        throw Error("blocks leaked at simulation end");
      }
    }
  }
}

MetricsReport Simulation::run() {
  for (GroupSim& gs : groups_) {
    run_group(gs);
  }
  MetricsReport report;
  finalize(report);
  return report;
}

void Simulation::finalize(MetricsReport& report) {
  report.seed = options_.seed;
  report.duration_s = options_.duration_s;
  report.mode = options_.mode == MemoryMode::kDynamicSlab ? "dynamic" : "static";
  report.policy = options_.policy == SchedPolicy::kAdaptive ? "adaptive" : "fcfs";
  report.anchor_violations = anchor_violations_;
  report.series = std::move(series_);
  report.requests = std::move(records_);

  for (std::size_t pi = 0, gi = 0; gi < groups_.size(); ++gi) {
    const GroupSim& gs = groups_[gi];
    if (gs.engine_indices.empty()) continue;
    GroupPoolInfo& info = pool_info_[pi++];
    for (const auto& pool : gs.pools) {
      const FragmentationStats s = pool->snapshot_stats();
      info.final_stats.allocated_bytes += s.allocated_bytes;
      info.final_stats.free_block_bytes += s.free_block_bytes;
      info.final_stats.slab_residue_bytes += s.slab_residue_bytes;
      info.final_stats.free_slab_bytes += s.free_slab_bytes;
    }
    report.pools.push_back(info);
  }

  const double duration = options_.duration_s;
  ModelMetrics& agg = report.aggregate;
  agg.model_id = "aggregate";
  double agg_cached = 0.0, agg_frag = 0.0, agg_queue = 0.0;
  for (EngineSim& e : engines_) {
    ModelMetrics m = e.metrics;
    m.ttft_slo_attainment =
        m.arrived == 0 ? 1.0
                       : static_cast<double>(m.on_time) /
                             static_cast<double>(m.arrived);
    m.throughput_rps = static_cast<double>(m.completed) / duration;
    m.token_gen_tps = static_cast<double>(m.generated_tokens) / duration;
    m.mean_cached_tokens = e.cached_integral / duration;
    m.mean_internal_frag_bytes = e.frag_integral / duration;
    m.mean_queue_len = e.queue_integral / duration;

    std::uint64_t on_time_completed = 0;
    for (const RequestRecord& rec : report.requests) {
      if (rec.model_id == e.model_id && rec.completed && rec.on_time) {
        ++on_time_completed;
      }
    }
    m.slo_attained_throughput_rps =
        static_cast<double>(on_time_completed) / duration;

    agg.arrived += m.arrived;
    agg.completed += m.completed;
    agg.dropped += m.dropped;
    agg.on_time += m.on_time;
    agg.evictions += m.evictions;
    agg.generated_tokens += m.generated_tokens;
    agg.slo_attained_throughput_rps += m.slo_attained_throughput_rps;
    agg.peak_queue_len = std::max(agg.peak_queue_len, m.peak_queue_len);
    agg_cached += m.mean_cached_tokens;
    agg_frag += m.mean_internal_frag_bytes;
    agg_queue += m.mean_queue_len;
    report.per_model[e.model_id] = std::move(m);
  }
  agg.ttft_slo_attainment =
      agg.arrived == 0 ? 1.0
                       : static_cast<double>(agg.on_time) /
                             static_cast<double>(agg.arrived);
  agg.throughput_rps = static_cast<double>(agg.completed) / duration;
  agg.token_gen_tps = static_cast<double>(agg.generated_tokens) / duration;
  agg.mean_cached_tokens = agg_cached;
  agg.mean_internal_frag_bytes = agg_frag;
  agg.mean_queue_len = agg_queue;
}

}  // namespace

std::uint64_t MetricsReport::peak_queue(const std::string& model_id, Seconds t0,
                                        Seconds t1) const {
  std::uint64_t peak = 0;
  for (const SeriesRow& row : series) {
    if (row.model_id == model_id && row.time >= t0 && row.time < t1) {
      peak = std::max(peak, row.queue_len);
    }
  }
  return peak;
}

MetricsReport run_simulation(const PlacementPlan& plan,
                             const ProfileMap& profiles,
                             const std::vector<Request>& requests,
                             const SimulationOptions& options) {
  Simulation sim(plan, profiles, requests, options);
  return sim.run();
}

double measure_mme(const MetricsReport& smaller, const MetricsReport& larger,
                   const std::string& model_id) {
  auto sit = smaller.per_model.find(model_id);
  auto lit = larger.per_model.find(model_id);
  if (sit == smaller.per_model.end() || lit == larger.per_model.end()) {
    throw InvalidMeasurementError("model not present in both runs: " + model_id);
  }
  if (lit->second.pool_bytes == sit->second.pool_bytes) {
    throw InvalidMeasurementError("pool sizes are equal; slope undefined");
  }
  const double dk = static_cast<double>(lit->second.pool_bytes) -
                    static_cast<double>(sit->second.pool_bytes);
  return (lit->second.mean_cached_tokens - sit->second.mean_cached_tokens) / dk;
}

}  // namespace slabsim
