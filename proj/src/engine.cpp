#include "lorasim/engine.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <deque>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <thread>

#include "lorasim/memory.hpp"
#include "lorasim/predictor.hpp"
#include "lorasim/prefetch.hpp"

namespace lorasim {

double percentile(std::vector<double> values, double p) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  double rank = p * static_cast<double>(values.size());
  auto idx = static_cast<std::size_t>(std::ceil(rank));
  if (idx == 0) idx = 1;
  if (idx > values.size()) idx = values.size();
  return values[idx - 1];
}

double median(std::vector<double> values) { return percentile(std::move(values), 0.5); }

namespace {

enum EventKind : int {
  kArrival = 0,
  kTransferSetup,
  kTransferDone,
  kPrefillDone,
  kStepEnd,
  kRound,
  kTick,
  kIntervalEval,
};

enum Phase : int { kEmpty = 0, kAwaiting, kPrefill, kDecodeReady, kDecoding };

struct Event {
  double t;
  std::uint64_t seq;
  int kind;
  std::uint64_t a, b;
};

struct EventCmp {
  bool operator()(const Event& x, const Event& y) const {
    if (x.t != y.t) return x.t > y.t;
    return x.seq > y.seq;  // FIFO tie-break by insertion order
  }
};

class Simulation {
 public:
  Simulation(const RunConfig& cfg, const std::vector<AdapterSpec>& catalog,
             const std::vector<Request>& requests)
      : cfg_(cfg), catalog_(catalog), requests_(requests) {
    const auto A = static_cast<std::uint32_t>(catalog_.size());
    bytes_.resize(A);
    units_.resize(A);
    for (std::uint32_t a = 0; a < A; ++a) {
      bytes_[a] = catalog_[a].weight_bytes;
      id_of_[catalog_[a].id] = a;
    }
    validate_inputs();

    if (cfg_.allocator.kind == AllocatorKind::paged) {
      auto pages = static_cast<std::uint32_t>(cfg_.allocator.pool_bytes /
                                              cfg_.allocator.page_bytes);
      pool_.emplace(cfg_.allocator.page_bytes, pages);
      for (std::uint32_t a = 0; a < A; ++a) units_[a] = pool_->pages_needed(bytes_[a]);
      staging_total_units_ = static_cast<std::uint64_t>(
          cfg_.policy.prefetch_policy.staging_fraction * pages);
    } else {
      arena_.emplace(cfg_.allocator.pool_bytes);
      for (std::uint32_t a = 0; a < A; ++a) units_[a] = bytes_[a];
      staging_total_units_ = static_cast<std::uint64_t>(
          cfg_.policy.prefetch_policy.staging_fraction *
          static_cast<double>(cfg_.allocator.pool_bytes));
    }

    dyn_.resize(A);
    probs_.assign(A, -1.0);
    slots_.resize(cfg_.cost.batch_capacity);
    outcomes_.resize(requests_.size());

    if (cfg_.policy.mode == PolicyMode::predictive) {
      OnlinePredictorConfig pc;
      pc.model.window = cfg_.predictor.window;
      pc.model.hidden = cfg_.predictor.hidden_units;
      pc.model.layers = cfg_.predictor.layers;
      pc.model.embedding_dim = cfg_.predictor.embedding_dim;
      pc.model.num_adapters = A;
      pc.model.learning_rate = cfg_.predictor.learning_rate;
      pc.interval_ms = cfg_.predictor.interval_ms;
      pc.train_every = cfg_.predictor.train_every;
      pc.batch_size = cfg_.predictor.batch_size;
      pc.replay_capacity = cfg_.predictor.replay_capacity;
      predictor_.emplace(pc, cfg_.run.seed);
    }
    if (cfg_.policy.mode == PolicyMode::oracle) {
      arrivals_by_adapter_.resize(A);
      for (const auto& r : requests_)
        arrivals_by_adapter_[id_of_.at(r.adapter_id)].push_back(r.arrival_ms);
    }
  }

  SimResult run() {
    if (!requests_.empty()) push(requests_[0].arrival_ms, kArrival, 0);
    const bool predicting = cfg_.policy.mode != PolicyMode::reactive;
    if (predicting && !requests_.empty()) {
      push(cfg_.cost.round_ms, kRound, 0);
      push(cfg_.predictor.interval_ms, kIntervalEval, 1);
    }
    if (!requests_.empty()) push(cfg_.run.metrics_tick_ms, kTick, 1);

    while (!events_.empty()) {
      Event ev = events_.top();
      events_.pop();
      if (ev.t < now_ - 1e-9)
        throw std::logic_error("event time moved backwards");
      now_ = std::max(now_, ev.t);
      dispatch(ev);
    }
    return finalize();
  }

 private:
  void validate_inputs() {
    cfg_.validate();
    if (catalog_.empty() && !requests_.empty())
      throw ValidationError("catalog is empty but workload is not");
    std::uint64_t max_bytes = 0;
    std::set<std::string> ids;
    for (const auto& spec : catalog_) {
      spec.validate();
      if (!ids.insert(spec.id).second)
        throw ValidationError("duplicate adapter id in catalog: " + spec.id);
      max_bytes = std::max(max_bytes, spec.weight_bytes);
    }
    if (cfg_.allocator.kind == AllocatorKind::paged) {
      std::uint64_t pages = cfg_.allocator.pool_bytes / cfg_.allocator.page_bytes;
      std::uint64_t need =
          (max_bytes + cfg_.allocator.page_bytes - 1) / cfg_.allocator.page_bytes;
      if (need > pages)
        throw ValidationError(
            "allocator.pool_bytes cannot hold the largest adapter (" +
            std::to_string(max_bytes) + " bytes)");
    } else if (max_bytes > cfg_.allocator.pool_bytes) {
      throw ValidationError(
          "allocator.pool_bytes cannot hold the largest adapter (" +
          std::to_string(max_bytes) + " bytes)");
    }
    double prev = 0.0;
    for (const auto& r : requests_) {
      if (r.arrival_ms < prev)
        throw ValidationError("workload is not sorted by arrival time");
      prev = r.arrival_ms;
      if (r.input_tokens < 1 || r.output_tokens < 1)
        throw ValidationError("token counts must be >= 1");
      if (!id_of_.count(r.adapter_id))
        throw ValidationError("request references adapter '" + r.adapter_id +
                              "' missing from the catalog");
    }
  }

  void push(double t, int kind, std::uint64_t a = 0, std::uint64_t b = 0) {
    events_.push(Event{t, seq_++, kind, a, b});
  }

  void dispatch(const Event& ev) {
    switch (ev.kind) {
      case kArrival: on_arrival(static_cast<std::uint32_t>(ev.a)); break;
      case kTransferSetup: on_transfer_setup(static_cast<std::uint32_t>(ev.a), ev.b); break;
      case kTransferDone: on_transfer_done(static_cast<std::uint32_t>(ev.a), ev.b); break;
      case kPrefillDone: on_prefill_done(static_cast<std::uint32_t>(ev.a)); break;
      case kStepEnd: on_step_end(); break;
      case kRound: on_round(ev.a); break;
      case kTick: on_tick(ev.a); break;
      case kIntervalEval: on_interval_eval(ev.a); break;
      default: throw std::logic_error("unknown event kind");
    }
  }

  bool active_work() const {
    return next_arrival_ < requests_.size() || !queue_.empty() ||
           occupied_slots_ > 0 || !transfers_.empty();
  }

  // ---- transfers -----------------------------------------------------------

  struct Transfer {
    std::uint32_t adapter = 0;
    bool demand = false;
    bool in_setup = true;
    double remaining_bytes = 0.0;
    std::uint64_t gen = 0;
    std::vector<std::uint32_t> waiting_slots;
  };

  double rate_for(const Transfer& t, std::size_t demand_n, std::size_t stage_n) const {
    if (t.in_setup) return 0.0;
    double bw = cfg_.cost.pcie_bytes_per_s / 1000.0;  // bytes per ms
    if (t.demand) return bw / static_cast<double>(demand_n);
    // Demand loads preempt prefetch bandwidth entirely.
    return demand_n > 0 ? 0.0 : bw / static_cast<double>(stage_n);
  }

  void counts(std::size_t& demand_n, std::size_t& stage_n) const {
    demand_n = stage_n = 0;
    for (const auto& [a, t] : transfers_) {
      if (t.in_setup) continue;
      if (t.demand) ++demand_n;
      else ++stage_n;
    }
  }

  // Advances remaining bytes at current rates, then reprojects completions.
  void sync_transfers() {
    std::size_t demand_n, stage_n;
    counts(demand_n, stage_n);
    double dt = now_ - last_bw_update_;
    if (dt > 0) {
      for (auto& [a, t] : transfers_) {
        double r = rate_for(t, demand_n, stage_n);
        if (r > 0) t.remaining_bytes = std::max(0.0, t.remaining_bytes - r * dt);
      }
    }
    last_bw_update_ = now_;
  }

  void reschedule_transfers() {
    std::size_t demand_n, stage_n;
    counts(demand_n, stage_n);
    for (auto& [a, t] : transfers_) {
      if (t.in_setup) continue;
      t.gen = ++gen_counter_;
      double r = rate_for(t, demand_n, stage_n);
      if (r > 0) push(now_ + t.remaining_bytes / r, kTransferDone, a, t.gen);
    }
  }

  void start_transfer(std::uint32_t a, bool demand) {
    Transfer t;
    t.adapter = a;
    t.demand = demand;
    t.remaining_bytes = static_cast<double>(bytes_[a]);
    transfers_.emplace(a, std::move(t));
    dyn_[a].transfer_active = true;
    dyn_[a].status = Residency::staging;
    push(now_ + cfg_.cost.transfer_base_ms, kTransferSetup, a, 0);
  }

  void on_transfer_setup(std::uint32_t a, std::uint64_t) {
    auto it = transfers_.find(a);
    if (it == transfers_.end() || !it->second.in_setup) return;
    sync_transfers();
    it->second.in_setup = false;
    reschedule_transfers();
  }

  void on_transfer_done(std::uint32_t a, std::uint64_t gen) {
    auto it = transfers_.find(a);
    if (it == transfers_.end() || it->second.gen != gen || it->second.in_setup)
      return;  // stale projection
    sync_transfers();
    Transfer done = std::move(it->second);
    transfers_.erase(it);
    dyn_[a].transfer_active = false;

    if (done.demand || !done.waiting_slots.empty()) {
      // Demanded weights become usable immediately.
      dyn_[a].status = Residency::resident;
      prefetch_staged_.erase(a);
      for (std::uint32_t si : done.waiting_slots) complete_weights(si);
    } else {
      staged_ready_.insert(a);  // promoted at the next batch boundary
    }
    reschedule_transfers();
    maybe_boundary();
  }

  // ---- allocation and eviction --------------------------------------------

  AllocStatus alloc_adapter(std::uint32_t a) {
    return pool_ ? pool_->alloc(a, bytes_[a]) : arena_->alloc(a, bytes_[a]);
  }

  void evict(std::uint32_t a, double score) {
    if (dyn_[a].busy > 0 || dyn_[a].transfer_active)
      throw std::logic_error("evicting an adapter with in-flight work");
    if (pool_) pool_->free(a);
    else arena_->free(a);
    dyn_[a].status = Residency::not_resident;
    staged_ready_.erase(a);
    ++evictions_;
    log(now_, "evict", a, score, "");
  }

  // Allocates and starts the transfer for a non-resident adapter, evicting
  // lowest-score residents as needed. Prefetch allocations only evict victims
  // scoring below gamma * p of the candidate.
  bool ensure_loading(std::uint32_t a, bool for_prefetch, double candidate_p) {
    if (dyn_[a].status != Residency::not_resident || dyn_[a].transfer_active)
      return false;
    const auto& policy = cfg_.policy.prefetch_policy;
    while (true) {
      AllocStatus st = alloc_adapter(a);
      if (st == AllocStatus::ok) break;
      auto scored = scored_residents(dyn_, policy, now_);
      std::optional<std::pair<double, std::uint32_t>> victim;
      for (const auto& [score, key] : scored) {
        if (dyn_[key].busy > 0 || dyn_[key].transfer_active) continue;
        if (for_prefetch && score >= policy.gamma * candidate_p) break;
        victim = {score, key};
        break;
      }
      if (!victim) return false;
      evict(victim->second, victim->first);
    }
    start_transfer(a, !for_prefetch);
    if (!for_prefetch) ++demand_loads_;
    log(now_, for_prefetch ? "prefetch" : "demand_load", a,
        for_prefetch ? candidate_p : 0.0, "");
    return true;
  }

  // ---- slots and batching ---------------------------------------------------

  struct Slot {
    bool occupied = false;
    std::uint32_t req = 0;
    int phase = kEmpty;
    std::uint32_t tokens = 0;
    double admitted_ms = 0.0;
    double weights_ms = 0.0;
  };

  void complete_weights(std::uint32_t si) {
    Slot& sl = slots_[si];
    const Request& rq = requests_[sl.req];
    RequestOutcome& out = outcomes_[sl.req];
    sl.weights_ms = now_;
    out.cold_start_latency_ms = now_ - sl.admitted_ms;
    out.cold_start = out.cold_start_latency_ms > 0;
    sl.phase = kPrefill;
    pending_weights_.erase(si);
    push(now_ + cfg_.cost.prefill_ms(rq.input_tokens), kPrefillDone, si);
  }

  void finish_request(std::uint32_t si) {
    Slot& sl = slots_[si];
    const Request& rq = requests_[sl.req];
    RequestOutcome& out = outcomes_[sl.req];
    out.completion_ms = now_;
    out.tpot_ms = rq.output_tokens > 1
                      ? (now_ - (sl.weights_ms +
                                 cfg_.cost.prefill_ms(rq.input_tokens))) /
                            (rq.output_tokens - 1)
                      : 0.0;
    ++completed_;
    last_completion_ = now_;
    --dyn_[id_of_.at(rq.adapter_id)].busy;
    sl = Slot{};
    --occupied_slots_;
  }

  void on_prefill_done(std::uint32_t si) {
    Slot& sl = slots_[si];
    const Request& rq = requests_[sl.req];
    RequestOutcome& out = outcomes_[sl.req];
    // TTFT closes exactly as queue + cold + prefill under the cost model.
    out.ttft_ms = out.queue_delay_ms + out.cold_start_latency_ms +
                  cfg_.cost.prefill_ms(rq.input_tokens);
    sl.tokens = 1;
    if (rq.output_tokens == 1) {
      finish_request(si);
    } else {
      sl.phase = kDecodeReady;
    }
    maybe_boundary();
  }

  void on_step_end() {
    step_running_ = false;
    for (std::uint32_t si = 0; si < slots_.size(); ++si) {
      Slot& sl = slots_[si];
      if (!sl.occupied || sl.phase != kDecoding) continue;
      ++sl.tokens;
      if (sl.tokens >= requests_[sl.req].output_tokens) finish_request(si);
    }
    do_boundary();
  }

  void maybe_boundary() {
    if (!step_running_) do_boundary();
  }

  void do_boundary() {
    // 1. Promote transfer-complete staged adapters between batches.
    for (std::uint32_t a : staged_ready_) {
      dyn_[a].status = Residency::resident;
      prefetch_staged_.erase(a);
      ++promotions_;
      log(now_, "promote", a, 0.0, "");
    }
    staged_ready_.clear();

    admit_requests();
    issue_prefetches();
    maybe_compact();
    try_start_step();
  }

  void admit_requests() {
    std::vector<std::uint32_t> retry;
    while (!queue_.empty() && occupied_slots_ < slots_.size()) {
      std::uint32_t ri = queue_.front();
      queue_.pop_front();
      const Request& rq = requests_[ri];
      std::uint32_t a = id_of_.at(rq.adapter_id);

      bool loadable = true;
      if (dyn_[a].status == Residency::not_resident && !dyn_[a].transfer_active)
        loadable = ensure_loading(a, false, 0.0);
      if (!loadable) {
        ++admission_failures_;
        log(now_, "admission_failure", a, 0.0, "request " + std::to_string(ri));
        retry.push_back(ri);
        continue;
      }

      std::uint32_t si = 0;
      while (slots_[si].occupied) ++si;
      Slot& sl = slots_[si];
      sl.occupied = true;
      sl.req = ri;
      sl.admitted_ms = now_;
      ++occupied_slots_;
      ++dyn_[a].busy;
      RequestOutcome& out = outcomes_[ri];
      out.queue_delay_ms = now_ - rq.arrival_ms;

      if (dyn_[a].status == Residency::resident) {
        complete_weights(si);
      } else {
        sl.phase = kAwaiting;
        pending_weights_.insert(si);
        auto it = transfers_.find(a);
        if (it == transfers_.end())
          throw std::logic_error("awaiting a transfer that does not exist");
        it->second.waiting_slots.push_back(si);
        if (!it->second.demand) {
          // A demanded staging transfer takes demand priority.
          sync_transfers();
          it->second.demand = true;
          reschedule_transfers();
        }
      }
    }
    for (auto it = retry.rbegin(); it != retry.rend(); ++it) queue_.push_front(*it);
  }

  void issue_prefetches() {
    if (!cfg_.policy.prefetch || cfg_.policy.mode == PolicyMode::reactive) return;
    std::uint64_t used = 0;
    for (std::uint32_t a : prefetch_staged_) used += units_[a];
    if (used >= staging_total_units_) return;
    auto picks = select_prefetch(probs_, dyn_, cfg_.policy.prefetch_policy, units_,
                                 staging_total_units_ - used);
    for (std::uint32_t a : picks) {
      if (ensure_loading(a, true, probs_[a])) {
        ++prefetch_issued_;
        prefetch_staged_.insert(a);
      }
    }
  }

  void maybe_compact() {
    if (!pool_) return;  // the block baseline has no compaction path
    if (!queue_.empty() || occupied_slots_ > 0 || !transfers_.empty()) return;
    std::size_t moved = pool_->compact();
    if (moved > 0) {
      overhead_.relocations += moved;
      ++overhead_.compactions;
      overhead_.compaction_us += static_cast<std::int64_t>(
          std::llround(static_cast<double>(moved) * cfg_.cost.compaction_page_ms * 1000.0));
      log(now_, "compact", 0xFFFFFFFFu, 0.0, std::to_string(moved) + " relocations");
    }
  }

  void try_start_step() {
    if (step_running_ || !pending_weights_.empty()) return;
    bool any = false;
    for (auto& sl : slots_) {
      if (sl.occupied && (sl.phase == kDecodeReady || sl.phase == kDecoding)) {
        sl.phase = kDecoding;
        any = true;
      }
    }
    if (!any) return;
    step_running_ = true;
    push(now_ + cfg_.cost.step_ms(occupied_slots_), kStepEnd);
  }

  // ---- workload, rounds, metrics -------------------------------------------

  void on_arrival(std::uint32_t ri) {
    const Request& rq = requests_[ri];
    std::uint32_t a = id_of_.at(rq.adapter_id);
    RequestOutcome& out = outcomes_[ri];
    out.request_index = ri;
    out.adapter = a;
    out.arrival_ms = rq.arrival_ms;
    out.resident_at_arrival = dyn_[a].status == Residency::resident;

    seen_.insert(a);
    dyn_[a].record_access(now_, cfg_.policy.prefetch_policy.freq_half_life_ms);
    ++arrivals_total_;
    if (out.resident_at_arrival) ++hits_total_;
    if (rq.arrival_ms >= cfg_.run.warmup_s * 1000.0) {
      ++arrivals_post_;
      if (out.resident_at_arrival) ++hits_post_;
    }
    auto interval = static_cast<std::int64_t>(rq.arrival_ms / cfg_.predictor.interval_ms);
    actual_by_interval_[interval].insert(a);

    if (predictor_) predictor_->observe(a, now_);

    queue_.push_back(ri);
    // Reactive demand path: absent adapters start loading at arrival.
    if (dyn_[a].status == Residency::not_resident && !dyn_[a].transfer_active)
      ensure_loading(a, false, 0.0);

    if (++next_arrival_ < requests_.size())
      push(requests_[next_arrival_].arrival_ms, kArrival, next_arrival_);
    maybe_boundary();
  }

  void on_round(std::uint64_t k) {
    if (cfg_.policy.mode == PolicyMode::predictive) {
      auto preds = predictor_->predict_all(now_);
      std::fill(probs_.begin(), probs_.end(), -1.0);
      for (const auto& p : preds) {
        probs_[p.adapter] = p.probability;
        dyn_[p.adapter].prediction = p.probability;
      }
    } else {  // oracle: the future access sequence, horizon ahead
      for (std::uint32_t a = 0; a < probs_.size(); ++a) {
        const auto& times = arrivals_by_adapter_[a];
        auto it = std::upper_bound(times.begin(), times.end(), now_);
        bool hot = it != times.end() && *it <= now_ + cfg_.policy.oracle_horizon_ms;
        probs_[a] = hot ? 0.99 : 0.01;
        dyn_[a].prediction = probs_[a];
      }
    }
    ++overhead_.prediction_rounds;
    overhead_.predictor_us += cfg_.cost.predictor_overhead_us;
    overhead_.page_table_us += cfg_.cost.page_table_overhead_us;
    overhead_.prefetch_sched_us += cfg_.cost.prefetch_sched_overhead_us;

    auto interval = static_cast<std::int64_t>(now_ / cfg_.predictor.interval_ms);
    if (interval > last_snapshot_interval_) {
      last_snapshot_interval_ = interval;
      Snapshot snap;
      snap.known = seen_;
      for (std::uint32_t a = 0; a < probs_.size(); ++a)
        if (probs_[a] > cfg_.policy.prefetch_policy.theta) snap.predicted.insert(a);
      snapshots_[interval] = std::move(snap);
    }

    if (active_work()) push(static_cast<double>(k + 1) * cfg_.cost.round_ms, kRound, k + 1);
    // Fresh predictions may open prefetch work during idle periods.
    maybe_boundary();
  }

  void on_tick(std::uint64_t k) {
    TimePoint tp;
    tp.t_ms = now_;
    FragmentationReport rep = pool_ ? pool_->report() : arena_->report();
    tp.external_frag = rep.external_frag;
    tp.internal_frag = rep.internal_frag;
    tp.utilization = rep.utilization;
    for (const auto& d : dyn_)
      if (d.status == Residency::resident) ++tp.resident_adapters;
    tp.queue_depth = static_cast<std::uint32_t>(queue_.size());
    series_.push_back(tp);
    if (active_work()) push(static_cast<double>(k + 1) * cfg_.run.metrics_tick_ms, kTick, k + 1);
  }

  void on_interval_eval(std::uint64_t k) {
    std::int64_t interval = static_cast<std::int64_t>(k) - 1;  // just closed
    auto snap_it = snapshots_.find(interval);
    auto actual_it = actual_by_interval_.find(interval);
    if (snap_it != snapshots_.end()) {
      const Snapshot& snap = snap_it->second;
      std::set<std::uint32_t> actual;
      if (actual_it != actual_by_interval_.end())
        for (std::uint32_t a : actual_it->second)
          if (snap.known.count(a)) actual.insert(a);
      std::set<std::uint32_t> predicted;
      for (std::uint32_t a : snap.predicted)
        if (snap.known.count(a)) predicted.insert(a);

      std::uint64_t tp = 0, fp = 0, fn = 0;
      for (std::uint32_t a : predicted) {
        if (actual.count(a)) ++tp;
        else ++fp;
      }
      for (std::uint32_t a : actual)
        if (!predicted.count(a)) ++fn;

      double interval_start_ms = static_cast<double>(interval) * cfg_.predictor.interval_ms;
      if (tp + fp + fn > 0 && interval_start_ms >= cfg_.run.warmup_s * 1000.0) {
        acc_sum_ += static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
        ++acc_intervals_;
        tp_ += tp;
        fp_ += fp;
        fn_ += fn;
      }
      snapshots_.erase(snap_it);
    }
    if (actual_it != actual_by_interval_.end()) actual_by_interval_.erase(actual_it);
    if (active_work())
      push(static_cast<double>(k + 1) * cfg_.predictor.interval_ms, kIntervalEval, k + 1);
  }

  void log(double t, const char* action, std::uint32_t adapter, double score,
           std::string detail) {
    decisions_.push_back(DecisionLogRow{
        t, action, adapter < catalog_.size() ? catalog_[adapter].id : "-", score,
        std::move(detail)});
  }

  SimResult finalize() {
    SimResult result;
    MetricsReport& m = result.metrics;
    m.policy = to_string(cfg_.policy.mode);
    m.prefetch_enabled = cfg_.policy.prefetch && cfg_.policy.mode != PolicyMode::reactive;
    m.allocator = to_string(cfg_.allocator.kind);
    m.seed = cfg_.run.seed;
    m.total_requests = requests_.size();
    m.completed = completed_;
    double last_arrival = requests_.empty() ? 0.0 : requests_.back().arrival_ms;
    m.duration_ms = std::max(last_completion_, last_arrival);
    m.throughput_rps = m.duration_ms > 0
                           ? static_cast<double>(completed_) / (m.duration_ms / 1000.0)
                           : 0.0;

    std::vector<double> ttft, tpot, cold;
    for (const auto& out : outcomes_) {
      if (out.completion_ms <= 0 && out.ttft_ms <= 0) continue;  // not completed
      ttft.push_back(out.ttft_ms);
      if (requests_[out.request_index].output_tokens > 1) tpot.push_back(out.tpot_ms);
      if (out.cold_start) cold.push_back(out.cold_start_latency_ms);
    }
    auto mean = [](const std::vector<double>& v) {
      if (v.empty()) return 0.0;
      double s = 0;
      for (double x : v) s += x;
      return s / static_cast<double>(v.size());
    };
    m.ttft_mean_ms = mean(ttft);
    m.ttft_p50_ms = percentile(ttft, 0.5);
    m.ttft_p99_ms = percentile(ttft, 0.99);
    m.tpot_mean_ms = mean(tpot);
    m.cold_count = cold.size();
    m.cold_rate = requests_.empty()
                      ? 0.0
                      : static_cast<double>(cold.size()) / static_cast<double>(requests_.size());
    m.cold_mean_ms = mean(cold);
    m.cold_p50_ms = percentile(cold, 0.5);
    m.cold_p99_ms = percentile(cold, 0.99);
    m.resident_hit_rate =
        arrivals_total_ > 0
            ? static_cast<double>(hits_total_) / static_cast<double>(arrivals_total_)
            : 0.0;

    if (cfg_.policy.mode != PolicyMode::reactive) {
      m.has_accuracy = true;
      m.accuracy.intervals = acc_intervals_;
      m.accuracy.interval_accuracy =
          acc_intervals_ > 0 ? acc_sum_ / static_cast<double>(acc_intervals_) : 0.0;
      m.accuracy.tp = tp_;
      m.accuracy.fp = fp_;
      m.accuracy.fn = fn_;
      m.accuracy.precision =
          tp_ + fp_ > 0 ? static_cast<double>(tp_) / static_cast<double>(tp_ + fp_) : 0.0;
      m.accuracy.recall =
          tp_ + fn_ > 0 ? static_cast<double>(tp_) / static_cast<double>(tp_ + fn_) : 0.0;
      m.accuracy.resident_hit_rate =
          arrivals_post_ > 0
              ? static_cast<double>(hits_post_) / static_cast<double>(arrivals_post_)
              : 0.0;
    }

    double ext = 0, intf = 0, util = 0;
    std::size_t n = 0;
    for (const auto& tp : series_) {
      if (tp.t_ms < cfg_.run.warmup_s * 1000.0) continue;
      ext += tp.external_frag;
      intf += tp.internal_frag;
      util += tp.utilization;
      ++n;
    }
    if (n > 0) {
      m.external_frag_mean = ext / static_cast<double>(n);
      m.internal_frag_mean = intf / static_cast<double>(n);
      m.utilization_mean = util / static_cast<double>(n);
    }

    m.overhead = overhead_;
    m.admission_failures = admission_failures_;
    m.fragmentation_failures = arena_ ? arena_->fragmentation_failures() : 0;
    m.demand_loads = demand_loads_;
    m.prefetch_issued = prefetch_issued_;
    m.evictions = evictions_;
    m.promotions = promotions_;
    if (predictor_) {
      m.train_steps = predictor_->train_steps();
      m.final_train_loss = predictor_->last_loss();
    }

    result.adapter_ids.reserve(catalog_.size());
    for (const auto& spec : catalog_) result.adapter_ids.push_back(spec.id);
    result.outcomes = std::move(outcomes_);
    result.timeseries = std::move(series_);
    result.decisions = std::move(decisions_);
    return result;
  }

  // ---- state ----------------------------------------------------------------

  const RunConfig& cfg_;
  const std::vector<AdapterSpec>& catalog_;
  const std::vector<Request>& requests_;
  std::map<std::string, std::uint32_t> id_of_;
  std::vector<std::uint64_t> bytes_;
  std::vector<std::uint64_t> units_;  // pages (paged) or bytes (block)

  std::optional<PagePool> pool_;
  std::optional<BlockArena> arena_;
  std::uint64_t staging_total_units_ = 0;

  std::vector<AdapterDynamics> dyn_;
  std::set<std::uint32_t> staged_ready_;
  std::set<std::uint32_t> prefetch_staged_;
  std::set<std::uint32_t> seen_;

  std::map<std::uint32_t, Transfer> transfers_;
  double last_bw_update_ = 0.0;
  std::uint64_t gen_counter_ = 0;

  std::vector<Slot> slots_;
  std::size_t occupied_slots_ = 0;
  std::set<std::uint32_t> pending_weights_;
  bool step_running_ = false;
  std::deque<std::uint32_t> queue_;

  std::priority_queue<Event, std::vector<Event>, EventCmp> events_;
  std::uint64_t seq_ = 0;
  double now_ = 0.0;

  std::optional<OnlinePredictor> predictor_;
  std::vector<std::vector<double>> arrivals_by_adapter_;
  std::vector<double> probs_;

  struct Snapshot {
    std::set<std::uint32_t> predicted;
    std::set<std::uint32_t> known;
  };
  std::map<std::int64_t, Snapshot> snapshots_;
  std::int64_t last_snapshot_interval_ = -1;
  std::map<std::int64_t, std::set<std::uint32_t>> actual_by_interval_;
  double acc_sum_ = 0.0;
  std::uint64_t acc_intervals_ = 0;
  std::uint64_t tp_ = 0, fp_ = 0, fn_ = 0;
  std::uint64_t hits_total_ = 0, arrivals_total_ = 0;
  std::uint64_t hits_post_ = 0, arrivals_post_ = 0;

  std::vector<RequestOutcome> outcomes_;
  std::vector<TimePoint> series_;
  std::vector<DecisionLogRow> decisions_;
  OverheadBreakdown overhead_;
  std::uint64_t admission_failures_ = 0;
  std::uint64_t demand_loads_ = 0;
  std::uint64_t prefetch_issued_ = 0;
  std::uint64_t evictions_ = 0;
  std::uint64_t promotions_ = 0;
  std::uint64_t completed_ = 0;
  double last_completion_ = 0.0;
  std::size_t next_arrival_ = 0;
};

}  // namespace

SimResult run_simulation(const RunConfig& cfg,
                         const std::vector<AdapterSpec>& catalog,
                         const std::vector<Request>& requests) {
  if (requests.empty()) {
    // Degenerate but allowed: zero throughput, empty distributions.
    SimResult result;
    result.metrics.policy = to_string(cfg.policy.mode);
    result.metrics.allocator = to_string(cfg.allocator.kind);
    result.metrics.seed = cfg.run.seed;
    return result;
  }
  Simulation sim(cfg, catalog, requests);
  return sim.run();
}

SimResult run_simulation(const RunConfig& cfg) {
  auto requests = cfg.build_workload();
  auto catalog = cfg.build_catalog(requests);
  return run_simulation(cfg, catalog, requests);
}

std::vector<CompareCell> ablation_matrix() {
  return {
      {"baseline", PolicyMode::reactive, false, AllocatorKind::block},
      {"prediction", PolicyMode::predictive, false, AllocatorKind::block},
      {"prefetch", PolicyMode::predictive, true, AllocatorKind::block},
      {"paging", PolicyMode::predictive, true, AllocatorKind::paged},
  };
}

std::vector<CompareCell> frag_matrix() {
  return {
      {"block", PolicyMode::predictive, true, AllocatorKind::block},
      {"paged", PolicyMode::predictive, true, AllocatorKind::paged},
  };
}

std::vector<CompareCell> matrix_by_name(const std::string& name) {
  if (name == "ablation") return ablation_matrix();
  if (name == "frag") return frag_matrix();
  throw ConfigError("unknown comparison matrix '" + name + "' (want ablation|frag)");
}

std::vector<SimResult> compare_policies(const RunConfig& base,
                                        const std::vector<CompareCell>& cells) {
  if (cells.size() < 2)
    throw ValidationError("comparison requires at least 2 cells");
  auto requests = base.build_workload();
  auto catalog = base.build_catalog(requests);

  std::vector<SimResult> results(cells.size());
  std::vector<RunConfig> configs(cells.size(), base);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    configs[i].policy.mode = cells[i].mode;
    configs[i].policy.prefetch = cells[i].prefetch;
    configs[i].allocator.kind = cells[i].allocator;
  }

  // Isolated runs over shared read-only inputs; one worker per cell.
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    workers.emplace_back([&, i]() {
      try {
        results[i] = run_simulation(configs[i], catalog, requests);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

}  // namespace lorasim
