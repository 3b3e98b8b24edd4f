#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lorasim/adapter.hpp"
#include "lorasim/config.hpp"
#include "lorasim/cost_model.hpp"
#include "lorasim/workload.hpp"

namespace lorasim {

struct RequestOutcome {
  std::uint32_t request_index = 0;
  std::uint32_t adapter = 0;
  double arrival_ms = 0.0;
  double queue_delay_ms = 0.0;
  double cold_start_latency_ms = 0.0;  // > 0 iff cold_start
  double ttft_ms = 0.0;                // queue + cold + prefill, exactly
  double tpot_ms = 0.0;                // 0 for single-token outputs
  double completion_ms = 0.0;
  bool cold_start = false;
  bool resident_at_arrival = false;
};

struct AccuracyReport {
  double interval_accuracy = 0.0;  // mean per-interval TP/(TP+FP+FN)
  double precision = 0.0;
  double recall = 0.0;
  double resident_hit_rate = 0.0;
  std::uint64_t intervals = 0;
  std::uint64_t tp = 0, fp = 0, fn = 0;
};

struct OverheadBreakdown {
  std::uint64_t prediction_rounds = 0;
  std::int64_t predictor_us = 0;
  std::int64_t page_table_us = 0;
  std::int64_t prefetch_sched_us = 0;
  std::int64_t compaction_us = 0;
  std::uint64_t compactions = 0;
  std::uint64_t relocations = 0;

  std::int64_t total_aux_us() const {
    return predictor_us + page_table_us + prefetch_sched_us;
  }
};

struct TimePoint {
  double t_ms = 0.0;
  double external_frag = 0.0;
  double internal_frag = 0.0;
  double utilization = 0.0;
  std::uint32_t resident_adapters = 0;
  std::uint32_t queue_depth = 0;
};

struct DecisionLogRow {
  double t_ms = 0.0;
  std::string action;
  std::string adapter_id;
  double score = 0.0;
  std::string detail;
};

struct MetricsReport {
  std::string policy;
  bool prefetch_enabled = false;
  std::string allocator;
  std::uint64_t seed = 0;
  double duration_ms = 0.0;
  std::uint64_t total_requests = 0;
  std::uint64_t completed = 0;
  double throughput_rps = 0.0;
  double ttft_mean_ms = 0.0, ttft_p50_ms = 0.0, ttft_p99_ms = 0.0;
  double tpot_mean_ms = 0.0;
  std::uint64_t cold_count = 0;
  double cold_rate = 0.0;
  double cold_mean_ms = 0.0, cold_p50_ms = 0.0, cold_p99_ms = 0.0;
  double resident_hit_rate = 0.0;
  bool has_accuracy = false;
  AccuracyReport accuracy;
  double external_frag_mean = 0.0;
  double internal_frag_mean = 0.0;
  double utilization_mean = 0.0;
  OverheadBreakdown overhead;
  std::uint64_t admission_failures = 0;
  std::uint64_t fragmentation_failures = 0;
  std::uint64_t demand_loads = 0;
  std::uint64_t prefetch_issued = 0;
  std::uint64_t evictions = 0;
  std::uint64_t promotions = 0;
  std::uint64_t train_steps = 0;
  double final_train_loss = 0.0;

  nlohmann::json to_json() const;
};

struct SimResult {
  MetricsReport metrics;
  std::vector<std::string> adapter_ids;  // catalog order, indexes outcomes
  std::vector<RequestOutcome> outcomes;
  std::vector<TimePoint> timeseries;
  std::vector<DecisionLogRow> decisions;
};

// Deterministic discrete-event run over a prepared workload and catalog.
// Throws ValidationError/ConfigError on inconsistent inputs before starting.
SimResult run_simulation(const RunConfig& cfg,
                         const std::vector<AdapterSpec>& catalog,
                         const std::vector<Request>& requests);

// Builds the workload and catalog from the config, then runs.
SimResult run_simulation(const RunConfig& cfg);

struct CompareCell {
  std::string name;
  PolicyMode mode = PolicyMode::reactive;
  bool prefetch = false;
  AllocatorKind allocator = AllocatorKind::block;
};

// The component-decomposition cells: reactive+block, +prediction, +prefetch,
// +paging.
std::vector<CompareCell> ablation_matrix();
// Paged vs block under the full predictive policy.
std::vector<CompareCell> frag_matrix();
std::vector<CompareCell> matrix_by_name(const std::string& name);

// One run per cell, shared seed and workload; runs execute in parallel
// worker threads (each run is fully isolated).
std::vector<SimResult> compare_policies(const RunConfig& base,
                                        const std::vector<CompareCell>& cells);

// Output emission. Paths are created under out_dir.
void write_outputs(const SimResult& result, const std::string& out_dir);
void write_comparison(const std::vector<CompareCell>& cells,
                      const std::vector<SimResult>& results,
                      const std::string& out_dir);

double percentile(std::vector<double> values, double p);  // nearest-rank
double median(std::vector<double> values);

}  // namespace lorasim
