#include <cstdio>
#include <filesystem>
#include <fstream>

#include "lorasim/engine.hpp"

namespace lorasim {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // '\n' endings everywhere
  if (!out) throw ConfigError("cannot write output file: " + path);
  return out;
}

}  // namespace

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["policy"] = policy;
  j["prefetch_enabled"] = prefetch_enabled;
  j["allocator"] = allocator;
  j["seed"] = seed;
  j["duration_ms"] = duration_ms;
  j["requests"] = {{"total", total_requests},
                   {"completed", completed},
                   {"admission_failures", admission_failures}};
  j["throughput_rps"] = throughput_rps;
  j["ttft_ms"] = {{"mean", ttft_mean_ms}, {"p50", ttft_p50_ms}, {"p99", ttft_p99_ms}};
  j["tpot_mean_ms"] = tpot_mean_ms;
  j["cold_start"] = {{"count", cold_count},
                     {"rate", cold_rate},
                     {"mean_ms", cold_mean_ms},
                     {"p50_ms", cold_p50_ms},
                     {"p99_ms", cold_p99_ms}};
  j["resident_hit_rate"] = resident_hit_rate;
  if (has_accuracy) {
    j["accuracy"] = {{"interval_accuracy", accuracy.interval_accuracy},
                     {"precision", accuracy.precision},
                     {"recall", accuracy.recall},
                     {"resident_hit_rate", accuracy.resident_hit_rate},
                     {"intervals", accuracy.intervals},
                     {"tp", accuracy.tp},
                     {"fp", accuracy.fp},
                     {"fn", accuracy.fn}};
  } else {
    j["accuracy"] = nullptr;
  }
  j["fragmentation"] = {{"external_mean", external_frag_mean},
                        {"internal_mean", internal_frag_mean},
                        {"utilization_mean", utilization_mean},
                        {"failures", fragmentation_failures}};
  j["overhead"] = {{"prediction_rounds", overhead.prediction_rounds},
                   {"predictor_us", overhead.predictor_us},
                   {"page_table_us", overhead.page_table_us},
                   {"prefetch_sched_us", overhead.prefetch_sched_us},
                   {"aux_total_us", overhead.total_aux_us()},
                   {"compaction_us", overhead.compaction_us},
                   {"compactions", overhead.compactions},
                   {"relocations", overhead.relocations}};
  j["loads"] = {{"demand", demand_loads},
                {"prefetch", prefetch_issued},
                {"evictions", evictions},
                {"promotions", promotions}};
  j["predictor"] = {{"train_steps", train_steps}, {"final_loss", final_train_loss}};
  return j;
}

void write_outputs(const SimResult& result, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);

  {
    auto out = open_out(out_dir + "/metrics.json");
    out << result.metrics.to_json().dump(2) << '\n';
  }
  {
    auto out = open_out(out_dir + "/requests.csv");
    out << "request_id,arrival_ms,adapter_id,cold_start,ttft_ms,tpot_ms,queue_ms\n";
    for (const auto& o : result.outcomes) {
      if (o.completion_ms <= 0 && o.ttft_ms <= 0) continue;
      const std::string& id = o.adapter < result.adapter_ids.size()
                                  ? result.adapter_ids[o.adapter]
                                  : "?";
      out << o.request_index << ',' << fmt(o.arrival_ms) << ',' << id << ','
          << (o.cold_start ? 1 : 0) << ',' << fmt(o.ttft_ms) << ','
          << fmt(o.tpot_ms) << ',' << fmt(o.queue_delay_ms) << '\n';
    }
  }
  {
    auto out = open_out(out_dir + "/timeseries.csv");
    out << "time_ms,external_frag,internal_frag,utilization,resident_adapters,queue_depth\n";
    for (const auto& tp : result.timeseries) {
      out << fmt(tp.t_ms) << ',' << fmt(tp.external_frag) << ',' << fmt(tp.internal_frag)
          << ',' << fmt(tp.utilization) << ',' << tp.resident_adapters << ','
          << tp.queue_depth << '\n';
    }
  }
  {
    auto out = open_out(out_dir + "/decisions.csv");
    out << "time_ms,action,adapter_id,score,detail\n";
    for (const auto& d : result.decisions) {
      out << fmt(d.t_ms) << ',' << d.action << ',' << d.adapter_id << ','
          << fmt(d.score) << ',' << d.detail << '\n';
    }
  }
}

void write_comparison(const std::vector<CompareCell>& cells,
                      const std::vector<SimResult>& results,
                      const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  auto out = open_out(out_dir + "/comparison.csv");
  out << "cell,policy,prefetch,allocator,completed,throughput_rps,ttft_p50_ms,"
         "ttft_p99_ms,tpot_mean_ms,cold_count,cold_p50_ms,resident_hit_rate,"
         "utilization_mean,external_frag_mean,throughput_vs_base,"
         "cold_p50_reduction_vs_base\n";
  const MetricsReport& base = results[0].metrics;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const MetricsReport& m = results[i].metrics;
    double thr_x = base.throughput_rps > 0 ? m.throughput_rps / base.throughput_rps : 0.0;
    double cold_red =
        base.cold_p50_ms > 0 ? 1.0 - m.cold_p50_ms / base.cold_p50_ms : 0.0;
    out << cells[i].name << ',' << m.policy << ',' << (m.prefetch_enabled ? 1 : 0) << ','
        << m.allocator << ',' << m.completed << ',' << fmt(m.throughput_rps) << ','
        << fmt(m.ttft_p50_ms) << ',' << fmt(m.ttft_p99_ms) << ',' << fmt(m.tpot_mean_ms)
        << ',' << m.cold_count << ',' << fmt(m.cold_p50_ms) << ','
        << fmt(m.resident_hit_rate) << ',' << fmt(m.utilization_mean) << ','
        << fmt(m.external_frag_mean) << ',' << fmt(thr_x) << ',' << fmt(cold_red) << '\n';
  }
}

}  // namespace lorasim
