#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "lorasim/engine.hpp"

namespace {

using lorasim::RunConfig;

std::vector<std::pair<std::string, std::string>> parse_sets(
    const std::vector<std::string>& sets) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& s : sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos)
      throw lorasim::ConfigError("--set expects section.key=value, got '" + s + "'");
    out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  return out;
}

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::string policy;
  std::string allocator;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool verbose = false;
  std::vector<std::string> sets;
};

RunConfig load_config(const CommonArgs& args) {
  auto overrides = parse_sets(args.sets);
  RunConfig cfg = RunConfig::load(args.config_path, overrides);
  if (args.seed_set) cfg.run.seed = args.seed;
  if (!args.policy.empty()) cfg.policy.mode = lorasim::parse_policy_mode(args.policy);
  if (!args.allocator.empty())
    cfg.allocator.kind = lorasim::parse_allocator_kind(args.allocator);
  if (!args.out_dir.empty()) cfg.run.output_dir = args.out_dir;
  if (args.verbose) cfg.run.verbose = true;
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "run configuration file")->required();
  cmd->add_option("--seed", args.seed, "override run.seed")->each([&](const std::string&) {
    args.seed_set = true;
  });
  cmd->add_option("--policy", args.policy, "override policy.mode (reactive|predictive|oracle)");
  cmd->add_option("--allocator", args.allocator, "override allocator.kind (paged|block)");
  cmd->add_option("--out", args.out_dir, "override run.output_dir");
  cmd->add_flag("--verbose", args.verbose, "chatty progress on stderr");
  cmd->add_option("--set", args.sets, "extra overrides as section.key=value")
      ->take_all();
}

int cmd_run(const CommonArgs& args) {
  RunConfig cfg = load_config(args);
  if (cfg.run.verbose) std::cerr << "building workload...\n";
  auto result = lorasim::run_simulation(cfg);
  lorasim::write_outputs(result, cfg.run.output_dir);
  const auto& m = result.metrics;
  std::printf("policy=%s allocator=%s completed=%llu throughput=%.2f req/s "
              "ttft_p50=%.2f ms cold=%llu hit_rate=%.3f\n",
              m.policy.c_str(), m.allocator.c_str(),
              static_cast<unsigned long long>(m.completed), m.throughput_rps,
              m.ttft_p50_ms, static_cast<unsigned long long>(m.cold_count),
              m.resident_hit_rate);
  std::printf("outputs written to %s\n", cfg.run.output_dir.c_str());
  return 0;
}

int cmd_compare(const CommonArgs& args, const std::string& matrix) {
  RunConfig cfg = load_config(args);
  auto cells = lorasim::matrix_by_name(matrix);
  auto results = lorasim::compare_policies(cfg, cells);
  lorasim::write_comparison(cells, results, cfg.run.output_dir);
  for (std::size_t i = 0; i < cells.size(); ++i)
    lorasim::write_outputs(results[i], cfg.run.output_dir + "/" + cells[i].name);

  const auto& base = results[0].metrics;
  std::printf("%-12s %-10s %-9s %-6s %10s %10s %10s %9s %8s\n", "cell", "policy",
              "prefetch", "alloc", "thr(r/s)", "ttft_p50", "cold_p50", "cold_n", "util");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& m = results[i].metrics;
    std::printf("%-12s %-10s %-9s %-6s %10.2f %10.2f %10.2f %9llu %8.3f\n",
                cells[i].name.c_str(), m.policy.c_str(),
                m.prefetch_enabled ? "on" : "off", m.allocator.c_str(),
                m.throughput_rps, m.ttft_p50_ms, m.cold_p50_ms,
                static_cast<unsigned long long>(m.cold_count), m.utilization_mean);
  }
  if (base.throughput_rps > 0) {
    const auto& last = results.back().metrics;
    std::printf("relative to %s: throughput x%.2f, cold_p50 %+.1f%%\n",
                cells[0].name.c_str(), last.throughput_rps / base.throughput_rps,
                base.cold_p50_ms > 0
                    ? 100.0 * (last.cold_p50_ms / base.cold_p50_ms - 1.0)
                    : 0.0);
  }
  std::printf("comparison written to %s/comparison.csv\n", cfg.run.output_dir.c_str());
  return 0;
}

void apply_sweep_value(RunConfig& cfg, const std::string& param, double value) {
  if (param == "window") {
    cfg.predictor.window = static_cast<std::uint32_t>(value);
  } else if (param == "theta") {
    cfg.policy.prefetch_policy.theta = value;
  } else if (param == "rate") {
    if (cfg.workload.source == "synthetic") cfg.workload.profile.base_rate = value;
    else cfg.workload.rate_scale = value;
  } else if (param == "page_size") {
    cfg.allocator.page_bytes = static_cast<std::uint64_t>(value);
  } else {
    throw lorasim::ConfigError("unsweepable parameter '" + param +
                               "' (want window|theta|rate|page_size)");
  }
}

int cmd_sweep(const CommonArgs& args, const std::string& param,
              const std::vector<double>& values) {
  if (values.empty()) throw lorasim::ConfigError("--values is empty");
  RunConfig base = load_config(args);

  std::vector<RunConfig> configs(values.size(), base);
  std::vector<lorasim::SimResult> results(values.size());
  std::vector<std::exception_ptr> errors(values.size());
  std::vector<std::thread> workers;
  for (std::size_t i = 0; i < values.size(); ++i) {
    apply_sweep_value(configs[i], param, values[i]);
    configs[i].validate();
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    workers.emplace_back([&, i]() {
      try {
        results[i] = lorasim::run_simulation(configs[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::filesystem::create_directories(base.run.output_dir);
  std::ofstream out(base.run.output_dir + "/sweep.csv", std::ios::binary);
  if (!out) throw lorasim::ConfigError("cannot write sweep.csv");
  out << "param,value,interval_accuracy,resident_hit_rate,cold_count,cold_p50_ms,"
         "ttft_p50_ms,tpot_mean_ms,throughput_rps,utilization_mean\n";
  std::printf("%-10s %10s %9s %9s %8s %10s %10s\n", "param", "value", "accuracy",
              "hit_rate", "cold_n", "cold_p50", "ttft_p50");
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto& m = results[i].metrics;
    char buf[512];
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%llu,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                  param.c_str(), values[i], m.accuracy.interval_accuracy,
                  m.accuracy.resident_hit_rate,
                  static_cast<unsigned long long>(m.cold_count), m.cold_p50_ms,
                  m.ttft_p50_ms, m.tpot_mean_ms, m.throughput_rps, m.utilization_mean);
    out << buf;
    std::printf("%-10s %10.2f %9.4f %9.4f %8llu %10.2f %10.2f\n", param.c_str(),
                values[i], m.accuracy.interval_accuracy, m.accuracy.resident_hit_rate,
                static_cast<unsigned long long>(m.cold_count), m.cold_p50_ms,
                m.ttft_p50_ms);
  }
  std::printf("sweep written to %s/sweep.csv\n", base.run.output_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trace-driven simulator for multi-adapter LLM serving with "
               "predictive prefetch and paged adapter memory"};
  app.require_subcommand(1);

  CommonArgs run_args, cmp_args, sweep_args;
  std::string matrix = "ablation";
  std::string param;
  std::vector<double> values;

  CLI::App* run = app.add_subcommand("run", "single simulation run");
  add_common(run, run_args);

  CLI::App* cmp = app.add_subcommand("compare", "side-by-side policy/allocator runs");
  add_common(cmp, cmp_args);
  cmp->add_option("--matrix", matrix, "cell matrix: ablation|frag");

  CLI::App* sweep = app.add_subcommand("sweep", "parameter sweep with shared seed");
  add_common(sweep, sweep_args);
  sweep->add_option("--param", param, "window|theta|rate|page_size")->required();
  sweep->add_option("--values", values, "comma-separated values")
      ->required()
      ->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_args);
    if (cmp->parsed()) return cmd_compare(cmp_args, matrix);
    if (sweep->parsed()) return cmd_sweep(sweep_args, param, values);
  } catch (const lorasim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const lorasim::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
