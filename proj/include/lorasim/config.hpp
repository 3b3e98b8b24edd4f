#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lorasim/adapter.hpp"
#include "lorasim/cost_model.hpp"
#include "lorasim/prefetch.hpp"
#include "lorasim/workload.hpp"

namespace lorasim {

enum class PolicyMode { reactive, predictive, oracle };
enum class AllocatorKind { paged, block };

PolicyMode parse_policy_mode(const std::string& s);
AllocatorKind parse_allocator_kind(const std::string& s);
std::string to_string(PolicyMode m);
std::string to_string(AllocatorKind k);

struct RunSection {
  std::uint64_t seed = 42;
  std::string output_dir = "out";
  double metrics_tick_ms = 1000.0;
  double warmup_s = 0.0;
  bool verbose = false;
};

struct WorkloadSection {
  std::string source = "synthetic";  // synthetic | trace
  std::string trace_path;
  std::string trace_mapping = "identity";
  double rate_scale = 1.0;
  double duration_s = 60.0;
  SyntheticProfile profile;
};

struct CatalogSection {
  std::string source = "generated";  // generated | file
  std::string file;
  std::uint32_t count = 20;
  std::string rank_mix = "8:0.25,16:0.25,32:0.25,64:0.25";
  std::uint32_t model_dim = 4096;
  std::uint32_t adapted_matrices = 64;
  std::uint32_t bytes_per_param = 2;
  std::uint32_t size_anchor_rank = 8;
  std::uint64_t size_anchor_bytes = 13ull << 20;  // 13 MiB
  std::string size_table;  // optional "rank:bytes,..." overrides
  bool linear_fallback = true;
};

struct PolicySection {
  PolicyMode mode = PolicyMode::predictive;
  bool prefetch = true;
  PrefetchPolicy prefetch_policy;
  double oracle_horizon_ms = 2000.0;
};

struct PredictorSection {
  std::uint32_t window = 30;
  double interval_ms = 1000.0;
  std::uint32_t hidden_units = 64;
  std::uint32_t layers = 2;
  std::uint32_t embedding_dim = 8;
  double learning_rate = 1e-3;
  std::uint32_t batch_size = 64;
  std::uint32_t replay_capacity = 10000;
  std::uint32_t train_every = 100;
};

struct AllocatorSection {
  AllocatorKind kind = AllocatorKind::paged;
  std::uint64_t page_bytes = 2ull << 20;  // 2 MiB
  std::uint64_t pool_bytes = 1ull << 30;  // 1 GiB
};

struct RunConfig {
  RunSection run;
  WorkloadSection workload;
  CatalogSection catalog;
  PolicySection policy;
  PredictorSection predictor;
  AllocatorSection allocator;
  CostModel cost;

  // Applies one key; throws ConfigError naming unknown sections/keys or bad values.
  void set(const std::string& section, const std::string& key, const std::string& value);
  void validate() const;

  static RunConfig defaults() { return RunConfig{}; }
  // Loads an INI-style file over the defaults, then applies "section.key=value"
  // overrides in order.
  static RunConfig load(const std::string& path,
                        const std::vector<std::pair<std::string, std::string>>& overrides = {});

  AdapterSizeTable size_table() const;
  RankMix rank_mix_parsed() const;
  std::vector<AdapterSpec> build_catalog(const std::vector<Request>& requests) const;
  std::vector<Request> build_workload() const;
};

}  // namespace lorasim
