#include "lorasim/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace lorasim {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& section, const std::string& key,
                 const std::string& v) {
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (...) {
    throw ConfigError("bad numeric value for " + section + "." + key + ": '" + v + "'");
  }
}

std::uint64_t to_u64(const std::string& section, const std::string& key,
                     const std::string& v) {
  try {
    std::size_t pos = 0;
    unsigned long long u = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return u;
  } catch (...) {
    throw ConfigError("bad integer value for " + section + "." + key + ": '" + v + "'");
  }
}

std::uint32_t to_u32(const std::string& section, const std::string& key,
                     const std::string& v) {
  std::uint64_t u = to_u64(section, key, v);
  if (u > 0xFFFFFFFFull)
    throw ConfigError("value out of range for " + section + "." + key);
  return static_cast<std::uint32_t>(u);
}

bool to_bool(const std::string& section, const std::string& key, const std::string& v) {
  if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
  if (v == "off" || v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("bad boolean value for " + section + "." + key + ": '" + v + "'");
}

}  // namespace

PolicyMode parse_policy_mode(const std::string& s) {
  if (s == "reactive") return PolicyMode::reactive;
  if (s == "predictive") return PolicyMode::predictive;
  if (s == "oracle") return PolicyMode::oracle;
  throw ConfigError("unknown policy mode '" + s + "' (want reactive|predictive|oracle)");
}

AllocatorKind parse_allocator_kind(const std::string& s) {
  if (s == "paged") return AllocatorKind::paged;
  if (s == "block") return AllocatorKind::block;
  throw ConfigError("unknown allocator '" + s + "' (want paged|block)");
}

std::string to_string(PolicyMode m) {
  switch (m) {
    case PolicyMode::reactive: return "reactive";
    case PolicyMode::predictive: return "predictive";
    case PolicyMode::oracle: return "oracle";
  }
  return "?";
}

std::string to_string(AllocatorKind k) {
  return k == AllocatorKind::paged ? "paged" : "block";
}

void RunConfig::set(const std::string& section, const std::string& key,
                    const std::string& value) {
  auto unknown = [&]() -> ConfigError {
    return ConfigError("unknown config key " + section + "." + key);
  };

  if (section == "run") {
    if (key == "seed") run.seed = to_u64(section, key, value);
    else if (key == "output_dir") run.output_dir = value;
    else if (key == "metrics_tick_ms") run.metrics_tick_ms = to_double(section, key, value);
    else if (key == "warmup_s") run.warmup_s = to_double(section, key, value);
    else if (key == "verbose") run.verbose = to_bool(section, key, value);
    else throw unknown();
  } else if (section == "workload") {
    auto& w = workload;
    if (key == "source") w.source = value;
    else if (key == "trace_path") w.trace_path = value;
    else if (key == "trace_mapping") w.trace_mapping = value;
    else if (key == "rate_scale") w.rate_scale = to_double(section, key, value);
    else if (key == "duration_s") w.duration_s = to_double(section, key, value);
    else if (key == "num_adapters") w.profile.num_adapters = to_u32(section, key, value);
    else if (key == "base_rate") w.profile.base_rate = to_double(section, key, value);
    else if (key == "diurnal_amplitude") w.profile.diurnal_amplitude = to_double(section, key, value);
    else if (key == "diurnal_period_s") w.profile.period_s = to_double(section, key, value);
    else if (key == "hot_set_size") w.profile.hot_set_size = to_u32(section, key, value);
    else if (key == "hot_rotation_s") w.profile.hot_rotation_s = to_double(section, key, value);
    else if (key == "hot_share") w.profile.hot_share = to_double(section, key, value);
    else if (key == "rotation_jitter") w.profile.rotation_jitter = to_double(section, key, value);
    else if (key == "burstiness_cv") w.profile.burstiness_cv = to_double(section, key, value);
    else if (key == "input_tokens_median") w.profile.lengths.input_median = to_double(section, key, value);
    else if (key == "input_tokens_sigma") w.profile.lengths.input_sigma = to_double(section, key, value);
    else if (key == "output_tokens_median") w.profile.lengths.output_median = to_double(section, key, value);
    else if (key == "output_tokens_sigma") w.profile.lengths.output_sigma = to_double(section, key, value);
    else if (key == "max_tokens") w.profile.lengths.max_tokens = to_u32(section, key, value);
    else throw unknown();
  } else if (section == "catalog") {
    auto& c = catalog;
    if (key == "source") c.source = value;
    else if (key == "file") c.file = value;
    else if (key == "count") c.count = to_u32(section, key, value);
    else if (key == "rank_mix") c.rank_mix = value;
    else if (key == "model_dim") c.model_dim = to_u32(section, key, value);
    else if (key == "adapted_matrices") c.adapted_matrices = to_u32(section, key, value);
    else if (key == "bytes_per_param") c.bytes_per_param = to_u32(section, key, value);
    else if (key == "size_anchor_rank") c.size_anchor_rank = to_u32(section, key, value);
    else if (key == "size_anchor_bytes") c.size_anchor_bytes = to_u64(section, key, value);
    else if (key == "size_table") c.size_table = value;
    else if (key == "size_fallback") {
      if (value == "linear") c.linear_fallback = true;
      else if (value == "error") c.linear_fallback = false;
      else throw ConfigError("catalog.size_fallback must be linear|error");
    }
    else throw unknown();
  } else if (section == "policy") {
    auto& p = policy;
    if (key == "mode") p.mode = parse_policy_mode(value);
    else if (key == "prefetch") p.prefetch = to_bool(section, key, value);
    else if (key == "theta") p.prefetch_policy.theta = to_double(section, key, value);
    else if (key == "alpha") p.prefetch_policy.alpha = to_double(section, key, value);
    else if (key == "beta") p.prefetch_policy.beta = to_double(section, key, value);
    else if (key == "gamma") p.prefetch_policy.gamma = to_double(section, key, value);
    else if (key == "tau_s") p.prefetch_policy.tau_ms = 1000.0 * to_double(section, key, value);
    else if (key == "freq_half_life_s") p.prefetch_policy.freq_half_life_ms = 1000.0 * to_double(section, key, value);
    else if (key == "staging_fraction") p.prefetch_policy.staging_fraction = to_double(section, key, value);
    else if (key == "oracle_horizon_ms") p.oracle_horizon_ms = to_double(section, key, value);
    else throw unknown();
  } else if (section == "predictor") {
    auto& p = predictor;
    if (key == "window") p.window = to_u32(section, key, value);
    else if (key == "interval_ms") p.interval_ms = to_double(section, key, value);
    else if (key == "hidden_units") p.hidden_units = to_u32(section, key, value);
    else if (key == "layers") p.layers = to_u32(section, key, value);
    else if (key == "embedding_dim") p.embedding_dim = to_u32(section, key, value);
    else if (key == "learning_rate") p.learning_rate = to_double(section, key, value);
    else if (key == "batch_size") p.batch_size = to_u32(section, key, value);
    else if (key == "replay_capacity") p.replay_capacity = to_u32(section, key, value);
    else if (key == "train_every") p.train_every = to_u32(section, key, value);
    else throw unknown();
  } else if (section == "allocator") {
    auto& a = allocator;
    if (key == "kind") a.kind = parse_allocator_kind(value);
    else if (key == "page_bytes") a.page_bytes = to_u64(section, key, value);
    else if (key == "pool_bytes") a.pool_bytes = to_u64(section, key, value);
    else throw unknown();
  } else if (section == "cost_model") {
    auto& c = cost;
    if (key == "pcie_gbps") c.pcie_bytes_per_s = 1e9 * to_double(section, key, value);
    else if (key == "transfer_base_ms") c.transfer_base_ms = to_double(section, key, value);
    else if (key == "prefill_base_ms") c.prefill_base_ms = to_double(section, key, value);
    else if (key == "prefill_per_token_ms") c.prefill_per_token_ms = to_double(section, key, value);
    else if (key == "decode_base_ms") c.decode_base_ms = to_double(section, key, value);
    else if (key == "decode_occupancy_factor") c.decode_occupancy_factor = to_double(section, key, value);
    else if (key == "batch_capacity") c.batch_capacity = to_u32(section, key, value);
    else if (key == "predictor_overhead_us") c.predictor_overhead_us = static_cast<std::int64_t>(to_u64(section, key, value));
    else if (key == "page_table_overhead_us") c.page_table_overhead_us = static_cast<std::int64_t>(to_u64(section, key, value));
    else if (key == "prefetch_overhead_us") c.prefetch_sched_overhead_us = static_cast<std::int64_t>(to_u64(section, key, value));
    else if (key == "compaction_page_ms") c.compaction_page_ms = to_double(section, key, value);
    else if (key == "round_ms") c.round_ms = to_double(section, key, value);
    else throw unknown();
  } else {
    throw ConfigError("unknown config section [" + section + "]");
  }
}

RunConfig RunConfig::load(
    const std::string& path,
    const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);

  RunConfig cfg;
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError(path + " line " + std::to_string(lineno) +
                          ": malformed section header");
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + " line " + std::to_string(lineno) +
                        ": expected key = value");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    // Allow trailing comments separated by whitespace.
    auto hash = value.find(" #");
    if (hash != std::string::npos) value = trim(value.substr(0, hash));
    if (section.empty())
      throw ConfigError(path + " line " + std::to_string(lineno) +
                        ": key outside any [section]");
    cfg.set(section, key, value);
  }

  for (const auto& [dotted, value] : overrides) {
    auto dot = dotted.find('.');
    if (dot == std::string::npos)
      throw ConfigError("override '" + dotted + "' must be section.key");
    cfg.set(dotted.substr(0, dot), dotted.substr(dot + 1), value);
  }
  return cfg;
}

void RunConfig::validate() const {
  if (workload.source != "synthetic" && workload.source != "trace")
    throw ConfigError("workload.source must be synthetic|trace");
  if (workload.source == "trace" && workload.trace_path.empty())
    throw ConfigError("workload.trace_path is required for trace workloads");
  if (workload.source == "synthetic") workload.profile.validate();
  if (workload.duration_s <= 0) throw ConfigError("workload.duration_s must be positive");
  if (workload.rate_scale <= 0) throw ConfigError("workload.rate_scale must be positive");
  if (catalog.source != "generated" && catalog.source != "file")
    throw ConfigError("catalog.source must be generated|file");
  if (catalog.source == "file" && catalog.file.empty())
    throw ConfigError("catalog.file is required when catalog.source = file");
  policy.prefetch_policy.validate();
  if (allocator.page_bytes == 0) throw ConfigError("allocator.page_bytes must be positive");
  if (allocator.pool_bytes < allocator.page_bytes)
    throw ConfigError("allocator.pool_bytes smaller than one page");
  cost.validate();
  if (predictor.window < 1) throw ConfigError("predictor.window must be >= 1");
  if (predictor.interval_ms <= 0) throw ConfigError("predictor.interval_ms must be positive");
  if (run.metrics_tick_ms <= 0) throw ConfigError("run.metrics_tick_ms must be positive");
  if (run.warmup_s < 0) throw ConfigError("run.warmup_s must be nonnegative");
}

AdapterSizeTable RunConfig::size_table() const {
  AdapterSizeTable table(catalog.size_anchor_rank, catalog.size_anchor_bytes,
                         catalog.linear_fallback);
  if (!catalog.size_table.empty()) {
    std::stringstream ss(catalog.size_table);
    std::string item;
    while (std::getline(ss, item, ',')) {
      auto colon = item.find(':');
      if (colon == std::string::npos)
        throw ConfigError("catalog.size_table entries must be rank:bytes");
      table.set(to_u32("catalog", "size_table", trim(item.substr(0, colon))),
                to_u64("catalog", "size_table", trim(item.substr(colon + 1))));
    }
  }
  return table;
}

RankMix RunConfig::rank_mix_parsed() const {
  RankMix mix;
  std::stringstream ss(catalog.rank_mix);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto colon = item.find(':');
    if (colon == std::string::npos)
      throw ConfigError("catalog.rank_mix entries must be rank:weight");
    mix.emplace_back(to_u32("catalog", "rank_mix", trim(item.substr(0, colon))),
                     to_double("catalog", "rank_mix", trim(item.substr(colon + 1))));
  }
  if (mix.empty()) throw ConfigError("catalog.rank_mix is empty");
  return mix;
}

std::vector<AdapterSpec> RunConfig::build_catalog(
    const std::vector<Request>& requests) const {
  LoraDims dims;
  dims.d = catalog.model_dim;
  dims.k = catalog.model_dim;
  dims.adapted_matrices = catalog.adapted_matrices;
  dims.bytes_per_param = catalog.bytes_per_param;
  AdapterSizeTable sizes = size_table();

  if (catalog.source == "file") return load_catalog_json(catalog.file, sizes, dims);

  if (!requests.empty()) {
    // Generated catalogs enumerate the workload's adapters so the two can
    // never disagree on ids.
    auto ids = distinct_adapters(requests);
    RankMix mix = rank_mix_parsed();
    std::vector<double> weights;
    for (const auto& [rank, w] : mix) weights.push_back(w);
    std::mt19937_64 rng(run.seed ^ 0x9e3779b97f4a7c15ull);
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    std::vector<AdapterSpec> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
      LoraDims d = dims;
      d.r = mix[pick(rng)].first;
      out.push_back(AdapterSpec::sized(id, d, sizes.bytes_for(d.r)));
    }
    return out;
  }
  return generate_catalog(catalog.count, rank_mix_parsed(), run.seed, sizes, dims);
}

std::vector<Request> RunConfig::build_workload() const {
  if (workload.source == "trace") {
    return ingest_trace(workload.trace_path, TraceMapping::parse(workload.trace_mapping),
                        workload.rate_scale, workload.profile.lengths, run.seed);
  }
  return generate_synthetic(workload.profile, workload.duration_s, run.seed);
}

}  // namespace lorasim
