#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lorasim/errors.hpp"

namespace lorasim {

struct Request {
  double arrival_ms = 0.0;  // since start of run
  std::string adapter_id;
  std::uint32_t input_tokens = 1;
  std::uint32_t output_tokens = 1;
};

// Log-normal token lengths parameterized by median (exp of the underlying
// normal's mean) and sigma.
struct LengthDistribution {
  double input_median = 256.0;
  double input_sigma = 0.6;
  double output_median = 128.0;
  double output_sigma = 0.6;
  std::uint32_t max_tokens = 8192;

  std::uint32_t sample_input(std::mt19937_64& rng) const;
  std::uint32_t sample_output(std::mt19937_64& rng) const;
};

struct SyntheticProfile {
  std::uint32_t num_adapters = 20;
  double base_rate = 50.0;          // requests/second
  double diurnal_amplitude = 0.0;   // [0, 1]
  double period_s = 3600.0;         // diurnal period
  std::uint32_t hot_set_size = 5;
  double hot_rotation_s = 7.0;      // hot set advances every rotation
  double hot_share = 0.9;           // traffic share routed to the hot set
  double rotation_jitter = 0.0;     // +-fraction of rotation length
  double burstiness_cv = 1.0;       // inter-arrival coefficient of variation
  LengthDistribution lengths;

  void validate() const;

  // Hot group active at time t, given the jittered rotation schedule.
  std::uint32_t num_groups() const {
    return (num_adapters + hot_set_size - 1) / hot_set_size;
  }
};

// Deterministic synthetic stream: sinusoidal rate modulation, rotating hot
// set, gamma-renewal arrivals thinned to the instantaneous rate.
std::vector<Request> generate_synthetic(const SyntheticProfile& profile,
                                        double duration_s,
                                        std::uint64_t seed);

enum class MappingKind { identity, hash_mod, top_n };

struct TraceMapping {
  MappingKind kind = MappingKind::identity;
  std::uint32_t n = 0;  // for hash_mod / top_n

  static TraceMapping parse(const std::string& text);  // "identity", "hash_mod:64", "top:100"
};

// CSV trace ingestion. Header: timestamp_ms,function_id[,input_tokens,output_tokens].
// Inter-arrival times are compressed by rate_scale; missing token columns are
// sampled from `lengths` (seeded, deterministic).
std::vector<Request> ingest_trace(const std::string& path,
                                  const TraceMapping& mapping,
                                  double rate_scale,
                                  const LengthDistribution& lengths,
                                  std::uint64_t seed);

void write_trace_csv(const std::string& path, const std::vector<Request>& requests);

// Distinct adapter ids in first-seen order, sorted.
std::vector<std::string> distinct_adapters(const std::vector<Request>& requests);

}  // namespace lorasim
