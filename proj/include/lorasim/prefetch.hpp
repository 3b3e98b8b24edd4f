#pragma once

#include <cstdint>
#include <vector>

#include "lorasim/errors.hpp"
#include "lorasim/memory.hpp"

namespace lorasim {

struct PrefetchPolicy {
  double theta = 0.5;   // prefetch only adapters with probability strictly above
  double alpha = 0.3;   // recency weight
  double beta = 0.3;    // frequency weight
  double gamma = 0.4;   // prediction weight
  double tau_ms = 60'000.0;             // recency decay constant
  double freq_half_life_ms = 120'000.0; // frequency count half-life
  double staging_fraction = 0.1;        // share of pool reserved for staging

  void validate() const;
};

enum class Residency { not_resident, staging, resident };

// Engine-owned per-adapter state feeding prefetch and eviction decisions.
struct AdapterDynamics {
  Residency status = Residency::not_resident;
  double last_access_ms = -1.0;  // < 0: never accessed
  double decayed_count = 0.0;
  double decay_stamp_ms = 0.0;
  double prediction = 0.0;       // latest forecast probability
  std::uint32_t busy = 0;        // requests currently holding batch slots
  bool transfer_active = false;

  void record_access(double now_ms, double half_life_ms);
  double decayed_at(double now_ms, double half_life_ms) const;
};

// exp(-(now - last_access)/tau) in (0, 1]; zero for never-accessed adapters.
double recency_score(double last_access_ms, double now_ms, double tau_ms);

// Combined recency-frequency-prediction score; lowest scores evict first.
// max_freq is the largest decayed count over resident adapters (for
// normalizing the frequency term into [0, 1]).
double eviction_score(const AdapterDynamics& dyn, const PrefetchPolicy& policy,
                      double now_ms, double max_freq);

// Resident adapters as (score, key) sorted ascending (ties by key).
std::vector<std::pair<double, AdapterKey>> scored_residents(
    const std::vector<AdapterDynamics>& dyn, const PrefetchPolicy& policy,
    double now_ms);

// Non-resident, non-staging adapters with probability strictly above theta,
// by descending probability (ties by key), truncated to the staging budget.
// Budget units are pages for the paged allocator and bytes for the block
// baseline. probabilities[k] < 0 marks "no prediction" for adapter k.
std::vector<AdapterKey> select_prefetch(const std::vector<double>& probabilities,
                                        const std::vector<AdapterDynamics>& dyn,
                                        const PrefetchPolicy& policy,
                                        const std::vector<std::uint64_t>& units_for,
                                        std::uint64_t staging_budget_units);

struct EvictionPlan {
  std::vector<AdapterKey> victims;  // ascending score order
  bool satisfied = false;
};

// Minimal ascending-score prefix of `eligible` whose eviction brings free
// bytes to at least bytes_needed. eligible must already be score-sorted.
EvictionPlan plan_evictions(std::uint64_t bytes_needed, std::uint64_t free_bytes,
                            const std::vector<AdapterKey>& eligible,
                            const std::vector<std::uint64_t>& bytes_for);

}  // namespace lorasim
