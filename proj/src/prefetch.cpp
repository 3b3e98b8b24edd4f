#include "lorasim/prefetch.hpp"

#include <algorithm>
#include <cmath>

namespace lorasim {

void PrefetchPolicy::validate() const {
  if (theta <= 0.0 || theta >= 1.0)
    throw ValidationError("theta must be strictly inside (0, 1)");
  if (alpha < 0 || beta < 0 || gamma < 0)
    throw ValidationError("score weights must be nonnegative");
  if (alpha + beta + gamma <= 0)
    throw ValidationError("at least one score weight must be positive");
  if (tau_ms <= 0) throw ValidationError("tau must be positive");
  if (freq_half_life_ms <= 0) throw ValidationError("half-life must be positive");
  if (staging_fraction < 0 || staging_fraction > 1)
    throw ValidationError("staging_fraction must be in [0, 1]");
}

void AdapterDynamics::record_access(double now_ms, double half_life_ms) {
  decayed_count = decayed_at(now_ms, half_life_ms) + 1.0;
  decay_stamp_ms = now_ms;
  last_access_ms = now_ms;
}

double AdapterDynamics::decayed_at(double now_ms, double half_life_ms) const {
  if (decayed_count == 0.0) return 0.0;
  double dt = now_ms - decay_stamp_ms;
  if (dt <= 0) return decayed_count;
  return decayed_count * std::exp2(-dt / half_life_ms);
}

double recency_score(double last_access_ms, double now_ms, double tau_ms) {
  if (last_access_ms < 0) return 0.0;
  double dt = std::max(0.0, now_ms - last_access_ms);
  return std::exp(-dt / tau_ms);
}

double eviction_score(const AdapterDynamics& dyn, const PrefetchPolicy& policy,
                      double now_ms, double max_freq) {
  double lru = recency_score(dyn.last_access_ms, now_ms, policy.tau_ms);
  double freq = max_freq > 0
                    ? dyn.decayed_at(now_ms, policy.freq_half_life_ms) / max_freq
                    : 0.0;
  return policy.alpha * lru + policy.beta * freq + policy.gamma * dyn.prediction;
}

std::vector<std::pair<double, AdapterKey>> scored_residents(
    const std::vector<AdapterDynamics>& dyn, const PrefetchPolicy& policy,
    double now_ms) {
  double max_freq = 0.0;
  for (const auto& d : dyn)
    if (d.status == Residency::resident)
      max_freq = std::max(max_freq, d.decayed_at(now_ms, policy.freq_half_life_ms));

  std::vector<std::pair<double, AdapterKey>> out;
  for (AdapterKey a = 0; a < dyn.size(); ++a) {
    if (dyn[a].status != Residency::resident) continue;
    out.emplace_back(eviction_score(dyn[a], policy, now_ms, max_freq), a);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<AdapterKey> select_prefetch(const std::vector<double>& probabilities,
                                        const std::vector<AdapterDynamics>& dyn,
                                        const PrefetchPolicy& policy,
                                        const std::vector<std::uint64_t>& units_for,
                                        std::uint64_t staging_budget_units) {
  std::vector<std::pair<double, AdapterKey>> candidates;
  for (AdapterKey a = 0; a < dyn.size(); ++a) {
    if (a >= probabilities.size()) break;
    double p = probabilities[a];
    if (p <= policy.theta) continue;  // strict inequality gate
    if (dyn[a].status != Residency::not_resident) continue;
    if (dyn[a].transfer_active) continue;
    candidates.emplace_back(-p, a);  // negative: descending p, ties by key
  }
  std::sort(candidates.begin(), candidates.end());

  std::vector<AdapterKey> out;
  std::uint64_t budget = staging_budget_units;
  for (const auto& [negp, a] : candidates) {
    std::uint64_t need = a < units_for.size() ? units_for[a] : 1;
    if (need > budget) continue;
    budget -= need;
    out.push_back(a);
  }
  return out;
}

EvictionPlan plan_evictions(std::uint64_t bytes_needed, std::uint64_t free_bytes,
                            const std::vector<AdapterKey>& eligible,
                            const std::vector<std::uint64_t>& bytes_for) {
  EvictionPlan plan;
  if (free_bytes >= bytes_needed) {
    plan.satisfied = true;
    return plan;
  }
  std::uint64_t freed = free_bytes;
  for (AdapterKey a : eligible) {
    plan.victims.push_back(a);
    freed += bytes_for[a];
    if (freed >= bytes_needed) {
      plan.satisfied = true;
      return plan;
    }
  }
  plan.victims.clear();  // unsatisfiable: caller queues the request
  return plan;
}

}  // namespace lorasim
