#pragma once

#include <cstdint>

#include "lorasim/errors.hpp"

namespace lorasim {

// Calibrated latency constants. Auxiliary overheads are tracked in integer
// microseconds so per-round accounting stays exact.
struct CostModel {
  double pcie_bytes_per_s = 4e9;  // shared equally among concurrent transfers
  double transfer_base_ms = 2.0;  // per-transfer setup before bytes flow
  double prefill_base_ms = 5.0;
  double prefill_per_token_ms = 0.1;
  double decode_base_ms = 30.0;
  double decode_occupancy_factor = 0.024;  // linear growth per extra occupant
  std::uint32_t batch_capacity = 32;
  std::int64_t predictor_overhead_us = 2300;
  std::int64_t page_table_overhead_us = 400;
  std::int64_t prefetch_sched_overhead_us = 800;
  double compaction_page_ms = 0.05;
  double round_ms = 100.0;  // prediction cadence

  void validate() const {
    if (pcie_bytes_per_s <= 0 || transfer_base_ms < 0 || prefill_base_ms < 0 ||
        prefill_per_token_ms < 0 || decode_base_ms <= 0 ||
        decode_occupancy_factor < 0 || batch_capacity < 1 || round_ms <= 0)
      throw ValidationError("cost model constants must be positive");
  }

  double prefill_ms(std::uint32_t input_tokens) const {
    return prefill_base_ms + prefill_per_token_ms * input_tokens;
  }

  // Duration of one decode step at the given batch occupancy.
  double step_ms(std::uint32_t occupancy) const {
    if (occupancy == 0) return decode_base_ms;
    return decode_base_ms * (1.0 + decode_occupancy_factor * (occupancy - 1));
  }

  // Uncontended transfer latency (closed form used by tests).
  double transfer_ms_single(std::uint64_t bytes) const {
    return transfer_base_ms + 1000.0 * static_cast<double>(bytes) / pcie_bytes_per_s;
  }
};

}  // namespace lorasim
