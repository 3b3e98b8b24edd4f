#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lorasim/errors.hpp"

namespace lorasim {

// Low-rank adapter dimensioning. The base weight is d x k; the adapter adds
// a d x r times r x k delta to `adapted_matrices` weight matrices.
struct LoraDims {
  std::uint32_t d = 4096;
  std::uint32_t k = 4096;
  std::uint32_t r = 8;
  std::uint32_t adapted_matrices = 64;  // e.g. q/v projections over 32 layers
  std::uint32_t bytes_per_param = 2;

  void validate() const;  // throws ValidationError
};

// Trainable parameter count: adapted_matrices * r * (d + k).
std::uint64_t param_count(const LoraDims& dims);

// Rank -> resident byte size. Sizes are transfer/allocation sizes, not tensor
// layouts, so they are configurable: explicit entries win, otherwise the size
// scales linearly in rank from the anchor (default: rank 8 at 13 MiB).
// "MB" is MiB (2^20 bytes) throughout this codebase.
class AdapterSizeTable {
 public:
  AdapterSizeTable() = default;
  AdapterSizeTable(std::uint32_t anchor_rank, std::uint64_t anchor_bytes,
                   bool linear_fallback = true);

  void set(std::uint32_t rank, std::uint64_t bytes);
  std::uint64_t bytes_for(std::uint32_t rank) const;  // throws ConfigError
  bool has(std::uint32_t rank) const { return table_.count(rank) > 0; }

 private:
  std::map<std::uint32_t, std::uint64_t> table_;
  std::uint32_t anchor_rank_ = 8;
  std::uint64_t anchor_bytes_ = 13ull << 20;
  bool linear_fallback_ = true;
};

// One serveable adapter. weight_bytes is what the simulator moves and
// allocates; when no override is given it derives from the parameter count.
struct AdapterSpec {
  std::string id;
  LoraDims dims;
  std::uint64_t weight_bytes = 0;
  std::optional<std::uint64_t> nominal_size_override;

  static AdapterSpec derived(std::string id, LoraDims dims);
  static AdapterSpec sized(std::string id, LoraDims dims, std::uint64_t bytes);

  void validate() const;
};

// Weighted rank mix for generated catalogs, e.g. {{8, 0.25}, {64, 0.75}}.
using RankMix = std::vector<std::pair<std::uint32_t, double>>;

// Catalog loading / generation. JSON file format: array of
// {"id": str, "rank": int, "size_bytes": optional int}.
std::vector<AdapterSpec> load_catalog_json(const std::string& path,
                                           const AdapterSizeTable& sizes,
                                           const LoraDims& base_dims);

std::vector<AdapterSpec> generate_catalog(std::uint32_t count,
                                          const RankMix& mix,
                                          std::uint64_t seed,
                                          const AdapterSizeTable& sizes,
                                          const LoraDims& base_dims);

}  // namespace lorasim
