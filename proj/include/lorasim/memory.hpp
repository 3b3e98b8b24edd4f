#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lorasim/errors.hpp"

namespace lorasim {

// Dense adapter index assigned by the engine (catalog order).
using AdapterKey = std::uint32_t;

enum class AllocStatus {
  ok,
  out_of_memory,           // not enough free bytes/pages; caller may evict
  fragmentation_failure,   // enough free bytes but no contiguous region
};

struct FragmentationReport {
  double external_frag = 0.0;  // 1 - largest_contiguous_free / total_free
  double internal_frag = 0.0;  // (allocated - used) / allocated
  double utilization = 0.0;    // used / total
};

// Per-adapter map from logical page index to physical page slot.
struct PageTable {
  AdapterKey adapter = 0;
  std::uint64_t weight_bytes = 0;
  std::vector<std::uint32_t> entries;  // logical i -> physical page
};

// Fixed-size page inventory. Any free page satisfies any page request, so
// external fragmentation is zero by construction; waste is page rounding.
class PagePool {
 public:
  PagePool(std::uint64_t page_bytes, std::uint32_t total_pages);

  std::uint32_t pages_needed(std::uint64_t bytes) const;

  // Moves ceil(bytes/P) pages from the free list to `adapter`. On
  // out_of_memory the pool is unchanged. Allocating an adapter that already
  // holds pages is a logic error.
  AllocStatus alloc(AdapterKey adapter, std::uint64_t weight_bytes);
  void free(AdapterKey adapter);  // throws std::logic_error on double free

  std::uint32_t translate(AdapterKey adapter, std::uint32_t logical) const;

  // Relocates allocated pages into a contiguous prefix; pages already inside
  // the prefix stay put. Returns the number of relocations.
  std::size_t compact();

  FragmentationReport report() const;
  nlohmann::json dump() const;

  bool has(AdapterKey adapter) const { return tables_.count(adapter) > 0; }
  const PageTable& table(AdapterKey adapter) const;
  std::uint32_t free_pages() const { return static_cast<std::uint32_t>(free_.size()); }
  std::uint32_t total_pages() const { return total_pages_; }
  std::uint64_t page_bytes() const { return page_bytes_; }
  std::uint64_t used_bytes() const { return used_bytes_; }
  std::uint64_t allocated_bytes() const {
    return static_cast<std::uint64_t>(total_pages_ - free_.size()) * page_bytes_;
  }
  std::uint64_t total_bytes() const {
    return static_cast<std::uint64_t>(total_pages_) * page_bytes_;
  }
  std::vector<AdapterKey> resident() const;

  void check_invariants() const;  // throws std::logic_error on corruption

 private:
  std::uint64_t page_bytes_;
  std::uint32_t total_pages_;
  std::uint64_t used_bytes_ = 0;
  std::set<std::uint32_t> free_;              // ordered: deterministic placement
  std::vector<std::int64_t> owner_;           // physical page -> adapter, -1 free
  std::map<AdapterKey, PageTable> tables_;
};

// Contiguous first-fit allocator baseline. Free regions coalesce on free;
// a request that fits in total free bytes but in no single region fails
// with fragmentation_failure (the event the paged design eliminates).
struct BlockRegion {
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
  std::int64_t owner = -1;  // -1 free
};

class BlockArena {
 public:
  explicit BlockArena(std::uint64_t total_bytes);

  AllocStatus alloc(AdapterKey adapter, std::uint64_t bytes);
  void free(AdapterKey adapter);  // throws std::logic_error on double free

  FragmentationReport report() const;
  nlohmann::json dump() const;

  bool has(AdapterKey adapter) const { return owned_.count(adapter) > 0; }
  std::uint64_t free_bytes() const { return free_bytes_; }
  std::uint64_t largest_free() const;
  std::uint64_t total_bytes() const { return total_bytes_; }
  std::uint64_t used_bytes() const { return total_bytes_ - free_bytes_; }
  std::size_t fragmentation_failures() const { return frag_failures_; }
  std::vector<AdapterKey> resident() const;
  const std::vector<BlockRegion>& regions() const { return regions_; }

  void check_invariants() const;

 private:
  std::uint64_t total_bytes_;
  std::uint64_t free_bytes_;
  std::vector<BlockRegion> regions_;  // sorted by offset, tiles the arena
  std::map<AdapterKey, std::uint64_t> owned_;  // adapter -> offset
  std::size_t frag_failures_ = 0;
};

}  // namespace lorasim
