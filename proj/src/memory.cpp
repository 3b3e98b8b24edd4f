#include "lorasim/memory.hpp"

#include <algorithm>

namespace lorasim {

PagePool::PagePool(std::uint64_t page_bytes, std::uint32_t total_pages)
    : page_bytes_(page_bytes), total_pages_(total_pages) {
  if (page_bytes_ == 0) throw ValidationError("page size must be positive");
  owner_.assign(total_pages_, -1);
  for (std::uint32_t i = 0; i < total_pages_; ++i) free_.insert(i);
}

std::uint32_t PagePool::pages_needed(std::uint64_t bytes) const {
  return static_cast<std::uint32_t>((bytes + page_bytes_ - 1) / page_bytes_);
}

AllocStatus PagePool::alloc(AdapterKey adapter, std::uint64_t weight_bytes) {
  if (weight_bytes == 0) throw ValidationError("cannot allocate zero bytes");
  if (tables_.count(adapter))
    throw std::logic_error("adapter " + std::to_string(adapter) + " already allocated");
  std::uint32_t need = pages_needed(weight_bytes);
  if (free_.size() < need) return AllocStatus::out_of_memory;

  PageTable table;
  table.adapter = adapter;
  table.weight_bytes = weight_bytes;
  table.entries.reserve(need);
  for (std::uint32_t i = 0; i < need; ++i) {
    auto it = free_.begin();
    table.entries.push_back(*it);
    owner_[*it] = static_cast<std::int64_t>(adapter);
    free_.erase(it);
  }
  used_bytes_ += weight_bytes;
  tables_.emplace(adapter, std::move(table));
  return AllocStatus::ok;
}

void PagePool::free(AdapterKey adapter) {
  auto it = tables_.find(adapter);
  if (it == tables_.end())
    throw std::logic_error("free of adapter " + std::to_string(adapter) +
                           " which holds no pages");
  for (std::uint32_t phys : it->second.entries) {
    if (owner_[phys] != static_cast<std::int64_t>(adapter))
      throw std::logic_error("page table corruption: page not owned by adapter");
    owner_[phys] = -1;
    free_.insert(phys);
  }
  used_bytes_ -= it->second.weight_bytes;
  tables_.erase(it);
}

std::uint32_t PagePool::translate(AdapterKey adapter, std::uint32_t logical) const {
  const PageTable& t = table(adapter);
  if (logical >= t.entries.size())
    throw ValidationError("logical page " + std::to_string(logical) +
                          " out of range (adapter has " +
                          std::to_string(t.entries.size()) + " pages)");
  return t.entries[logical];
}

const PageTable& PagePool::table(AdapterKey adapter) const {
  auto it = tables_.find(adapter);
  if (it == tables_.end())
    throw ValidationError("no page table for adapter " + std::to_string(adapter));
  return it->second;
}

std::size_t PagePool::compact() {
  std::uint32_t live = total_pages_ - static_cast<std::uint32_t>(free_.size());
  std::size_t moved = 0;
  // Move pages that sit beyond the live prefix into free slots inside it.
  for (auto& [adapter, table] : tables_) {
    for (auto& phys : table.entries) {
      if (phys < live) continue;
      auto slot = free_.begin();  // smallest free index, necessarily < live
      std::uint32_t target = *slot;
      free_.erase(slot);
      free_.insert(phys);
      owner_[target] = owner_[phys];
      owner_[phys] = -1;
      phys = target;
      ++moved;
    }
  }
  return moved;
}

FragmentationReport PagePool::report() const {
  FragmentationReport r;
  r.external_frag = 0.0;  // page-granular allocation: any free page fits
  std::uint64_t allocated = allocated_bytes();
  r.internal_frag =
      allocated == 0 ? 0.0
                     : static_cast<double>(allocated - used_bytes_) / allocated;
  r.utilization = static_cast<double>(used_bytes_) / total_bytes();
  return r;
}

nlohmann::json PagePool::dump() const {
  nlohmann::json j;
  j["page_bytes"] = page_bytes_;
  j["total_pages"] = total_pages_;
  j["owner"] = owner_;
  nlohmann::json tables = nlohmann::json::object();
  for (const auto& [adapter, table] : tables_) {
    tables[std::to_string(adapter)] = {{"weight_bytes", table.weight_bytes},
                                       {"entries", table.entries}};
  }
  j["tables"] = std::move(tables);
  return j;
}

std::vector<AdapterKey> PagePool::resident() const {
  std::vector<AdapterKey> out;
  out.reserve(tables_.size());
  for (const auto& [adapter, _] : tables_) out.push_back(adapter);
  return out;
}

void PagePool::check_invariants() const {
  std::size_t allocated = 0;
  for (auto o : owner_)
    if (o >= 0) ++allocated;
  if (allocated + free_.size() != total_pages_)
    throw std::logic_error("page conservation violated");
  std::set<std::uint32_t> seen;
  std::uint64_t used = 0;
  for (const auto& [adapter, table] : tables_) {
    if (table.entries.size() != pages_needed(table.weight_bytes))
      throw std::logic_error("page table entry count != ceil(S/P)");
    used += table.weight_bytes;
    for (std::uint32_t phys : table.entries) {
      if (!seen.insert(phys).second)
        throw std::logic_error("physical page mapped twice");
      if (owner_[phys] != static_cast<std::int64_t>(adapter))
        throw std::logic_error("owner map does not match page table");
      if (free_.count(phys))
        throw std::logic_error("allocated page present in free list");
    }
  }
  if (seen.size() != allocated) throw std::logic_error("orphan allocated pages");
  if (used != used_bytes_) throw std::logic_error("used byte accounting drifted");
}

BlockArena::BlockArena(std::uint64_t total_bytes)
    : total_bytes_(total_bytes), free_bytes_(total_bytes) {
  if (total_bytes_ == 0) throw ValidationError("arena size must be positive");
  regions_.push_back(BlockRegion{0, total_bytes_, -1});
}

AllocStatus BlockArena::alloc(AdapterKey adapter, std::uint64_t bytes) {
  if (bytes == 0) throw ValidationError("cannot allocate zero bytes");
  if (owned_.count(adapter))
    throw std::logic_error("adapter " + std::to_string(adapter) + " already allocated");
  if (bytes > free_bytes_) return AllocStatus::out_of_memory;

  for (std::size_t i = 0; i < regions_.size(); ++i) {
    BlockRegion& reg = regions_[i];
    if (reg.owner != -1 || reg.length < bytes) continue;
    // First fit: carve the front of the region.
    if (reg.length == bytes) {
      reg.owner = static_cast<std::int64_t>(adapter);
    } else {
      BlockRegion rest{reg.offset + bytes, reg.length - bytes, -1};
      reg.length = bytes;
      reg.owner = static_cast<std::int64_t>(adapter);
      regions_.insert(regions_.begin() + static_cast<std::ptrdiff_t>(i) + 1, rest);
    }
    owned_[adapter] = regions_[i].offset;
    free_bytes_ -= bytes;
    return AllocStatus::ok;
  }
  ++frag_failures_;
  return AllocStatus::fragmentation_failure;
}

void BlockArena::free(AdapterKey adapter) {
  auto it = owned_.find(adapter);
  if (it == owned_.end())
    throw std::logic_error("free of adapter " + std::to_string(adapter) +
                           " which owns no region");
  std::uint64_t offset = it->second;
  owned_.erase(it);

  std::size_t idx = regions_.size();
  for (std::size_t i = 0; i < regions_.size(); ++i) {
    if (regions_[i].offset == offset &&
        regions_[i].owner == static_cast<std::int64_t>(adapter)) {
      idx = i;
      break;
    }
  }
  if (idx == regions_.size()) throw std::logic_error("owned region not found");

  regions_[idx].owner = -1;
  free_bytes_ += regions_[idx].length;

  // Coalesce with right then left neighbor.
  if (idx + 1 < regions_.size() && regions_[idx + 1].owner == -1) {
    regions_[idx].length += regions_[idx + 1].length;
    regions_.erase(regions_.begin() + static_cast<std::ptrdiff_t>(idx) + 1);
  }
  if (idx > 0 && regions_[idx - 1].owner == -1) {
    regions_[idx - 1].length += regions_[idx].length;
    regions_.erase(regions_.begin() + static_cast<std::ptrdiff_t>(idx));
  }
}

std::uint64_t BlockArena::largest_free() const {
  std::uint64_t best = 0;
  for (const auto& reg : regions_)
    if (reg.owner == -1) best = std::max(best, reg.length);
  return best;
}

FragmentationReport BlockArena::report() const {
  FragmentationReport r;
  r.external_frag =
      free_bytes_ == 0
          ? 0.0
          : 1.0 - static_cast<double>(largest_free()) / static_cast<double>(free_bytes_);
  r.internal_frag = 0.0;  // regions are exact-fit
  r.utilization = static_cast<double>(used_bytes()) / static_cast<double>(total_bytes_);
  return r;
}

nlohmann::json BlockArena::dump() const {
  nlohmann::json j;
  j["total_bytes"] = total_bytes_;
  nlohmann::json regs = nlohmann::json::array();
  for (const auto& reg : regions_)
    regs.push_back({{"offset", reg.offset}, {"length", reg.length}, {"owner", reg.owner}});
  j["regions"] = std::move(regs);
  return j;
}

std::vector<AdapterKey> BlockArena::resident() const {
  std::vector<AdapterKey> out;
  out.reserve(owned_.size());
  for (const auto& [adapter, _] : owned_) out.push_back(adapter);
  return out;
}

void BlockArena::check_invariants() const {
  std::uint64_t cursor = 0;
  std::uint64_t free_sum = 0;
  for (std::size_t i = 0; i < regions_.size(); ++i) {
    const auto& reg = regions_[i];
    if (reg.offset != cursor) throw std::logic_error("regions do not tile the arena");
    if (reg.length == 0) throw std::logic_error("zero-length region");
    if (reg.owner == -1) {
      free_sum += reg.length;
      if (i + 1 < regions_.size() && regions_[i + 1].owner == -1)
        throw std::logic_error("adjacent free regions not coalesced");
    }
    cursor += reg.length;
  }
  if (cursor != total_bytes_) throw std::logic_error("region lengths do not sum to arena");
  if (free_sum != free_bytes_) throw std::logic_error("free byte accounting drifted");
}

}  // namespace lorasim
