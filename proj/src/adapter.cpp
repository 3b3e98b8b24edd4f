#include "lorasim/adapter.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace lorasim {

void LoraDims::validate() const {
  if (r < 1) throw ValidationError("rank must be >= 1");
  if (r >= std::min(d, k))
    throw ValidationError("rank must be < min(d, k), got r=" + std::to_string(r));
  if (adapted_matrices < 1)
    throw ValidationError("adapted_matrices must be >= 1");
  if (bytes_per_param != 1 && bytes_per_param != 2 && bytes_per_param != 4)
    throw ValidationError("bytes_per_param must be 1, 2 or 4");
}

std::uint64_t param_count(const LoraDims& dims) {
  dims.validate();
  return static_cast<std::uint64_t>(dims.adapted_matrices) * dims.r *
         (static_cast<std::uint64_t>(dims.d) + dims.k);
}

AdapterSizeTable::AdapterSizeTable(std::uint32_t anchor_rank,
                                   std::uint64_t anchor_bytes,
                                   bool linear_fallback)
    : anchor_rank_(anchor_rank),
      anchor_bytes_(anchor_bytes),
      linear_fallback_(linear_fallback) {
  if (anchor_rank_ == 0 || anchor_bytes_ == 0)
    throw ConfigError("size table anchor must be positive");
}

void AdapterSizeTable::set(std::uint32_t rank, std::uint64_t bytes) {
  if (bytes == 0) throw ConfigError("adapter size must be positive");
  table_[rank] = bytes;
}

std::uint64_t AdapterSizeTable::bytes_for(std::uint32_t rank) const {
  auto it = table_.find(rank);
  if (it != table_.end()) return it->second;
  if (!linear_fallback_)
    throw ConfigError("no size configured for rank " + std::to_string(rank) +
                      " and linear fallback is disabled");
  return anchor_bytes_ * rank / anchor_rank_;
}

AdapterSpec AdapterSpec::derived(std::string id, LoraDims dims) {
  AdapterSpec s;
  s.id = std::move(id);
  s.dims = dims;
  s.weight_bytes = param_count(dims) * dims.bytes_per_param;
  s.validate();
  return s;
}

AdapterSpec AdapterSpec::sized(std::string id, LoraDims dims, std::uint64_t bytes) {
  AdapterSpec s;
  s.id = std::move(id);
  s.dims = dims;
  s.nominal_size_override = bytes;
  s.weight_bytes = bytes;
  s.validate();
  return s;
}

void AdapterSpec::validate() const {
  dims.validate();
  if (weight_bytes == 0) throw ValidationError("adapter weight_bytes must be > 0");
  if (!nominal_size_override &&
      weight_bytes != param_count(dims) * dims.bytes_per_param)
    throw ValidationError("weight_bytes inconsistent with dims for adapter " + id);
  if (nominal_size_override && weight_bytes != *nominal_size_override)
    throw ValidationError("weight_bytes inconsistent with override for adapter " + id);
}

std::vector<AdapterSpec> load_catalog_json(const std::string& path,
                                           const AdapterSizeTable& sizes,
                                           const LoraDims& base_dims) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open adapter catalog: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("adapter catalog " + path + ": " + e.what());
  }
  if (!j.is_array()) throw ParseError("adapter catalog must be a JSON array");

  std::vector<AdapterSpec> out;
  out.reserve(j.size());
  for (const auto& entry : j) {
    if (!entry.contains("id") || !entry.contains("rank"))
      throw ParseError("catalog entry needs 'id' and 'rank'");
    LoraDims dims = base_dims;
    dims.r = entry.at("rank").get<std::uint32_t>();
    std::uint64_t bytes = entry.contains("size_bytes")
                              ? entry.at("size_bytes").get<std::uint64_t>()
                              : sizes.bytes_for(dims.r);
    out.push_back(AdapterSpec::sized(entry.at("id").get<std::string>(), dims, bytes));
  }
  if (out.empty()) throw ValidationError("adapter catalog is empty");
  return out;
}

std::vector<AdapterSpec> generate_catalog(std::uint32_t count,
                                          const RankMix& mix,
                                          std::uint64_t seed,
                                          const AdapterSizeTable& sizes,
                                          const LoraDims& base_dims) {
  if (count == 0) throw ValidationError("catalog count must be >= 1");
  if (mix.empty()) throw ConfigError("rank mix is empty");
  std::vector<double> weights;
  for (const auto& [rank, w] : mix) {
    if (w < 0) throw ConfigError("rank mix weights must be nonnegative");
    weights.push_back(w);
  }
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());

  int width = 1;
  for (std::uint32_t v = count > 0 ? count - 1 : 0; v >= 10; v /= 10) ++width;

  std::vector<AdapterSpec> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::ostringstream id;
    id << "a";
    std::string digits = std::to_string(i);
    id << std::string(width > static_cast<int>(digits.size())
                          ? width - digits.size()
                          : 0,
                      '0')
       << digits;
    LoraDims dims = base_dims;
    dims.r = mix[pick(rng)].first;
    out.push_back(AdapterSpec::sized(id.str(), dims, sizes.bytes_for(dims.r)));
  }
  return out;
}

}  // namespace lorasim
