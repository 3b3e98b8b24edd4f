#include "lorasim/workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace lorasim {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint32_t clamp_tokens(double v, std::uint32_t max_tokens) {
  if (!(v >= 1.0)) return 1;
  if (v > max_tokens) return max_tokens;
  return static_cast<std::uint32_t>(std::llround(v));
}

}  // namespace

std::uint32_t LengthDistribution::sample_input(std::mt19937_64& rng) const {
  std::normal_distribution<double> n(std::log(input_median), input_sigma);
  return clamp_tokens(std::exp(n(rng)), max_tokens);
}

std::uint32_t LengthDistribution::sample_output(std::mt19937_64& rng) const {
  std::normal_distribution<double> n(std::log(output_median), output_sigma);
  return clamp_tokens(std::exp(n(rng)), max_tokens);
}

void SyntheticProfile::validate() const {
  if (num_adapters < 1) throw ValidationError("num_adapters must be >= 1");
  if (base_rate <= 0) throw ValidationError("base_rate must be positive");
  if (diurnal_amplitude < 0 || diurnal_amplitude > 1)
    throw ValidationError("diurnal_amplitude must be in [0, 1]");
  if (period_s <= 0) throw ValidationError("period must be positive");
  if (hot_set_size < 1 || hot_set_size > num_adapters)
    throw ValidationError("hot_set_size must be in [1, num_adapters]");
  if (hot_rotation_s <= 0) throw ValidationError("hot_rotation_s must be positive");
  if (hot_share < 0 || hot_share > 1)
    throw ValidationError("hot_share must be in [0, 1]");
  if (rotation_jitter < 0 || rotation_jitter >= 1)
    throw ValidationError("rotation_jitter must be in [0, 1)");
  if (burstiness_cv <= 0) throw ValidationError("burstiness_cv must be positive");
}

std::vector<Request> generate_synthetic(const SyntheticProfile& profile,
                                        double duration_s,
                                        std::uint64_t seed) {
  profile.validate();
  if (duration_s <= 0) throw ValidationError("duration must be positive");

  std::mt19937_64 rng(seed);

  // Jittered rotation schedule, drawn up front so arrival sampling cannot
  // perturb it.
  std::vector<double> rotation_ends;  // seconds
  {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double t = 0.0;
    while (t < duration_s) {
      double len = profile.hot_rotation_s;
      if (profile.rotation_jitter > 0) len *= 1.0 + profile.rotation_jitter * u(rng);
      t += std::max(len, 1e-3);
      rotation_ends.push_back(t);
    }
  }
  auto group_at = [&](double t_s) -> std::uint32_t {
    auto it = std::upper_bound(rotation_ends.begin(), rotation_ends.end(), t_s);
    std::uint32_t idx = static_cast<std::uint32_t>(it - rotation_ends.begin());
    return idx % profile.num_groups();
  };

  const double rate_max = profile.base_rate * (1.0 + profile.diurnal_amplitude);
  auto rate_at = [&](double t_s) {
    return profile.base_rate *
           (1.0 + profile.diurnal_amplitude * std::sin(2.0 * kPi * t_s / profile.period_s));
  };

  // Gamma renewal process at rate_max, thinned to rate(t). shape = 1/cv^2
  // gives the requested inter-arrival coefficient of variation.
  const double shape = 1.0 / (profile.burstiness_cv * profile.burstiness_cv);
  std::gamma_distribution<double> gap(shape, 1.0 / (rate_max * shape));
  std::uniform_real_distribution<double> accept(0.0, 1.0);
  std::uniform_int_distribution<std::uint32_t> hot_pick(0, profile.hot_set_size - 1);

  int width = 1;
  for (std::uint32_t v = profile.num_adapters - 1; v >= 10; v /= 10) ++width;
  auto adapter_name = [&](std::uint32_t idx) {
    std::string digits = std::to_string(idx);
    return "a" + std::string(width > static_cast<int>(digits.size())
                                 ? width - digits.size()
                                 : 0,
                             '0') +
           digits;
  };

  std::vector<Request> out;
  out.reserve(static_cast<std::size_t>(duration_s * profile.base_rate * 1.2) + 16);
  double t = 0.0;
  while (true) {
    t += gap(rng);
    if (t >= duration_s) break;
    if (accept(rng) > rate_at(t) / rate_max) continue;

    std::uint32_t g = group_at(t);
    std::uint32_t idx;
    if (accept(rng) < profile.hot_share) {
      idx = (g * profile.hot_set_size + hot_pick(rng)) % profile.num_adapters;
    } else {
      // Uniform over adapters outside the current hot group.
      std::uint32_t cold = profile.num_adapters - profile.hot_set_size;
      if (cold == 0) {
        idx = (g * profile.hot_set_size + hot_pick(rng)) % profile.num_adapters;
      } else {
        std::uniform_int_distribution<std::uint32_t> cold_pick(0, cold - 1);
        std::uint32_t o = cold_pick(rng);
        std::uint32_t hot_base = (g * profile.hot_set_size) % profile.num_adapters;
        // Skip the hot window, treating the id space as a ring.
        idx = (hot_base + profile.hot_set_size + o) % profile.num_adapters;
      }
    }

    Request r;
    r.arrival_ms = t * 1000.0;
    r.adapter_id = adapter_name(idx);
    r.input_tokens = profile.lengths.sample_input(rng);
    r.output_tokens = profile.lengths.sample_output(rng);
    out.push_back(std::move(r));
  }
  return out;
}

TraceMapping TraceMapping::parse(const std::string& text) {
  TraceMapping m;
  if (text == "identity") {
    m.kind = MappingKind::identity;
    return m;
  }
  auto colon = text.find(':');
  std::string head = text.substr(0, colon);
  if (colon != std::string::npos) {
    try {
      m.n = static_cast<std::uint32_t>(std::stoul(text.substr(colon + 1)));
    } catch (...) {
      throw ConfigError("bad mapping count in '" + text + "'");
    }
  }
  if (head == "hash_mod") {
    m.kind = MappingKind::hash_mod;
  } else if (head == "top") {
    m.kind = MappingKind::top_n;
  } else {
    throw ConfigError("unknown trace mapping '" + text +
                      "' (want identity, hash_mod:N or top:N)");
  }
  if (m.n == 0) throw ConfigError("mapping '" + text + "' needs a positive count");
  return m;
}

std::vector<Request> ingest_trace(const std::string& path,
                                  const TraceMapping& mapping,
                                  double rate_scale,
                                  const LengthDistribution& lengths,
                                  std::uint64_t seed) {
  if (rate_scale <= 0) throw ValidationError("rate_scale must be positive");
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trace file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw ValidationError("trace file is empty: " + path);
  // Tolerate trailing \r from CRLF files.
  if (!line.empty() && line.back() == '\r') line.pop_back();
  bool has_tokens;
  if (line == "timestamp_ms,function_id,input_tokens,output_tokens") {
    has_tokens = true;
  } else if (line == "timestamp_ms,function_id") {
    has_tokens = false;
  } else {
    throw ParseError("trace " + path + " line 1: unrecognized header '" + line + "'");
  }

  std::mt19937_64 rng(seed ^ 0xC0FFEEull);
  struct Row {
    double ts;
    std::string fid;
    std::uint32_t in_tok, out_tok;
  };
  std::vector<Row> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) cols.push_back(col);
    std::size_t want = has_tokens ? 4 : 2;
    if (cols.size() != want)
      throw ParseError("trace " + path + " line " + std::to_string(lineno) +
                       ": expected " + std::to_string(want) + " columns, got " +
                       std::to_string(cols.size()));
    Row row;
    try {
      row.ts = std::stod(cols[0]);
    } catch (...) {
      throw ParseError("trace " + path + " line " + std::to_string(lineno) +
                       ": bad timestamp '" + cols[0] + "'");
    }
    if (row.ts < 0)
      throw ParseError("trace " + path + " line " + std::to_string(lineno) +
                       ": negative timestamp");
    if (cols[1].empty())
      throw ParseError("trace " + path + " line " + std::to_string(lineno) +
                       ": empty function id");
    row.fid = cols[1];
    if (has_tokens) {
      try {
        long in_v = std::stol(cols[2]);
        long out_v = std::stol(cols[3]);
        if (in_v < 1 || out_v < 1) throw std::invalid_argument("nonpositive");
        row.in_tok = static_cast<std::uint32_t>(in_v);
        row.out_tok = static_cast<std::uint32_t>(out_v);
      } catch (...) {
        throw ParseError("trace " + path + " line " + std::to_string(lineno) +
                         ": bad token counts");
      }
    } else {
      row.in_tok = lengths.sample_input(rng);
      row.out_tok = lengths.sample_output(rng);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError("trace " + path + " has no data rows");

  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.ts < b.ts; });

  // Resolve the function-id -> adapter-id rule.
  std::map<std::string, std::string> fid_to_adapter;
  switch (mapping.kind) {
    case MappingKind::identity:
      break;  // resolved inline
    case MappingKind::hash_mod:
      break;  // resolved inline
    case MappingKind::top_n: {
      // The N most frequent ids keep their identity; the rest hash onto them.
      std::map<std::string, std::size_t> freq;
      for (const auto& row : rows) ++freq[row.fid];
      std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
      std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
      });
      std::vector<std::string> top;
      for (std::size_t i = 0; i < ranked.size() && i < mapping.n; ++i)
        top.push_back(ranked[i].first);
      for (const auto& [fid, _] : freq) {
        bool is_top = std::find(top.begin(), top.end(), fid) != top.end();
        fid_to_adapter[fid] = is_top ? fid : top[fnv1a(fid) % top.size()];
      }
      break;
    }
  }
  auto map_fid = [&](const std::string& fid) -> std::string {
    switch (mapping.kind) {
      case MappingKind::identity:
        return fid;
      case MappingKind::hash_mod:
        return "a" + std::to_string(fnv1a(fid) % mapping.n);
      case MappingKind::top_n:
        return fid_to_adapter.at(fid);
    }
    return fid;
  };

  std::vector<Request> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    Request r;
    r.arrival_ms = row.ts / rate_scale;
    r.adapter_id = map_fid(row.fid);
    r.input_tokens = row.in_tok;
    r.output_tokens = row.out_tok;
    out.push_back(std::move(r));
  }
  return out;
}

void write_trace_csv(const std::string& path, const std::vector<Request>& requests) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write trace file: " + path);
  out << "timestamp_ms,function_id,input_tokens,output_tokens\n";
  char buf[64];
  for (const auto& r : requests) {
    std::snprintf(buf, sizeof(buf), "%.3f", r.arrival_ms);
    out << buf << ',' << r.adapter_id << ',' << r.input_tokens << ','
        << r.output_tokens << '\n';
  }
}

std::vector<std::string> distinct_adapters(const std::vector<Request>& requests) {
  std::set<std::string> seen;
  for (const auto& r : requests) seen.insert(r.adapter_id);
  return {seen.begin(), seen.end()};
}

}  // namespace lorasim
