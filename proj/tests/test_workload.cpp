#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <map>

#include "lorasim/workload.hpp"

using namespace lorasim;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& p, const std::string& content) : path(p) {
    std::ofstream out(path);
    out << content;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("rate scaling halves inter-arrival gaps") {
  TempFile f("wl_scale.csv",
             "timestamp_ms,function_id,input_tokens,output_tokens\n"
             "100,f1,10,10\n"
             "200,f2,10,10\n");
  auto reqs = ingest_trace(f.path, TraceMapping{}, 2.0, LengthDistribution{}, 1);
  REQUIRE(reqs.size() == 2);
  CHECK(reqs[1].arrival_ms - reqs[0].arrival_ms == doctest::Approx(50.0));
}

TEST_CASE("identity mapping keeps distinct function ids distinct") {
  TempFile f("wl_distinct.csv",
             "timestamp_ms,function_id,input_tokens,output_tokens\n"
             "0,f1,1,1\n1,f2,1,1\n2,f3,1,1\n3,f1,1,1\n");
  auto reqs = ingest_trace(f.path, TraceMapping{}, 1.0, LengthDistribution{}, 1);
  CHECK(distinct_adapters(reqs).size() == 3);
}

TEST_CASE("negative timestamps and malformed rows name the line") {
  TempFile neg("wl_neg.csv",
               "timestamp_ms,function_id,input_tokens,output_tokens\n"
               "0,f1,1,1\n-5,f2,1,1\n");
  try {
    ingest_trace(neg.path, TraceMapping{}, 1.0, LengthDistribution{}, 1);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }

  TempFile bad("wl_bad.csv",
               "timestamp_ms,function_id,input_tokens,output_tokens\n"
               "0,f1,1\n");
  CHECK_THROWS_AS(ingest_trace(bad.path, TraceMapping{}, 1.0, LengthDistribution{}, 1),
                  ParseError);
}

TEST_CASE("empty traces and missing files are rejected") {
  TempFile empty("wl_empty.csv", "timestamp_ms,function_id,input_tokens,output_tokens\n");
  CHECK_THROWS_AS(ingest_trace(empty.path, TraceMapping{}, 1.0, LengthDistribution{}, 1),
                  ValidationError);
  CHECK_THROWS_AS(ingest_trace("missing.csv", TraceMapping{}, 1.0, LengthDistribution{}, 1),
                  ConfigError);
}

TEST_CASE("token columns may be omitted; sampled lengths are valid") {
  TempFile f("wl_len.csv", "timestamp_ms,function_id\n0,f1\n10,f2\n");
  auto reqs = ingest_trace(f.path, TraceMapping{}, 1.0, LengthDistribution{}, 9);
  for (const auto& r : reqs) {
    CHECK(r.input_tokens >= 1);
    CHECK(r.output_tokens >= 1);
  }
}

TEST_CASE("hash_mod and top mappings bound the adapter universe") {
  TempFile f("wl_map.csv",
             "timestamp_ms,function_id,input_tokens,output_tokens\n"
             "0,f1,1,1\n1,f2,1,1\n2,f3,1,1\n3,f4,1,1\n4,f1,1,1\n5,f1,1,1\n");
  auto hashed = ingest_trace(f.path, TraceMapping::parse("hash_mod:2"), 1.0,
                             LengthDistribution{}, 1);
  CHECK(distinct_adapters(hashed).size() <= 2);

  auto topped = ingest_trace(f.path, TraceMapping::parse("top:2"), 1.0,
                             LengthDistribution{}, 1);
  auto ids = distinct_adapters(topped);
  CHECK(ids.size() <= 2);
  // f1 dominates the trace and must survive as itself.
  bool has_f1 = false;
  for (const auto& id : ids) has_f1 |= id == "f1";
  CHECK(has_f1);

  CHECK_THROWS_AS(TraceMapping::parse("nonsense"), ConfigError);
  CHECK_THROWS_AS(TraceMapping::parse("top:0"), ConfigError);
}

TEST_CASE("synthetic streams are deterministic and time-ordered") {
  SyntheticProfile profile;
  profile.num_adapters = 10;
  profile.base_rate = 40;
  auto a = generate_synthetic(profile, 30, 123);
  auto b = generate_synthetic(profile, 30, 123);
  REQUIRE(a.size() == b.size());
  double prev = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].arrival_ms == b[i].arrival_ms);
    CHECK(a[i].adapter_id == b[i].adapter_id);
    CHECK(a[i].arrival_ms >= prev);
    prev = a[i].arrival_ms;
  }
  auto c = generate_synthetic(profile, 30, 124);
  bool differs = a.size() != c.size();
  for (std::size_t i = 0; !differs && i < a.size(); ++i)
    differs = a[i].arrival_ms != c[i].arrival_ms || a[i].adapter_id != c[i].adapter_id;
  CHECK(differs);  // different seed, different stream
}

TEST_CASE("flat profile hits the configured rate within 5 percent") {
  SyntheticProfile profile;
  profile.num_adapters = 20;
  profile.base_rate = 50;
  profile.diurnal_amplitude = 0;
  const double duration = 400;
  auto reqs = generate_synthetic(profile, duration, 2024);
  double rate = static_cast<double>(reqs.size()) / duration;
  CHECK(rate > 0.95 * profile.base_rate);
  CHECK(rate < 1.05 * profile.base_rate);
}

TEST_CASE("hot set spanning all adapters gives uniform shares") {
  SyntheticProfile profile;
  profile.num_adapters = 20;
  profile.hot_set_size = 20;
  profile.base_rate = 60;
  auto reqs = generate_synthetic(profile, 300, 77);

  std::map<std::string, std::size_t> counts;
  for (const auto& r : reqs) ++counts[r.adapter_id];
  // Conservation: per-adapter counts sum to the total.
  std::size_t sum = 0;
  for (const auto& [id, n] : counts) sum += n;
  CHECK(sum == reqs.size());

  // Chi-square against uniform over 20 cells: 99.9th percentile at df=19.
  double expected = static_cast<double>(reqs.size()) / 20.0;
  double chi2 = 0;
  for (const auto& [id, n] : counts) {
    double d = static_cast<double>(n) - expected;
    chi2 += d * d / expected;
  }
  CHECK(counts.size() == 20);
  CHECK(chi2 < 43.82);
}

TEST_CASE("hot share concentrates traffic on the rotating hot set") {
  SyntheticProfile profile;
  profile.num_adapters = 20;
  profile.hot_set_size = 5;
  profile.hot_share = 1.0;
  profile.hot_rotation_s = 7;
  profile.base_rate = 50;
  auto reqs = generate_synthetic(profile, 28, 5);  // one full cycle of 4 groups
  std::map<std::string, std::size_t> counts;
  for (const auto& r : reqs) ++counts[r.adapter_id];
  CHECK(counts.size() == 20);  // every adapter becomes hot once per cycle
}

TEST_CASE("diurnal modulation moves mass toward the sine peak") {
  SyntheticProfile profile;
  profile.num_adapters = 4;
  profile.base_rate = 40;
  profile.diurnal_amplitude = 0.8;
  profile.period_s = 100;
  auto reqs = generate_synthetic(profile, 100, 11);
  // Peak of 1 + 0.8 sin(2 pi t / 100) is the first half-period.
  std::size_t first_half = 0;
  for (const auto& r : reqs)
    if (r.arrival_ms < 50'000) ++first_half;
  CHECK(first_half > reqs.size() / 2);
}

TEST_CASE("profile validation rejects bad fields") {
  SyntheticProfile p;
  p.num_adapters = 0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = SyntheticProfile{};
  p.hot_set_size = 99;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = SyntheticProfile{};
  p.diurnal_amplitude = 1.5;
  CHECK_THROWS_AS(p.validate(), ValidationError);
}

TEST_CASE("trace csv writer round-trips through ingest") {
  SyntheticProfile profile;
  profile.num_adapters = 5;
  profile.base_rate = 30;
  auto reqs = generate_synthetic(profile, 10, 3);
  write_trace_csv("wl_roundtrip.csv", reqs);
  auto back =
      ingest_trace("wl_roundtrip.csv", TraceMapping{}, 1.0, LengthDistribution{}, 1);
  REQUIRE(back.size() == reqs.size());
  for (std::size_t i = 0; i < reqs.size(); ++i) {
    CHECK(back[i].adapter_id == reqs[i].adapter_id);
    CHECK(back[i].input_tokens == reqs[i].input_tokens);
    CHECK(back[i].arrival_ms == doctest::Approx(reqs[i].arrival_ms).epsilon(1e-6));
  }
  std::remove("wl_roundtrip.csv");
}
