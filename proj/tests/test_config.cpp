#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "lorasim/config.hpp"

using namespace lorasim;

namespace {
struct TempFile {
  std::string path;
  TempFile(const std::string& p, const std::string& content) : path(p) {
    std::ofstream out(path);
    out << content;
  }
  ~TempFile() { std::remove(path.c_str()); }
};
}  // namespace

TEST_CASE("minimal config files load over defaults") {
  TempFile f("cfg_min.ini",
             "[run]\n"
             "seed = 7\n"
             "[workload]\n"
             "base_rate = 25\n");
  auto cfg = RunConfig::load(f.path);
  CHECK(cfg.run.seed == 7);
  CHECK(cfg.workload.profile.base_rate == 25.0);
  // Untouched keys keep their defaults.
  CHECK(cfg.allocator.page_bytes == (2ull << 20));
  CHECK(cfg.policy.prefetch_policy.theta == 0.5);
  cfg.validate();
}

TEST_CASE("unknown keys and sections are hard errors naming the offender") {
  TempFile f1("cfg_badkey.ini", "[run]\nseeed = 7\n");
  try {
    RunConfig::load(f1.path);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("run.seeed") != std::string::npos);
  }
  TempFile f2("cfg_badsec.ini", "[runn]\nseed = 7\n");
  CHECK_THROWS_AS(RunConfig::load(f2.path), ConfigError);
}

TEST_CASE("missing config files name the path") {
  try {
    RunConfig::load("no_such_config.ini");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("no_such_config.ini") != std::string::npos);
  }
}

TEST_CASE("comments and blank lines are tolerated") {
  TempFile f("cfg_comments.ini",
             "# top comment\n"
             "\n"
             "[policy]\n"
             "; another comment\n"
             "theta = 0.7  # trailing note\n");
  auto cfg = RunConfig::load(f.path);
  CHECK(cfg.policy.prefetch_policy.theta == 0.7);
}

TEST_CASE("overrides apply after the file") {
  TempFile f("cfg_override.ini", "[run]\nseed = 1\n");
  auto cfg = RunConfig::load(f.path, {{"run.seed", "99"}, {"policy.mode", "oracle"}});
  CHECK(cfg.run.seed == 99);
  CHECK(cfg.policy.mode == PolicyMode::oracle);
  CHECK_THROWS_AS(RunConfig::load(f.path, {{"nodot", "1"}}), ConfigError);
}

TEST_CASE("validation catches cross-field inconsistencies") {
  RunConfig cfg;
  cfg.workload.source = "trace";  // no trace_path
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = RunConfig{};
  cfg.allocator.pool_bytes = 1024;  // smaller than one page
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = RunConfig{};
  cfg.policy.prefetch_policy.theta = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("size table and rank mix strings parse") {
  RunConfig cfg;
  cfg.catalog.size_table = "8:1000,64:9000";
  auto table = cfg.size_table();
  CHECK(table.bytes_for(8) == 1000);
  CHECK(table.bytes_for(64) == 9000);
  CHECK(table.bytes_for(16) == (13ull << 20) * 16 / 8);  // fallback

  cfg.catalog.rank_mix = "8:1,64:3";
  auto mix = cfg.rank_mix_parsed();
  REQUIRE(mix.size() == 2);
  CHECK(mix[1].first == 64);
  CHECK(mix[1].second == 3.0);

  cfg.catalog.rank_mix = "oops";
  CHECK_THROWS_AS(cfg.rank_mix_parsed(), ConfigError);
}

TEST_CASE("the shipped defaults file reproduces built-in defaults") {
  auto from_file = RunConfig::load("configs/defaults.ini");
  RunConfig built_in;
  CHECK(from_file.run.seed == built_in.run.seed);
  CHECK(from_file.workload.profile.base_rate == built_in.workload.profile.base_rate);
  CHECK(from_file.workload.profile.hot_rotation_s == built_in.workload.profile.hot_rotation_s);
  CHECK(from_file.catalog.size_anchor_bytes == built_in.catalog.size_anchor_bytes);
  CHECK(from_file.policy.prefetch_policy.theta == built_in.policy.prefetch_policy.theta);
  CHECK(from_file.policy.prefetch_policy.gamma == built_in.policy.prefetch_policy.gamma);
  CHECK(from_file.predictor.window == built_in.predictor.window);
  CHECK(from_file.predictor.hidden_units == built_in.predictor.hidden_units);
  CHECK(from_file.allocator.page_bytes == built_in.allocator.page_bytes);
  CHECK(from_file.cost.pcie_bytes_per_s == built_in.cost.pcie_bytes_per_s);
  CHECK(from_file.cost.predictor_overhead_us == built_in.cost.predictor_overhead_us);
  CHECK(from_file.cost.decode_occupancy_factor == built_in.cost.decode_occupancy_factor);
}

TEST_CASE("workload and catalog builders agree on adapter ids") {
  RunConfig cfg;
  cfg.workload.profile.num_adapters = 6;
  cfg.workload.profile.base_rate = 30;
  cfg.workload.duration_s = 20;
  auto requests = cfg.build_workload();
  auto catalog = cfg.build_catalog(requests);
  CHECK(catalog.size() <= 6);
  CHECK(!catalog.empty());
  // Every request's adapter exists in the catalog.
  for (const auto& r : requests) {
    bool found = false;
    for (const auto& spec : catalog) found |= spec.id == r.adapter_id;
    CHECK(found);
  }
}
