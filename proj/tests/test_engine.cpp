#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lorasim/engine.hpp"

using namespace lorasim;

namespace {

constexpr std::uint64_t MiB = 1ull << 20;

LoraDims dims_for(std::uint32_t rank) {
  LoraDims d;
  d.r = rank;
  return d;
}

std::vector<AdapterSpec> catalog_of_ranks(const std::vector<std::uint32_t>& ranks) {
  AdapterSizeTable table;
  std::vector<AdapterSpec> out;
  for (std::size_t i = 0; i < ranks.size(); ++i)
    out.push_back(AdapterSpec::sized("a" + std::to_string(i), dims_for(ranks[i]),
                                     table.bytes_for(ranks[i])));
  return out;
}

Request make_request(double t, const std::string& id, std::uint32_t in = 100,
                     std::uint32_t out = 1) {
  Request r;
  r.arrival_ms = t;
  r.adapter_id = id;
  r.input_tokens = in;
  r.output_tokens = out;
  return r;
}

RunConfig base_config() {
  RunConfig cfg;
  cfg.policy.mode = PolicyMode::reactive;
  cfg.policy.prefetch = false;
  cfg.allocator.pool_bytes = 1ull << 30;
  return cfg;
}

}  // namespace

TEST_CASE("cold start latency matches the closed-form transfer cost") {
  // rank-64: 104 MiB over 4 GB/s plus 2 ms setup.
  auto catalog = catalog_of_ranks({64});
  auto cfg = base_config();
  std::vector<Request> reqs{make_request(0.0, "a0")};
  auto result = run_simulation(cfg, catalog, reqs);
  REQUIRE(result.metrics.completed == 1);
  const auto& out = result.outcomes[0];
  double expect = cfg.cost.transfer_ms_single(104 * MiB);
  CHECK(out.cold_start);
  CHECK(out.cold_start_latency_ms == doctest::Approx(expect).epsilon(1e-9));
  CHECK(expect == doctest::Approx(29.263).epsilon(1e-3));  // in the 28-45 ms band
  CHECK(out.ttft_ms ==
        doctest::Approx(expect + cfg.cost.prefill_ms(100)).epsilon(1e-9));
}

TEST_CASE("idle rank-8 demand load costs about 5.4 ms") {
  auto catalog = catalog_of_ranks({8});
  auto cfg = base_config();
  std::vector<Request> reqs{make_request(0.0, "a0")};
  auto result = run_simulation(cfg, catalog, reqs);
  CHECK(result.outcomes[0].cold_start_latency_ms ==
        doctest::Approx(cfg.cost.transfer_ms_single(13 * MiB)).epsilon(1e-9));
  CHECK(result.outcomes[0].cold_start_latency_ms == doctest::Approx(5.408).epsilon(1e-3));
}

TEST_CASE("concurrent demand loads share PCIe bandwidth equally") {
  auto catalog = catalog_of_ranks({64, 64});
  auto cfg = base_config();
  std::vector<Request> reqs{make_request(0.0, "a0"), make_request(0.0, "a1")};
  auto result = run_simulation(cfg, catalog, reqs);
  double bytes_ms = 2.0 * 104.0 * static_cast<double>(MiB) /
                    (cfg.cost.pcie_bytes_per_s / 1000.0);
  double expect = cfg.cost.transfer_base_ms + bytes_ms;
  for (const auto& out : result.outcomes)
    CHECK(out.cold_start_latency_ms == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("warm adapters have zero cold latency") {
  auto catalog = catalog_of_ranks({8});
  auto cfg = base_config();
  std::vector<Request> reqs{make_request(0.0, "a0"),
                            make_request(2000.0, "a0")};
  auto result = run_simulation(cfg, catalog, reqs);
  CHECK(result.outcomes[0].cold_start);
  CHECK_FALSE(result.outcomes[1].cold_start);
  CHECK(result.outcomes[1].cold_start_latency_ms == 0.0);
}

TEST_CASE("ttft closes exactly as queue + cold + prefill over a full run") {
  RunConfig cfg;
  cfg.policy.mode = PolicyMode::predictive;
  cfg.predictor.hidden_units = 8;
  cfg.predictor.window = 10;
  cfg.predictor.embedding_dim = 4;
  cfg.workload.duration_s = 30;
  cfg.workload.profile.num_adapters = 12;
  cfg.workload.profile.base_rate = 60;
  cfg.workload.profile.hot_share = 0.8;
  cfg.allocator.pool_bytes = 256 * MiB;  // tight: forces loads and evictions
  auto requests = cfg.build_workload();
  auto catalog = cfg.build_catalog(requests);
  auto result = run_simulation(cfg, catalog, requests);
  REQUIRE(result.metrics.completed == requests.size());
  for (const auto& out : result.outcomes) {
    double prefill = cfg.cost.prefill_ms(requests[out.request_index].input_tokens);
    CHECK(out.ttft_ms == out.queue_delay_ms + out.cold_start_latency_ms + prefill);
    CHECK(out.ttft_ms >= out.queue_delay_ms);
    CHECK((out.cold_start_latency_ms > 0) == out.cold_start);
  }
  // Throughput identity.
  CHECK(result.metrics.throughput_rps * result.metrics.duration_ms / 1000.0 ==
        doctest::Approx(static_cast<double>(result.metrics.completed)));
}

TEST_CASE("same seed and config produce byte-identical outputs") {
  RunConfig cfg;
  cfg.policy.mode = PolicyMode::predictive;
  cfg.predictor.hidden_units = 8;
  cfg.predictor.window = 10;
  cfg.workload.duration_s = 20;
  cfg.workload.profile.base_rate = 40;
  cfg.allocator.pool_bytes = 128 * MiB;
  auto r1 = run_simulation(cfg);
  auto r2 = run_simulation(cfg);
  CHECK(r1.metrics.to_json().dump() == r2.metrics.to_json().dump());
  REQUIRE(r1.outcomes.size() == r2.outcomes.size());
  for (std::size_t i = 0; i < r1.outcomes.size(); ++i) {
    CHECK(r1.outcomes[i].ttft_ms == r2.outcomes[i].ttft_ms);
    CHECK(r1.outcomes[i].completion_ms == r2.outcomes[i].completion_ms);
  }
  REQUIRE(r1.decisions.size() == r2.decisions.size());
}

TEST_CASE("batch slots are reused back to back") {
  auto catalog = catalog_of_ranks({8});
  auto cfg = base_config();
  cfg.cost.batch_capacity = 2;
  std::vector<Request> reqs;
  for (int i = 0; i < 6; ++i)
    reqs.push_back(make_request(0.0, "a0", 50, 4));
  auto result = run_simulation(cfg, catalog, reqs);
  REQUIRE(result.metrics.completed == 6);
  // With capacity 2, later requests must have queued.
  CHECK(result.outcomes[5].queue_delay_ms > 0);
  // All requests of the same warm adapter: only the first admission is cold.
  std::size_t cold = 0;
  for (const auto& out : result.outcomes) cold += out.cold_start ? 1 : 0;
  CHECK(cold <= 2);  // first boundary admits both slots before weights exist
}

TEST_CASE("the oracle prefetches ahead and avoids the cold start") {
  auto catalog = catalog_of_ranks({64});
  auto cfg = base_config();
  cfg.policy.mode = PolicyMode::oracle;
  cfg.policy.prefetch = true;
  cfg.policy.oracle_horizon_ms = 2000;
  std::vector<Request> reqs{make_request(5000.0, "a0")};
  auto result = run_simulation(cfg, catalog, reqs);
  CHECK_FALSE(result.outcomes[0].cold_start);
  CHECK(result.outcomes[0].cold_start_latency_ms == 0.0);
  CHECK(result.metrics.prefetch_issued == 1);
  CHECK(result.metrics.promotions == 1);
  CHECK(result.outcomes[0].resident_at_arrival);
}

TEST_CASE("a request for a staged adapter waits only the remaining transfer") {
  auto catalog = catalog_of_ranks({64});  // ~29.26 ms uncontended
  auto cfg = base_config();
  cfg.policy.mode = PolicyMode::oracle;
  cfg.policy.prefetch = true;
  cfg.policy.oracle_horizon_ms = 25;  // shorter than the transfer itself
  std::vector<Request> reqs{make_request(3010.0, "a0")};
  auto result = run_simulation(cfg, catalog, reqs);
  const auto& out = result.outcomes[0];
  double full = cfg.cost.transfer_ms_single(104 * MiB);
  CHECK(out.cold_start);
  CHECK(out.cold_start_latency_ms > 0.0);
  CHECK(out.cold_start_latency_ms < full - 1.0);  // partial credit
  CHECK(result.metrics.prefetch_issued == 1);
}

TEST_CASE("idle compaction fires and is billed") {
  auto catalog = catalog_of_ranks({8, 8, 8});  // 13 MiB each: 7 pages
  auto cfg = base_config();
  cfg.allocator.pool_bytes = 16 * 2 * MiB;  // 16 pages: two adapters + slack
  std::vector<Request> reqs{make_request(0.0, "a0"), make_request(500.0, "a1"),
                            make_request(1000.0, "a2")};
  auto result = run_simulation(cfg, catalog, reqs);
  REQUIRE(result.metrics.completed == 3);
  CHECK(result.metrics.evictions >= 1);
  CHECK(result.metrics.overhead.compactions >= 1);
  CHECK(result.metrics.overhead.relocations >= 1);
  CHECK(result.metrics.overhead.compaction_us ==
        static_cast<std::int64_t>(result.metrics.overhead.relocations * 50));
}

TEST_CASE("auxiliary overheads accrue exactly per prediction round") {
  RunConfig cfg;
  cfg.policy.mode = PolicyMode::predictive;
  cfg.predictor.hidden_units = 4;
  cfg.predictor.window = 5;
  cfg.workload.duration_s = 10;
  cfg.workload.profile.base_rate = 20;
  cfg.workload.profile.num_adapters = 5;
  auto result = run_simulation(cfg);
  const auto& o = result.metrics.overhead;
  REQUIRE(o.prediction_rounds > 0);
  auto n = static_cast<std::int64_t>(o.prediction_rounds);
  CHECK(o.predictor_us == 2300 * n);
  CHECK(o.page_table_us == 400 * n);
  CHECK(o.prefetch_sched_us == 800 * n);
  CHECK(o.total_aux_us() == 3500 * n);
}

TEST_CASE("admission failures queue and retry until space frees") {
  auto catalog = catalog_of_ranks({64, 64});
  auto cfg = base_config();
  cfg.allocator.pool_bytes = 112 * MiB;  // holds one rank-64 adapter only
  std::vector<Request> reqs{make_request(0.0, "a0", 100, 40),
                            make_request(100.0, "a1", 100, 1)};
  auto result = run_simulation(cfg, catalog, reqs);
  REQUIRE(result.metrics.completed == 2);
  CHECK(result.metrics.admission_failures >= 1);
  CHECK(result.outcomes[1].queue_delay_ms > 500.0);  // waited for a0 to finish
}

TEST_CASE("unsorted workloads and unknown adapters are rejected") {
  auto catalog = catalog_of_ranks({8});
  auto cfg = base_config();
  std::vector<Request> unsorted{make_request(100.0, "a0"), make_request(0.0, "a0")};
  CHECK_THROWS_AS(run_simulation(cfg, catalog, unsorted), ValidationError);
  std::vector<Request> unknown{make_request(0.0, "nope")};
  CHECK_THROWS_AS(run_simulation(cfg, catalog, unknown), ValidationError);
}

TEST_CASE("a pool smaller than the largest adapter fails before starting") {
  auto catalog = catalog_of_ranks({64});
  auto cfg = base_config();
  cfg.allocator.pool_bytes = 64 * MiB;
  std::vector<Request> reqs{make_request(0.0, "a0")};
  CHECK_THROWS_AS(run_simulation(cfg, catalog, reqs), ValidationError);
}

TEST_CASE("empty workloads produce a zeroed report") {
  auto cfg = base_config();
  auto result = run_simulation(cfg, {}, {});
  CHECK(result.metrics.completed == 0);
  CHECK(result.metrics.throughput_rps == 0.0);
  CHECK(result.outcomes.empty());
}

TEST_CASE("oracle cold-start count lower-bounds other policies") {
  RunConfig cfg;
  cfg.workload.duration_s = 60;
  cfg.workload.profile.num_adapters = 12;
  cfg.workload.profile.hot_set_size = 3;
  cfg.workload.profile.hot_rotation_s = 5;
  cfg.workload.profile.hot_share = 1.0;
  cfg.workload.profile.base_rate = 30;
  cfg.allocator.pool_bytes = 128 * MiB;
  cfg.catalog.rank_mix = "8:1";
  cfg.predictor.hidden_units = 8;
  cfg.predictor.window = 12;
  cfg.predictor.embedding_dim = 4;

  auto requests = cfg.build_workload();
  auto catalog = cfg.build_catalog(requests);

  std::uint64_t cold[3];
  PolicyMode modes[3] = {PolicyMode::oracle, PolicyMode::reactive,
                         PolicyMode::predictive};
  for (int i = 0; i < 3; ++i) {
    RunConfig c = cfg;
    c.policy.mode = modes[i];
    c.policy.prefetch = modes[i] != PolicyMode::reactive;
    cold[i] = run_simulation(c, catalog, requests).metrics.cold_count;
  }
  CHECK(cold[0] <= cold[1]);
  CHECK(cold[0] <= cold[2]);
}

TEST_CASE("compare_policies shares the workload and reports all cells") {
  RunConfig cfg;
  cfg.workload.duration_s = 15;
  cfg.workload.profile.base_rate = 30;
  cfg.workload.profile.num_adapters = 8;
  cfg.predictor.hidden_units = 4;
  cfg.predictor.window = 5;
  cfg.allocator.pool_bytes = 128 * MiB;

  CHECK_THROWS_AS(compare_policies(cfg, {ablation_matrix()[0]}), ValidationError);

  auto results = compare_policies(cfg, ablation_matrix());
  REQUIRE(results.size() == 4);
  for (const auto& r : results)
    CHECK(r.metrics.total_requests == results[0].metrics.total_requests);
  CHECK(results[0].metrics.policy == "reactive");
  CHECK(results[3].metrics.allocator == "paged");

  // Identical cells produce identical metrics.
  std::vector<CompareCell> twins{frag_matrix()[1], frag_matrix()[1]};
  auto same = compare_policies(cfg, twins);
  CHECK(same[0].metrics.to_json().dump() == same[1].metrics.to_json().dump());
}
