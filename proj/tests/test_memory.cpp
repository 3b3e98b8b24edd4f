#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <random>
#include <set>

#include "lorasim/memory.hpp"

using namespace lorasim;

namespace {
constexpr std::uint64_t MiB = 1ull << 20;
constexpr std::uint64_t kPage = 2 * MiB;
}

TEST_CASE("13 MiB adapter takes 7 pages of 2 MiB") {
  PagePool pool(kPage, 16);
  CHECK(pool.pages_needed(13 * MiB) == 7);
  REQUIRE(pool.alloc(1, 13 * MiB) == AllocStatus::ok);
  CHECK(pool.table(1).entries.size() == 7);
  CHECK(pool.free_pages() == 9);
  pool.check_invariants();
}

TEST_CASE("exact-fit allocation wastes nothing") {
  PagePool pool(kPage, 4);
  REQUIRE(pool.alloc(1, kPage) == AllocStatus::ok);
  CHECK(pool.table(1).entries.size() == 1);
  CHECK(pool.report().internal_frag == 0.0);
}

TEST_CASE("failed allocation leaves the pool unchanged") {
  PagePool pool(kPage, 6);
  CHECK(pool.alloc(1, 13 * MiB) == AllocStatus::out_of_memory);  // needs 7
  CHECK(pool.free_pages() == 6);
  CHECK_FALSE(pool.has(1));
  pool.check_invariants();
}

TEST_CASE("alloc then free restores the pool; double free is a hard error") {
  PagePool pool(kPage, 16);
  REQUIRE(pool.alloc(3, 5 * MiB) == AllocStatus::ok);
  pool.free(3);
  CHECK(pool.free_pages() == 16);
  CHECK(pool.used_bytes() == 0);
  CHECK_THROWS_AS(pool.free(3), std::logic_error);
}

TEST_CASE("fresh pool maps logical pages to identity") {
  PagePool pool(kPage, 8);
  REQUIRE(pool.alloc(0, 3 * kPage) == AllocStatus::ok);
  for (std::uint32_t i = 0; i < 3; ++i) CHECK(pool.translate(0, i) == i);
  CHECK_THROWS_AS(pool.translate(0, 3), ValidationError);
}

TEST_CASE("compaction: fixed point, prefix postcondition, tables stay valid") {
  PagePool pool(kPage, 8);
  REQUIRE(pool.alloc(0, 2 * kPage) == AllocStatus::ok);  // pages 0,1
  REQUIRE(pool.alloc(1, 2 * kPage) == AllocStatus::ok);  // pages 2,3
  REQUIRE(pool.alloc(2, 2 * kPage) == AllocStatus::ok);  // pages 4,5
  CHECK(pool.compact() == 0);                            // already a prefix

  pool.free(1);  // hole at 2,3
  std::size_t moved = pool.compact();
  CHECK(moved == 2);
  // Allocated pages now occupy physical 0..3.
  for (std::uint32_t i = 0; i < 2; ++i) {
    CHECK(pool.translate(0, i) < 4);
    CHECK(pool.translate(2, i) < 4);
  }
  pool.check_invariants();
  CHECK(pool.compact() == 0);
}

TEST_CASE("block arena: constructed fragmentation case") {
  BlockArena arena(10);  // 10 one-byte units
  REQUIRE(arena.alloc(0, 4) == AllocStatus::ok);
  REQUIRE(arena.alloc(1, 4) == AllocStatus::ok);
  arena.free(0);
  // 6 bytes free (4 + 2), but the largest hole is 4.
  CHECK(arena.alloc(2, 5) == AllocStatus::fragmentation_failure);
  CHECK(arena.fragmentation_failures() == 1);
  auto rep = arena.report();
  CHECK(rep.external_frag == doctest::Approx(1.0 - 4.0 / 6.0));
  arena.check_invariants();
}

TEST_CASE("block arena: whole-arena allocation succeeds when empty") {
  BlockArena arena(1000);
  CHECK(arena.alloc(7, 1000) == AllocStatus::ok);
  CHECK(arena.free_bytes() == 0);
  CHECK(arena.report().utilization == 1.0);
  arena.free(7);
  CHECK(arena.largest_free() == 1000);
}

TEST_CASE("empty reports are all zero") {
  PagePool pool(kPage, 8);
  auto pr = pool.report();
  CHECK(pr.external_frag == 0.0);
  CHECK(pr.utilization == 0.0);
  BlockArena arena(100);
  auto br = arena.report();
  CHECK(br.external_frag == 0.0);
  CHECK(br.utilization == 0.0);
}

TEST_CASE("state dumps are parseable json") {
  PagePool pool(kPage, 4);
  REQUIRE(pool.alloc(9, 3 * MiB) == AllocStatus::ok);
  auto j = pool.dump();
  CHECK(j["total_pages"] == 4);
  CHECK(j["tables"].contains("9"));
  BlockArena arena(100);
  REQUIRE(arena.alloc(1, 30) == AllocStatus::ok);
  CHECK(arena.dump()["regions"].size() == 2);
}

// Model-checking churn: a reference map of adapter -> byte size is the oracle
// for conservation, bijectivity and atomicity after every operation.
TEST_CASE("randomized churn holds invariants for 1e5 operations") {
  const std::uint32_t total_pages = 256;
  PagePool pool(kPage, total_pages);
  std::map<std::uint32_t, std::uint64_t> reference;
  std::mt19937_64 rng(20240611);
  std::uniform_int_distribution<std::uint32_t> id_pick(0, 63);
  std::uniform_int_distribution<std::uint64_t> size_pick(1, 24 * MiB);

  std::uint64_t ref_pages = 0;
  for (int op = 0; op < 100000; ++op) {
    std::uint32_t a = id_pick(rng);
    if (reference.count(a)) {
      pool.free(a);
      ref_pages -= pool.pages_needed(reference[a]);
      reference.erase(a);
    } else {
      std::uint64_t bytes = size_pick(rng);
      std::uint64_t need = pool.pages_needed(bytes);
      auto st = pool.alloc(a, bytes);
      if (ref_pages + need <= total_pages) {
        REQUIRE(st == AllocStatus::ok);  // paged sufficiency
        reference[a] = bytes;
        ref_pages += need;
      } else {
        REQUIRE(st == AllocStatus::out_of_memory);
      }
    }
    REQUIRE(pool.free_pages() == total_pages - ref_pages);
    if (op % 4096 == 0) pool.check_invariants();
    if (op % 8192 == 0) pool.compact(), pool.check_invariants();
  }
  pool.check_invariants();
}

// The paired churn claim: a byte-identical sequence that fragments the block
// arena never fails on the paged pool.
TEST_CASE("paired churn: block fragments, paged never does") {
  const std::uint64_t pool_bytes = 256 * MiB;
  PagePool pool(kPage, static_cast<std::uint32_t>(pool_bytes / kPage));
  BlockArena arena(pool_bytes);
  std::set<std::uint32_t> live;
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::uint32_t> id_pick(0, 31);
  // Mixed adapter sizes in the 13..104 MiB range, like mixed LoRA ranks.
  std::vector<std::uint64_t> sizes_by_id(32);
  for (auto& s : sizes_by_id)
    s = (13 + (rng() % 8) * 13) * MiB;

  std::size_t paged_frag_failures = 0;
  for (int op = 0; op < 20000; ++op) {
    std::uint32_t a = id_pick(rng);
    if (live.count(a)) {
      pool.free(a);
      arena.free(a);
      live.erase(a);
      continue;
    }
    std::uint64_t bytes = sizes_by_id[a];
    auto block_st = arena.alloc(a, bytes);
    auto paged_st = pool.alloc(a, bytes);
    if (paged_st == AllocStatus::fragmentation_failure) ++paged_frag_failures;
    // Keep the two sides in the same membership state.
    if (block_st == AllocStatus::ok && paged_st == AllocStatus::ok) {
      live.insert(a);
    } else {
      if (block_st == AllocStatus::ok) arena.free(a);
      if (paged_st == AllocStatus::ok) pool.free(a);
    }
  }
  CHECK(paged_frag_failures == 0);
  CHECK(arena.fragmentation_failures() > 0);
}
