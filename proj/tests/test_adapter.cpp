#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "lorasim/adapter.hpp"

using namespace lorasim;

namespace {
constexpr std::uint64_t MiB = 1ull << 20;
}

TEST_CASE("param_count matches hand arithmetic") {
  LoraDims dims{4096, 4096, 8, 64, 2};
  CHECK(param_count(dims) == 4194304);  // 64 * 8 * (4096 + 4096)

  LoraDims tiny{2, 2, 1, 1, 2};
  CHECK(param_count(tiny) == 4);
}

TEST_CASE("param_count rejects invalid dims") {
  LoraDims dims{4096, 4096, 0, 64, 2};
  CHECK_THROWS_AS(param_count(dims), ValidationError);

  LoraDims too_big{16, 16, 16, 1, 2};  // r must stay below min(d, k)
  CHECK_THROWS_AS(param_count(too_big), ValidationError);

  LoraDims bad_bytes{64, 64, 4, 1, 3};
  CHECK_THROWS_AS(param_count(bad_bytes), ValidationError);
}

TEST_CASE("param_count is linear in rank") {
  for (std::uint32_t r : {1u, 2u, 4u, 8u, 16u}) {
    LoraDims base{4096, 4096, r, 64, 2};
    LoraDims doubled{4096, 4096, 2 * r, 64, 2};
    CHECK(param_count(doubled) == 2 * param_count(base));
  }
}

TEST_CASE("size table anchors rank 8 at 13 MiB and scales linearly") {
  AdapterSizeTable table;
  CHECK(table.bytes_for(8) == 13 * MiB);
  CHECK(table.bytes_for(64) == 104 * MiB);
  CHECK(table.bytes_for(16) == 26 * MiB);
}

TEST_CASE("size table explicit entries win and disabled fallback errors") {
  AdapterSizeTable table(8, 13 * MiB, false);
  table.set(8, 14 * MiB);
  CHECK(table.bytes_for(8) == 14 * MiB);
  CHECK_THROWS_AS(table.bytes_for(32), ConfigError);
}

TEST_CASE("default sizes are monotone in rank") {
  AdapterSizeTable table;
  std::uint64_t prev = 0;
  for (std::uint32_t r : {1u, 4u, 8u, 16u, 32u, 64u, 128u}) {
    std::uint64_t s = table.bytes_for(r);
    CHECK(s >= prev);
    prev = s;
  }
}

TEST_CASE("derived specs follow the parameter count, overrides win") {
  LoraDims dims{4096, 4096, 8, 64, 2};
  auto derived = AdapterSpec::derived("x", dims);
  CHECK(derived.weight_bytes == 4194304ull * 2);

  auto sized = AdapterSpec::sized("y", dims, 13 * MiB);
  CHECK(sized.weight_bytes == 13 * MiB);
  CHECK(sized.nominal_size_override.has_value());
}

TEST_CASE("catalog json round trip") {
  const char* path = "test_catalog.json";
  {
    std::ofstream out(path);
    out << R"([{"id": "alpha", "rank": 8},
               {"id": "beta", "rank": 64, "size_bytes": 999}])";
  }
  LoraDims dims{4096, 4096, 8, 64, 2};
  auto specs = load_catalog_json(path, AdapterSizeTable{}, dims);
  REQUIRE(specs.size() == 2);
  CHECK(specs[0].id == "alpha");
  CHECK(specs[0].weight_bytes == 13 * MiB);
  CHECK(specs[0].dims.r == 8);
  CHECK(specs[1].weight_bytes == 999);
  CHECK(specs[1].dims.r == 64);
  std::remove(path);

  CHECK_THROWS_AS(load_catalog_json("does_not_exist.json", AdapterSizeTable{}, dims),
                  ConfigError);
}

TEST_CASE("generated catalogs are deterministic and respect the mix") {
  RankMix mix{{8, 0.5}, {64, 0.5}};
  LoraDims dims{4096, 4096, 8, 64, 2};
  auto a = generate_catalog(50, mix, 7, AdapterSizeTable{}, dims);
  auto b = generate_catalog(50, mix, 7, AdapterSizeTable{}, dims);
  REQUIRE(a.size() == 50);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].id == b[i].id);
    CHECK(a[i].weight_bytes == b[i].weight_bytes);
    CHECK((a[i].dims.r == 8 || a[i].dims.r == 64));
  }
}
