#include <catch_amalgamated.hpp>

#include <algorithm>
#include <atomic>
#include <set>
#include <vector>

#include "dmt/core.hpp"

TEST_CASE("rng is deterministic for a fixed seed", "[core]") {
  dmt::Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());
  dmt::Rng c(43);
  bool any_diff = false;
  dmt::Rng a2(42);
  for (int i = 0; i < 10 && !any_diff; ++i)
    any_diff = a2.next_u64() != c.next_u64();
  REQUIRE(any_diff);
}

TEST_CASE("rng index stays in range and covers all buckets", "[core]") {
  dmt::Rng rng(7);
  std::vector<int> counts(10, 0);
  for (int i = 0; i < 10000; ++i) {
    const std::size_t k = rng.index(10);
    REQUIRE(k < 10);
    ++counts[k];
  }
  for (int c : counts) REQUIRE(c > 700);  // crude uniformity check
}

TEST_CASE("rng uniform respects bounds", "[core]") {
  dmt::Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.uniform(-2.5, 4.5);
    REQUIRE(v >= -2.5);
    REQUIRE(v < 4.5);
  }
  for (int i = 0; i < 1000; ++i) {
    const int v = rng.uniform_int(3, 9);
    REQUIRE(v >= 3);
    REQUIRE(v <= 9);
  }
}

TEST_CASE("rng shuffle is a permutation", "[core]") {
  dmt::Rng rng(7);
  std::vector<int> v(257);
  for (int i = 0; i < int(v.size()); ++i) v[i] = i;
  std::vector<int> shuffled = v;
  rng.shuffle(shuffled);
  REQUIRE(shuffled != v);  // astronomically unlikely to be identity
  std::vector<int> sorted = shuffled;
  std::sort(sorted.begin(), sorted.end());
  REQUIRE(sorted == v);
}

TEST_CASE("vec2 arithmetic and geometry", "[core]") {
  const dmt::Vec2 a{3.0, 4.0}, b{1.0, -2.0};
  REQUIRE((a + b).x == 4.0);
  REQUIRE((a - b).y == 6.0);
  REQUIRE(a.dot(b) == 3.0 - 8.0);
  REQUIRE(a.cross(b) == 3.0 * -2.0 - 4.0 * 1.0);
  REQUIRE(a.norm() == 5.0);
  REQUIRE(dmt::distance(a, b) == Catch::Approx(std::hypot(2.0, 6.0)));
}

TEST_CASE("rect area, intersection and IoU", "[core]") {
  const dmt::Rect a{0, 0, 10, 10};
  const dmt::Rect b{5, 5, 10, 10};
  REQUIRE(a.area() == 100.0);
  REQUIRE(dmt::intersection_area(a, b) == 25.0);
  REQUIRE(dmt::iou(a, b) == Catch::Approx(25.0 / 175.0));
  const dmt::Rect c{20, 20, 5, 5};
  REQUIRE(dmt::intersection_area(a, c) == 0.0);
  REQUIRE(dmt::iou(a, c) == 0.0);
  REQUIRE(dmt::iou(a, a) == 1.0);
  REQUIRE(a.contains({5.0, 5.0}));
  REQUIRE_FALSE(a.contains({15.0, 5.0}));
}

TEST_CASE("format_double round-trips exactly", "[core]") {
  dmt::Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const double v = (rng.uniform() - 0.5) * std::pow(10.0, rng.uniform(-6, 6));
    const std::string s = dmt::format_double(v);
    REQUIRE(std::stod(s) == v);
  }
  REQUIRE(dmt::format_double(1.0) == "1");
  REQUIRE(dmt::format_double(0.5) == "0.5");
}

TEST_CASE("parallel_for covers every index once", "[core]") {
  std::vector<std::atomic<int>> hits(1000);
  dmt::parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) REQUIRE(h.load() == 1);
}

TEST_CASE("parallel_for propagates exceptions", "[core]") {
  REQUIRE_THROWS_AS(dmt::parallel_for(100,
                                      [](std::size_t i) {
                                        if (i == 57)
                                          throw dmt::ValidationError("boom");
                                      }),
                    dmt::ValidationError);
}

TEST_CASE("error taxonomy is distinguishable", "[core]") {
  REQUIRE_THROWS_AS(throw dmt::PoolNotFoundError("x"), dmt::PoolError);
  REQUIRE_THROWS_AS(throw dmt::PoolIntegrityError("x"), dmt::PoolError);
  REQUIRE_THROWS_AS(throw dmt::ValidationError("x"), dmt::Error);
  try {
    throw dmt::ParseError("bad token", 17);
  } catch (const dmt::ParseError& e) {
    REQUIRE(e.line == 17);
    REQUIRE(std::string(e.what()).find("17") != std::string::npos);
  }
}

TEST_CASE("to_hex formats bytes", "[core]") {
  const unsigned char bytes[] = {0x00, 0xab, 0xff};
  REQUIRE(dmt::to_hex(bytes, 3) == "00abff");
}
