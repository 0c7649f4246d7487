#include "hloc/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

using hloc::Rng;

TEST_SUITE("rng") {

TEST_CASE("same seed replays the same sequence") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds diverge") {
  Rng a(1), b(2);
  int equal = 0;
  for (int i = 0; i < 64; ++i) equal += (a.next_u64() == b.next_u64());
  CHECK(equal == 0);
}

TEST_CASE("fork is keyed by tag and index and leaves the parent untouched") {
  Rng parent(7);
  const std::uint64_t before = Rng(7).next_u64();

  Rng fa0 = parent.fork("a", 0);
  Rng fa1 = parent.fork("a", 1);
  Rng fb0 = parent.fork("b", 0);
  CHECK(fa0.next_u64() != fa1.next_u64());
  CHECK(parent.fork("a", 0).next_u64() != fb0.next_u64());
  // Forks are reproducible from an equivalent parent.
  CHECK(parent.fork("a", 1).next_u64() == Rng(7).fork("a", 1).next_u64());
  // Forking consumed nothing from the parent stream.
  CHECK(parent.next_u64() == before);
}

TEST_CASE("uniform stays in [0, 1) and fills the range") {
  Rng rng(3);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo < 0.01);
  CHECK(hi > 0.99);
}

TEST_CASE("uniform(lo, hi) respects the interval") {
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform(-2.5, 4.0);
    CHECK(u >= -2.5);
    CHECK(u < 4.0);
  }
}

TEST_CASE("uniform_index hits every bucket roughly evenly") {
  Rng rng(5);
  const std::uint64_t n = 7;
  std::vector<int> counts(n, 0);
  const int draws = 70000;
  for (int i = 0; i < draws; ++i) ++counts[rng.uniform_index(n)];
  for (std::uint64_t b = 0; b < n; ++b) {
    CHECK(counts[b] > draws / static_cast<int>(n) * 0.9);
    CHECK(counts[b] < draws / static_cast<int>(n) * 1.1);
  }
}

TEST_CASE("normal has the right first two moments") {
  Rng rng(6);
  const int n = 50000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.03);
}

}  // TEST_SUITE
