#include <doctest.h>

#include <cmath>
#include <vector>

#include "specseek/rng.hpp"

using specseek::Rng;

TEST_CASE("same seed gives identical streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  Rng c(42), d(42);
  for (int i = 0; i < 1000; ++i) {
    CHECK(c.gauss() == d.gauss());
  }
}

TEST_CASE("spawned streams differ from the parent and from each other") {
  Rng a(7);
  Rng c1 = a.spawn(0);
  Rng c2 = a.spawn(1);
  CHECK(c1.next_u64() != c2.next_u64());
  CHECK(a.spawn(0).next_u64() == Rng(7).spawn(0).next_u64());
}

TEST_CASE("uniform stays in [0,1) and uniform_int in range") {
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const uint64_t k = rng.uniform_int(7);
    CHECK(k < 7);
  }
}

TEST_CASE("gauss moments match a standard normal") {
  Rng rng(11);
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gauss();
    sum += g;
    sq += g * g;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  // 3 sigma bounds for the sample mean and a loose variance window.
  CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
  CHECK(var == doctest::Approx(1.0).epsilon(0.05));
}
