#include <doctest.h>

#include <cmath>
#include <set>

#include "iclcp/rng.hpp"

using iclcp::Rng;

TEST_CASE("same seed gives the same stream") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
}

TEST_CASE("streams with different ids differ") {
  Rng a = Rng::stream(7, 0), b = Rng::stream(7, 1), c = Rng::stream(8, 0);
  const auto x = a.next_u64();
  CHECK(x != b.next_u64());
  CHECK(x != c.next_u64());
}

TEST_CASE("uniform lies in [0, 1) with the right moments") {
  Rng rng(1);
  const int n = 200000;
  double sum = 0, sum2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
    sum2 += u * u;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(sum2 / n - (sum / n) * (sum / n) == doctest::Approx(1.0 / 12).epsilon(0.02));
}

TEST_CASE("normal has zero mean and unit variance") {
  Rng rng(2);
  const int n = 200000;
  double sum = 0, sum2 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sum2 += z * z;
  }
  const double mean = sum / n;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(n));
  CHECK(std::abs(sum2 / n - 1.0) < 0.02);
}

TEST_CASE("split yields a distinct but reproducible child") {
  Rng a(3), b(3);
  Rng ca = a.split(), cb = b.split();
  CHECK(ca == cb);
  CHECK(ca.next_u64() != a.next_u64());
}

TEST_CASE("splitmix64 is a bijection on a sample") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 10000; ++i) seen.insert(iclcp::splitmix64(i));
  CHECK(seen.size() == 10000);
}
