#include <doctest.h>

#include <vector>

#include "iclcp/errors.hpp"
#include "iclcp/stats.hpp"

using namespace iclcp;

TEST_CASE("percentiles interpolate linearly") {
  const std::vector<double> v{3, 1, 4, 1, 5, 9, 2, 6};
  CHECK(stats::percentile(v, 25) == doctest::Approx(1.75));
  CHECK(stats::percentile(v, 97.5) == doctest::Approx(8.475));
  CHECK(stats::percentile(v, 0) == 1);
  CHECK(stats::percentile(v, 100) == 9);
  CHECK(stats::median(v) == 3.5);
  CHECK(stats::mean(v) == doctest::Approx(31.0 / 8));
  CHECK_THROWS_AS(stats::percentile(std::vector<double>{}, 50), ArgumentError);
}

TEST_CASE("variance uses the n - 1 denominator") {
  CHECK(stats::variance(std::vector<double>{1, 2, 3, 4}) == doctest::Approx(5.0 / 3));
}

TEST_CASE("chi-square uniformity test") {
  const std::vector<std::int64_t> flat{10, 10, 10, 10};
  const auto r0 = stats::chi_square_uniform(flat);
  CHECK(r0.statistic == 0.0);
  CHECK(r0.p_value == doctest::Approx(1.0));
  const std::vector<std::int64_t> two{5, 15};
  const auto r1 = stats::chi_square_uniform(two);
  CHECK(r1.statistic == doctest::Approx(5.0));
  CHECK(r1.degrees_of_freedom == 1);
  CHECK(r1.p_value == doctest::Approx(0.025347318677468325).epsilon(1e-10));
  const std::vector<std::int64_t> four{3, 7, 12, 8};
  const auto r2 = stats::chi_square_uniform(four);
  CHECK(r2.statistic == doctest::Approx(5.466666666666667));
  CHECK(r2.p_value == doctest::Approx(0.14064596901847173).epsilon(1e-10));
}

TEST_CASE("one-sided variance-ratio test") {
  const std::vector<double> a{1, 4, 2, 8, 5}, b{2, 2.5, 3, 2.2};
  CHECK(stats::variance_ratio_p_value(a, b) == doctest::Approx(0.0062536569117859).epsilon(1e-10));
  CHECK(stats::variance_ratio_p_value(b, a) == doctest::Approx(1 - 0.0062536569117859).epsilon(1e-10));
}
