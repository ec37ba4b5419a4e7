#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace iclcp::stats {

/// Linear-interpolation percentile (q in [0, 100]) of unsorted data.
double percentile(std::span<const double> values, double q);
double median(std::span<const double> values);
double mean(std::span<const double> values);
/// Unbiased sample variance (n - 1 denominator).
double variance(std::span<const double> values);

/// Pearson chi-square statistic and upper-tail p-value against equal cell probabilities.
struct ChiSquareResult {
  double statistic = 0.0;
  int degrees_of_freedom = 0;
  double p_value = 1.0;
};
ChiSquareResult chi_square_uniform(std::span<const std::int64_t> counts);

/// One-sided F test of H1: var(a) > var(b); returns the p-value.
double variance_ratio_p_value(std::span<const double> a, std::span<const double> b);

}  // namespace iclcp::stats
