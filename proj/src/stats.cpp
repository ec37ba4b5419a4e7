#include "iclcp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>

#include "iclcp/errors.hpp"

namespace iclcp::stats {

double percentile(std::span<const double> values, double q) {
  if (values.empty()) throw ArgumentError("percentile of empty data");
  if (!(q >= 0.0 && q <= 100.0)) throw ArgumentError("percentile q must be in [0, 100]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = q / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double median(std::span<const double> values) { return percentile(values, 50.0); }

double mean(std::span<const double> values) {
  if (values.empty()) throw ArgumentError("mean of empty data");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double variance(std::span<const double> values) {
  if (values.size() < 2) throw ArgumentError("variance needs at least two values");
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return ss / static_cast<double>(values.size() - 1);
}

ChiSquareResult chi_square_uniform(std::span<const std::int64_t> counts) {
  if (counts.size() < 2) throw ArgumentError("chi-square test needs at least two cells");
  const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::int64_t{0}));
  if (!(total > 0.0)) throw ArgumentError("chi-square test needs observations");
  const double expected = total / static_cast<double>(counts.size());
  ChiSquareResult r;
  for (auto c : counts) {
    const double diff = static_cast<double>(c) - expected;
    r.statistic += diff * diff / expected;
  }
  r.degrees_of_freedom = static_cast<int>(counts.size()) - 1;
  boost::math::chi_squared dist(r.degrees_of_freedom);
  r.p_value = boost::math::cdf(boost::math::complement(dist, r.statistic));
  return r;
}

double variance_ratio_p_value(std::span<const double> a, std::span<const double> b) {
  const double va = variance(a);
  const double vb = variance(b);
  if (vb == 0.0) return va > 0.0 ? 0.0 : 1.0;
  boost::math::fisher_f dist(static_cast<double>(a.size() - 1), static_cast<double>(b.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, va / vb));
}

}  // namespace iclcp::stats
