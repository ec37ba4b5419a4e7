#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <vector>

#include "iclcp/errors.hpp"
#include "iclcp/eval.hpp"
#include "iclcp/stats.hpp"
#include "support.hpp"

using namespace iclcp;

namespace {

Pmf random_pmf(Rng& rng, const std::vector<double>& grid) {
  Pmf p{grid, {}};
  double total = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    p.weights.push_back(rng.uniform() < 0.2 ? 0.0 : rng.uniform());
    total += p.weights.back();
  }
  if (total == 0) {
    p.weights[0] = 1;
    total = 1;
  }
  for (double& w : p.weights) w /= total;
  return p;
}

// Optimal transport between 3-point pmfs by enumerating every basis of 5 of the 9
// cells, solving the marginal equations on that basis and keeping feasible vertices.
double transport_lp(const Pmf& a, const Pmf& b) {
  double best = INFINITY;
  for (int mask = 0; mask < 512; ++mask) {
    if (__builtin_popcount(mask) != 5) continue;
    std::vector<int> cells;
    for (int c = 0; c < 9; ++c)
      if (mask & (1 << c)) cells.push_back(c);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(6, 5);
    Eigen::VectorXd rhs(6);
    for (int i = 0; i < 3; ++i) {
      rhs(i) = a.weights[i];
      rhs(3 + i) = b.weights[i];
    }
    for (int j = 0; j < 5; ++j) {
      A(cells[j] / 3, j) = 1;
      A(3 + cells[j] % 3, j) = 1;
    }
    const auto qr = A.colPivHouseholderQr();
    if (qr.rank() < 5) continue;
    const Eigen::VectorXd x = qr.solve(rhs);
    if ((A * x - rhs).norm() > 1e-12 || x.minCoeff() < -1e-12) continue;
    double cost = 0;
    for (int j = 0; j < 5; ++j) cost += x(j) * std::abs(a.grid[cells[j] / 3] - a.grid[cells[j] % 3]);
    best = std::min(best, cost);
  }
  return best;
}

// Symmetric predictor that ignores the context: always predicts zero.
class ZeroPredictor final : public Predictor {
 public:
  std::string name() const override { return "zero"; }
  Eigen::VectorXd predict(const Eigen::MatrixXd&, const Eigen::VectorXd& y, const Eigen::VectorXd&,
                          double) const override {
    return Eigen::VectorXd::Zero(y.size() + 1);
  }
};

}  // namespace

TEST_CASE("method names round-trip") {
  for (Method m : {Method::kCpIcl, Method::kCpRidge, Method::kSplitCpRidge}) CHECK(parse_method(to_string(m)) == m);
  CHECK_THROWS_AS(parse_method("bogus"), ConfigError);
}

TEST_CASE("W1 between pmfs") {
  const std::vector<double> grid{0.0, 0.5, 1.25, 3.0, 4.0};
  Rng rng(1);
  const Pmf p = random_pmf(rng, grid);
  CHECK(wasserstein_1d(p, p) == 0.0);

  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t j = 0; j < grid.size(); ++j) {
      Pmf a{grid, std::vector<double>(grid.size(), 0.0)}, b = a;
      a.weights[i] = 1;
      b.weights[j] = 1;
      CHECK(wasserstein_1d(a, b) == std::abs(grid[i] - grid[j]));
    }
  }

  SUBCASE("agrees with the transport LP on 3-point pmfs") {
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> g3{rng.uniform(-2, 0), 0.0, 0.0};
      g3[1] = g3[0] + rng.uniform(0.1, 2);
      g3[2] = g3[1] + rng.uniform(0.1, 2);
      const Pmf a = random_pmf(rng, g3), b = random_pmf(rng, g3);
      CHECK(std::abs(wasserstein_1d(a, b) - transport_lp(a, b)) <= 1e-9);
    }
  }

  SUBCASE("symmetry and triangle inequality") {
    for (int trial = 0; trial < 200; ++trial) {
      const Pmf a = random_pmf(rng, grid), b = random_pmf(rng, grid), c = random_pmf(rng, grid);
      CHECK(std::abs(wasserstein_1d(a, b) - wasserstein_1d(b, a)) <= 1e-12);
      CHECK(wasserstein_1d(a, c) <= wasserstein_1d(a, b) + wasserstein_1d(b, c) + 1e-9);
    }
  }

  SUBCASE("invalid inputs") {
    Pmf bad = p;
    bad.weights[0] += 0.1;
    CHECK_THROWS_AS(wasserstein_1d(p, bad), ArgumentError);
    Pmf other = random_pmf(rng, {0.0, 0.5, 1.25, 3.0, 5.0});
    CHECK_THROWS_AS(wasserstein_1d(p, other), ArgumentError);
  }
}

TEST_CASE("W1 between samples") {
  const std::vector<double> a{0, 1, 3}, b{5, 6, 8, 9};
  CHECK(wasserstein_samples(a, b) == doctest::Approx(5.666666666666666));
  CHECK(wasserstein_samples(a, a) == 0.0);
  CHECK_THROWS_AS(wasserstein_samples(a, std::vector<double>{}), ArgumentError);
}

TEST_CASE("predictive pmf") {
  const Grid grid({0.0, 1.0, 2.0, 3.0});
  const auto uniform = predictive_pmf(make_prediction_set(grid, {0.25, 0.25, 0.25, 0.25}, 0.1));
  for (double w : uniform.weights) CHECK(w == 0.25);
  const auto mixed = predictive_pmf(make_prediction_set(grid, {0.1, 0.7, 0.3, 0.0}, 0.1));
  double total = 0;
  for (double w : mixed.weights) total += w;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
  const auto point = predictive_pmf(make_prediction_set(grid, {0.0, 0.0, 0.4, 0.0}, 0.1));
  CHECK(point.weights == std::vector<double>{0, 0, 1, 0});
  CHECK_THROWS_AS(predictive_pmf(make_prediction_set(grid, {0, 0, 0, 0}, 0.1)), DegeneracyError);
  const auto a = make_prediction_set(grid, {0, 0, 0, 0}, 0.1);
  CHECK_FALSE(prediction_set_distance(a, a, WdistMode::kPredictivePmf).has_value());
  CHECK(prediction_set_distance(a, a, WdistMode::kTypicalnessValues).value() == 0.0);
}

TEST_CASE("aggregates") {
  const std::vector<double> one{0.42};
  const Aggregate a = aggregate(one);
  CHECK(a.median == 0.42);
  CHECK(a.lo == 0.42);
  CHECK(a.hi == 0.42);
}

TEST_CASE("runs are reproducible and independent of the worker count") {
  ExperimentConfig cfg;
  cfg.runs = 12;
  cfg.tests_per_run = 5;
  cfg.grid_size = 50;
  cfg.gen = GenConfig{.d = 2, .n = 8, .seed = 4};
  const RidgeOraclePredictor ridge(cfg.ridge_lambda());
  cfg.workers = 1;
  const EvalResult a = run_coverage_experiment(cfg, &ridge);
  cfg.workers = 4;
  const EvalResult b = run_coverage_experiment(cfg, &ridge);
  CHECK(a.coverages() == b.coverages());
  for (std::size_t r = 0; r < a.runs.size(); ++r) CHECK(a.runs[r].median_width == b.runs[r].median_width);
  const RunData d0 = sample_run(cfg, 3), d1 = sample_run(cfg, 3);
  CHECK(d0.X_ctx == d1.X_ctx);
  CHECK(d0.y_test == d1.y_test);
  CHECK(sample_run(cfg, 4).X_ctx != d0.X_ctx);
}

TEST_CASE("runs = 1 aggregates equal the single run") {
  ExperimentConfig cfg;
  cfg.runs = 1;
  cfg.tests_per_run = 20;
  cfg.grid_size = 50;
  cfg.gen = GenConfig{.d = 2, .n = 8};
  const RidgeOraclePredictor ridge(cfg.ridge_lambda());
  const EvalResult r = run_coverage_experiment(cfg, &ridge);
  CHECK(r.coverage.median == r.runs[0].coverage);
  CHECK(r.coverage.lo == r.runs[0].coverage);
  CHECK(r.width.hi == r.runs[0].median_width);
}

TEST_CASE("ridge oracle coverage at d = 5, n = 100") {
  ExperimentConfig cfg;
  cfg.runs = 200;
  cfg.tests_per_run = 50;
  cfg.gen = GenConfig{.d = 5, .n = 100, .seed = 21};
  const RidgeOraclePredictor ridge(cfg.ridge_lambda());
  const EvalResult r = run_coverage_experiment(cfg, &ridge);
  CHECK(r.coverage.median >= 0.87);
  CHECK(r.coverage.median <= 0.93);
  CHECK(r.coverage.lo <= r.coverage.median);
  CHECK(r.coverage.median <= r.coverage.hi);

  cfg.alpha = 0.5;
  const EvalResult half = run_coverage_experiment(cfg, &ridge);
  CHECK(std::abs(half.coverage.median - 0.5) <= 0.05);
}

TEST_CASE("coverage estimates from disjoint seed blocks agree") {
  ExperimentConfig cfg;
  cfg.runs = 200;
  cfg.tests_per_run = 20;
  cfg.grid_size = 100;
  cfg.gen = GenConfig{.d = 3, .n = 30, .seed = 100};
  const RidgeOraclePredictor ridge(cfg.ridge_lambda());
  const auto mean_cov = [&] {
    const auto c = run_coverage_experiment(cfg, &ridge).coverages();
    return stats::mean(c);
  };
  const double a = mean_cov();
  cfg.gen.seed = 200;
  const double b = mean_cov();
  const double p = 0.5 * (a + b);
  const double se = std::sqrt(2 * p * (1 - p) / (cfg.runs * cfg.tests_per_run));
  // Test points share a task within a run, so allow for the design effect of the clustering.
  CHECK(std::abs(a - b) <= 3 * 2 * se);
}

TEST_CASE("split CP runs without a predictor; full CP requires one") {
  ExperimentConfig cfg;
  cfg.runs = 5;
  cfg.tests_per_run = 5;
  cfg.gen = GenConfig{.d = 2, .n = 20};
  cfg.method = Method::kSplitCpRidge;
  CHECK(run_coverage_experiment(cfg, nullptr).runs.size() == 5);
  cfg.method = Method::kCpRidge;
  CHECK_THROWS_AS(run_coverage_experiment(cfg, nullptr), ArgumentError);
}

TEST_CASE("W1 experiment with the same predictor on both sides is zero") {
  WdistConfig cfg;
  cfg.shapes = {{2, 8}, {2, 2}, {2, 1}};
  cfg.runs = 4;
  cfg.tests_per_run = 3;
  cfg.grid_size = 40;
  const auto ridge = std::make_shared<const RidgeOraclePredictor>(1.0);
  const PredictorFactory f = [&](int, int) -> std::shared_ptr<const Predictor> { return ridge; };
  const auto rows = run_wdist_experiment(cfg, f, f);
  REQUIRE(rows.size() == 3);
  CHECK(rows[1].ratio == 1.0);
  for (const auto& r : rows) CHECK(r.mean_w1 == 0.0);
}

TEST_CASE("distribution-shift sweep") {
  OodConfig cfg;
  cfg.base.runs = 30;
  cfg.base.tests_per_run = 20;
  cfg.base.grid_size = 100;
  cfg.base.gen = GenConfig{.d = 2, .n = 20, .seed = 5};
  const ZeroPredictor zero;
  const RidgeOraclePredictor ridge(cfg.base.ridge_lambda());
  CHECK_THROWS_AS(run_ood_experiment(cfg, zero, ridge), ArgumentError);

  cfg.a_values = {0.5, 1.0, 2.0};
  cfg.sigma_w_values = {0.5, 2.0};
  const auto rows = run_ood_experiment(cfg, zero, ridge);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0].parameter == "a");
  CHECK(rows[4].parameter == "sigma_w");
  CHECK(rows[4].value == 2.0);
  // Any symmetric predictor keeps coverage near 1 - alpha under the shift.
  for (const auto& r : rows) {
    CHECK(r.coverage.median >= 0.85);
    CHECK(std::isfinite(r.mean_w1));
  }
}

TEST_CASE("log-spaced sweep values") {
  const auto v = log_spaced(0.25, 4.0, 5);
  REQUIRE(v.size() == 5);
  CHECK(v[0] == doctest::Approx(0.25));
  CHECK(v[2] == doctest::Approx(1.0));
  CHECK(v[4] == doctest::Approx(4.0));
  CHECK_THROWS_AS(log_spaced(0.0, 1.0, 3), ArgumentError);
}

TEST_CASE("timing benchmark reports ordered quantiles") {
  BenchConfig cfg;
  CHECK(cfg.context_sizes == std::vector<int>{50, 100, 300});
  cfg.context_sizes = {10, 20};
  cfg.repetitions = 5;
  cfg.warmup = 1;
  cfg.tests_per_batch = 2;
  cfg.grid_size = 50;
  cfg.gen = GenConfig{.d = 2};
  std::vector<BenchMethod> methods{{Method::kCpRidge, std::make_shared<const RidgeOraclePredictor>(1.0)},
                                   {Method::kSplitCpRidge, nullptr}};
  const auto rows = benchmark_time(cfg, methods);
  REQUIRE(rows.size() == 4);
  for (const auto& r : rows) {
    CHECK(r.lo <= r.median);
    CHECK(r.median <= r.hi);
    CHECK(r.lo > 0.0);
  }
  CHECK_THROWS_AS(benchmark_time(cfg, std::span<const BenchMethod>{}), ArgumentError);
}
