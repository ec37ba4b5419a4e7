#include <doctest.h>

#include <cmath>

#include "iclcp/errors.hpp"
#include "iclcp/ridge.hpp"
#include "iclcp/taskgen.hpp"
#include "support.hpp"

using namespace iclcp;

TEST_CASE("config validation") {
  GenConfig ok;
  CHECK_NOTHROW(ok.validate());
  for (auto mutate : {+[](GenConfig& c) { c.d = 0; }, +[](GenConfig& c) { c.n = 0; },
                      +[](GenConfig& c) { c.a = 0; }, +[](GenConfig& c) { c.sigma_w = -1; },
                      +[](GenConfig& c) { c.sigma_n = -0.1; }}) {
    GenConfig bad;
    mutate(bad);
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    Rng rng(0);
    CHECK_THROWS_AS(sample_task(bad, rng), ConfigError);
  }
}

TEST_CASE("noiseless tasks satisfy y = Xw exactly") {
  GenConfig cfg{.d = 2, .n = 3, .sigma_n = 0.0};
  Rng rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    const TaskSample t = sample_task(cfg, rng);
    REQUIRE(t.X.rows() == 4);
    REQUIRE(t.X.cols() == 2);
    for (int i = 0; i < 4; ++i) CHECK(t.y(i) == t.X.row(i).dot(t.w));
  }
}

TEST_CASE("sampling is deterministic in the seed") {
  GenConfig cfg{.d = 3, .n = 5};
  Rng a(11), b(11), c(12);
  const TaskSample ta = sample_task(cfg, a), tb = sample_task(cfg, b), tc = sample_task(cfg, c);
  CHECK(ta.X == tb.X);
  CHECK(ta.y == tb.y);
  CHECK(ta.w == tb.w);
  CHECK(ta.X != tc.X);
}

TEST_CASE("input entries have the moments of U(-1, 1)") {
  GenConfig cfg{.d = 1, .n = 9, .a = 1.0};
  Rng rng(3);
  double sum = 0, sum2 = 0;
  long count = 0;
  while (count < 100000) {
    const TaskSample t = sample_task(cfg, rng);
    for (int i = 0; i < t.X.rows(); ++i) {
      const double x = t.X(i, 0);
      REQUIRE(std::abs(x) <= 1.0);
      sum += x;
      sum2 += x * x;
      ++count;
    }
  }
  const double mean = sum / count;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(sum2 / count - mean * mean - 1.0 / 3.0) < 0.01);
}

TEST_CASE("noise residuals have the configured spread") {
  GenConfig cfg{.d = 2, .n = 49, .sigma_n = 0.5};
  Rng rng(4);
  double sum2 = 0;
  long count = 0;
  for (int rep = 0; rep < 400; ++rep) {
    const TaskSample t = sample_task(cfg, rng);
    const Eigen::VectorXd r = t.y - t.X * t.w;
    CHECK(testing::max_abs(r - t.noise) < 1e-12);
    sum2 += r.squaredNorm();
    count += r.size();
  }
  CHECK(std::sqrt(sum2 / count) == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("OLS weight estimates are unbiased for d = 1") {
  GenConfig cfg{.d = 1, .n = 10};
  Rng rng(6);
  const int tasks = 10000;
  double sum = 0, sum2 = 0;
  for (int k = 0; k < tasks; ++k) {
    const TaskSample t = sample_task(cfg, rng);
    const double w_hat = ridge_fit(t.X, t.y, 0.0).w_hat(0);
    const double err = w_hat - t.w(0);
    sum += w_hat;
    sum2 += err * err;
  }
  // True weights have mean 0 and unit variance, so the estimate mean has standard error
  // sqrt((1 + mean squared error) / tasks).
  const double se = std::sqrt((1.0 + sum2 / tasks) / tasks);
  CHECK(std::abs(sum / tasks) < 3.0 * se);
}

TEST_CASE("tokenize lays out columns as [x; y] with the query label last") {
  Eigen::MatrixXd X(1, 1);
  X << 2;
  Eigen::VectorXd y(1);
  y << 3;
  Eigen::VectorXd xq(1);
  xq << 5;
  const TokenMatrix E = tokenize(X, y, xq, 0.0);
  Eigen::MatrixXd expected(2, 2);
  expected << 2, 5, 3, 0;
  CHECK(E.data() == expected);
  CHECK(E.query_label() == 0.0);

  Rng rng(1);
  const Eigen::MatrixXd X3 = testing::random_matrix(rng, 7, 3);
  const Eigen::VectorXd y3 = testing::random_vector(rng, 7);
  const Eigen::VectorXd q3 = testing::random_vector(rng, 3);
  for (double z : {-2.5, 0.0, 1e6}) {
    const TokenMatrix T = tokenize(X3, y3, q3, z);
    CHECK(T.data().rows() == 4);
    CHECK(T.data().cols() == 8);
    CHECK(T.data()(3, 7) == z);
    for (int i = 0; i < 7; ++i) CHECK(T.data()(3, i) == y3(i));
  }
}

TEST_CASE("tokenize rejects inconsistent shapes") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(3, 2);
  CHECK_THROWS_AS(tokenize(X, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2), 0.0), DimensionError);
  CHECK_THROWS_AS(tokenize(X, Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3), 0.0), DimensionError);
}

TEST_CASE("sample_batch targets are the held-out query labels of the source tasks") {
  GenConfig cfg{.d = 3, .n = 6, .sigma_n = 0.3, .seed = 0};
  Rng a(9), b(9);
  const auto batch = sample_batch(cfg, 5, a);
  REQUIRE(batch.size() == 5);
  for (const auto& ex : batch) {
    const TaskSample t = sample_task(cfg, b);
    CHECK(ex.tokens.query_label() == 0.0);
    CHECK(ex.target == doctest::Approx(t.X.row(6).dot(t.w) + t.noise(6)).epsilon(1e-14));
    CHECK(ex.tokens.data().topRows(3).col(6).isApprox(t.X.row(6).transpose()));
  }
  Rng c(10);
  CHECK(sample_batch(cfg, 1, c).size() == 1);
  Rng d1(1), d2(2);
  CHECK(sample_batch(cfg, 1, d1)[0].target != sample_batch(cfg, 1, d2)[0].target);
}
