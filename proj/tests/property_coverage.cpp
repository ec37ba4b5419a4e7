// Marginal coverage of full CP on the grid, for the ridge oracle and an LSA
// predictor, against the bound 1 - alpha - 3 sqrt(alpha (1 - alpha) / M).
#include <doctest.h>

#include <cmath>

#include "iclcp/conformal.hpp"
#include "iclcp/taskgen.hpp"
#include "support.hpp"

using namespace iclcp;

namespace {

void check_coverage(int n) {
  const GenConfig cfg{.d = 2, .n = n, .sigma_n = 0.25};
  const double alpha = 0.1;
  const int M = 10000;
  Rng init(9);
  const IclPredictor icl(LsaParams::random(2, 2, 0.3, init));
  const RidgeOraclePredictor ridge(bayes_lambda(cfg.sigma_w, cfg.sigma_n));
  for (const Predictor* p : {static_cast<const Predictor*>(&ridge), static_cast<const Predictor*>(&icl)}) {
    Rng rng(10);
    int covered = 0;
    for (int m = 0; m < M; ++m) {
      const TaskSample t = sample_task(cfg, rng);
      const Eigen::VectorXd y = t.y.head(n);
      const auto set = full_cp(*p, t.X.topRows(n), y, t.X.row(n).transpose(), alpha, build_grid(y, 200));
      covered += set.covers(t.y(n)) ? 1 : 0;
    }
    const double rate = static_cast<double>(covered) / M;
    CAPTURE(n);
    CAPTURE(p->name());
    CHECK(rate >= 1 - alpha - 3 * std::sqrt(alpha * (1 - alpha) / M));
  }
}

}  // namespace

TEST_CASE("coverage at n = 10") { check_coverage(10); }
TEST_CASE("coverage at n = 19") { check_coverage(19); }
TEST_CASE("coverage at n = 50") { check_coverage(50); }
