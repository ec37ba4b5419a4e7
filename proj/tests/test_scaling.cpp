#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "iclcp/errors.hpp"
#include "iclcp/rng.hpp"
#include "iclcp/scaling.hpp"

using namespace iclcp;

namespace {

std::vector<ScalingDatapoint> synthetic(const ScalingParams& p, int count, double noise,
                                        std::uint64_t seed, double d_lo = 1e2, double d_hi = 1e6) {
  Rng rng(seed);
  std::vector<ScalingDatapoint> out;
  for (int i = 0; i < count; ++i) {
    const double N = std::exp(rng.uniform(std::log(1e2), std::log(1e6)));
    const double D = std::exp(rng.uniform(std::log(d_lo), std::log(d_hi)));
    const double loss = scaling_law(N, D, p) * (1.0 + noise * rng.normal());
    out.push_back({N, D, loss, 6 * N * D});
  }
  return out;
}

double rel(double got, double want) { return std::abs(got - want) / std::abs(want); }

}  // namespace

TEST_CASE("asymmetric MAE branches") {
  CHECK(asymmetric_mae(1, 0, 0.1) == 1.0);
  CHECK(asymmetric_mae(0, 1, 0.1) == doctest::Approx(0.1));
  CHECK(asymmetric_mae(2.5, 2.5, 0.1) == 0.0);
  CHECK_THROWS_AS(asymmetric_mae(1, 0, 0.0), ArgumentError);
}

TEST_CASE("scaling law shape") {
  const ScalingParams p{0.3, 0.7, 5, 20, 0.4};
  for (double N : {1e1, 1e3, 1e5}) {
    CHECK(scaling_law(N * 2, 1e3, p) < scaling_law(N, 1e3, p));
    CHECK(scaling_law(1e3, N * 2, p) < scaling_law(1e3, N, p));
  }
  const ScalingParams q{0.5, 0.5, 0.1, 0.1, 1};
  CHECK(rel(scaling_law(1e12, 1e12, q), q.E) <= 1e-6);
  const ScalingFit f = ScalingFit::from_params(p);
  CHECK(f.a == doctest::Approx(0.7));
  CHECK(f.a + f.b == 1.0);
}

TEST_CASE("a = 0.62 and b = 0.38 follow from beta / alpha = 0.62 / 0.38") {
  // beta / (alpha + beta) = 0.62 for alpha / beta = 0.38 / 0.62.
  const ScalingFit f = ScalingFit::from_params({0.38, 0.62, 1, 1, 1});
  CHECK(f.a == doctest::Approx(0.62));
  CHECK(f.b == doctest::Approx(0.38));
  CHECK(f.a + f.b == 1.0);
}

TEST_CASE("noiseless round trip") {
  const ScalingParams truth{0.5, 0.5, 10, 10, 1};
  const auto data = synthetic(truth, 40, 0.0, 1);
  const ScalingFit fit = fit_scaling_law(data);
  CHECK(rel(fit.params.alpha, 0.5) <= 0.05);
  CHECK(rel(fit.params.beta, 0.5) <= 0.05);
  CHECK(fit.a + fit.b == 1.0);
  CHECK(fit.restarts.size() == 64);
  for (const auto& r : fit.restarts) {
    if (r.finite) CHECK(fit.fit_loss <= r.objective);
  }
}

TEST_CASE("round trip with 1% noise") {
  const ScalingParams truth{0.4, 0.6, 20, 50, 0.5};
  const auto data = synthetic(truth, 40, 0.01, 2);
  const ScalingFit fit = fit_scaling_law(data);
  CHECK(rel(fit.params.alpha, 0.4) <= 0.10);
  CHECK(rel(fit.params.beta, 0.6) <= 0.10);
}

TEST_CASE("data term negligible") {
  const ScalingParams truth{0.5, 0.5, 10, 10, 1};
  const auto data = synthetic(truth, 40, 0.0, 3, 1e14, 1e16);
  const ScalingFit fit = fit_scaling_law(data);
  for (const auto& p : data) {
    const double explained = fit.params.A / std::pow(p.N, fit.params.alpha);
    CHECK(rel(explained, p.loss - truth.E) <= 0.05);
  }
}

TEST_CASE("fit is invariant to the loss scale") {
  const ScalingParams truth{0.5, 0.5, 10, 10, 1};
  auto data = synthetic(truth, 40, 0.0, 4);
  const ScalingFit f1 = fit_scaling_law(data);
  for (auto& p : data) p.loss *= 3.0;
  const ScalingFit f3 = fit_scaling_law(data);
  CHECK(rel(f3.params.alpha, f1.params.alpha) <= 0.01);
  CHECK(rel(f3.params.beta, f1.params.beta) <= 0.01);
  CHECK(rel(f3.params.A, 3 * f1.params.A) <= 0.01);
  CHECK(rel(f3.params.B, 3 * f1.params.B) <= 0.01);
  CHECK(rel(f3.params.E, 3 * f1.params.E) <= 0.01);
}

TEST_CASE("fit input validation") {
  const auto data = synthetic({0.5, 0.5, 10, 10, 1}, 4, 0.0, 5);
  CHECK_THROWS_AS(fit_scaling_law(data), ArgumentError);
  auto bad = synthetic({0.5, 0.5, 10, 10, 1}, 6, 0.0, 5);
  bad[2].loss = -1;
  CHECK_THROWS_AS(fit_scaling_law(bad), ArgumentError);
}

TEST_CASE("symmetric allocation splits the budget evenly") {
  const ScalingFit fit = ScalingFit::from_params({0.5, 0.5, 10, 10, 1});
  const auto flops = bilinear_flops_model(6);
  const double C = 1e10;
  const Allocation a = optimal_allocation(fit, C, flops);
  CHECK(rel(6 * a.N * a.D, C) <= 1e-9);
  CHECK(rel(a.N, a.D) <= 1e-6);
  CHECK(rel(10 * 0.5 / std::sqrt(a.N), 10 * 0.5 / std::sqrt(a.D)) <= 1e-6);
  CHECK(fit.a == 0.5);
}

TEST_CASE("doubling the budget scales N by 2^a") {
  const ScalingFit fit = ScalingFit::from_params({0.3, 0.6, 8, 40, 0.2});
  const auto flops = bilinear_flops_model(6);
  for (double C : {1e8, 1e10, 1e12}) {
    const double r = optimal_allocation(fit, 2 * C, flops).N / optimal_allocation(fit, C, flops).N;
    CHECK(rel(r, std::pow(2.0, fit.a)) <= 0.01);
  }
  CHECK_THROWS_AS(optimal_allocation(fit, 0.0, flops), ArgumentError);
}

TEST_CASE("isoFLOP contours") {
  const ScalingFit fit = ScalingFit::from_params({0.3, 0.6, 8, 40, 0.2});
  for (const auto& flops : {bilinear_flops_model(6), lsa_flops_model(5, 30, 64)}) {
    const double C = 1e9;
    const auto pts = isoflop_contour(fit, C, flops, 41, 2.0);
    REQUIRE(pts.size() == 41);
    for (const auto& p : pts) CHECK(rel(flops(p.N, p.D), C) <= 1e-6);
    const auto best = std::min_element(pts.begin(), pts.end(),
                                       [](const auto& x, const auto& y) { return x.loss < y.loss; });
    CHECK(best - pts.begin() == 20);
    const Allocation opt = optimal_allocation(fit, C, flops);
    CHECK(rel(best->N, opt.N) <= 1e-6);
    const auto one = isoflop_contour(fit, C, flops, 1);
    REQUIRE(one.size() == 1);
    CHECK(one[0].N == opt.N);
  }
}

TEST_CASE("analytic FLOP model matches the per-step count") {
  const auto model = lsa_flops_model(2, 5, 4);
  const double N = 4.0 * 3 * 9;
  const double per_step = static_cast<double>(count_flops_per_step(2, 5, 3, 4));
  CHECK(rel(model(N, 7.0 * 4), 7 * per_step) <= 1e-12);
}

TEST_CASE("collecting scaling data from tiny configs") {
  std::vector<TrainConfig> cfgs(2);
  cfgs[0] = TrainConfig{.steps = 30, .batch_size = 8, .layers = 1, .gen = GenConfig{.d = 2, .n = 6}};
  cfgs[1] = TrainConfig{.steps = 20, .batch_size = 8, .layers = 2, .gen = GenConfig{.d = 2, .n = 6}};
  ScalingEvalConfig ev;
  ev.experiment.runs = 5;
  ev.experiment.tests_per_run = 3;
  ev.experiment.grid_size = 40;
  const auto out = collect_scaling_data(cfgs, ev);
  REQUIRE(out.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    REQUIRE(out[i].point.has_value());
    CHECK(out[i].status == "ok");
    CHECK(out[i].point->N == 4.0 * cfgs[i].layers * 9);
    CHECK(out[i].point->D == cfgs[i].steps * 8.0);
    CHECK(out[i].point->loss > 0.0);
    Rng rng = Rng::stream(ev.train_seed, i);
    CHECK(out[i].point->flops == static_cast<double>(train(cfgs[i], rng).flops_total));
  }
  CHECK_THROWS_AS(collect_scaling_data(std::span<const TrainConfig>{}, ev), ArgumentError);
}

TEST_CASE("failed configs are reported, not fatal") {
  std::vector<TrainConfig> cfgs(2);
  cfgs[0] = TrainConfig{.steps = 10, .batch_size = 4, .layers = 1, .gen = GenConfig{.d = 2, .n = 4}};
  cfgs[1] = cfgs[0];
  cfgs[1].flop_budget = 1.0;
  ScalingEvalConfig ev;
  ev.experiment.runs = 3;
  ev.experiment.tests_per_run = 2;
  ev.experiment.grid_size = 20;
  const auto out = collect_scaling_data(cfgs, ev);
  CHECK(out[0].point.has_value());
  CHECK_FALSE(out[1].point.has_value());
  CHECK(out[1].status != "ok");
}
