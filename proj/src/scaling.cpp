#include "iclcp/scaling.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "iclcp/errors.hpp"
#include "iclcp/parallel.hpp"
#include "iclcp/stats.hpp"

namespace iclcp {
namespace {

constexpr int kDims = 5;
using Vec5 = std::array<double, kDims>;

// theta = (log alpha, log beta, log A, log B, log E).
ScalingParams from_theta(const Vec5& t) {
  return ScalingParams{std::exp(t[0]), std::exp(t[1]), std::exp(t[2]), std::exp(t[3]),
                       std::exp(t[4])};
}

Vec5 to_theta(const ScalingParams& p) {
  return {std::log(p.alpha), std::log(p.beta), std::log(p.A), std::log(p.B), std::log(p.E)};
}

double log_sum_exp3(double x, double y, double z, std::array<double, 3>& weights) {
  const double m = std::max({x, y, z});
  const double ex = std::exp(x - m);
  const double ey = std::exp(y - m);
  const double ez = std::exp(z - m);
  const double s = ex + ey + ez;
  weights = {ex / s, ey / s, ez / s};
  return m + std::log(s);
}

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Smoothed objective: asymmetric_mae(u) = -lambda u + (1 + lambda) max(u, 0), with the
// max replaced by temperature * softplus(u / temperature).
double smoothed_objective(std::span<const ScalingDatapoint> data, const Vec5& t, double lambda,
                          double temperature, Vec5* grad) {
  const double alpha = std::exp(t[0]);
  const double beta = std::exp(t[1]);
  double total = 0.0;
  Vec5 g{};
  for (const auto& p : data) {
    const double logN = std::log(p.N);
    const double logD = std::log(p.D);
    std::array<double, 3> w{};
    const double logf = log_sum_exp3(t[4], t[2] - alpha * logN, t[3] - beta * logD, w);
    const double u = logf - std::log(p.loss);
    total += -lambda * u + (1.0 + lambda) * temperature * softplus(u / temperature);
    if (grad != nullptr) {
      const double dl = -lambda + (1.0 + lambda) * sigmoid(u / temperature);
      g[0] += dl * w[1] * (-logN) * alpha;
      g[1] += dl * w[2] * (-logD) * beta;
      g[2] += dl * w[1];
      g[3] += dl * w[2];
      g[4] += dl * w[0];
    }
  }
  const double inv_k = 1.0 / static_cast<double>(data.size());
  if (grad != nullptr) {
    for (double& v : g) v *= inv_k;
    *grad = g;
  }
  return total * inv_k;
}

double dot(const Vec5& a, const Vec5& b) {
  double s = 0.0;
  for (int i = 0; i < kDims; ++i) s += a[i] * b[i];
  return s;
}

struct BfgsResult {
  Vec5 x;
  int iterations = 0;
};

// BFGS with an inverse-Hessian update and Armijo backtracking.
BfgsResult minimize_bfgs(std::span<const ScalingDatapoint> data, Vec5 x, double lambda,
                         double temperature, int max_iter) {
  std::array<std::array<double, kDims>, kDims> H{};
  for (int i = 0; i < kDims; ++i) H[i][i] = 1.0;
  Vec5 g{};
  double f = smoothed_objective(data, x, lambda, temperature, &g);
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    double gmax = 0.0;
    for (double v : g) gmax = std::max(gmax, std::abs(v));
    if (gmax < 1e-12 || !std::isfinite(f)) break;

    Vec5 dir{};
    for (int i = 0; i < kDims; ++i) {
      for (int j = 0; j < kDims; ++j) dir[i] -= H[i][j] * g[j];
    }
    double slope = dot(dir, g);
    if (slope >= 0.0) {
      // Not a descent direction: reset to steepest descent.
      for (int i = 0; i < kDims; ++i) {
        for (int j = 0; j < kDims; ++j) H[i][j] = i == j ? 1.0 : 0.0;
        dir[i] = -g[i];
      }
      slope = dot(dir, g);
    }

    double step = 1.0;
    Vec5 x_new{};
    Vec5 g_new{};
    double f_new = f;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (int i = 0; i < kDims; ++i) x_new[i] = x[i] + step * dir[i];
      f_new = smoothed_objective(data, x_new, lambda, temperature, &g_new);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    Vec5 s{};
    Vec5 y{};
    for (int i = 0; i < kDims; ++i) {
      s[i] = x_new[i] - x[i];
      y[i] = g_new[i] - g[i];
    }
    const double sy = dot(s, y);
    const double improvement = f - f_new;
    x = x_new;
    g = g_new;
    f = f_new;
    if (sy > 1e-16) {
      Vec5 Hy{};
      for (int i = 0; i < kDims; ++i) {
        for (int j = 0; j < kDims; ++j) Hy[i] += H[i][j] * y[j];
      }
      const double yHy = dot(y, Hy);
      const double rho = 1.0 / sy;
      for (int i = 0; i < kDims; ++i) {
        for (int j = 0; j < kDims; ++j) {
          H[i][j] += rho * ((1.0 + rho * yHy) * s[i] * s[j] - Hy[i] * s[j] - s[i] * Hy[j]);
        }
      }
    }
    if (improvement < 1e-15 * (1.0 + std::abs(f))) break;
  }
  return BfgsResult{x, iter};
}

std::vector<ScalingParams> initial_points(std::span<const ScalingDatapoint> data, int n_starts) {
  double min_loss = std::numeric_limits<double>::infinity();
  double log_n_mean = 0.0;
  double log_d_mean = 0.0;
  for (const auto& p : data) {
    min_loss = std::min(min_loss, p.loss);
    log_n_mean += std::log(p.N);
    log_d_mean += std::log(p.D);
  }
  log_n_mean /= static_cast<double>(data.size());
  log_d_mean /= static_cast<double>(data.size());

  const int per_axis = std::max(1, static_cast<int>(std::ceil(std::cbrt(static_cast<double>(n_starts)) - 1e-9)));
  const std::vector<double> exponents = log_spaced(0.1, 1.2, per_axis);
  // Size of each power-law term at the geometric-mean (N, D), relative to the smallest loss.
  const std::vector<double> term_scales = log_spaced(0.03, 30.0, per_axis);

  std::vector<ScalingParams> out;
  for (double scale : term_scales) {
    for (double alpha : exponents) {
      for (double beta : exponents) {
        if (static_cast<int>(out.size()) == n_starts) return out;
        ScalingParams p;
        p.alpha = alpha;
        p.beta = beta;
        p.A = scale * min_loss * std::exp(alpha * log_n_mean);
        p.B = scale * min_loss * std::exp(beta * log_d_mean);
        p.E = 0.5 * min_loss;
        out.push_back(p);
      }
    }
  }
  return out;
}

void check_data(std::span<const ScalingDatapoint> data) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& p = data[i];
    if (!(p.N > 0.0 && p.D > 0.0 && p.loss > 0.0) || !std::isfinite(p.N) || !std::isfinite(p.D) ||
        !std::isfinite(p.loss)) {
      throw ArgumentError("scaling datapoint " + std::to_string(i) +
                          " must have positive finite N, D and loss");
    }
  }
}

}  // namespace

double scaling_law(double N, double D, const ScalingParams& p) {
  return p.E + p.A / std::pow(N, p.alpha) + p.B / std::pow(D, p.beta);
}

ScalingFit ScalingFit::from_params(const ScalingParams& p) {
  if (!(p.alpha > 0.0 && p.beta > 0.0)) throw ArgumentError("scaling exponents must be positive");
  ScalingFit fit;
  fit.params = p;
  fit.a = p.beta / (p.alpha + p.beta);
  fit.b = 1.0 - fit.a;
  return fit;
}

double asymmetric_mae(double y_true, double y_pred, double lambda_asym) {
  if (!(lambda_asym > 0.0)) throw ArgumentError("asymmetric_mae: lambda must be > 0");
  const double diff = y_true - y_pred;
  return diff > 0.0 ? diff : lambda_asym * std::abs(diff);
}

double scaling_objective(std::span<const ScalingDatapoint> data, const ScalingParams& p,
                         double lambda_asym) {
  if (data.empty()) throw ArgumentError("scaling_objective: no data");
  double total = 0.0;
  for (const auto& d : data) {
    total += asymmetric_mae(std::log(scaling_law(d.N, d.D, p)), std::log(d.loss), lambda_asym);
  }
  return total / static_cast<double>(data.size());
}

ScalingFit fit_scaling_law(std::span<const ScalingDatapoint> data, const ScalingFitOptions& options) {
  if (data.size() < 5) {
    throw ArgumentError("fit_scaling_law: need at least 5 datapoints, got " +
                        std::to_string(data.size()));
  }
  if (!(options.lambda_asym > 0.0)) throw ArgumentError("fit_scaling_law: lambda_asym must be > 0");
  if (options.n_starts < 1) throw ArgumentError("fit_scaling_law: n_starts must be >= 1");
  check_data(data);

  const auto starts = initial_points(data, options.n_starts);
  std::vector<RestartDiagnostic> diagnostics(starts.size());
  parallel_for(starts.size(), options.workers, [&](std::size_t i) {
    RestartDiagnostic& diag = diagnostics[i];
    diag.start = starts[i];
    Vec5 theta = to_theta(starts[i]);
    for (double temperature : {3e-2, 3e-3, 3e-4, 3e-5}) {
      const BfgsResult r = minimize_bfgs(data, theta, options.lambda_asym, temperature, 400);
      theta = r.x;
      diag.iterations += r.iterations;
    }
    diag.result = from_theta(theta);
    bool finite = true;
    for (double v : theta) finite = finite && std::isfinite(v);
    diag.objective = finite ? scaling_objective(data, diag.result, options.lambda_asym)
                            : std::numeric_limits<double>::infinity();
    diag.finite = finite && std::isfinite(diag.objective) && diag.result.alpha > 0.0 &&
                  diag.result.beta > 0.0;
  });

  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < diagnostics.size(); ++i) {
    if (!diagnostics[i].finite) continue;
    if (!best || diagnostics[i].objective < diagnostics[*best].objective) best = i;
  }
  if (!best) {
    throw FitError("fit_scaling_law: all " + std::to_string(diagnostics.size()) +
                   " restarts diverged");
  }
  ScalingFit fit = ScalingFit::from_params(diagnostics[*best].result);
  fit.fit_loss = diagnostics[*best].objective;
  fit.restarts = std::move(diagnostics);
  return fit;
}

FlopsModel bilinear_flops_model(double k) {
  if (!(k > 0.0)) throw ArgumentError("bilinear_flops_model: k must be > 0");
  return [k](double N, double D) { return k * N * D; };
}

FlopsModel lsa_flops_model(int d, int n, int batch_size) {
  if (d < 1 || n < 1 || batch_size < 1) throw ArgumentError("lsa_flops_model: arguments must be positive");
  const double D1 = d + 1.0;
  const double N1 = n + 1.0;
  const double B = batch_size;
  const double per_layer = 10.0 * D1 * D1 * N1 + D1 * D1 + D1 * N1;
  const double params_per_layer = 4.0 * D1 * D1;
  return [=](double N, double D) {
    const double layers = N / params_per_layer;
    const double per_step = 3.0 * (B * (layers * per_layer + 3.0) + layers * 2.0 * D1 * D1 * D1) +
                            10.0 * N;
    return (D / B) * per_step;
  };
}

double solve_data_for_budget(const FlopsModel& flops_model, double N, double C) {
  if (!(C > 0.0) || !(N > 0.0)) throw ArgumentError("solve_data_for_budget: N and C must be > 0");
  double lo = 0.0;
  double hi = std::log(C);
  auto excess = [&](double logD) { return flops_model(N, std::exp(logD)) - C; };
  int guard = 0;
  while (excess(hi) < 0.0) {
    lo = hi;
    hi += 8.0;
    if (++guard > 200) throw ArgumentError("solve_data_for_budget: budget unreachable");
  }
  guard = 0;
  while (excess(lo) > 0.0) {
    hi = lo;
    lo -= 8.0;
    if (++guard > 200) throw ArgumentError("solve_data_for_budget: budget exceeded for every D");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (excess(mid) < 0.0 ? lo : hi) = mid;
  }
  return std::exp(0.5 * (lo + hi));
}

Allocation optimal_allocation(const ScalingFit& fit, double C, const FlopsModel& flops_model) {
  if (!(C > 0.0) || !std::isfinite(C)) throw ArgumentError("optimal_allocation: C must be > 0");
  auto loss_at = [&](double logN) {
    const double N = std::exp(logN);
    return fit.predict(N, solve_data_for_budget(flops_model, N, C));
  };
  // Coarse scan in log N, then golden-section refinement around the best cell.
  const double lo = std::log(C) - 60.0;
  const double hi = std::log(C) + 30.0;
  const int cells = 3000;
  const double h = (hi - lo) / cells;
  double best_x = lo;
  double best_f = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= cells; ++i) {
    const double x = lo + h * i;
    const double f = loss_at(x);
    if (f < best_f) {
      best_f = f;
      best_x = x;
    }
  }
  double a = best_x - h;
  double b = best_x + h;
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - ratio * (b - a);
  double d = a + ratio * (b - a);
  double fc = loss_at(c);
  double fd = loss_at(d);
  for (int it = 0; it < 200 && b - a > 1e-12; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - ratio * (b - a);
      fc = loss_at(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + ratio * (b - a);
      fd = loss_at(d);
    }
  }
  Allocation out;
  out.N = std::exp(0.5 * (a + b));
  out.D = solve_data_for_budget(flops_model, out.N, C);
  out.loss = fit.predict(out.N, out.D);
  return out;
}

std::vector<Allocation> isoflop_contour(const ScalingFit& fit, double C,
                                        const FlopsModel& flops_model, int n_points,
                                        double decades) {
  if (n_points < 1) throw ArgumentError("isoflop_contour: n_points must be >= 1");
  if (!(decades > 0.0)) throw ArgumentError("isoflop_contour: decades must be > 0");
  const Allocation best = optimal_allocation(fit, C, flops_model);
  if (n_points == 1) return {best};
  std::vector<Allocation> out;
  out.reserve(static_cast<std::size_t>(n_points));
  const double span = decades * std::log(10.0);
  const double lo = std::log(best.N) - span;
  const double step = 2.0 * span / (n_points - 1);
  for (int i = 0; i < n_points; ++i) {
    Allocation p;
    p.N = std::exp(lo + step * i);
    p.D = solve_data_for_budget(flops_model, p.N, C);
    p.loss = fit.predict(p.N, p.D);
    out.push_back(p);
  }
  return out;
}

std::vector<ScalingOutcome> collect_scaling_data(std::span<const TrainConfig> train_cfgs,
                                                 const ScalingEvalConfig& eval_cfg) {
  if (train_cfgs.empty()) throw ArgumentError("collect_scaling_data: no training configs");
  std::vector<ScalingOutcome> outcomes(train_cfgs.size());
  for (std::size_t i = 0; i < train_cfgs.size(); ++i) {
    ScalingOutcome& out = outcomes[i];
    out.config = train_cfgs[i];
    try {
      Rng rng = Rng::stream(eval_cfg.train_seed, i);
      const TrainReport report = train(train_cfgs[i], rng);
      ExperimentConfig exp = eval_cfg.experiment;
      exp.method = Method::kCpIcl;
      exp.gen.d = train_cfgs[i].gen.d;
      exp.gen.n = train_cfgs[i].gen.n;
      const IclPredictor predictor(report.final_params);
      const EvalResult eval = run_coverage_experiment(exp, &predictor);
      std::vector<double> widths;
      for (const auto& r : eval.runs) widths.push_back(r.median_width);
      out.point = ScalingDatapoint{static_cast<double>(report.parameter_count),
                                   static_cast<double>(report.data_points), stats::mean(widths),
                                   static_cast<double>(report.flops_total)};
      out.coverage = eval.coverage.median;
      out.status = "ok";
    } catch (const Error& e) {
      out.status = e.what();
    }
  }
  return outcomes;
}

}  // namespace iclcp
