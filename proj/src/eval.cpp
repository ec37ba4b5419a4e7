#include "iclcp/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "iclcp/errors.hpp"
#include "iclcp/parallel.hpp"
#include "iclcp/ridge.hpp"
#include "iclcp/stats.hpp"

namespace iclcp {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double default_lambda(const GenConfig& gen, const std::optional<double>& override_lambda) {
  if (override_lambda) return *override_lambda;
  if (gen.sigma_n == 0.0) return 0.0;
  return bayes_lambda(gen.sigma_w, gen.sigma_n);
}

int split_train_size(int n, double fraction) {
  if (n < 2) throw ArgumentError("split CP needs a context of at least 2 points");
  const int n_train = static_cast<int>(std::lround(fraction * n));
  return std::clamp(n_train, 1, n - 1);
}

SplitConformal make_split(const Eigen::MatrixXd& X_ctx, const Eigen::VectorXd& y_ctx, double alpha,
                          double lambda, double fraction) {
  const int n = static_cast<int>(y_ctx.size());
  const int n_train = split_train_size(n, fraction);
  return SplitConformal(X_ctx.topRows(n_train), y_ctx.head(n_train), X_ctx.bottomRows(n - n_train),
                        y_ctx.tail(n - n_train), alpha, lambda);
}

bool is_full_cp(Method m) { return m != Method::kSplitCpRidge; }

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::kCpIcl:
      return "cp_icl";
    case Method::kCpRidge:
      return "cp_ridge";
    case Method::kSplitCpRidge:
      return "split_cp_ridge";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "cp_icl") return Method::kCpIcl;
  if (name == "cp_ridge") return Method::kCpRidge;
  if (name == "split_cp_ridge") return Method::kSplitCpRidge;
  throw ConfigError("unknown method '" + std::string(name) +
                    "' (expected cp_icl, cp_ridge or split_cp_ridge)");
}

void ExperimentConfig::validate() const {
  gen.validate();
  if (runs < 1) throw ConfigError("experiment.runs must be >= 1");
  if (tests_per_run < 1) throw ConfigError("experiment.tests_per_run must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("experiment.alpha must be in (0, 1)");
  if (grid_size < 2) throw ConfigError("experiment.grid_size must be >= 2");
  if (lambda && !(*lambda >= 0.0)) throw ConfigError("experiment.lambda must be >= 0");
  if (!(split_train_fraction > 0.0 && split_train_fraction < 1.0)) {
    throw ConfigError("experiment.split_train_fraction must be in (0, 1)");
  }
  if (shift) {
    if (!(shift->a_inf > 0.0) || !(shift->sigma_w_inf > 0.0)) {
      throw ConfigError("experiment.shift values must be > 0");
    }
  }
}

GenConfig ExperimentConfig::inference_gen() const {
  GenConfig g = gen;
  if (shift) {
    g.a = shift->a_inf;
    g.sigma_w = shift->sigma_w_inf;
  }
  return g;
}

double ExperimentConfig::ridge_lambda() const { return default_lambda(gen, lambda); }

RunData sample_run(const ExperimentConfig& cfg, int run_index) {
  const GenConfig g = cfg.inference_gen();
  Rng rng = Rng::stream(g.seed, static_cast<std::uint64_t>(run_index));
  const TaskSample task = sample_task(g, rng, g.n + cfg.tests_per_run);
  RunData data;
  data.X_ctx = task.X.topRows(g.n);
  data.y_ctx = task.y.head(g.n);
  data.X_test = task.X.bottomRows(cfg.tests_per_run);
  data.y_test = task.y.tail(cfg.tests_per_run);
  return data;
}

Aggregate aggregate(std::span<const double> values) {
  return Aggregate{stats::median(values), stats::percentile(values, 2.5),
                   stats::percentile(values, 97.5)};
}

std::vector<double> EvalResult::coverages() const {
  std::vector<double> out;
  out.reserve(runs.size());
  for (const auto& r : runs) out.push_back(r.coverage);
  return out;
}

EvalResult run_coverage_experiment(const ExperimentConfig& cfg, const Predictor* predictor) {
  cfg.validate();
  if (is_full_cp(cfg.method) && predictor == nullptr) {
    throw ArgumentError("run_coverage_experiment: method " + to_string(cfg.method) +
                        " needs a predictor");
  }
  const double lambda = cfg.ridge_lambda();

  EvalResult result;
  result.runs.resize(static_cast<std::size_t>(cfg.runs));
  parallel_for(result.runs.size(), cfg.workers, [&](std::size_t r) {
    const RunData data = sample_run(cfg, static_cast<int>(r));
    const int tests = static_cast<int>(data.y_test.size());
    std::vector<double> widths(static_cast<std::size_t>(tests));
    int covered = 0;
    int empty = 0;
    const auto start = Clock::now();
    if (is_full_cp(cfg.method)) {
      const Grid grid = build_grid(data.y_ctx, cfg.grid_size);
      for (int t = 0; t < tests; ++t) {
        const PredictionSet set =
            full_cp(*predictor, data.X_ctx, data.y_ctx, data.X_test.row(t).transpose(), cfg.alpha, grid);
        covered += set.covers(data.y_test[t]) ? 1 : 0;
        empty += set.empty() ? 1 : 0;
        widths[static_cast<std::size_t>(t)] = set.hull_width();
      }
    } else {
      const SplitConformal split =
          make_split(data.X_ctx, data.y_ctx, cfg.alpha, lambda, cfg.split_train_fraction);
      for (int t = 0; t < tests; ++t) {
        const SplitInterval iv = split.interval(data.X_test.row(t).transpose());
        covered += iv.contains(data.y_test[t]) ? 1 : 0;
        widths[static_cast<std::size_t>(t)] = iv.width();
      }
    }
    RunResult& out = result.runs[r];
    out.seconds = seconds_since(start);
    out.coverage = static_cast<double>(covered) / static_cast<double>(tests);
    out.median_width = stats::median(widths);
    out.empty_sets = empty;
  });

  std::vector<double> cov;
  std::vector<double> width;
  std::vector<double> secs;
  for (const auto& r : result.runs) {
    cov.push_back(r.coverage);
    width.push_back(r.median_width);
    secs.push_back(r.seconds);
  }
  result.coverage = aggregate(cov);
  result.width = aggregate(width);
  result.seconds = aggregate(secs);
  return result;
}

Pmf predictive_pmf(const PredictionSet& set) {
  const double total = std::accumulate(set.typicalness.begin(), set.typicalness.end(), 0.0);
  if (!(total > 0.0)) throw DegeneracyError("predictive_pmf: typicalness is zero everywhere");
  Pmf pmf;
  pmf.grid = set.grid.values();
  pmf.weights.reserve(set.typicalness.size());
  for (double p : set.typicalness) pmf.weights.push_back(p / total);
  return pmf;
}

double wasserstein_1d(const Pmf& a, const Pmf& b) {
  if (a.grid != b.grid) throw ArgumentError("wasserstein_1d: pmfs must share one grid");
  if (a.weights.size() != a.grid.size() || b.weights.size() != b.grid.size()) {
    throw ArgumentError("wasserstein_1d: one weight per grid point required");
  }
  for (std::size_t k = 1; k < a.grid.size(); ++k) {
    if (!(a.grid[k] > a.grid[k - 1])) throw ArgumentError("wasserstein_1d: grid must be increasing");
  }
  for (const Pmf* p : {&a, &b}) {
    double sum = 0.0;
    for (double w : p->weights) {
      if (!(w >= 0.0)) throw ArgumentError("wasserstein_1d: weights must be non-negative");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ArgumentError("wasserstein_1d: weights must sum to 1");
  }
  double cdf_a = 0.0;
  double cdf_b = 0.0;
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < a.grid.size(); ++k) {
    cdf_a += a.weights[k];
    cdf_b += b.weights[k];
    total += std::abs(cdf_a - cdf_b) * (a.grid[k + 1] - a.grid[k]);
  }
  return total;
}

double wasserstein_samples(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ArgumentError("wasserstein_samples: empty sample");
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  std::vector<double> pooled(sa);
  pooled.insert(pooled.end(), sb.begin(), sb.end());
  std::sort(pooled.begin(), pooled.end());
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  std::size_t ia = 0;
  std::size_t ib = 0;
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < pooled.size(); ++k) {
    while (ia < sa.size() && sa[ia] <= pooled[k]) ++ia;
    while (ib < sb.size() && sb[ib] <= pooled[k]) ++ib;
    total += std::abs(static_cast<double>(ia) / na - static_cast<double>(ib) / nb) *
             (pooled[k + 1] - pooled[k]);
  }
  return total;
}

std::optional<double> prediction_set_distance(const PredictionSet& a, const PredictionSet& b,
                                              WdistMode mode) {
  if (mode == WdistMode::kTypicalnessValues) return wasserstein_samples(a.typicalness, b.typicalness);
  try {
    return wasserstein_1d(predictive_pmf(a), predictive_pmf(b));
  } catch (const DegeneracyError&) {
    return std::nullopt;
  }
}

std::vector<WdistRow> run_wdist_experiment(const WdistConfig& cfg, const PredictorFactory& icl,
                                           const PredictorFactory& ridge) {
  if (cfg.shapes.empty()) throw ArgumentError("run_wdist_experiment: no (d, n) shapes configured");
  if (cfg.runs < 1 || cfg.tests_per_run < 1) throw ArgumentError("run_wdist_experiment: runs and tests must be >= 1");
  std::vector<WdistRow> rows;
  for (const auto& [d, n] : cfg.shapes) {
    ExperimentConfig exp;
    exp.runs = cfg.runs;
    exp.tests_per_run = cfg.tests_per_run;
    exp.alpha = cfg.alpha;
    exp.grid_size = cfg.grid_size;
    exp.gen = cfg.gen;
    exp.gen.d = d;
    exp.gen.n = n;
    exp.validate();
    const auto icl_pred = icl(d, n);
    const auto ridge_pred = ridge(d, n);
    if (!icl_pred || !ridge_pred) throw ArgumentError("run_wdist_experiment: factory returned null");

    std::vector<double> sums(static_cast<std::size_t>(cfg.runs), 0.0);
    std::vector<int> counts(static_cast<std::size_t>(cfg.runs), 0);
    std::vector<int> skipped(static_cast<std::size_t>(cfg.runs), 0);
    parallel_for(sums.size(), cfg.workers, [&](std::size_t r) {
      const RunData data = sample_run(exp, static_cast<int>(r));
      const Grid grid = build_grid(data.y_ctx, cfg.grid_size);
      for (Eigen::Index t = 0; t < data.X_test.rows(); ++t) {
        const Eigen::VectorXd x = data.X_test.row(t).transpose();
        const auto a = full_cp(*icl_pred, data.X_ctx, data.y_ctx, x, cfg.alpha, grid);
        const auto b = full_cp(*ridge_pred, data.X_ctx, data.y_ctx, x, cfg.alpha, grid);
        if (const auto w = prediction_set_distance(a, b, cfg.mode)) {
          sums[r] += *w;
          counts[r] += 1;
        } else {
          skipped[r] += 1;
        }
      }
    });
    WdistRow row;
    row.d = d;
    row.n = n;
    row.ratio = static_cast<double>(d) / static_cast<double>(n);
    const double total = std::accumulate(sums.begin(), sums.end(), 0.0);
    const int count = std::accumulate(counts.begin(), counts.end(), 0);
    row.skipped = std::accumulate(skipped.begin(), skipped.end(), 0);
    row.mean_w1 = count > 0 ? total / count : std::nan("");
    rows.push_back(row);
  }
  return rows;
}

std::vector<OodRow> run_ood_experiment(const OodConfig& cfg, const Predictor& icl,
                                       const Predictor& ridge) {
  if (cfg.a_values.empty() && cfg.sigma_w_values.empty()) {
    throw ArgumentError("run_ood_experiment: empty sweep");
  }
  cfg.base.validate();
  std::vector<OodRow> rows;
  auto evaluate = [&](const std::string& parameter, double value, DistributionShift shift) {
    ExperimentConfig exp = cfg.base;
    exp.method = Method::kCpIcl;
    exp.shift = shift;
    exp.validate();
    std::vector<double> coverage(static_cast<std::size_t>(exp.runs));
    std::vector<double> w1_sum(coverage.size(), 0.0);
    std::vector<int> w1_count(coverage.size(), 0);
    parallel_for(coverage.size(), exp.workers, [&](std::size_t r) {
      const RunData data = sample_run(exp, static_cast<int>(r));
      const Grid grid = build_grid(data.y_ctx, exp.grid_size);
      int covered = 0;
      for (Eigen::Index t = 0; t < data.X_test.rows(); ++t) {
        const Eigen::VectorXd x = data.X_test.row(t).transpose();
        const auto a = full_cp(icl, data.X_ctx, data.y_ctx, x, exp.alpha, grid);
        const auto b = full_cp(ridge, data.X_ctx, data.y_ctx, x, exp.alpha, grid);
        covered += a.covers(data.y_test[t]) ? 1 : 0;
        if (const auto w = prediction_set_distance(a, b, cfg.mode)) {
          w1_sum[r] += *w;
          w1_count[r] += 1;
        }
      }
      coverage[r] = static_cast<double>(covered) / static_cast<double>(data.X_test.rows());
    });
    OodRow row;
    row.parameter = parameter;
    row.value = value;
    row.coverage = aggregate(coverage);
    const double total = std::accumulate(w1_sum.begin(), w1_sum.end(), 0.0);
    const int count = std::accumulate(w1_count.begin(), w1_count.end(), 0);
    row.mean_w1 = count > 0 ? total / count : std::nan("");
    rows.push_back(row);
  };
  for (double a : cfg.a_values) evaluate("a", a, DistributionShift{a, cfg.base.gen.sigma_w});
  for (double s : cfg.sigma_w_values) evaluate("sigma_w", s, DistributionShift{cfg.base.gen.a, s});
  return rows;
}

std::vector<double> log_spaced(double lo, double hi, int count) {
  if (!(lo > 0.0 && hi >= lo) || count < 1) throw ArgumentError("log_spaced: need 0 < lo <= hi and count >= 1");
  if (count == 1) return {lo};
  std::vector<double> out(static_cast<std::size_t>(count));
  const double step = std::log(hi / lo) / (count - 1);
  for (int k = 0; k < count; ++k) out[k] = lo * std::exp(step * k);
  out.back() = hi;
  return out;
}

std::vector<BenchRow> benchmark_time(const BenchConfig& cfg, std::span<const BenchMethod> methods) {
  if (methods.empty()) throw ArgumentError("benchmark_time: no methods given");
  if (cfg.repetitions < 1 || cfg.warmup < 0 || cfg.tests_per_batch < 1) {
    throw ArgumentError("benchmark_time: repetitions and tests_per_batch must be >= 1");
  }
  std::vector<BenchRow> rows;
  for (const BenchMethod& method : methods) {
    if (is_full_cp(method.kind) && !method.predictor) {
      throw ArgumentError("benchmark_time: " + to_string(method.kind) + " needs a predictor");
    }
    for (int n : cfg.context_sizes) {
      ExperimentConfig exp;
      exp.gen = cfg.gen;
      exp.gen.n = n;
      exp.tests_per_run = cfg.tests_per_batch;
      exp.alpha = cfg.alpha;
      exp.grid_size = cfg.grid_size;
      exp.lambda = cfg.lambda;
      exp.validate();
      const double lambda = exp.ridge_lambda();

      std::vector<double> times;
      double sink = 0.0;
      for (int rep = 0; rep < cfg.warmup + cfg.repetitions; ++rep) {
        const RunData data = sample_run(exp, rep);
        const auto start = Clock::now();
        if (is_full_cp(method.kind)) {
          const Grid grid = build_grid(data.y_ctx, cfg.grid_size);
          for (Eigen::Index t = 0; t < data.X_test.rows(); ++t) {
            const auto set = full_cp(*method.predictor, data.X_ctx, data.y_ctx,
                                     data.X_test.row(t).transpose(), cfg.alpha, grid);
            sink += set.hull_width();
          }
        } else {
          const SplitConformal split =
              make_split(data.X_ctx, data.y_ctx, cfg.alpha, lambda, cfg.split_train_fraction);
          for (Eigen::Index t = 0; t < data.X_test.rows(); ++t) {
            sink += split.interval(data.X_test.row(t).transpose()).q;
          }
        }
        const double elapsed = seconds_since(start);
        if (rep >= cfg.warmup) times.push_back(elapsed);
      }
      (void)sink;
      const Aggregate agg = aggregate(times);
      rows.push_back(BenchRow{to_string(method.kind), n, agg.median, agg.lo, agg.hi});
    }
  }
  return rows;
}

}  // namespace iclcp
