#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "iclcp/conformal.hpp"
#include "iclcp/taskgen.hpp"

namespace iclcp {

enum class Method { kCpIcl, kCpRidge, kSplitCpRidge };

std::string to_string(Method m);
/// Accepts "cp_icl", "cp_ridge", "split_cp_ridge".
Method parse_method(std::string_view name);

/// Inference-time overrides of the input half-range and the weight scale.
struct DistributionShift {
  double a_inf = 1.0;
  double sigma_w_inf = 1.0;
};

struct ExperimentConfig {
  int runs = 1000;
  int tests_per_run = 100;
  double alpha = 0.1;
  Method method = Method::kCpRidge;
  GenConfig gen;
  std::optional<DistributionShift> shift;
  int grid_size = kDefaultGridSize;
  /// Ridge penalty for the oracle and split CP; defaults to bayes_lambda(sigma_w, sigma_n),
  /// or 0 for noiseless data.
  std::optional<double> lambda;
  /// Fraction of the context used to fit the split-CP point predictor.
  double split_train_fraction = 0.5;
  /// 0 = one worker per hardware thread.
  unsigned workers = 0;

  void validate() const;
  /// gen with the shift applied.
  GenConfig inference_gen() const;
  double ridge_lambda() const;
};

/// Context and test points of one run, all drawn from the same task.
struct RunData {
  Eigen::MatrixXd X_ctx;
  Eigen::VectorXd y_ctx;
  Eigen::MatrixXd X_test;
  Eigen::VectorXd y_test;
};

/// Deterministic in (cfg.gen.seed, run_index).
RunData sample_run(const ExperimentConfig& cfg, int run_index);

struct RunResult {
  double coverage = 0.0;
  double median_width = 0.0;
  double seconds = 0.0;
  int empty_sets = 0;
};

struct Aggregate {
  double median = 0.0;
  double lo = 0.0;  // 2.5th percentile
  double hi = 0.0;  // 97.5th percentile
};

Aggregate aggregate(std::span<const double> values);

struct EvalResult {
  std::vector<RunResult> runs;
  Aggregate coverage;
  Aggregate width;
  Aggregate seconds;

  std::vector<double> coverages() const;
};

/// Coverage/width/time per run. Full-CP methods need `predictor`; split CP ignores it.
/// A test label counts as covered when it lies in the enclosing interval of the set.
EvalResult run_coverage_experiment(const ExperimentConfig& cfg, const Predictor* predictor);

/// Probability mass function over a grid.
struct Pmf {
  std::vector<double> grid;
  std::vector<double> weights;
};

/// Typicalness normalized to unit mass; throws DegeneracyError if it is all zero.
Pmf predictive_pmf(const PredictionSet& set);

/// sum_k |F_a(z_k) - F_b(z_k)| (z_{k+1} - z_k) for pmfs on the same grid.
double wasserstein_1d(const Pmf& a, const Pmf& b);

/// W1 between the empirical distributions of two samples (any sizes).
double wasserstein_samples(std::span<const double> a, std::span<const double> b);

enum class WdistMode {
  /// Typicalness curves normalized to pmfs over the z grid.
  kPredictivePmf,
  /// Empirical distributions of the bare typicalness values.
  kTypicalnessValues,
};

/// W1 between the two sets' distributions under `mode`; nullopt when a pmf is degenerate.
std::optional<double> prediction_set_distance(const PredictionSet& a, const PredictionSet& b,
                                              WdistMode mode);

using PredictorFactory = std::function<std::shared_ptr<const Predictor>(int d, int n)>;

struct WdistConfig {
  /// (d, n) pairs; the reported ratio is d / n.
  std::vector<std::pair<int, int>> shapes;
  int runs = 100;
  int tests_per_run = 20;
  double alpha = 0.1;
  int grid_size = kDefaultGridSize;
  GenConfig gen;  // d and n are overridden per shape
  WdistMode mode = WdistMode::kPredictivePmf;
  unsigned workers = 0;
};

struct WdistRow {
  int d = 0;
  int n = 0;
  double ratio = 0.0;
  double mean_w1 = 0.0;
  /// Test points dropped because one typicalness curve was all zero.
  int skipped = 0;
};

std::vector<WdistRow> run_wdist_experiment(const WdistConfig& cfg, const PredictorFactory& icl,
                                           const PredictorFactory& ridge);

struct OodConfig {
  ExperimentConfig base;  // method is ignored; CP with ICL is evaluated
  std::vector<double> a_values;
  std::vector<double> sigma_w_values;
  WdistMode mode = WdistMode::kPredictivePmf;
};

struct OodRow {
  std::string parameter;  // "a" or "sigma_w"
  double value = 0.0;
  Aggregate coverage;
  double mean_w1 = 0.0;
};

/// Sweeps the inference-time input range (weight scale held at base.gen.sigma_w) and
/// weight scale (input range held at base.gen.a).
std::vector<OodRow> run_ood_experiment(const OodConfig& cfg, const Predictor& icl,
                                       const Predictor& ridge);

/// Log-spaced sweep values on [lo, hi].
std::vector<double> log_spaced(double lo, double hi, int count);

struct BenchMethod {
  Method kind = Method::kCpRidge;
  /// Required for full-CP methods.
  std::shared_ptr<const Predictor> predictor;
};

struct BenchConfig {
  GenConfig gen;  // n is overridden per context size
  std::vector<int> context_sizes{50, 100, 300};
  int repetitions = 30;
  int warmup = 5;
  int tests_per_batch = 10;
  int grid_size = kDefaultGridSize;
  double alpha = 0.1;
  std::optional<double> lambda;
  double split_train_fraction = 0.5;
};

struct BenchRow {
  std::string method;
  int n = 0;
  double median = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

/// Wall-clock seconds per prediction-set construction for a batch of test inputs.
std::vector<BenchRow> benchmark_time(const BenchConfig& cfg, std::span<const BenchMethod> methods);

}  // namespace iclcp
