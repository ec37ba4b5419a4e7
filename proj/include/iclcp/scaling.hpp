#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "iclcp/eval.hpp"
#include "iclcp/lsa_model.hpp"

namespace iclcp {

struct ScalingDatapoint {
  double N = 0.0;      // parameters
  double D = 0.0;      // training targets consumed
  double loss = 0.0;   // interval-quality metric
  double flops = 0.0;  // total training FLOPs
};

/// Coefficients of L(N, D) = E + A / N^alpha + B / D^beta.
struct ScalingParams {
  double alpha = 0.0;
  double beta = 0.0;
  double A = 0.0;
  double B = 0.0;
  double E = 0.0;
};

double scaling_law(double N, double D, const ScalingParams& p);

struct RestartDiagnostic {
  ScalingParams start;
  ScalingParams result;
  double objective = 0.0;
  int iterations = 0;
  bool finite = false;
};

struct ScalingFit {
  ScalingParams params;
  /// Compute-optimal exponents: N_opt ~ C^a, D_opt ~ C^b; b is stored as 1 - a.
  double a = 0.0;
  double b = 0.0;
  double fit_loss = 0.0;
  std::vector<RestartDiagnostic> restarts;

  double predict(double N, double D) const { return scaling_law(N, D, params); }
  static ScalingFit from_params(const ScalingParams& p);
};

/// (y_true - y_pred) when positive, otherwise lambda_asym * |y_true - y_pred|.
double asymmetric_mae(double y_true, double y_pred, double lambda_asym);

/// (1/K) sum_i asymmetric_mae(log f(N_i, D_i), log loss_i).
double scaling_objective(std::span<const ScalingDatapoint> data, const ScalingParams& p,
                         double lambda_asym);

struct ScalingFitOptions {
  double lambda_asym = 0.1;
  int n_starts = 64;
  unsigned workers = 0;
};

/// Multi-start quasi-Newton fit in (log alpha, log beta, log A, log B, log E).
/// Each restart runs BFGS on a softplus-smoothed version of the objective with a
/// shrinking temperature; restarts are ranked by the exact objective.
ScalingFit fit_scaling_law(std::span<const ScalingDatapoint> data,
                           const ScalingFitOptions& options = {});

/// Total training FLOPs as a function of (N, D).
using FlopsModel = std::function<double(double N, double D)>;

/// k * N * D.
FlopsModel bilinear_flops_model(double k);

/// Analytic LSA training cost: (D / batch) steps of count_flops_per_step, with
/// the layer count L = N / (4 (d+1)^2) treated as continuous.
FlopsModel lsa_flops_model(int d, int n, int batch_size);

/// The D with flops_model(N, D) = C (flops_model increasing in D).
double solve_data_for_budget(const FlopsModel& flops_model, double N, double C);

struct Allocation {
  double N = 0.0;
  double D = 0.0;
  double loss = 0.0;
};

/// argmin_{N, D} f(N, D) subject to flops_model(N, D) = C.
Allocation optimal_allocation(const ScalingFit& fit, double C, const FlopsModel& flops_model);

/// n_points along flops_model(N, D) = C, log-spaced in N over
/// [N_hat / 10^decades, N_hat * 10^decades]; a single point is N_hat itself.
std::vector<Allocation> isoflop_contour(const ScalingFit& fit, double C,
                                        const FlopsModel& flops_model, int n_points,
                                        double decades = 2.0);

struct ScalingEvalConfig {
  /// Evaluation suite; gen.d and gen.n are taken from each training config.
  ExperimentConfig experiment;
  std::uint64_t train_seed = 0;
};

struct ScalingOutcome {
  TrainConfig config;
  std::optional<ScalingDatapoint> point;
  /// "ok" or the error message of the failed config.
  std::string status;
  double coverage = 0.0;
};

/// Trains every config and scores it by the mean CP-with-ICL interval width
/// (median width per run, averaged over runs) on the evaluation suite.
std::vector<ScalingOutcome> collect_scaling_data(std::span<const TrainConfig> train_cfgs,
                                                 const ScalingEvalConfig& eval_cfg);

}  // namespace iclcp
