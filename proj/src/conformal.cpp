#include "iclcp/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "iclcp/errors.hpp"

namespace iclcp {
namespace {

void check_context(const Eigen::MatrixXd& X_ctx, const Eigen::VectorXd& y_ctx,
                   const Eigen::VectorXd& x_new) {
  if (X_ctx.rows() != y_ctx.size()) {
    throw DimensionError("context has " + std::to_string(X_ctx.rows()) + " rows but " +
                         std::to_string(y_ctx.size()) + " labels");
  }
  if (X_ctx.rows() > 0 && X_ctx.cols() != x_new.size()) {
    throw DimensionError("context has " + std::to_string(X_ctx.cols()) +
                         " features but x_new has " + std::to_string(x_new.size()));
  }
}

}  // namespace

Eigen::MatrixXd Predictor::predict_grid(const Eigen::MatrixXd& X_ctx, const Eigen::VectorXd& y_ctx,
                                        const Eigen::VectorXd& x_new,
                                        std::span<const double> grid) const {
  Eigen::MatrixXd out(y_ctx.size() + 1, static_cast<Eigen::Index>(grid.size()));
  for (std::size_t k = 0; k < grid.size(); ++k) {
    out.col(static_cast<Eigen::Index>(k)) = predict(X_ctx, y_ctx, x_new, grid[k]);
  }
  return out;
}

IclPredictor::IclPredictor(LsaParams params) : params_(std::move(params)) { params_.validate(); }

Eigen::VectorXd IclPredictor::predict(const Eigen::MatrixXd& X_ctx, const Eigen::VectorXd& y_ctx,
                                      const Eigen::VectorXd& x_new, double z) const {
  check_context(X_ctx, y_ctx, x_new);
  return predict_labels(params_, tokenize(X_ctx, y_ctx, x_new, z));
}

Eigen::MatrixXd IclPredictor::predict_grid(const Eigen::MatrixXd& X_ctx,
                                           const Eigen::VectorXd& y_ctx,
                                           const Eigen::VectorXd& x_new,
                                           std::span<const double> grid) const {
  check_context(X_ctx, y_ctx, x_new);
  TokenMatrix tokens = tokenize(X_ctx, y_ctx, x_new, 0.0);
  Eigen::MatrixXd out(y_ctx.size() + 1, static_cast<Eigen::Index>(grid.size()));
  for (std::size_t k = 0; k < grid.size(); ++k) {
    tokens.set_query_label(grid[k]);
    out.col(static_cast<Eigen::Index>(k)) = predict_labels(params_, tokens);
  }
  return out;
}

RidgeOraclePredictor::RidgeOraclePredictor(double lambda, RidgeOraclePath path)
    : lambda_(lambda), path_(path) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ArgumentError("ridge oracle: lambda must be finite and >= 0");
  }
}

Eigen::VectorXd RidgeOraclePredictor::predict(const Eigen::MatrixXd& X_ctx,
                                              const Eigen::VectorXd& y_ctx,
                                              const Eigen::VectorXd& x_new, double z) const {
  check_context(X_ctx, y_ctx, x_new);
  const RidgeModel model = ridge_fit_augmented(X_ctx, y_ctx, x_new, z, lambda_);
  Eigen::VectorXd out(y_ctx.size() + 1);
  if (y_ctx.size() > 0) out.head(y_ctx.size()) = ridge_predict(model, X_ctx);
  out[y_ctx.size()] = x_new.dot(model.w_hat);
  return out;
}

Eigen::MatrixXd RidgeOraclePredictor::predict_grid(const Eigen::MatrixXd& X_ctx,
                                                   const Eigen::VectorXd& y_ctx,
                                                   const Eigen::VectorXd& x_new,
                                                   std::span<const double> grid) const {
  if (path_ == RidgeOraclePath::kRefit) return Predictor::predict_grid(X_ctx, y_ctx, x_new, grid);
  check_context(X_ctx, y_ctx, x_new);
  const AugmentedRidge solver(X_ctx, y_ctx, x_new, lambda_);
  Eigen::MatrixXd out(y_ctx.size() + 1, static_cast<Eigen::Index>(grid.size()));
  for (std::size_t k = 0; k < grid.size(); ++k) {
    out.col(static_cast<Eigen::Index>(k)) = solver.predictions(grid[k]);
  }
  return out;
}

IclPredictor icl_predictor(LsaParams params) { return IclPredictor(std::move(params)); }

RidgeOraclePredictor ridge_oracle_predictor(double lambda, RidgeOraclePath path) {
  return RidgeOraclePredictor(lambda, path);
}

Grid::Grid(std::vector<double> values) : values_(std::move(values)) {
  if (values_.size() < 2) throw ArgumentError("grid needs at least 2 values");
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (!std::isfinite(values_[k])) throw ArgumentError("grid values must be finite");
    if (k > 0 && !(values_[k] > values_[k - 1])) {
      throw ArgumentError("grid values must be strictly increasing");
    }
  }
}

Grid build_grid(const Eigen::VectorXd& y_ctx, int K) {
  if (K < 2) throw ArgumentError("build_grid: K must be >= 2, got " + std::to_string(K));
  if (y_ctx.size() < 1) throw ArgumentError("build_grid: need at least one context label");
  const double y_min = y_ctx.minCoeff();
  const double y_max = y_ctx.maxCoeff();
  const double range = y_max - y_min;
  double lo = y_min - 0.25 * range;
  double hi = y_max + 0.25 * range;
  if (range == 0.0) {
    lo = y_min - 1.0;
    hi = y_min + 1.0;
  }
  std::vector<double> values(static_cast<std::size_t>(K));
  const double step = (hi - lo) / static_cast<double>(K - 1);
  for (int k = 0; k < K; ++k) values[k] = lo + step * k;
  values.back() = hi;
  return Grid(std::move(values));
}

std::size_t PredictionSet::accepted_count() const {
  return static_cast<std::size_t>(std::count(accepted.begin(), accepted.end(), true));
}

double PredictionSet::accepted_measure() const {
  const auto& z = grid.values();
  double total = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    if (!accepted[k]) continue;
    const double left = k == 0 ? z[0] : 0.5 * (z[k - 1] + z[k]);
    const double right = k + 1 == z.size() ? z[k] : 0.5 * (z[k] + z[k + 1]);
    total += right - left;
  }
  return total;
}

Eigen::VectorXd conformity_scores(const Eigen::VectorXd& y_ctx, const Eigen::VectorXd& y_pred,
                                  double z) {
  const Eigen::Index n = y_ctx.size();
  if (y_pred.size() != n + 1) {
    throw DimensionError("conformity_scores: expected " + std::to_string(n + 1) +
                         " predictions, got " + std::to_string(y_pred.size()));
  }
  Eigen::VectorXd scores(n + 1);
  scores.head(n) = (y_ctx - y_pred.head(n)).cwiseAbs();
  scores[n] = std::abs(z - y_pred[n]);
  return scores;
}

int conformity_rank(const Eigen::VectorXd& scores) {
  if (scores.size() < 1) throw ArgumentError("conformity_rank: empty score vector");
  const double candidate = scores[scores.size() - 1];
  return static_cast<int>((scores.array() <= candidate).count());
}

double typicalness(const Eigen::VectorXd& scores) {
  const int rank = conformity_rank(scores);
  // (n + 1 - rank) / (n + 1) rather than 1 - rank / (n + 1): one rounding, so values
  // such as 2/20 compare equal to the literal alpha 0.1.
  const auto total = static_cast<double>(scores.size());
  return (total - static_cast<double>(rank)) / total;
}

PredictionSet make_prediction_set(Grid grid, std::vector<double> typicalness_values, double alpha) {
  if (typicalness_values.size() != grid.size()) {
    throw DimensionError("make_prediction_set: one typicalness value per grid point required");
  }
  PredictionSet set;
  set.alpha = alpha;
  set.accepted.resize(grid.size());
  std::optional<std::size_t> first;
  std::optional<std::size_t> last;
  std::size_t runs = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const bool ok = typicalness_values[k] >= alpha;
    set.accepted[k] = ok;
    if (!ok) continue;
    if (!first) first = k;
    if (!last || *last + 1 != k) ++runs;
    last = k;
  }
  if (first) set.interval = Interval{grid[*first], grid[*last]};
  set.contiguous = runs == 1;
  set.grid = std::move(grid);
  set.typicalness = std::move(typicalness_values);
  return set;
}

PredictionSet full_cp(const Predictor& predictor, const Eigen::MatrixXd& X_ctx,
                      const Eigen::VectorXd& y_ctx, const Eigen::VectorXd& x_new, double alpha,
                      const Grid& grid) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("full_cp: alpha must be in (0, 1)");
  check_context(X_ctx, y_ctx, x_new);
  if (grid.size() < 2) throw ArgumentError("full_cp: grid is empty");
  const Eigen::Index n = y_ctx.size();
  const Eigen::MatrixXd predictions = predictor.predict_grid(X_ctx, y_ctx, x_new, grid.values());
  if (predictions.rows() != n + 1 || predictions.cols() != static_cast<Eigen::Index>(grid.size())) {
    throw DimensionError("predictor " + predictor.name() + " returned the wrong shape");
  }

  std::vector<double> pi(grid.size());
  Eigen::VectorXd scores(n + 1);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto col = predictions.col(static_cast<Eigen::Index>(k));
    scores.head(n) = (y_ctx - col.head(n)).cwiseAbs();
    scores[n] = std::abs(grid[k] - col[n]);
    pi[k] = typicalness(scores);
  }
  return make_prediction_set(grid, std::move(pi), alpha);
}

int split_quantile_index(int n_cal, double alpha) {
  if (n_cal < 1) throw ArgumentError("split conformal: need at least one calibration point");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("split conformal: alpha must be in (0, 1)");
  // Slack absorbs rounding in (1 - alpha) * (n + 1) for exact products such as 0.9 * 10.
  return static_cast<int>(std::ceil((1.0 - alpha) * (n_cal + 1) - 1e-9));
}

SplitConformal::SplitConformal(const Eigen::MatrixXd& X_train, const Eigen::VectorXd& y_train,
                               const Eigen::MatrixXd& X_cal, const Eigen::VectorXd& y_cal,
                               double alpha, double lambda)
    : model_(ridge_fit(X_train, y_train, lambda)) {
  if (X_cal.rows() != y_cal.size()) throw DimensionError("split conformal: calibration size mismatch");
  const int n_cal = static_cast<int>(y_cal.size());
  const int index = split_quantile_index(n_cal, alpha);
  if (index > n_cal) {
    unbounded_ = true;
    q_ = std::numeric_limits<double>::infinity();
    return;
  }
  Eigen::VectorXd residuals = (y_cal - ridge_predict(model_, X_cal)).cwiseAbs();
  std::vector<double> r(residuals.data(), residuals.data() + residuals.size());
  std::nth_element(r.begin(), r.begin() + (index - 1), r.end());
  q_ = r[static_cast<std::size_t>(index - 1)];
}

SplitInterval SplitConformal::interval(const Eigen::VectorXd& x_new) const {
  if (x_new.size() != model_.w_hat.size()) throw DimensionError("split conformal: x_new size mismatch");
  SplitInterval out;
  out.center = x_new.dot(model_.w_hat);
  out.q = q_;
  out.unbounded = unbounded_;
  out.lo = out.center - q_;
  out.hi = out.center + q_;
  return out;
}

SplitInterval split_cp(const Eigen::MatrixXd& X_train, const Eigen::VectorXd& y_train,
                       const Eigen::MatrixXd& X_cal, const Eigen::VectorXd& y_cal,
                       const Eigen::VectorXd& x_new, double alpha, double lambda) {
  return SplitConformal(X_train, y_train, X_cal, y_cal, alpha, lambda).interval(x_new);
}

}  // namespace iclcp
