#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iclcp/lsa_model.hpp"
#include "iclcp/ridge.hpp"

namespace iclcp {

/// Anything that maps (context, x_new, candidate z) to predictions for all
/// n+1 points. Implementations must be deterministic, read-only, and
/// symmetric in the n context pairs; full_cp calls them from several threads.
class Predictor {
 public:
  virtual ~Predictor() = default;

  virtual std::string name() const = 0;

  /// Vector of length n+1: predictions at x_1..x_n, then at x_new.
  virtual Eigen::VectorXd predict(const Eigen::MatrixXd& X_ctx, const Eigen::VectorXd& y_ctx,
                                  const Eigen::VectorXd& x_new, double z) const = 0;

  /// (n+1) x K matrix whose column k equals predict(..., grid[k]).
  virtual Eigen::MatrixXd predict_grid(const Eigen::MatrixXd& X_ctx, const Eigen::VectorXd& y_ctx,
                                       const Eigen::VectorXd& x_new,
                                       std::span<const double> grid) const;
};

/// Conformity scores from one forward pass per z of a trained LSA model.
class IclPredictor final : public Predictor {
 public:
  explicit IclPredictor(LsaParams params);

  std::string name() const override { return "cp_icl"; }
  Eigen::VectorXd predict(const Eigen::MatrixXd& X_ctx, const Eigen::VectorXd& y_ctx,
                          const Eigen::VectorXd& x_new, double z) const override;
  Eigen::MatrixXd predict_grid(const Eigen::MatrixXd& X_ctx, const Eigen::VectorXd& y_ctx,
                               const Eigen::VectorXd& x_new,
                               std::span<const double> grid) const override;

  const LsaParams& params() const { return params_; }

 private:
  LsaParams params_;
};

enum class RidgeOraclePath {
  /// Solve the augmented ridge problem from scratch for every z.
  kRefit,
  /// Factor the z-independent normal matrix once per x_new (AugmentedRidge).
  kFactorOnce,
};

/// Exact CP-with-ridge oracle: ridge on D_n plus (x_new, z), predictions at all n+1 points.
class RidgeOraclePredictor final : public Predictor {
 public:
  explicit RidgeOraclePredictor(double lambda, RidgeOraclePath path = RidgeOraclePath::kFactorOnce);

  std::string name() const override { return "cp_ridge"; }
  Eigen::VectorXd predict(const Eigen::MatrixXd& X_ctx, const Eigen::VectorXd& y_ctx,
                          const Eigen::VectorXd& x_new, double z) const override;
  Eigen::MatrixXd predict_grid(const Eigen::MatrixXd& X_ctx, const Eigen::VectorXd& y_ctx,
                               const Eigen::VectorXd& x_new,
                               std::span<const double> grid) const override;

  double lambda() const { return lambda_; }
  RidgeOraclePath path() const { return path_; }

 private:
  double lambda_;
  RidgeOraclePath path_;
};

IclPredictor icl_predictor(LsaParams params);
RidgeOraclePredictor ridge_oracle_predictor(double lambda,
                                            RidgeOraclePath path = RidgeOraclePath::kFactorOnce);

/// Strictly increasing candidate labels, at least two of them.
class Grid {
 public:
  Grid() = default;
  explicit Grid(std::vector<double> values);

  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t k) const { return values_[k]; }
  double front() const { return values_.front(); }
  double back() const { return values_.back(); }

 private:
  std::vector<double> values_;
};

inline constexpr int kDefaultGridSize = 1000;

/// K equally spaced values on [min y - 0.25 range, max y + 0.25 range];
/// [y - 1, y + 1] when all labels are equal.
Grid build_grid(const Eigen::VectorXd& y_ctx, int K = kDefaultGridSize);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
  bool contains(double y) const { return lo <= y && y <= hi; }
};

struct PredictionSet {
  Grid grid;
  std::vector<double> typicalness;
  double alpha = 0.1;
  std::vector<bool> accepted;
  /// [min, max] of the accepted grid values; empty when nothing is accepted.
  std::optional<Interval> interval;
  /// True when the accepted grid points form one run.
  bool contiguous = false;

  bool empty() const { return !interval.has_value(); }
  std::size_t accepted_count() const;
  /// Width of the enclosing interval (0 when empty).
  double hull_width() const { return interval ? interval->width() : 0.0; }
  /// Total length of the grid cells (midpoint partition) of accepted points.
  double accepted_measure() const;
  /// Whether y falls inside the enclosing interval.
  bool covers(double y) const { return interval && interval->contains(y); }
};

/// |y_i - yhat_i| for the context, then |z - yhat_{n+1}|.
Eigen::VectorXd conformity_scores(const Eigen::VectorXd& y_ctx, const Eigen::VectorXd& y_pred,
                                  double z);

/// #{i : R_i <= R_{n+1}} over all n+1 scores, the candidate included.
int conformity_rank(const Eigen::VectorXd& scores);

/// 1 - rank / (n+1).
double typicalness(const Eigen::VectorXd& scores);

/// Full conformal prediction set over `grid` (one predictor evaluation per z).
/// An empty set is a valid result (alpha above n/(n+1)).
PredictionSet full_cp(const Predictor& predictor, const Eigen::MatrixXd& X_ctx,
                      const Eigen::VectorXd& y_ctx, const Eigen::VectorXd& x_new, double alpha,
                      const Grid& grid);

/// Builds the set from precomputed typicalness values.
PredictionSet make_prediction_set(Grid grid, std::vector<double> typicalness, double alpha);

struct SplitInterval {
  double center = 0.0;
  double q = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  /// Set when the quantile index exceeds n_cal: q = +inf and the interval is the real line.
  bool unbounded = false;

  double width() const { return 2.0 * q; }
  bool contains(double y) const { return lo <= y && y <= hi; }
};

/// Split conformal with a ridge point predictor, fitted once and reused for many inputs.
class SplitConformal {
 public:
  SplitConformal(const Eigen::MatrixXd& X_train, const Eigen::VectorXd& y_train,
                 const Eigen::MatrixXd& X_cal, const Eigen::VectorXd& y_cal, double alpha,
                 double lambda);

  SplitInterval interval(const Eigen::VectorXd& x_new) const;

  double quantile() const { return q_; }
  bool unbounded() const { return unbounded_; }
  const RidgeModel& model() const { return model_; }

 private:
  RidgeModel model_;
  double q_ = 0.0;
  bool unbounded_ = false;
};

/// ceil((1 - alpha)(n_cal + 1)), the 1-based order statistic used by split CP.
int split_quantile_index(int n_cal, double alpha);

SplitInterval split_cp(const Eigen::MatrixXd& X_train, const Eigen::VectorXd& y_train,
                       const Eigen::MatrixXd& X_cal, const Eigen::VectorXd& y_cal,
                       const Eigen::VectorXd& x_new, double alpha, double lambda);

}  // namespace iclcp
