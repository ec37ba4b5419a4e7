#pragma once

#include <Eigen/Dense>

namespace iclcp {

struct RidgeModel {
  Eigen::VectorXd w_hat;
  double lambda = 0.0;
};

/// argmin_w sum_i (y_i - w.x_i)^2 + lambda |w|^2 via Cholesky of X^T X + lambda I.
/// lambda = 0 with a rank-deficient design raises RankDeficiencyError.
RidgeModel ridge_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda);

/// ridge_fit on the context plus the single extra point (x_new, z).
/// The context may be empty (0 rows).
RidgeModel ridge_fit_augmented(const Eigen::MatrixXd& X_ctx, const Eigen::VectorXd& y_ctx,
                               const Eigen::VectorXd& x_new, double z, double lambda);

Eigen::VectorXd ridge_predict(const RidgeModel& model, const Eigen::MatrixXd& X);

/// sigma_w^2 / sigma_n^2, the ICL-equivalent ridge penalty as usually stated.
/// Note the usual Bayes-optimal penalty is the inverse ratio; pass lambda
/// explicitly to use that instead.
double bayes_lambda(double sigma_w, double sigma_n);

/// Ridge on the augmented dataset for one fixed x_new and many candidate labels.
///
/// The normal matrix X^T X + x x^T + lambda I does not depend on z, so it is
/// factored once and w(z) = w0 + z * w1 with w0 = A^{-1} X^T y, w1 = A^{-1} x.
class AugmentedRidge {
 public:
  AugmentedRidge(const Eigen::MatrixXd& X_ctx, const Eigen::VectorXd& y_ctx,
                 const Eigen::VectorXd& x_new, double lambda);

  Eigen::VectorXd weights(double z) const { return base_weights_ + z * label_weights_; }
  /// Predictions at the n context points followed by x_new.
  Eigen::VectorXd predictions(double z) const {
    return base_predictions_ + z * label_predictions_;
  }

 private:
  Eigen::VectorXd base_weights_;
  Eigen::VectorXd label_weights_;
  Eigen::VectorXd base_predictions_;
  Eigen::VectorXd label_predictions_;
};

}  // namespace iclcp
