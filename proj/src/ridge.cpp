#include "iclcp/ridge.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "iclcp/errors.hpp"

namespace iclcp {
namespace {

void check_lambda(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ArgumentError("ridge: lambda must be finite and >= 0");
  }
}

// Cholesky of the (already regularized) normal matrix; rejects singular systems.
Eigen::LLT<Eigen::MatrixXd> factor_normal_matrix(const Eigen::MatrixXd& A, double lambda) {
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  const bool failed = llt.info() != Eigen::Success;
  // rcond() is an estimate; 1e-12 leaves room for well-posed but scaled problems.
  if (failed || (lambda == 0.0 && llt.rcond() < 1e-12)) {
    throw RankDeficiencyError(
        "ridge: X^T X is singular; use lambda > 0 or a full-column-rank design");
  }
  return llt;
}

}  // namespace

RidgeModel ridge_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda) {
  check_lambda(lambda);
  if (X.rows() < 1) throw ArgumentError("ridge_fit: need at least one sample");
  if (X.cols() < 1) throw DimensionError("ridge_fit: design has no columns");
  if (y.size() != X.rows()) {
    throw DimensionError("ridge_fit: " + std::to_string(X.rows()) + " rows but " +
                         std::to_string(y.size()) + " labels");
  }
  Eigen::MatrixXd A = X.transpose() * X;
  A.diagonal().array() += lambda;
  const auto llt = factor_normal_matrix(A, lambda);
  return RidgeModel{llt.solve(X.transpose() * y), lambda};
}

RidgeModel ridge_fit_augmented(const Eigen::MatrixXd& X_ctx, const Eigen::VectorXd& y_ctx,
                               const Eigen::VectorXd& x_new, double z, double lambda) {
  const Eigen::Index n = X_ctx.rows();
  const Eigen::Index d = x_new.size();
  if (n > 0 && X_ctx.cols() != d) throw DimensionError("ridge_fit_augmented: feature count mismatch");
  if (y_ctx.size() != n) throw DimensionError("ridge_fit_augmented: label count mismatch");
  Eigen::MatrixXd X(n + 1, d);
  Eigen::VectorXd y(n + 1);
  if (n > 0) {
    X.topRows(n) = X_ctx;
    y.head(n) = y_ctx;
  }
  X.row(n) = x_new.transpose();
  y[n] = z;
  return ridge_fit(X, y, lambda);
}

Eigen::VectorXd ridge_predict(const RidgeModel& model, const Eigen::MatrixXd& X) {
  if (X.cols() != model.w_hat.size()) {
    throw DimensionError("ridge_predict: expected " + std::to_string(model.w_hat.size()) +
                         " columns, got " + std::to_string(X.cols()));
  }
  return X * model.w_hat;
}

double bayes_lambda(double sigma_w, double sigma_n) {
  if (!(sigma_n > 0.0)) {
    throw ArgumentError("bayes_lambda: sigma_n must be > 0 (use lambda = 0 for noiseless data)");
  }
  if (!(sigma_w > 0.0)) throw ArgumentError("bayes_lambda: sigma_w must be > 0");
  return (sigma_w * sigma_w) / (sigma_n * sigma_n);
}

AugmentedRidge::AugmentedRidge(const Eigen::MatrixXd& X_ctx, const Eigen::VectorXd& y_ctx,
                               const Eigen::VectorXd& x_new, double lambda) {
  check_lambda(lambda);
  const Eigen::Index n = X_ctx.rows();
  const Eigen::Index d = x_new.size();
  if (n > 0 && X_ctx.cols() != d) throw DimensionError("AugmentedRidge: feature count mismatch");
  if (y_ctx.size() != n) throw DimensionError("AugmentedRidge: label count mismatch");

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
  if (n > 0) {
    A = X_ctx.transpose() * X_ctx;
    b = X_ctx.transpose() * y_ctx;
  }
  A.noalias() += x_new * x_new.transpose();
  A.diagonal().array() += lambda;
  const auto llt = factor_normal_matrix(A, lambda);
  base_weights_ = llt.solve(b);
  label_weights_ = llt.solve(x_new);

  Eigen::MatrixXd X_all(n + 1, d);
  if (n > 0) X_all.topRows(n) = X_ctx;
  X_all.row(n) = x_new.transpose();
  base_predictions_ = X_all * base_weights_;
  label_predictions_ = X_all * label_weights_;
}

}  // namespace iclcp
