#include "iclcp/taskgen.hpp"

#include <cmath>
#include <string>

#include "iclcp/errors.hpp"

namespace iclcp {

void GenConfig::validate() const {
  if (d < 1) throw ConfigError("gen.d must be >= 1, got " + std::to_string(d));
  if (n < 1) throw ConfigError("gen.n must be >= 1, got " + std::to_string(n));
  if (!(a > 0.0) || !std::isfinite(a)) throw ConfigError("gen.a must be > 0");
  if (!(sigma_w > 0.0) || !std::isfinite(sigma_w)) throw ConfigError("gen.sigma_w must be > 0");
  if (!(sigma_n >= 0.0) || !std::isfinite(sigma_n)) throw ConfigError("gen.sigma_n must be >= 0");
}

TokenMatrix::TokenMatrix(Eigen::MatrixXd data) : data_(std::move(data)) {
  if (data_.rows() < 2 || data_.cols() < 1) {
    throw DimensionError("token matrix needs at least 2 rows and 1 column");
  }
}

TaskSample sample_task(const GenConfig& cfg, Rng& rng) {
  return sample_task(cfg, rng, cfg.n + 1);
}

TaskSample sample_task(const GenConfig& cfg, Rng& rng, int num_points) {
  cfg.validate();
  if (num_points < 1) throw ArgumentError("sample_task: num_points must be >= 1");
  TaskSample task;
  task.w.resize(cfg.d);
  for (int j = 0; j < cfg.d; ++j) task.w[j] = rng.normal(0.0, cfg.sigma_w);
  task.X.resize(num_points, cfg.d);
  for (int i = 0; i < num_points; ++i) {
    for (int j = 0; j < cfg.d; ++j) task.X(i, j) = rng.uniform(-cfg.a, cfg.a);
  }
  task.noise.resize(num_points);
  for (int i = 0; i < num_points; ++i) {
    task.noise[i] = cfg.sigma_n > 0.0 ? rng.normal(0.0, cfg.sigma_n) : 0.0;
  }
  task.y = task.X * task.w + task.noise;
  return task;
}

TokenMatrix tokenize(const Eigen::MatrixXd& X_ctx, const Eigen::VectorXd& y_ctx,
                     const Eigen::VectorXd& x_query, double z) {
  const Eigen::Index n = X_ctx.rows();
  const Eigen::Index d = x_query.size();
  if (d < 1) throw DimensionError("tokenize: query must have at least one feature");
  if (n > 0 && X_ctx.cols() != d) {
    throw DimensionError("tokenize: context has " + std::to_string(X_ctx.cols()) +
                         " features but query has " + std::to_string(d));
  }
  if (y_ctx.size() != n) {
    throw DimensionError("tokenize: " + std::to_string(n) + " context rows but " +
                         std::to_string(y_ctx.size()) + " labels");
  }
  Eigen::MatrixXd E(d + 1, n + 1);
  if (n > 0) {
    E.topLeftCorner(d, n) = X_ctx.transpose();
    E.bottomLeftCorner(1, n) = y_ctx.transpose();
  }
  E.col(n).head(d) = x_query;
  E(d, n) = z;
  return TokenMatrix(std::move(E));
}

std::vector<TrainingExample> sample_batch(const GenConfig& cfg, int batch_size, Rng& rng) {
  cfg.validate();
  if (batch_size < 1) throw ArgumentError("sample_batch: batch_size must be >= 1");
  std::vector<TrainingExample> batch;
  batch.reserve(batch_size);
  for (int b = 0; b < batch_size; ++b) {
    TaskSample task = sample_task(cfg, rng);
    const int n = cfg.n;
    TrainingExample ex{tokenize(task.X.topRows(n), task.y.head(n), task.X.row(n).transpose(), 0.0),
                       task.y[n]};
    batch.push_back(std::move(ex));
  }
  return batch;
}

}  // namespace iclcp
