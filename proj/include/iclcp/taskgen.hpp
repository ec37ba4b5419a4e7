#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "iclcp/rng.hpp"

namespace iclcp {

/// Synthetic linear-regression task family:
/// x ~ U(-a, a)^d, w ~ N(0, sigma_w^2 I), y = x.w + eps, eps ~ N(0, sigma_n^2).
struct GenConfig {
  int d = 1;
  int n = 1;
  double a = 1.0;
  double sigma_w = 1.0;
  // Not given by the method description; 0.25 is our default.
  double sigma_n = 0.25;
  std::uint64_t seed = 0;

  /// Throws ConfigError if any field is out of range.
  void validate() const;
};

/// One task: rows of X are x_1..x_m, y_i = x_i.w + noise_i.
struct TaskSample {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  Eigen::VectorXd w;
  Eigen::VectorXd noise;
};

/// Prompt layout: (d+1) x (n+1), column i = [x_i; y_i], last column = [x_query; z].
class TokenMatrix {
 public:
  TokenMatrix() = default;
  explicit TokenMatrix(Eigen::MatrixXd data);

  int dim() const { return static_cast<int>(data_.rows()) - 1; }
  int context_size() const { return static_cast<int>(data_.cols()) - 1; }
  double query_label() const { return data_(dim(), context_size()); }
  void set_query_label(double z) { data_(dim(), context_size()) = z; }

  const Eigen::MatrixXd& data() const { return data_; }
  Eigen::MatrixXd& data() { return data_; }

 private:
  Eigen::MatrixXd data_;
};

struct TrainingExample {
  TokenMatrix tokens;  // query label masked to 0
  double target = 0.0;
};

/// Draws w, then X row by row, then the noise, all from `rng`.
/// `num_points` defaults to cfg.n + 1 (context plus one query).
TaskSample sample_task(const GenConfig& cfg, Rng& rng);
TaskSample sample_task(const GenConfig& cfg, Rng& rng, int num_points);

TokenMatrix tokenize(const Eigen::MatrixXd& X_ctx, const Eigen::VectorXd& y_ctx,
                     const Eigen::VectorXd& x_query, double z);

/// batch_size independent tasks, each tokenized with z = 0 and its y_{n+1} kept aside.
std::vector<TrainingExample> sample_batch(const GenConfig& cfg, int batch_size, Rng& rng);

}  // namespace iclcp
