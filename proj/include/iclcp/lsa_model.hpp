#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "iclcp/rng.hpp"
#include "iclcp/taskgen.hpp"

namespace iclcp {

/// One linear self-attention layer; every matrix is (d+1) x (d+1).
struct LsaLayer {
  Eigen::MatrixXd key;
  Eigen::MatrixXd query;
  Eigen::MatrixXd value;
  Eigen::MatrixXd output;
};

/// Stack of LSA layers. Also used to hold gradients and Adam moments.
struct LsaParams {
  std::vector<LsaLayer> layers;

  static LsaParams zeros(int d, int num_layers);
  /// i.i.d. N(0, init_scale^2) entries, drawn layer by layer in K, Q, V, O order.
  static LsaParams random(int d, int num_layers, double init_scale, Rng& rng);

  int dim() const;
  int num_layers() const { return static_cast<int>(layers.size()); }
  /// 4 * L * (d+1)^2.
  std::int64_t parameter_count() const;
  /// Throws DimensionError unless all matrices are square and share one size.
  void validate() const;
  bool same_shape(const LsaParams& other) const;
};

using LsaGradients = LsaParams;

struct AdamState {
  LsaParams first_moment;
  LsaParams second_moment;
  std::int64_t step = 0;

  static AdamState for_params(const LsaParams& params);
};

struct TrainConfig {
  int steps = 10000;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::optional<double> flop_budget;
  /// Defaults to 0.02 / sqrt(d + 1) when unset.
  std::optional<double> init_scale;
  int layers = 2;
  /// Record the batch loss every `log_every` steps (and always at step 0 and the last step).
  int log_every = 10;
  GenConfig gen;

  void validate() const;
  double effective_init_scale() const;
};

struct TrainReport {
  LsaParams final_params;
  std::vector<std::pair<int, double>> loss_curve;
  std::uint64_t flops_total = 0;
  std::uint64_t flops_per_step = 0;
  int steps_executed = 0;
  /// Parameter count N.
  std::int64_t parameter_count = 0;
  /// Training targets consumed D = steps_executed * batch_size.
  std::int64_t data_points = 0;
};

/// Applies every layer: E <- E + W_O W_V E ((W_K E)^T W_Q E) / sqrt(d).
/// The product is evaluated as ((W_O W_V E)(W_K E)^T)(W_Q E), which is the same
/// matrix and costs O((d+1)^2 (n+1)) instead of O((d+1)(n+1)^2).
TokenMatrix lsa_forward(const LsaParams& params, const TokenMatrix& E);

/// Last row of the forward output: predictions for y_1..y_n and the query.
Eigen::VectorXd predict_labels(const LsaParams& params, const TokenMatrix& E);

/// Mean over the batch of (output[d, n] - target)^2.
double pretrain_loss(const LsaParams& params, std::span<const TrainingExample> batch);

struct LossAndGradient {
  double loss = 0.0;
  LsaGradients gradient;
};

/// Exact reverse-mode gradient of pretrain_loss.
LossAndGradient grad_pretrain_loss(const LsaParams& params,
                                   std::span<const TrainingExample> batch);

/// Adam with bias correction, in place.
void adam_step(LsaParams& params, const LsaGradients& grads, AdamState& state,
               const TrainConfig& cfg);

/// FLOPs of one optimizer step.
///
/// Per layer and example (D1 = d+1, N1 = n+1, matmul m x k by k x p = 2mkp):
///   projections K, Q and U = (W_O W_V) E   3 * 2 D1^2 N1
///   S = U K^T                              2 D1^2 N1
///   S / sqrt(d)                            D1^2
///   S Q                                    2 D1^2 N1
///   residual add                           D1 N1
/// plus 3 per example for the squared error, and 2 D1^3 per layer for W_O W_V
/// (once per step, not per example). Backward costs twice the forward pass and
/// Adam costs 10 FLOPs per parameter:
///   step = 3 * (batch * (L * layer + 3) + L * 2 D1^3) + 10 * 4 L D1^2
std::uint64_t count_flops_per_step(int d, int n, int num_layers, int batch_size);

TrainReport train(const TrainConfig& cfg, Rng& rng);

/// Stream id reserved for pre-training draws, disjoint from the per-run
/// evaluation streams Rng::stream(seed, run).
inline constexpr std::uint64_t kTrainStreamId = std::uint64_t{1} << 63;

/// train() on Rng::stream(cfg.gen.seed, kTrainStreamId).
TrainReport train(const TrainConfig& cfg);

}  // namespace iclcp
