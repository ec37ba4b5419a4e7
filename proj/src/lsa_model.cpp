#include "iclcp/lsa_model.hpp"

#include <cmath>
#include <string>

#include "iclcp/errors.hpp"

namespace iclcp {
namespace {

template <typename Fn>
void for_each_matrix(LsaParams& p, Fn&& fn) {
  for (auto& layer : p.layers) {
    fn(layer.key);
    fn(layer.query);
    fn(layer.value);
    fn(layer.output);
  }
}

template <typename Fn>
void for_each_matrix_pair(LsaParams& p, const LsaParams& q, Fn&& fn) {
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    fn(p.layers[l].key, q.layers[l].key);
    fn(p.layers[l].query, q.layers[l].query);
    fn(p.layers[l].value, q.layers[l].value);
    fn(p.layers[l].output, q.layers[l].output);
  }
}

void check_tokens(const LsaParams& params, const TokenMatrix& E) {
  params.validate();
  if (E.dim() != params.dim()) {
    throw DimensionError("token matrix has d=" + std::to_string(E.dim()) +
                         " but the model expects d=" + std::to_string(params.dim()));
  }
}

// Intermediates of one layer, kept for the backward pass.
struct LayerCache {
  Eigen::MatrixXd input;
  Eigen::MatrixXd K;
  Eigen::MatrixXd Q;
  Eigen::MatrixXd U;
  Eigen::MatrixXd S;  // (U K^T) / sqrt(d)
};

Eigen::MatrixXd layer_forward(const LsaLayer& layer, const Eigen::MatrixXd& mixed_value,
                              double inv_sqrt_d, const Eigen::MatrixXd& E,
                              LayerCache* cache) {
  Eigen::MatrixXd K = layer.key * E;
  Eigen::MatrixXd Q = layer.query * E;
  Eigen::MatrixXd U = mixed_value * E;
  Eigen::MatrixXd S = (U * K.transpose()) * inv_sqrt_d;
  Eigen::MatrixXd out = E + S * Q;
  if (cache != nullptr) {
    cache->input = E;
    cache->K = std::move(K);
    cache->Q = std::move(Q);
    cache->U = std::move(U);
    cache->S = std::move(S);
  }
  return out;
}

std::vector<Eigen::MatrixXd> mixed_values(const LsaParams& params) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(params.layers.size());
  for (const auto& layer : params.layers) out.push_back(layer.output * layer.value);
  return out;
}

void check_batch(std::span<const TrainingExample> batch, const LsaParams& params) {
  if (batch.empty()) throw ArgumentError("pretrain_loss: empty batch");
  for (const auto& ex : batch) check_tokens(params, ex.tokens);
}

}  // namespace

LsaParams LsaParams::zeros(int d, int num_layers) {
  if (d < 1) throw ArgumentError("LsaParams: d must be >= 1");
  if (num_layers < 1) throw ArgumentError("LsaParams: need at least one layer");
  const Eigen::MatrixXd z = Eigen::MatrixXd::Zero(d + 1, d + 1);
  LsaParams p;
  p.layers.assign(num_layers, LsaLayer{z, z, z, z});
  return p;
}

LsaParams LsaParams::random(int d, int num_layers, double init_scale, Rng& rng) {
  if (!(init_scale >= 0.0)) throw ArgumentError("LsaParams: init_scale must be >= 0");
  LsaParams p = zeros(d, num_layers);
  for_each_matrix(p, [&](Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.normal(0.0, init_scale);
    }
  });
  return p;
}

int LsaParams::dim() const {
  if (layers.empty()) throw DimensionError("LsaParams has no layers");
  return static_cast<int>(layers.front().key.rows()) - 1;
}

std::int64_t LsaParams::parameter_count() const {
  const std::int64_t side = dim() + 1;
  return 4 * static_cast<std::int64_t>(layers.size()) * side * side;
}

void LsaParams::validate() const {
  if (layers.empty()) throw DimensionError("LsaParams has no layers");
  const Eigen::Index side = layers.front().key.rows();
  if (side < 2) throw DimensionError("LsaParams matrices must be at least 2x2");
  for (const auto& layer : layers) {
    for (const Eigen::MatrixXd* m : {&layer.key, &layer.query, &layer.value, &layer.output}) {
      if (m->rows() != side || m->cols() != side) {
        throw DimensionError("LsaParams: all weight matrices must be " + std::to_string(side) +
                             "x" + std::to_string(side));
      }
    }
  }
}

bool LsaParams::same_shape(const LsaParams& other) const {
  if (layers.size() != other.layers.size()) return false;
  if (layers.empty()) return true;
  return layers.front().key.rows() == other.layers.front().key.rows();
}

AdamState AdamState::for_params(const LsaParams& params) {
  AdamState s;
  s.first_moment = LsaParams::zeros(params.dim(), params.num_layers());
  s.second_moment = s.first_moment;
  return s;
}

void TrainConfig::validate() const {
  gen.validate();
  if (steps < 1) throw ArgumentError("train.steps must be >= 1");
  if (batch_size < 1) throw ArgumentError("train.batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ArgumentError("train.learning_rate must be > 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw ArgumentError("train.adam_beta1 must be in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw ArgumentError("train.adam_beta2 must be in [0, 1)");
  if (!(adam_eps >= 0.0)) throw ArgumentError("train.adam_eps must be >= 0");
  if (flop_budget && !(*flop_budget > 0.0)) throw ArgumentError("train.flop_budget must be > 0");
  if (init_scale && !(*init_scale >= 0.0)) throw ArgumentError("train.init_scale must be >= 0");
  if (layers < 1) throw ArgumentError("train.layers must be >= 1");
  if (log_every < 1) throw ArgumentError("train.log_every must be >= 1");
}

double TrainConfig::effective_init_scale() const {
  return init_scale.value_or(0.02 / std::sqrt(static_cast<double>(gen.d) + 1.0));
}

TokenMatrix lsa_forward(const LsaParams& params, const TokenMatrix& E) {
  check_tokens(params, E);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(params.dim()));
  Eigen::MatrixXd current = E.data();
  for (const auto& layer : params.layers) {
    const Eigen::MatrixXd mixed = layer.output * layer.value;
    current = layer_forward(layer, mixed, inv_sqrt_d, current, nullptr);
  }
  return TokenMatrix(std::move(current));
}

Eigen::VectorXd predict_labels(const LsaParams& params, const TokenMatrix& E) {
  const TokenMatrix out = lsa_forward(params, E);
  return out.data().row(out.dim()).transpose();
}

double pretrain_loss(const LsaParams& params, std::span<const TrainingExample> batch) {
  check_batch(batch, params);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(params.dim()));
  const auto mixed = mixed_values(params);
  double total = 0.0;
  for (const auto& ex : batch) {
    Eigen::MatrixXd current = ex.tokens.data();
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      current = layer_forward(params.layers[l], mixed[l], inv_sqrt_d, current, nullptr);
    }
    const double err = current(current.rows() - 1, current.cols() - 1) - ex.target;
    total += err * err;
  }
  return total / static_cast<double>(batch.size());
}

LossAndGradient grad_pretrain_loss(const LsaParams& params,
                                   std::span<const TrainingExample> batch) {
  check_batch(batch, params);
  const int d = params.dim();
  const std::size_t num_layers = params.layers.size();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  const auto mixed = mixed_values(params);

  LossAndGradient result;
  result.gradient = LsaParams::zeros(d, static_cast<int>(num_layers));
  // Gradient with respect to W_O W_V, split into W_O and W_V once the batch is done.
  std::vector<Eigen::MatrixXd> mixed_grad(num_layers, Eigen::MatrixXd::Zero(d + 1, d + 1));
  std::vector<LayerCache> caches(num_layers);

  for (const auto& ex : batch) {
    Eigen::MatrixXd current = ex.tokens.data();
    for (std::size_t l = 0; l < num_layers; ++l) {
      current = layer_forward(params.layers[l], mixed[l], inv_sqrt_d, current, &caches[l]);
    }
    const Eigen::Index row = current.rows() - 1;
    const Eigen::Index col = current.cols() - 1;
    const double err = current(row, col) - ex.target;
    result.loss += err * err * inv_batch;

    Eigen::MatrixXd upstream = Eigen::MatrixXd::Zero(current.rows(), current.cols());
    upstream(row, col) = 2.0 * err * inv_batch;

    for (std::size_t l = num_layers; l-- > 0;) {
      const LayerCache& c = caches[l];
      const LsaLayer& layer = params.layers[l];
      LsaLayer& g = result.gradient.layers[l];

      // out = E + S Q with S = (U K^T) / sqrt(d).
      const Eigen::MatrixXd grad_S = upstream * c.Q.transpose();
      const Eigen::MatrixXd grad_Q = c.S.transpose() * upstream;
      const Eigen::MatrixXd grad_UKt = grad_S * inv_sqrt_d;
      const Eigen::MatrixXd grad_U = grad_UKt * c.K;
      const Eigen::MatrixXd grad_K = grad_UKt.transpose() * c.U;

      mixed_grad[l].noalias() += grad_U * c.input.transpose();
      g.key.noalias() += grad_K * c.input.transpose();
      g.query.noalias() += grad_Q * c.input.transpose();

      Eigen::MatrixXd grad_input = upstream;
      grad_input.noalias() += mixed[l].transpose() * grad_U;
      grad_input.noalias() += layer.key.transpose() * grad_K;
      grad_input.noalias() += layer.query.transpose() * grad_Q;
      upstream = std::move(grad_input);
    }
  }

  for (std::size_t l = 0; l < num_layers; ++l) {
    const LsaLayer& layer = params.layers[l];
    result.gradient.layers[l].output = mixed_grad[l] * layer.value.transpose();
    result.gradient.layers[l].value = layer.output.transpose() * mixed_grad[l];
  }
  return result;
}

void adam_step(LsaParams& params, const LsaGradients& grads, AdamState& state,
               const TrainConfig& cfg) {
  if (!params.same_shape(grads)) throw DimensionError("adam_step: gradient shape mismatch");
  if (state.first_moment.layers.empty()) state = AdamState::for_params(params);
  if (!params.same_shape(state.first_moment) || !params.same_shape(state.second_moment)) {
    throw DimensionError("adam_step: optimizer state shape mismatch");
  }
  state.step += 1;
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for_each_matrix_pair(state.first_moment, grads, [&](Eigen::MatrixXd& m, const Eigen::MatrixXd& g) {
    m = b1 * m + (1.0 - b1) * g;
  });
  for_each_matrix_pair(state.second_moment, grads, [&](Eigen::MatrixXd& v, const Eigen::MatrixXd& g) {
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
  });
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto update = [&](Eigen::MatrixXd& p, const Eigen::MatrixXd& m, const Eigen::MatrixXd& v) {
      p.array() -= cfg.learning_rate * (m.array() / correction1) /
                   ((v.array() / correction2).sqrt() + cfg.adam_eps);
    };
    const LsaLayer& m = state.first_moment.layers[l];
    const LsaLayer& v = state.second_moment.layers[l];
    LsaLayer& p = params.layers[l];
    update(p.key, m.key, v.key);
    update(p.query, m.query, v.query);
    update(p.value, m.value, v.value);
    update(p.output, m.output, v.output);
  }
}

std::uint64_t count_flops_per_step(int d, int n, int num_layers, int batch_size) {
  if (d < 1 || n < 1 || num_layers < 1 || batch_size < 1) {
    throw ArgumentError("count_flops_per_step: all arguments must be positive");
  }
  const std::uint64_t D1 = static_cast<std::uint64_t>(d) + 1;
  const std::uint64_t N1 = static_cast<std::uint64_t>(n) + 1;
  const std::uint64_t L = static_cast<std::uint64_t>(num_layers);
  const std::uint64_t B = static_cast<std::uint64_t>(batch_size);
  const std::uint64_t per_layer = 3 * 2 * D1 * D1 * N1  // K, Q, U projections
                                  + 2 * D1 * D1 * N1    // U K^T
                                  + D1 * D1             // scaling
                                  + 2 * D1 * D1 * N1    // S Q
                                  + D1 * N1;            // residual
  const std::uint64_t per_example = L * per_layer + 3;
  const std::uint64_t per_step_params = L * 2 * D1 * D1 * D1;
  const std::uint64_t forward = B * per_example + per_step_params;
  const std::uint64_t parameters = 4 * L * D1 * D1;
  return 3 * forward + 10 * parameters;
}

TrainReport train(const TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  const int d = cfg.gen.d;
  TrainReport report;
  report.flops_per_step = count_flops_per_step(d, cfg.gen.n, cfg.layers, cfg.batch_size);
  if (cfg.flop_budget && static_cast<double>(report.flops_per_step) > *cfg.flop_budget) {
    throw BudgetError("flop budget " + std::to_string(*cfg.flop_budget) +
                      " is smaller than one training step (" +
                      std::to_string(report.flops_per_step) + " FLOPs)");
  }

  LsaParams params = LsaParams::random(d, cfg.layers, cfg.effective_init_scale(), rng);
  AdamState state = AdamState::for_params(params);

  for (int step = 0; step < cfg.steps; ++step) {
    const double next_total =
        static_cast<double>(report.flops_total) + static_cast<double>(report.flops_per_step);
    if (cfg.flop_budget && next_total > *cfg.flop_budget) break;

    const auto batch = sample_batch(cfg.gen, cfg.batch_size, rng);
    LossAndGradient lg = grad_pretrain_loss(params, batch);
    if (!std::isfinite(lg.loss)) {
      throw FitError("training diverged at step " + std::to_string(step));
    }
    if (step % cfg.log_every == 0 || step == cfg.steps - 1) {
      report.loss_curve.emplace_back(step, lg.loss);
    }
    adam_step(params, lg.gradient, state, cfg);
    report.flops_total += report.flops_per_step;
    report.steps_executed += 1;
  }
  report.final_params = std::move(params);
  report.parameter_count = report.final_params.parameter_count();
  report.data_points = static_cast<std::int64_t>(report.steps_executed) * cfg.batch_size;
  return report;
}

TrainReport train(const TrainConfig& cfg) {
  Rng rng = Rng::stream(cfg.gen.seed, kTrainStreamId);
  return train(cfg, rng);
}

}  // namespace iclcp
