#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "gcreg/data.hpp"
#include "gcreg/nn.hpp"
#include "gcreg/regularization.hpp"

namespace gcreg {

struct OptimizerConfig {
  double initial_lr = 0.05;
  double momentum = 0.9;
  std::size_t lr_halving_period = 30;
  std::size_t batch_size = 128;
};

/// Learning rate halves every `lr_halving_period` epochs (0-based epochs).
inline double lr_at(const OptimizerConfig &cfg, std::size_t epoch) {
  if (cfg.lr_halving_period == 0) return cfg.initial_lr;
  return std::ldexp(cfg.initial_lr, -static_cast<int>(epoch / cfg.lr_halving_period));
}

struct OptimState {
  std::vector<Tensor> velocity_w;
  std::vector<Tensor> velocity_b;
  std::uint64_t step = 0;
  std::size_t epoch = 0;

  explicit OptimState(const Network &net) {
    net.for_each_dense([&](const DenseLayer &d) {
      velocity_w.emplace_back(d.weights.shape());
      velocity_b.emplace_back(d.bias.shape());
    });
  }
};

struct StepMetrics {
  double loss = 0.0; // excludes the penalty
  std::size_t correct = 0;
  std::size_t batch = 0;
  double avg_abs_grad = 0.0;
  std::vector<double> layer_avg_abs_grad;
  CoherenceReport coherence;
  double lambda_used = 0.0;
  double grad_fraction = 1.0;
  double lr = 0.0;
};

/// Mean over weights of |g| / (|g| + lambda |dOmega/dw|), skipping weights
/// where both terms are zero. Equals 1 when the applied lambda is 0; 0 when
/// every weight is skipped under a positive lambda.
inline double grad_fraction(std::span<const double> g_loss, std::span<const double> penalty_grad,
                            double lambda_used) {
  if (g_loss.size() != penalty_grad.size()) throw DimensionError("grad_fraction: lengths differ");
  if (lambda_used == 0.0) return 1.0;
  double sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t i = 0; i < g_loss.size(); ++i) {
    const double g = std::abs(g_loss[i]);
    const double denom = g + lambda_used * std::abs(penalty_grad[i]);
    if (denom == 0.0) continue;
    sum += g / denom;
    ++counted;
  }
  return counted ? sum / static_cast<double>(counted) : 0.0;
}

/// One momentum-SGD step. L2 enters the gradient (and so the velocity); L1 is
/// applied as a proximal step after the momentum update, so the velocity only
/// carries loss information. Biases are never regularized. Metrics describe
/// the pre-update gradients.
inline StepMetrics train_step(Network &net, const FlatParamView &view, const Tensor &x,
                              std::span<const int> labels, OptimState &state,
                              const OptimizerConfig &cfg, const RegSchedule &sched) {
  if (labels.empty()) throw DimensionError("train_step on an empty batch");
  StepMetrics m;
  const LossResult lr = loss_and_grad(net, x, labels);
  m.loss = lr.loss;
  m.correct = lr.correct;
  m.batch = labels.size();

  const Tensor g_flat = gather_flat(view, net, FlatSource::grads);
  const Tensor w_flat = gather_flat(view, net, FlatSource::params);
  // Rate is reported under the configured lambda for every gate; only the
  // coherence gate acts on it.
  m.coherence = coherence_rate(g_flat, w_flat, sched.kind, sched.lambda);
  const double lambda = effective_lambda(sched, state.epoch, m.coherence.pi);
  m.lambda_used = lambda;

  const LayerStats stats = layer_stats(net);
  m.avg_abs_grad = stats.global.avg_abs_grad;
  for (const auto &s : stats.layers) m.layer_avg_abs_grad.push_back(s.avg_abs_grad);
  m.grad_fraction = grad_fraction(g_flat.data(), penalty_grad(w_flat, sched.kind).data(), lambda);

  const double alpha = lr_at(cfg, state.epoch);
  m.lr = alpha;
  const double beta = cfg.momentum;
  const bool l2 = sched.kind == RegKind::L2 && lambda != 0.0;
  const bool l1 = sched.kind == RegKind::L1 && lambda != 0.0;

  std::size_t l = 0;
  net.for_each_dense([&](DenseLayer &d) {
    auto w = d.weights.data();
    auto gw = d.grad_weights.data();
    auto vw = state.velocity_w[l].data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double g = l2 ? gw[i] + lambda * 2.0 * w[i] : gw[i];
      vw[i] = beta * vw[i] - alpha * g;
      w[i] += vw[i];
    }
    if (l1) {
      const double z = alpha * lambda;
      for (auto &wi : w) wi = soft_threshold(wi, z);
    }
    auto b = d.bias.data();
    auto gb = d.grad_bias.data();
    auto vb = state.velocity_b[l].data();
    for (std::size_t i = 0; i < b.size(); ++i) {
      vb[i] = beta * vb[i] - alpha * gb[i];
      b[i] += vb[i];
    }
    ++l;
  });
  ++state.step;
  return m;
}

struct EpochMetrics {
  std::size_t epoch = 0; // 0-based index of the epoch just run
  double train_loss = 0.0;
  double train_acc = 0.0;
  double avg_abs_grad = 0.0;
  std::vector<double> layer_avg_abs_grad;
  double avg_abs_w = 0.0;
  double pi = 1.0;
  double grad_fraction = 1.0;
  double effective_lambda_mean = 0.0;
  std::size_t steps = 0;
};

/// One pass over shuffled minibatches. Loss and accuracy are sample-weighted
/// over the pass (train mode, pre-update); gradient statistics, pi, grad
/// fraction and lambda are means over steps.
inline EpochMetrics run_epoch(Network &net, const Dataset &train, OptimState &state,
                              const OptimizerConfig &cfg, const RegSchedule &sched,
                              std::uint64_t epoch_seed) {
  const FlatParamView view(net);
  EpochMetrics em;
  em.epoch = state.epoch;
  double loss_sum = 0.0, pi_sum = 0.0, fraction_sum = 0.0;
  std::size_t correct = 0, seen = 0;
  for (const auto &b : batches(train, cfg.batch_size, epoch_seed)) {
    const StepMetrics s = train_step(net, view, b.x, b.labels, state, cfg, sched);
    loss_sum += s.loss * static_cast<double>(s.batch);
    correct += s.correct;
    seen += s.batch;
    em.avg_abs_grad += s.avg_abs_grad;
    if (em.layer_avg_abs_grad.empty()) em.layer_avg_abs_grad.assign(s.layer_avg_abs_grad.size(), 0.0);
    for (std::size_t i = 0; i < s.layer_avg_abs_grad.size(); ++i)
      em.layer_avg_abs_grad[i] += s.layer_avg_abs_grad[i];
    pi_sum += s.coherence.pi;
    fraction_sum += s.grad_fraction;
    em.effective_lambda_mean += s.lambda_used;
    ++em.steps;
  }
  if (em.steps == 0) throw ConfigError("data", "training set is empty");
  const double k = static_cast<double>(em.steps);
  em.pi = pi_sum / k;
  em.avg_abs_grad /= k;
  for (auto &v : em.layer_avg_abs_grad) v /= k;
  em.grad_fraction = fraction_sum / k;
  em.effective_lambda_mean /= k;
  em.train_loss = loss_sum / static_cast<double>(seen);
  em.train_acc = static_cast<double>(correct) / static_cast<double>(seen);
  em.avg_abs_w = layer_stats(net).global.avg_abs_w;
  ++state.epoch;
  return em;
}

} // namespace gcreg
