#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "gcreg/errors.hpp"
#include "gcreg/rng.hpp"
#include "gcreg/tensor.hpp"

namespace gcreg {

enum class Mode { train, eval };

/// Layer widths of a fully connected classifier. `hidden.size()` is the depth.
struct Architecture {
  std::size_t input = 0;
  std::vector<std::size_t> hidden;
  std::size_t classes = 0;
  /// Dropout probability after every hidden ReLU; 0 disables the layers.
  double dropout = 0.0;
  /// Multiplier on the He standard deviation sqrt(2/fan_in).
  double init_gain = 1.0;

  std::size_t depth() const { return hidden.size(); }
  friend bool operator==(const Architecture &, const Architecture &) = default;
};

struct DenseLayer {
  Tensor weights; // [out x in]
  Tensor bias;    // [out]
  Tensor grad_weights;
  Tensor grad_bias;
  Tensor input; // cached a^(l-1), train mode only

  std::size_t fan_in() const { return weights.cols(); }
  std::size_t fan_out() const { return weights.rows(); }

  Tensor forward(const Tensor &x, Mode mode) {
    if (x.cols() != fan_in())
      throw DimensionError("dense layer expects width " + std::to_string(fan_in()) + ", got " +
                           std::to_string(x.cols()));
    Tensor z = matmul_nt(x, weights);
    const std::size_t n = fan_out();
    for (std::size_t i = 0; i < z.rows(); ++i) {
      auto r = z.row(i);
      for (std::size_t j = 0; j < n; ++j) r[j] += bias[j];
    }
    if (mode == Mode::train) input = x;
    return z;
  }

  /// Populates grad_weights/grad_bias from delta^(l) and returns the upstream
  /// gradient W^T delta (skipped when `need_input_grad` is false).
  Tensor backward(const Tensor &delta, bool need_input_grad) {
    if (input.empty()) throw UsageError("dense backward without a train-mode forward pass");
    grad_weights = matmul_tn(delta, input);
    grad_bias = Tensor({fan_out()});
    for (std::size_t i = 0; i < delta.rows(); ++i) {
      auto r = delta.row(i);
      for (std::size_t j = 0; j < r.size(); ++j) grad_bias[j] += r[j];
    }
    if (!need_input_grad) return {};
    return matmul(delta, weights);
  }
};

/// ReLU(x) = x * H(x).
struct ReluLayer {
  Tensor pre_activation;

  Tensor forward(const Tensor &z, Mode mode) {
    Tensor out = ew_zip([](double a, double h) { return a * h; }, z,
                        ew_map(heaviside, z));
    if (mode == Mode::train) pre_activation = z;
    return out;
  }

  Tensor backward(const Tensor &grad) const {
    return ew_zip([](double g, double z) { return z > 0.0 ? g : 0.0; }, grad, pre_activation);
  }
};

/// Inverted dropout: kept units are scaled by 1/(1-p) at train time.
struct DropoutLayer {
  double p = 0.0;
  Rng rng;
  Tensor mask;

  Tensor forward(const Tensor &x, Mode mode) {
    if (mode == Mode::eval || p == 0.0) {
      mask = Tensor();
      return x;
    }
    const double keep_scale = 1.0 / (1.0 - p);
    mask = Tensor(x.shape());
    for (auto &m : mask.data()) m = rng.uniform() >= p ? keep_scale : 0.0;
    return ew_zip(std::multiplies<>{}, x, mask);
  }

  Tensor backward(const Tensor &grad) const {
    if (mask.empty()) return grad;
    return ew_zip(std::multiplies<>{}, grad, mask);
  }
};

using Layer = std::variant<DenseLayer, ReluLayer, DropoutLayer>;

/// Softmax cross-entropy evaluated on a batch of logits.
struct SoftmaxXent {
  double loss = 0.0;     // mean over the batch
  Tensor grad_logits;    // d(mean loss)/d(logits)
  std::size_t correct = 0;
};

inline std::size_t argmax_row(std::span<const double> r) {
  return static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
}

/// Log-sum-exp stabilised softmax cross-entropy, mean reduction.
inline SoftmaxXent softmax_xent(const Tensor &logits, std::span<const int> labels) {
  const std::size_t batch = logits.rows(), classes = logits.cols();
  if (labels.size() != batch)
    throw DimensionError("label count " + std::to_string(labels.size()) + " != batch " +
                         std::to_string(batch));
  SoftmaxXent out;
  out.grad_logits = Tensor(logits.shape());
  const double inv_batch = 1.0 / static_cast<double>(batch);
  double total = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= classes)
      throw DomainError("label " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
    auto z = logits.row(i);
    const double zmax = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - zmax);
    const double lse = zmax + std::log(s);
    total += lse - z[y];
    auto g = out.grad_logits.row(i);
    for (std::size_t j = 0; j < classes; ++j) g[j] = std::exp(z[j] - lse) * inv_batch;
    g[y] -= inv_batch;
    out.correct += argmax_row(z) == static_cast<std::size_t>(y);
  }
  out.loss = total * inv_batch;
  return out;
}

class Network {
public:
  Network() = default;
  explicit Network(Architecture arch) : arch_(std::move(arch)) {}

  const Architecture &architecture() const { return arch_; }
  std::vector<Layer> &layers() { return layers_; }
  const std::vector<Layer> &layers() const { return layers_; }

  template <class F>
  void for_each_dense(F &&f) {
    for (auto &l : layers_)
      if (auto *d = std::get_if<DenseLayer>(&l)) f(*d);
  }
  template <class F>
  void for_each_dense(F &&f) const {
    for (const auto &l : layers_)
      if (const auto *d = std::get_if<DenseLayer>(&l)) f(*d);
  }

  std::vector<DenseLayer *> dense_layers() {
    std::vector<DenseLayer *> out;
    for_each_dense([&](DenseLayer &d) { out.push_back(&d); });
    return out;
  }
  std::vector<const DenseLayer *> dense_layers() const {
    std::vector<const DenseLayer *> out;
    for_each_dense([&](const DenseLayer &d) { out.push_back(&d); });
    return out;
  }

  Tensor forward(const Tensor &x, Mode mode) {
    if (x.rank() != 2 || x.cols() != arch_.input)
      throw DimensionError("network input width " + std::to_string(arch_.input) + ", got " +
                           shape_str(x.shape()));
    Tensor h = x;
    for (auto &l : layers_)
      h = std::visit([&](auto &layer) { return layer.forward(h, mode); }, l);
    return h;
  }

  void backward(const Tensor &grad_logits) {
    Tensor g = grad_logits;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      auto &l = layers_[i];
      if (auto *d = std::get_if<DenseLayer>(&l)) {
        g = d->backward(g, i != 0);
      } else if (auto *r = std::get_if<ReluLayer>(&l)) {
        g = r->backward(g);
      } else {
        g = std::get<DropoutLayer>(l).backward(g);
      }
    }
  }

private:
  Architecture arch_;
  std::vector<Layer> layers_;
};

/// Builds dense/ReLU/dropout stacks with He-normal weights
/// N(0, gain^2 * 2/fan_in) and zero biases. Dropout layers own substreams forked from `rng`.
inline Network init_params(const Architecture &arch, const Rng &rng) {
  if (arch.input == 0 || arch.classes == 0)
    throw ConfigError("arch", "architecture widths must be positive");
  for (auto w : arch.hidden)
    if (w == 0) throw ConfigError("arch.hidden", "hidden widths must be positive");
  if (!(arch.dropout >= 0.0 && arch.dropout < 1.0))
    throw ConfigError("dropout", "dropout probability must lie in [0, 1)");
  if (!(arch.init_gain > 0.0) || !std::isfinite(arch.init_gain))
    throw ConfigError("arch.init_gain", "init gain must be positive");

  Network net(arch);
  Rng wrng = rng.fork("init");
  std::vector<std::size_t> widths{arch.input};
  widths.insert(widths.end(), arch.hidden.begin(), arch.hidden.end());
  widths.push_back(arch.classes);

  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t in = widths[l], out = widths[l + 1];
    DenseLayer d;
    d.weights = Tensor({out, in});
    const double stddev = arch.init_gain * std::sqrt(2.0 / static_cast<double>(in));
    for (auto &w : d.weights.data()) w = wrng.normal(0.0, stddev);
    d.bias = Tensor({out});
    d.grad_weights = Tensor({out, in});
    d.grad_bias = Tensor({out});
    net.layers().emplace_back(std::move(d));
    const bool hidden = l + 2 < widths.size();
    if (hidden) {
      net.layers().emplace_back(ReluLayer{});
      if (arch.dropout > 0.0)
        net.layers().emplace_back(
            DropoutLayer{arch.dropout, rng.fork("dropout." + std::to_string(l)), {}});
    }
  }
  return net;
}

struct LossResult {
  double loss = 0.0;
  std::size_t correct = 0;
};

/// Mean cross-entropy of the batch (no penalty term); fills every dW, db.
inline LossResult loss_and_grad(Network &net, const Tensor &x, std::span<const int> labels) {
  Tensor logits = net.forward(x, Mode::train);
  SoftmaxXent ce = softmax_xent(logits, labels);
  net.backward(ce.grad_logits);
  return {ce.loss, ce.correct};
}

/// Index map over every dense-layer weight (never biases), layer by layer in
/// row-major order.
class FlatParamView {
public:
  struct Segment {
    std::size_t layer; // index among dense layers
    std::size_t offset;
    std::size_t count;
  };

  explicit FlatParamView(const Network &net) {
    std::size_t l = 0;
    net.for_each_dense([&](const DenseLayer &d) {
      segments_.push_back({l++, n_, d.weights.size()});
      n_ += d.weights.size();
    });
  }

  std::size_t size() const { return n_; }
  const std::vector<Segment> &segments() const { return segments_; }

private:
  std::vector<Segment> segments_;
  std::size_t n_ = 0;
};

enum class FlatSource { params, grads };

inline Tensor gather_flat(const FlatParamView &view, const Network &net, FlatSource source) {
  if (view.size() == 0) throw DimensionError("network has no regularizable parameters");
  Tensor out({view.size()});
  auto dst = out.data();
  auto dense = net.dense_layers();
  for (const auto &s : view.segments()) {
    const Tensor &src = source == FlatSource::params ? dense.at(s.layer)->weights
                                                     : dense.at(s.layer)->grad_weights;
    if (src.size() != s.count) throw DimensionError("gradient buffer not populated");
    std::copy(src.data().begin(), src.data().end(), dst.begin() + static_cast<std::ptrdiff_t>(s.offset));
  }
  return out;
}

inline void scatter_flat(const FlatParamView &view, Network &net, const Tensor &values) {
  if (values.size() != view.size())
    throw DimensionError("scatter_flat: expected " + std::to_string(view.size()) + " values, got " +
                         std::to_string(values.size()));
  auto src = values.data();
  auto dense = net.dense_layers();
  for (const auto &s : view.segments()) {
    auto dst = dense.at(s.layer)->weights.data();
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(s.offset), s.count, dst.begin());
  }
}

struct LayerStat {
  double avg_abs_w = 0.0;
  double avg_abs_grad = 0.0;
  std::size_t count = 0;
};

struct LayerStats {
  std::vector<LayerStat> layers;
  LayerStat global;
};

/// Mean |w| and |dW| per dense layer and over all regularizable weights.
inline LayerStats layer_stats(const Network &net) {
  LayerStats out;
  double sw = 0.0, sg = 0.0;
  net.for_each_dense([&](const DenseLayer &d) {
    LayerStat s;
    s.count = d.weights.size();
    s.avg_abs_w = reduce(ReduceKind::abs_mean, d.weights);
    s.avg_abs_grad = d.grad_weights.empty() ? 0.0 : reduce(ReduceKind::abs_mean, d.grad_weights);
    sw += s.avg_abs_w * static_cast<double>(s.count);
    sg += s.avg_abs_grad * static_cast<double>(s.count);
    out.global.count += s.count;
    out.layers.push_back(s);
  });
  if (out.global.count) {
    out.global.avg_abs_w = sw / static_cast<double>(out.global.count);
    out.global.avg_abs_grad = sg / static_cast<double>(out.global.count);
  }
  return out;
}

} // namespace gcreg
