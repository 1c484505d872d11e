#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gcreg/data.hpp"
#include "gcreg/io.hpp"
#include "gcreg/nn.hpp"
#include "gcreg/optim.hpp"
#include "gcreg/regularization.hpp"

namespace gcreg {

struct DataSource {
  /// "gaussian_clusters", "two_spirals", or "idx".
  std::string kind = "gaussian_clusters";
  SyntheticSpec synthetic;
  std::string train_images, train_labels, test_images, test_labels;
};

struct RunConfig {
  std::size_t width = 128;
  std::size_t depth = 3;
  double dropout = 0.5;
  double init_gain = 0.3;
  DataSource data;
  OptimizerConfig opt;
  RegKind reg_kind = RegKind::L2;
  double lambda = 0.0;
  std::string gate = "constant";
  std::size_t gamma = 5;
  double mu = 0.6;
  std::size_t epochs = 20;
  std::size_t eval_period = 1;
  std::vector<std::uint64_t> seeds{1, 2, 3};

  RegSchedule schedule() const {
    RegSchedule r{reg_kind, lambda, ConstantGate{}};
    if (gate == "epoch") r.gate = EpochGate{gamma};
    else if (gate == "coherence") r.gate = CoherenceGate{mu};
    return r;
  }

  Architecture architecture(std::size_t input, std::size_t classes) const {
    return Architecture{input, std::vector<std::size_t>(depth, width), classes, dropout, init_gain};
  }
};

namespace detail {

inline std::size_t to_size(const std::string &key, const std::string &v) {
  std::size_t pos = 0;
  unsigned long long x = 0;
  try {
    if (v.empty() || v.front() == '-') throw std::invalid_argument(v);
    x = std::stoull(v, &pos);
  } catch (const std::exception &) {
    throw ConfigError(key, key + ": expected a nonnegative integer, got '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError(key, key + ": expected a nonnegative integer, got '" + v + "'");
  return static_cast<std::size_t>(x);
}

inline double to_real(const std::string &key, const std::string &v) {
  double x = 0;
  if (!parse_double(v, x)) throw ConfigError(key, key + ": expected a number, got '" + v + "'");
  return x;
}

template <class T>
std::string join(const std::vector<T> &v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

} // namespace detail

struct ConfigKey {
  std::string name;
  std::string doc;
  std::function<void(RunConfig &, const std::string &)> set;
  std::function<std::string(const RunConfig &)> get;
};

/// Every accepted configuration key. Anything else is rejected.
inline const std::vector<ConfigKey> &config_schema() {
  using detail::to_real;
  using detail::to_size;
  static const std::vector<ConfigKey> keys = {
      {"arch.width", "hidden layer width",
       [](RunConfig &c, const std::string &v) { c.width = to_size("arch.width", v); },
       [](const RunConfig &c) { return std::to_string(c.width); }},
      {"arch.depth", "number of hidden layers",
       [](RunConfig &c, const std::string &v) { c.depth = to_size("arch.depth", v); },
       [](const RunConfig &c) { return std::to_string(c.depth); }},
      {"arch.dropout", "dropout probability after each hidden ReLU (0 disables)",
       [](RunConfig &c, const std::string &v) { c.dropout = to_real("arch.dropout", v); },
       [](const RunConfig &c) { return format_double(c.dropout); }},
      {"arch.init_gain", "multiplier on the He init standard deviation",
       [](RunConfig &c, const std::string &v) { c.init_gain = to_real("arch.init_gain", v); },
       [](const RunConfig &c) { return format_double(c.init_gain); }},
      {"data.kind", "gaussian_clusters | two_spirals | idx",
       [](RunConfig &c, const std::string &v) {
         if (v != "gaussian_clusters" && v != "two_spirals" && v != "idx")
           throw ConfigError("data.kind", "data.kind: unknown dataset kind '" + v + "'");
         c.data.kind = v;
         c.data.synthetic.kind = v == "two_spirals" ? SyntheticKind::two_spirals : SyntheticKind::gaussian_clusters;
       },
       [](const RunConfig &c) { return c.data.kind; }},
      {"data.classes", "number of synthetic classes",
       [](RunConfig &c, const std::string &v) { c.data.synthetic.classes = to_size("data.classes", v); },
       [](const RunConfig &c) { return std::to_string(c.data.synthetic.classes); }},
      {"data.per_class", "synthetic training samples per class",
       [](RunConfig &c, const std::string &v) { c.data.synthetic.per_class = to_size("data.per_class", v); },
       [](const RunConfig &c) { return std::to_string(c.data.synthetic.per_class); }},
      {"data.test_per_class", "synthetic test samples per class",
       [](RunConfig &c, const std::string &v) { c.data.synthetic.test_per_class = to_size("data.test_per_class", v); },
       [](const RunConfig &c) { return std::to_string(c.data.synthetic.test_per_class); }},
      {"data.dim", "synthetic feature dimension",
       [](RunConfig &c, const std::string &v) { c.data.synthetic.dim = to_size("data.dim", v); },
       [](const RunConfig &c) { return std::to_string(c.data.synthetic.dim); }},
      {"data.separation", "per-coordinate std of gaussian class centres",
       [](RunConfig &c, const std::string &v) { c.data.synthetic.separation = to_real("data.separation", v); },
       [](const RunConfig &c) { return format_double(c.data.synthetic.separation); }},
      {"data.noise", "per-coordinate noise std",
       [](RunConfig &c, const std::string &v) { c.data.synthetic.noise = to_real("data.noise", v); },
       [](const RunConfig &c) { return format_double(c.data.synthetic.noise); }},
      {"data.seed", "seed of the synthetic dataset",
       [](RunConfig &c, const std::string &v) { c.data.synthetic.seed = to_size("data.seed", v); },
       [](const RunConfig &c) { return std::to_string(c.data.synthetic.seed); }},
      {"data.train_images", "IDX image file for training (data.kind = idx)",
       [](RunConfig &c, const std::string &v) { c.data.train_images = v; },
       [](const RunConfig &c) { return c.data.train_images; }},
      {"data.train_labels", "IDX label file for training",
       [](RunConfig &c, const std::string &v) { c.data.train_labels = v; },
       [](const RunConfig &c) { return c.data.train_labels; }},
      {"data.test_images", "IDX image file for evaluation",
       [](RunConfig &c, const std::string &v) { c.data.test_images = v; },
       [](const RunConfig &c) { return c.data.test_images; }},
      {"data.test_labels", "IDX label file for evaluation",
       [](RunConfig &c, const std::string &v) { c.data.test_labels = v; },
       [](const RunConfig &c) { return c.data.test_labels; }},
      {"opt.lr", "initial learning rate",
       [](RunConfig &c, const std::string &v) { c.opt.initial_lr = to_real("opt.lr", v); },
       [](const RunConfig &c) { return format_double(c.opt.initial_lr); }},
      {"opt.momentum", "momentum coefficient",
       [](RunConfig &c, const std::string &v) { c.opt.momentum = to_real("opt.momentum", v); },
       [](const RunConfig &c) { return format_double(c.opt.momentum); }},
      {"opt.lr_halving_period", "epochs between learning-rate halvings (0 = never)",
       [](RunConfig &c, const std::string &v) { c.opt.lr_halving_period = to_size("opt.lr_halving_period", v); },
       [](const RunConfig &c) { return std::to_string(c.opt.lr_halving_period); }},
      {"opt.batch_size", "minibatch size",
       [](RunConfig &c, const std::string &v) { c.opt.batch_size = to_size("opt.batch_size", v); },
       [](const RunConfig &c) { return std::to_string(c.opt.batch_size); }},
      {"reg.kind", "l1 | l2",
       [](RunConfig &c, const std::string &v) {
         if (v == "l1") c.reg_kind = RegKind::L1;
         else if (v == "l2") c.reg_kind = RegKind::L2;
         else throw ConfigError("reg.kind", "reg.kind: expected l1 or l2, got '" + v + "'");
       },
       [](const RunConfig &c) { return to_string(c.reg_kind); }},
      {"reg.lambda", "regularization strength",
       [](RunConfig &c, const std::string &v) { c.lambda = to_real("reg.lambda", v); },
       [](const RunConfig &c) { return format_double(c.lambda); }},
      {"reg.gate", "constant | epoch | coherence",
       [](RunConfig &c, const std::string &v) {
         if (v != "constant" && v != "epoch" && v != "coherence")
           throw ConfigError("reg.gate", "reg.gate: expected constant, epoch or coherence, got '" + v + "'");
         c.gate = v;
       },
       [](const RunConfig &c) { return c.gate; }},
      {"reg.gamma", "first regularized epoch (0-based) for the epoch gate",
       [](RunConfig &c, const std::string &v) { c.gamma = to_size("reg.gamma", v); },
       [](const RunConfig &c) { return std::to_string(c.gamma); }},
      {"reg.mu", "coherence threshold for the coherence gate",
       [](RunConfig &c, const std::string &v) { c.mu = to_real("reg.mu", v); },
       [](const RunConfig &c) { return format_double(c.mu); }},
      {"run.epochs", "training epochs",
       [](RunConfig &c, const std::string &v) { c.epochs = to_size("run.epochs", v); },
       [](const RunConfig &c) { return std::to_string(c.epochs); }},
      {"run.eval_period", "evaluate on the test split every this many epochs",
       [](RunConfig &c, const std::string &v) { c.eval_period = to_size("run.eval_period", v); },
       [](const RunConfig &c) { return std::to_string(c.eval_period); }},
      {"run.seeds", "comma-separated run seeds",
       [](RunConfig &c, const std::string &v) {
         c.seeds.clear();
         for (const auto &s : split(v, ',')) c.seeds.push_back(to_size("run.seeds", trim(s)));
       },
       [](const RunConfig &c) { return detail::join(c.seeds); }},
  };
  return keys;
}

inline const ConfigKey *find_config_key(const std::string &name) {
  for (const auto &k : config_schema())
    if (k.name == name) return &k;
  return nullptr;
}

/// Applies one key; unknown keys are a ConfigError naming the key.
inline void set_config_value(RunConfig &cfg, const std::string &key, const std::string &value) {
  const ConfigKey *k = find_config_key(key);
  if (!k) throw ConfigError(key, "unknown configuration key '" + key + "'");
  k->set(cfg, value);
}

/// Every key with its current value, in schema order.
inline std::vector<std::pair<std::string, std::string>> config_items(const RunConfig &cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto &k : config_schema()) out.emplace_back(k.name, k.get(cfg));
  return out;
}

/// Range and consistency checks that do not depend on data files.
inline void validate(const RunConfig &c) {
  if (c.epochs < 1) throw ConfigError("run.epochs", "run.epochs must be at least 1");
  if (c.eval_period < 1) throw ConfigError("run.eval_period", "run.eval_period must be at least 1");
  if (c.seeds.empty()) throw ConfigError("run.seeds", "run.seeds must list at least one seed");
  if (c.width < 1) throw ConfigError("arch.width", "arch.width must be positive");
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) throw ConfigError("arch.dropout", "arch.dropout must lie in [0, 1)");
  if (!(c.init_gain > 0.0) || !std::isfinite(c.init_gain)) throw ConfigError("arch.init_gain", "arch.init_gain must be positive");
  if (!(c.opt.initial_lr > 0.0)) throw ConfigError("opt.lr", "opt.lr must be positive");
  if (!(c.opt.momentum >= 0.0 && c.opt.momentum < 1.0)) throw ConfigError("opt.momentum", "opt.momentum must lie in [0, 1)");
  if (c.opt.batch_size < 1) throw ConfigError("opt.batch_size", "opt.batch_size must be at least 1");
  if (!(c.lambda >= 0.0) || !std::isfinite(c.lambda)) throw ConfigError("reg.lambda", "reg.lambda must be finite and nonnegative");
  if (!(c.mu >= 0.0 && c.mu <= 1.0)) throw ConfigError("reg.mu", "reg.mu must lie in [0, 1]");
  if (c.data.kind == "idx" && (c.data.train_images.empty() || c.data.train_labels.empty() ||
                               c.data.test_images.empty() || c.data.test_labels.empty()))
    throw ConfigError("data.train_images", "data.kind = idx needs train/test image and label paths");
}

} // namespace gcreg
