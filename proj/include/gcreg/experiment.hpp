#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <future>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "gcreg/checkpoint.hpp"
#include "gcreg/data.hpp"
#include "gcreg/io.hpp"
#include "gcreg/nn.hpp"
#include "gcreg/optim.hpp"
#include "gcreg/regularization.hpp"
#include "gcreg/run_config.hpp"

namespace gcreg {

namespace fs = std::filesystem;

/// Column order of every trace CSV.
inline const std::vector<std::string> &trace_columns() {
  static const std::vector<std::string> cols = {
      "epoch", "train_loss", "train_acc", "test_acc", "avg_abs_grad", "avg_abs_w",
      "pi", "grad_fraction", "sparsity", "effective_lambda_mean"};
  return cols;
}

struct MetricsRecord {
  std::size_t epoch = 0; // 1-based: number of completed epochs
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_acc = std::numeric_limits<double>::quiet_NaN(); // NaN on non-eval epochs
  double avg_abs_grad = 0.0;
  std::vector<double> layer_avg_abs_grad;
  double avg_abs_w = 0.0;
  double pi = 1.0;
  double grad_fraction = 1.0;
  double sparsity = 0.0;
  double effective_lambda_mean = 0.0;
};

/// Fraction of regularizable weights that are exactly zero.
inline double sparsity(const Network &net) {
  std::size_t zeros = 0, total = 0;
  net.for_each_dense([&](const DenseLayer &d) {
    total += d.weights.size();
    zeros += d.weights.size() - static_cast<std::size_t>(reduce(ReduceKind::count_nonzero, d.weights));
  });
  return total ? static_cast<double>(zeros) / static_cast<double>(total) : 0.0;
}

struct Interval {
  double mean = 0.0;
  double half_width = 0.0;
};

/// Two-sided 95% Student-t interval; absent for fewer than two values.
inline std::optional<Interval> confidence_interval(std::span<const double> values) {
  if (values.size() < 2) return std::nullopt;
  const double k = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= k;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double s = std::sqrt(ss / (k - 1.0));
  const boost::math::students_t dist(k - 1.0);
  const double t = boost::math::quantile(dist, 0.975);
  return Interval{mean, t * s / std::sqrt(k)};
}

inline double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

/// (1 - s_base) / (1 - s_ours): how many times fewer nonzero weights. Infinite
/// when every weight is zero.
inline double compression_rate(double baseline_sparsity, double ours_sparsity) {
  if (!(baseline_sparsity >= 0.0 && baseline_sparsity <= 1.0) || !(ours_sparsity >= 0.0 && ours_sparsity <= 1.0))
    throw DomainError("sparsity values must lie in [0, 1]");
  if (ours_sparsity == 1.0) return std::numeric_limits<double>::infinity();
  return (1.0 - baseline_sparsity) / (1.0 - ours_sparsity);
}

inline constexpr double kCollapseMargin = 0.02;
inline constexpr std::size_t kCollapseWindow = 3;

/// Chance-level check: mean test accuracy over the last three evaluations is
/// at most 1/C + 0.02. Needs at least five epochs of trace.
inline bool detect_collapse(std::span<const double> test_acc_trace, std::size_t classes) {
  if (test_acc_trace.size() < 5) throw UsageError("collapse detection needs at least 5 epochs of trace");
  std::vector<double> evals;
  for (double v : test_acc_trace)
    if (!std::isnan(v)) evals.push_back(v);
  if (evals.empty()) throw UsageError("trace has no evaluations");
  const std::size_t w = std::min(kCollapseWindow, evals.size());
  const double tail = mean_of(std::span<const double>(evals).last(w));
  return tail <= 1.0 / static_cast<double>(classes) + kCollapseMargin + 1e-12;
}

inline double evaluate_accuracy(Network &net, const Dataset &ds, std::size_t chunk = 512) {
  std::size_t correct = 0;
  const std::size_t n = ds.size(), d = ds.dim();
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t len = std::min(chunk, n - start);
    Tensor x({len, d});
    std::copy_n(ds.features.data().begin() + static_cast<std::ptrdiff_t>(start * d), len * d, x.data().begin());
    const Tensor logits = net.forward(x, Mode::eval);
    for (std::size_t i = 0; i < len; ++i)
      correct += argmax_row(logits.row(i)) == static_cast<std::size_t>(ds.labels[start + i]);
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

struct DataPair {
  Dataset train;
  Dataset test;
};

inline DataPair load_data(const DataSource &src) {
  if (src.kind == "idx") {
    Dataset train = load_idx(src.train_images, src.train_labels, std::nullopt, Split::train);
    Dataset test = load_idx(src.test_images, src.test_labels, train.classes, Split::test);
    if (train.dim() != test.dim()) throw ConfigError("data.test_images", "train and test image sizes differ");
    return {std::move(train), std::move(test)};
  }
  auto [train, test] = gen_synthetic(src.synthetic);
  return {std::move(train), std::move(test)};
}

struct SeedRun {
  std::uint64_t seed = 0;
  std::vector<MetricsRecord> trace;
  double final_test_acc = 0.0;
  double final_sparsity = 0.0;
  bool collapsed = false;
  std::string checkpoint;
  Network net;
};

struct RunResult {
  std::vector<SeedRun> seeds;
  std::size_t classes = 0;
  double test_acc_mean = 0.0;
  std::optional<Interval> test_acc_ci;
  double sparsity_mean = 0.0;
  /// Collapse of the seed-averaged test-accuracy trace.
  bool collapsed = false;
  /// Seed-averaged trace.
  std::vector<MetricsRecord> mean_trace;
};

/// Trains one seed. All randomness derives from `seed`: init from
/// fork("init") inside init_params, dropout masks from fork("dropout.<l>"),
/// and the shuffle of epoch e from fork("epoch.<e>").
inline SeedRun train_seed(const RunConfig &cfg, const DataPair &data, std::uint64_t seed) {
  const Rng root(seed);
  SeedRun run;
  run.seed = seed;
  run.net = init_params(cfg.architecture(data.train.dim(), data.train.classes), root);
  OptimState state(run.net);
  const RegSchedule sched = cfg.schedule();
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const std::uint64_t epoch_seed = root.fork("epoch." + std::to_string(e)).next_u64();
    const EpochMetrics em = run_epoch(run.net, data.train, state, cfg.opt, sched, epoch_seed);
    MetricsRecord r;
    r.epoch = e + 1;
    r.train_loss = em.train_loss;
    r.train_acc = em.train_acc;
    r.avg_abs_grad = em.avg_abs_grad;
    r.layer_avg_abs_grad = em.layer_avg_abs_grad;
    r.avg_abs_w = em.avg_abs_w;
    r.pi = em.pi;
    r.grad_fraction = em.grad_fraction;
    r.effective_lambda_mean = em.effective_lambda_mean;
    r.sparsity = sparsity(run.net);
    const bool eval_now = (e + 1) % cfg.eval_period == 0 || e + 1 == cfg.epochs;
    if (eval_now) r.test_acc = evaluate_accuracy(run.net, data.test);
    run.trace.push_back(std::move(r));
  }
  run.final_test_acc = run.trace.back().test_acc;
  run.final_sparsity = run.trace.back().sparsity;
  std::vector<double> acc;
  for (const auto &r : run.trace) acc.push_back(r.test_acc);
  run.collapsed = acc.size() >= 5 && detect_collapse(acc, data.train.classes);
  return run;
}

inline std::string trace_csv(const std::vector<MetricsRecord> &trace) {
  CsvTable t;
  t.header = trace_columns();
  for (const auto &r : trace)
    t.rows.push_back({std::to_string(r.epoch), format_double(r.train_loss), format_double(r.train_acc),
                      format_double(r.test_acc), format_double(r.avg_abs_grad), format_double(r.avg_abs_w),
                      format_double(r.pi), format_double(r.grad_fraction), format_double(r.sparsity),
                      format_double(r.effective_lambda_mean)});
  return t.to_string();
}

inline std::string layer_trace_csv(const std::vector<MetricsRecord> &trace) {
  CsvTable t;
  t.header = {"epoch", "layer", "avg_abs_grad"};
  for (const auto &r : trace)
    for (std::size_t l = 0; l < r.layer_avg_abs_grad.size(); ++l)
      t.rows.push_back({std::to_string(r.epoch), std::to_string(l + 1), format_double(r.layer_avg_abs_grad[l])});
  return t.to_string();
}

inline std::vector<MetricsRecord> parse_trace_csv(const std::string &text, const std::string &name) {
  const CsvTable t = CsvTable::parse(text, name);
  if (t.header != trace_columns()) throw FormatError(name + ": not a trace CSV", 0);
  std::vector<MetricsRecord> out;
  for (const auto &row : t.rows) {
    double v[10];
    for (std::size_t i = 0; i < 10; ++i)
      if (!parse_double(row[i], v[i])) throw FormatError(name + ": bad number '" + row[i] + "'", 0);
    MetricsRecord r;
    r.epoch = static_cast<std::size_t>(v[0]);
    r.train_loss = v[1];
    r.train_acc = v[2];
    r.test_acc = v[3];
    r.avg_abs_grad = v[4];
    r.avg_abs_w = v[5];
    r.pi = v[6];
    r.grad_fraction = v[7];
    r.sparsity = v[8];
    r.effective_lambda_mean = v[9];
    out.push_back(r);
  }
  return out;
}

inline std::vector<MetricsRecord> average_traces(const std::vector<SeedRun> &runs) {
  std::vector<MetricsRecord> out = runs.front().trace;
  const double k = static_cast<double>(runs.size());
  for (std::size_t e = 0; e < out.size(); ++e) {
    MetricsRecord m;
    m.epoch = out[e].epoch;
    m.test_acc = 0.0;
    m.pi = 0.0;
    m.grad_fraction = 0.0;
    m.layer_avg_abs_grad.assign(out[e].layer_avg_abs_grad.size(), 0.0);
    for (const auto &r : runs) {
      const auto &x = r.trace[e];
      m.train_loss += x.train_loss / k;
      m.train_acc += x.train_acc / k;
      m.test_acc += x.test_acc / k;
      m.avg_abs_grad += x.avg_abs_grad / k;
      m.avg_abs_w += x.avg_abs_w / k;
      m.pi += x.pi / k;
      m.grad_fraction += x.grad_fraction / k;
      m.sparsity += x.sparsity / k;
      m.effective_lambda_mean += x.effective_lambda_mean / k;
      for (std::size_t l = 0; l < m.layer_avg_abs_grad.size(); ++l)
        m.layer_avg_abs_grad[l] += x.layer_avg_abs_grad[l] / k;
    }
    out[e] = std::move(m);
  }
  return out;
}

inline nlohmann::ordered_json config_json(const RunConfig &cfg) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto &[k, v] : config_items(cfg)) j[k] = v;
  return j;
}

inline RunConfig config_from_json(const nlohmann::json &j) {
  RunConfig cfg;
  for (const auto &[k, v] : j.items()) set_config_value(cfg, k, v.is_string() ? v.get<std::string>() : v.dump());
  return cfg;
}

inline nlohmann::ordered_json summary_json(const RunConfig &cfg, const RunResult &r) {
  nlohmann::ordered_json j;
  j["rng_algorithm"] = std::string(Rng::algorithm);
  j["config"] = config_json(cfg);
  j["trace_columns"] = trace_columns();
  j["seeds"] = nlohmann::ordered_json::array();
  for (const auto &s : r.seeds) {
    nlohmann::ordered_json e;
    e["seed"] = s.seed;
    e["final_test_acc"] = s.final_test_acc;
    e["final_sparsity"] = s.final_sparsity;
    e["final_train_loss"] = s.trace.back().train_loss;
    e["collapsed"] = s.collapsed;
    e["trace"] = "trace_seed" + std::to_string(s.seed) + ".csv";
    e["checkpoint"] = s.checkpoint;
    j["seeds"].push_back(e);
  }
  j["test_acc_mean"] = r.test_acc_mean;
  if (r.test_acc_ci) j["test_acc_ci95_half_width"] = r.test_acc_ci->half_width;
  else j["test_acc_ci95_half_width"] = nullptr;
  j["sparsity_mean"] = r.sparsity_mean;
  j["collapsed"] = r.collapsed;
  j["classes"] = r.classes;
  j["data_preprocessing"] = "pixels scaled to [0,1], no mean subtraction, no augmentation";
  return j;
}

/// Runs every seed of `cfg`, then writes trace_seed<s>.csv, layers_seed<s>.csv,
/// checkpoint_seed<s>.txt, and summary.json under `out_dir` when it is given.
inline RunResult train_run(const RunConfig &cfg, const std::optional<fs::path> &out_dir = std::nullopt) {
  validate(cfg);
  const DataPair data = load_data(cfg.data);
  RunResult res;
  res.classes = data.train.classes;
  for (auto seed : cfg.seeds) res.seeds.push_back(train_seed(cfg, data, seed));

  std::vector<double> acc, sp;
  for (const auto &s : res.seeds) {
    acc.push_back(s.final_test_acc);
    sp.push_back(s.final_sparsity);
  }
  res.test_acc_mean = mean_of(acc);
  res.test_acc_ci = confidence_interval(acc);
  res.sparsity_mean = mean_of(sp);
  res.mean_trace = average_traces(res.seeds);
  std::vector<double> mean_acc;
  for (const auto &r : res.mean_trace) mean_acc.push_back(r.test_acc);
  res.collapsed = mean_acc.size() >= 5 && detect_collapse(mean_acc, res.classes);

  if (out_dir) {
    for (auto &s : res.seeds) {
      const std::string tag = "seed" + std::to_string(s.seed);
      write_text(*out_dir / ("trace_" + tag + ".csv"), trace_csv(s.trace));
      write_text(*out_dir / ("layers_" + tag + ".csv"), layer_trace_csv(s.trace));
      s.checkpoint = "checkpoint_" + tag + ".txt";
      save_checkpoint(*out_dir / s.checkpoint, s.net, s.seed);
    }
    write_text(*out_dir / "summary.json", summary_json(cfg, res).dump(2) + "\n");
  }
  return res;
}

struct SweepPoint {
  double lambda = 0.0;
  RunResult result;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  /// Largest lambda whose run did not collapse; absent when all collapsed.
  std::optional<double> tolerance_level;
};

inline std::optional<double> tolerance_level(const std::vector<SweepPoint> &points) {
  std::optional<double> tol;
  for (const auto &p : points)
    if (!p.result.collapsed) tol = p.lambda;
  return tol;
}

/// Runs `jobs` independent tasks at a time; results keep submission order.
template <class T>
std::vector<T> run_pool(std::vector<std::function<T()>> tasks, std::size_t jobs) {
  std::vector<T> out;
  out.reserve(tasks.size());
  if (jobs <= 1) {
    for (auto &t : tasks) out.push_back(t());
    return out;
  }
  for (std::size_t start = 0; start < tasks.size(); start += jobs) {
    std::vector<std::future<T>> wave;
    for (std::size_t i = start; i < std::min(tasks.size(), start + jobs); ++i)
      wave.push_back(std::async(std::launch::async, tasks[i]));
    for (auto &f : wave) out.push_back(f.get());
  }
  return out;
}

inline void check_increasing(std::span<const double> v, const char *key) {
  if (v.empty()) throw ConfigError(key, std::string(key) + ": grid is empty");
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] > v[i - 1])) throw ConfigError(key, std::string(key) + ": values must be strictly increasing");
}

inline std::string lambda_tag(std::size_t i, double lambda) {
  return "lambda_" + std::to_string(i) + "_" + format_double(lambda);
}

inline std::string sweep_csv(const RunConfig &tmpl, const SweepResult &s) {
  CsvTable t;
  t.header = {"lambda", "reg", "gate", "depth", "test_acc_mean", "test_acc_ci95", "sparsity_mean",
              "collapsed", "epochs", "tolerance_level"};
  const std::string tol = s.tolerance_level ? format_double(*s.tolerance_level) : "nan";
  for (const auto &p : s.points)
    t.rows.push_back({format_double(p.lambda), to_string(tmpl.reg_kind), tmpl.gate, std::to_string(tmpl.depth),
                      format_double(p.result.test_acc_mean),
                      p.result.test_acc_ci ? format_double(p.result.test_acc_ci->half_width) : "nan",
                      format_double(p.result.sparsity_mean), p.result.collapsed ? "1" : "0",
                      std::to_string(tmpl.epochs), tol});
  return t.to_string();
}

/// Sparsity vs accuracy, ordered by sparsity.
inline std::string sparsity_accuracy_csv(const SweepResult &s) {
  std::vector<const SweepPoint *> pts;
  for (const auto &p : s.points) pts.push_back(&p);
  std::stable_sort(pts.begin(), pts.end(), [](auto *a, auto *b) {
    return a->result.sparsity_mean < b->result.sparsity_mean;
  });
  CsvTable t;
  t.header = {"sparsity_mean", "test_acc_mean", "lambda", "collapsed"};
  for (auto *p : pts)
    t.rows.push_back({format_double(p->result.sparsity_mean), format_double(p->result.test_acc_mean),
                      format_double(p->lambda), p->result.collapsed ? "1" : "0"});
  return t.to_string();
}

/// One train_run per lambda (template's lambda is overridden). With an output
/// directory each point lands in lambda_<i>_<value>/ and the aggregate tables
/// sweep.csv, sparsity_accuracy.csv and sweep_summary.json are written.
inline SweepResult lambda_sweep(const RunConfig &tmpl, std::span<const double> lambdas,
                                const std::optional<fs::path> &out_dir = std::nullopt, std::size_t jobs = 1) {
  check_increasing(lambdas, "lambdas");
  validate(tmpl);
  std::vector<std::function<RunResult()>> tasks;
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    RunConfig cfg = tmpl;
    cfg.lambda = lambdas[i];
    std::optional<fs::path> dir;
    if (out_dir) dir = *out_dir / lambda_tag(i, lambdas[i]);
    tasks.emplace_back([cfg, dir] { return train_run(cfg, dir); });
  }
  auto results = run_pool(std::move(tasks), jobs);
  SweepResult s;
  for (std::size_t i = 0; i < lambdas.size(); ++i) s.points.push_back({lambdas[i], std::move(results[i])});
  s.tolerance_level = tolerance_level(s.points);

  if (out_dir) {
    write_text(*out_dir / "sweep.csv", sweep_csv(tmpl, s));
    write_text(*out_dir / "sparsity_accuracy.csv", sparsity_accuracy_csv(s));
    nlohmann::ordered_json j;
    j["rng_algorithm"] = std::string(Rng::algorithm);
    j["config"] = config_json(tmpl);
    j["lambdas"] = std::vector<double>(lambdas.begin(), lambdas.end());
    if (s.tolerance_level) j["tolerance_level"] = *s.tolerance_level;
    else j["tolerance_level"] = nullptr;
    j["points"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      const auto &p = s.points[i];
      j["points"].push_back({{"lambda", p.lambda},
                             {"dir", lambda_tag(i, p.lambda)},
                             {"test_acc_mean", p.result.test_acc_mean},
                             {"sparsity_mean", p.result.sparsity_mean},
                             {"collapsed", p.result.collapsed}});
    }
    write_text(*out_dir / "sweep_summary.json", j.dump(2) + "\n");
  }
  return s;
}

struct DepthPoint {
  std::size_t depth = 0;
  SweepResult sweep;
};

struct DepthSweepResult {
  std::vector<DepthPoint> points;
};

/// Constant-gate lambda sweep at every depth over one shared lambda grid.
inline DepthSweepResult depth_sweep(const RunConfig &tmpl, std::span<const std::size_t> depths,
                                    std::span<const double> lambdas,
                                    const std::optional<fs::path> &out_dir = std::nullopt, std::size_t jobs = 1) {
  if (depths.size() < 2) throw ConfigError("depths", "depths: need at least two depths");
  for (std::size_t i = 1; i < depths.size(); ++i)
    if (depths[i] <= depths[i - 1]) throw ConfigError("depths", "depths: values must be strictly increasing");
  DepthSweepResult out;
  for (auto d : depths) {
    RunConfig cfg = tmpl;
    cfg.depth = d;
    cfg.gate = "constant";
    std::optional<fs::path> dir;
    if (out_dir) dir = *out_dir / ("depth_" + std::to_string(d));
    out.points.push_back({d, lambda_sweep(cfg, lambdas, dir, jobs)});
  }
  if (out_dir) {
    CsvTable t;
    t.header = {"depth", "tolerance_level"};
    for (const auto &p : out.points)
      t.rows.push_back({std::to_string(p.depth),
                        p.sweep.tolerance_level ? format_double(*p.sweep.tolerance_level) : "nan"});
    write_text(*out_dir / "depth_tolerance.csv", t.to_string());
  }
  return out;
}

} // namespace gcreg
