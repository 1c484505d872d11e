#pragma once

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gcreg/experiment.hpp"
#include "gcreg/io.hpp"
#include "gcreg/report.hpp"
#include "gcreg/run_config.hpp"

namespace gcreg::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kIoError = 3 };

/// Parses the flat config grammar:
///
///   # comment            (also "; comment")
///   [opt]                section header; prefixes later keys with "opt."
///   momentum = 0.9       -> opt.momentum
///   reg.lambda = 1e-3    dotted keys work anywhere
///
/// Unknown keys and malformed lines are ConfigErrors.
inline std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string &text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string section;
  std::size_t lineno = 0;
  std::istringstream in(text);
  std::string raw;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno), "unterminated section header on line " + std::to_string(lineno));
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno), "expected key = value on line " + std::to_string(lineno));
    std::string key = trim(line.substr(0, eq));
    if (!section.empty()) key = section + "." + key;
    out.emplace_back(key, trim(line.substr(eq + 1)));
  }
  return out;
}

/// Loads either a key-value config file or a run/sweep summary JSON (whose
/// "config" object is the echoed configuration).
inline RunConfig load_config_file(const std::string &path) {
  const std::string text = read_text(path);
  RunConfig cfg;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception &e) {
      throw ConfigError("config", path + ": invalid JSON: " + e.what());
    }
    if (!j.contains("config")) throw ConfigError("config", path + ": summary has no 'config' object");
    return config_from_json(j["config"]);
  }
  for (const auto &[k, v] : parse_config_text(text)) set_config_value(cfg, k, v);
  return cfg;
}

struct CommonOptions {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> sets;
  std::optional<std::string> reg, gate, seeds, data;
  std::optional<double> lambda, mu, dropout;
  std::optional<std::size_t> gamma, epochs, depth, width;
  int verbosity = 0;
};

inline void add_common(CLI::App &app, CommonOptions &o, const std::string &default_out) {
  o.out_dir = default_out;
  app.add_option("-c,--config", o.config_path, "key-value config file or summary.json to rerun");
  app.add_option("-o,--out", o.out_dir, "output directory")->capture_default_str();
  app.add_option("--set", o.sets, "override any key: --set opt.momentum=0.5")->take_all();
  app.add_option("--reg", o.reg, "l1 | l2");
  app.add_option("--gate", o.gate, "constant | epoch | coherence");
  app.add_option("--lambda", o.lambda, "regularization strength");
  app.add_option("--gamma", o.gamma, "epoch gate start epoch");
  app.add_option("--mu", o.mu, "coherence gate threshold");
  app.add_option("--epochs", o.epochs, "training epochs");
  app.add_option("--seeds", o.seeds, "comma-separated seeds");
  app.add_option("--depth", o.depth, "hidden layers");
  app.add_option("--width", o.width, "hidden width");
  app.add_option("--dropout", o.dropout, "dropout probability");
  app.add_option("--data", o.data, "gaussian_clusters | two_spirals | idx");
  app.add_flag("-v,--verbose", o.verbosity, "more output");
}

/// Defaults, then the config file, then --set, then the named flags.
inline RunConfig resolve_config(const CommonOptions &o) {
  RunConfig cfg;
  if (!o.config_path.empty()) cfg = load_config_file(o.config_path);
  for (const auto &kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError(kv, "--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  auto set = [&](const char *key, const auto &opt) {
    if (!opt) return;
    if constexpr (std::is_same_v<std::decay_t<decltype(*opt)>, double>) set_config_value(cfg, key, format_double(*opt));
    else if constexpr (std::is_same_v<std::decay_t<decltype(*opt)>, std::string>) set_config_value(cfg, key, *opt);
    else set_config_value(cfg, key, std::to_string(*opt));
  };
  set("reg.kind", o.reg);
  set("reg.gate", o.gate);
  set("reg.lambda", o.lambda);
  set("reg.gamma", o.gamma);
  set("reg.mu", o.mu);
  set("run.epochs", o.epochs);
  set("run.seeds", o.seeds);
  set("arch.depth", o.depth);
  set("arch.width", o.width);
  set("arch.dropout", o.dropout);
  set("data.kind", o.data);
  validate(cfg);
  return cfg;
}

template <class F>
int guarded(std::ostream &err, F &&body) {
  try {
    return body();
  } catch (const ConfigError &e) {
    err << "config error [" << e.key << "]: " << e.what() << "\n";
    return kConfigError;
  } catch (const IoError &e) {
    err << "io error: " << e.what() << "\n";
    return kIoError;
  } catch (const FormatError &e) {
    err << "format error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::filesystem::filesystem_error &e) {
    err << "io error: " << e.what() << "\n";
    return kIoError;
  }
}

template <class F>
int parse_and_run(CLI::App &app, const std::vector<std::string> &args, std::ostream &out, std::ostream &err,
                  F &&body) {
  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp &) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError &e) {
    err << "usage error: " << e.what() << "\n";
    return kConfigError;
  }
  return guarded(err, body);
}

inline std::vector<double> parse_double_list(const std::string &s, const char *key) {
  std::vector<double> out;
  if (trim(s).empty()) return out;
  for (const auto &tok : split(s, ',')) {
    double v = 0;
    if (!parse_double(trim(tok), v)) throw ConfigError(key, std::string(key) + ": bad number '" + tok + "'");
    out.push_back(v);
  }
  return out;
}

inline void print_run(std::ostream &out, const RunResult &r) {
  out << "test_acc " << format_double(r.test_acc_mean);
  if (r.test_acc_ci) out << " +- " << format_double(r.test_acc_ci->half_width);
  out << "  sparsity " << format_double(r.sparsity_mean) << "  collapsed " << (r.collapsed ? "yes" : "no") << "\n";
}

inline int cmd_train(const std::vector<std::string> &args, std::ostream &out = std::cout,
                     std::ostream &err = std::cerr) {
  CLI::App app{"Train one configuration over its seeds", "gcreg train"};
  CommonOptions o;
  add_common(app, o, "runs/train");
  return parse_and_run(app, args, out, err, [&] {
    const RunConfig cfg = resolve_config(o);
    const RunResult r = train_run(cfg, fs::path(o.out_dir));
    if (o.verbosity > 0)
      for (const auto &rec : r.mean_trace)
        out << "epoch " << rec.epoch << " loss " << format_double(rec.train_loss) << " test_acc "
            << format_double(rec.test_acc) << " pi " << format_double(rec.pi) << "\n";
    print_run(out, r);
    return kOk;
  });
}

inline int cmd_sweep(const std::vector<std::string> &args, std::ostream &out = std::cout,
                     std::ostream &err = std::cerr) {
  CLI::App app{"Lambda sweep, or per-depth tolerance sweep with --depths", "gcreg sweep"};
  CommonOptions o;
  add_common(app, o, "runs/sweep");
  std::optional<std::string> lambdas, depths;
  std::size_t jobs = 1;
  app.add_option("--lambdas", lambdas, "strictly increasing comma-separated lambda grid");
  app.add_option("--depths", depths, "strictly increasing comma-separated depths");
  app.add_option("-j,--jobs", jobs, "concurrent runs")->capture_default_str();
  return parse_and_run(app, args, out, err, [&] {
    const RunConfig cfg = resolve_config(o);
    if (!lambdas) throw ConfigError("lambdas", "--lambdas is required");
    const auto grid = parse_double_list(*lambdas, "lambdas");
    if (grid.empty()) throw ConfigError("lambdas", "--lambdas: grid is empty");
    if (depths) {
      std::vector<std::size_t> ds;
      for (double d : parse_double_list(*depths, "depths")) {
        if (!(d >= 1) || d != std::floor(d)) throw ConfigError("depths", "--depths: depths must be positive integers");
        ds.push_back(static_cast<std::size_t>(d));
      }
      if (ds.empty()) throw ConfigError("depths", "--depths: grid is empty");
      const auto r = depth_sweep(cfg, ds, grid, fs::path(o.out_dir), std::max<std::size_t>(jobs, 1));
      for (const auto &p : r.points)
        out << "depth " << p.depth << " tolerance_level "
            << (p.sweep.tolerance_level ? format_double(*p.sweep.tolerance_level) : "none") << "\n";
      return kOk;
    }
    const auto r = lambda_sweep(cfg, grid, fs::path(o.out_dir), std::max<std::size_t>(jobs, 1));
    for (const auto &p : r.points) {
      out << "lambda " << format_double(p.lambda) << "  ";
      print_run(out, p.result);
    }
    out << "tolerance_level " << (r.tolerance_level ? format_double(*r.tolerance_level) : "none") << "\n";
    return kOk;
  });
}

inline int cmd_report(const std::vector<std::string> &args, std::ostream &out = std::cout,
                      std::ostream &err = std::cerr) {
  CLI::App app{"Merge trace/sweep CSVs into long format and render charts", "gcreg report"};
  std::vector<std::string> inputs;
  std::string out_path = "report.csv";
  std::optional<std::string> svg_dir;
  app.add_option("inputs", inputs, "trace, sweep, depth, or long-format CSV files")->required();
  app.add_option("-o,--out", out_path, "long-format CSV to write")->capture_default_str();
  app.add_option("--svg", svg_dir, "write one SVG line chart per metric into this directory")
      ->expected(0, 1)
      ->default_str("");
  return parse_and_run(app, args, out, err, [&] {
    std::vector<fs::path> paths(inputs.begin(), inputs.end());
    const CsvTable merged = merge_long(paths);
    write_text(out_path, merged.to_string());
    out << "wrote " << out_path << " (" << merged.rows.size() << " rows)\n";
    if (svg_dir) {
      const fs::path dir = svg_dir->empty() ? fs::path(out_path).parent_path() / "charts" : fs::path(*svg_dir);
      for (const auto &p : write_charts(merged, dir)) out << "wrote " << p.string() << "\n";
    }
    return kOk;
  });
}

inline int run_main(const std::vector<std::string> &args, std::ostream &out = std::cout,
                    std::ostream &err = std::cerr) {
  const std::string usage =
      "usage: gcreg <train|sweep|report> [options]\n"
      "       gcreg <command> --help for command options\n"
      "       gcreg keys   lists every configuration key\n";
  if (args.empty()) {
    err << usage;
    return kConfigError;
  }
  const std::vector<std::string> rest(args.begin() + 1, args.end());
  if (args[0] == "train") return cmd_train(rest, out, err);
  if (args[0] == "sweep") return cmd_sweep(rest, out, err);
  if (args[0] == "report") return cmd_report(rest, out, err);
  if (args[0] == "keys") {
    const RunConfig defaults;
    for (const auto &k : config_schema())
      out << k.name << " = " << k.get(defaults) << "    # " << k.doc << "\n";
    return kOk;
  }
  if (args[0] == "--help" || args[0] == "-h") {
    out << usage;
    return kOk;
  }
  err << "unknown command '" << args[0] << "'\n" << usage;
  return kConfigError;
}

} // namespace gcreg::cli
