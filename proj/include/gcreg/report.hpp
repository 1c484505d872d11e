#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gcreg/experiment.hpp"
#include "gcreg/io.hpp"

namespace gcreg {

inline const std::vector<std::string> &long_columns() {
  static const std::vector<std::string> cols = {"run_id", "epoch", "metric", "value"};
  return cols;
}

/// Directory name plus file stem, e.g. "lambda_3_0.01/trace_seed1".
inline std::string run_id_for(const fs::path &p) {
  const auto parent = p.parent_path().filename().string();
  return parent.empty() ? p.stem().string() : parent + "/" + p.stem().string();
}

/// Converts one trace, sweep, depth or long-format table into long rows.
inline void append_long_rows(const CsvTable &t, const fs::path &source, CsvTable &out) {
  if (t.header == long_columns()) {
    out.rows.insert(out.rows.end(), t.rows.begin(), t.rows.end());
    return;
  }
  const std::string id = run_id_for(source);
  if (t.header == trace_columns()) {
    for (const auto &row : t.rows)
      for (std::size_t c = 1; c < t.header.size(); ++c) out.rows.push_back({id, row[0], t.header[c], row[c]});
    return;
  }
  if (!t.header.empty() && t.header[0] == "lambda" && t.column("test_acc_mean") >= 0) {
    const auto gate = t.column("gate"), reg = t.column("reg"), depth = t.column("depth"), epochs = t.column("epochs");
    for (const auto &row : t.rows) {
      std::string series = id;
      if (gate >= 0 && reg >= 0) series += ":" + row[static_cast<std::size_t>(reg)] + "_" + row[static_cast<std::size_t>(gate)];
      if (depth >= 0) series += "_depth" + row[static_cast<std::size_t>(depth)];
      const std::string rid = series + "@lambda=" + row[0];
      const std::string ep = epochs >= 0 ? row[static_cast<std::size_t>(epochs)] : "";
      for (const char *m : {"test_acc_mean", "test_acc_ci95", "sparsity_mean", "collapsed"}) {
        const auto c = t.column(m);
        if (c >= 0) out.rows.push_back({rid, ep, m, row[static_cast<std::size_t>(c)]});
      }
    }
    return;
  }
  if (t.header == std::vector<std::string>{"depth", "tolerance_level"}) {
    for (const auto &row : t.rows) out.rows.push_back({id + "@depth=" + row[0], "", "tolerance_level", row[1]});
    return;
  }
  if (t.header == std::vector<std::string>{"sparsity_mean", "test_acc_mean", "lambda", "collapsed"}) {
    for (const auto &row : t.rows) {
      const std::string rid = id + "@lambda=" + row[2];
      out.rows.push_back({rid, "", "sparsity_mean", row[0]});
      out.rows.push_back({rid, "", "test_acc_mean", row[1]});
    }
    return;
  }
  throw FormatError(source.string() + ": unrecognized CSV header", 0);
}

inline CsvTable merge_long(const std::vector<fs::path> &inputs) {
  CsvTable out;
  out.header = long_columns();
  for (const auto &p : inputs) {
    if (!fs::exists(p)) throw IoError("missing input " + p.string());
    append_long_rows(CsvTable::parse(read_text(p), p.string()), p, out);
  }
  return out;
}

struct ChartSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

inline std::string xml_escape(const std::string &s) {
  std::string o;
  for (char c : s) {
    switch (c) {
    case '<': o += "&lt;"; break;
    case '>': o += "&gt;"; break;
    case '&': o += "&amp;"; break;
    case '"': o += "&quot;"; break;
    default: o += c;
    }
  }
  return o;
}

/// Static line chart. `log_x` plots log10 of x (used for lambda axes).
inline std::string svg_line_chart(const std::string &title, const std::string &x_label,
                                  const std::vector<ChartSeries> &series, bool log_x) {
  constexpr double W = 720, H = 440, L = 70, R = 200, T = 40, B = 50;
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  auto tx = [&](double x) { return log_x ? std::log10(x) : x; };
  for (const auto &s : series)
    for (auto [x, y] : s.points) {
      if (!std::isfinite(y) || (log_x && !(x > 0))) continue;
      xmin = std::min(xmin, tx(x)); xmax = std::max(xmax, tx(x));
      ymin = std::min(ymin, y); ymax = std::max(ymax, y);
    }
  if (!std::isfinite(xmin)) { xmin = 0; xmax = 1; ymin = 0; ymax = 1; }
  if (xmax == xmin) { xmin -= 0.5; xmax += 0.5; }
  if (ymax == ymin) { ymin -= 0.5; ymax += 0.5; }
  auto px = [&](double x) { return L + (tx(x) - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };

  static const char *palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << xml_escape(title) << "</text>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = xmin + (xmax - xmin) * i / 4.0, fy = ymin + (ymax - ymin) * i / 4.0;
    const double sx = L + (W - L - R) * i / 4.0, sy = H - B - (H - T - B) * i / 4.0;
    std::ostringstream xl, yl;
    xl.precision(3);
    yl.precision(3);
    if (log_x) xl << "1e" << fx; else xl << fx;
    yl << fy;
    o << "<text x=\"" << sx << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << xl.str() << "</text>\n";
    o << "<text x=\"" << L - 6 << "\" y=\"" << sy + 4 << "\" text-anchor=\"end\">" << yl.str() << "</text>\n";
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << xml_escape(x_label) << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char *color = palette[i % 10];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (auto [x, y] : series[i].points) {
      if (!std::isfinite(y) || (log_x && !(x > 0))) continue;
      o << px(x) << "," << py(y) << " ";
    }
    o << "\"/>\n";
    const double ly = T + 16.0 * static_cast<double>(i);
    o << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 30 << "\" y2=\"" << ly
      << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << W - R + 35 << "\" y=\"" << ly + 4 << "\">" << xml_escape(series[i].name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

/// One chart per metric. Rows whose run_id carries "@lambda=" are plotted
/// against lambda on a log axis; other rows against epoch.
inline std::vector<fs::path> write_charts(const CsvTable &long_rows, const fs::path &dir) {
  struct Acc {
    std::map<std::string, ChartSeries> series;
    bool by_lambda = false;
  };
  std::map<std::string, Acc> per_metric;
  for (const auto &row : long_rows.rows) {
    const std::string &rid = row[0], &epoch = row[1], &metric = row[2];
    double y = 0;
    if (!parse_double(row[3], y)) continue;
    const auto at = rid.find("@lambda=");
    double x = 0;
    std::string name;
    bool by_lambda = false;
    if (at != std::string::npos) {
      if (!parse_double(rid.substr(at + 8), x)) continue;
      name = rid.substr(0, at);
      by_lambda = true;
    } else {
      if (epoch.empty() || !parse_double(epoch, x)) continue;
      name = rid;
    }
    const std::string key = metric + (by_lambda ? "_vs_lambda" : "_vs_epoch");
    auto &acc = per_metric[key];
    acc.by_lambda = by_lambda;
    auto &s = acc.series[name];
    s.name = name;
    s.points.emplace_back(x, y);
  }
  std::vector<fs::path> written;
  for (auto &[key, acc] : per_metric) {
    std::vector<ChartSeries> series;
    for (auto &[_, s] : acc.series) {
      std::sort(s.points.begin(), s.points.end());
      series.push_back(s);
    }
    const fs::path p = dir / (key + ".svg");
    write_text(p, svg_line_chart(key, acc.by_lambda ? "lambda (log10)" : "epoch", series, acc.by_lambda));
    written.push_back(p);
  }
  return written;
}

} // namespace gcreg
