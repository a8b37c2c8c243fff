#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "halfvae/errors.hpp"
#include "halfvae/io.hpp"
#include "halfvae/pipeline.hpp"

namespace halfvae {

struct Series {
  std::string name;
  std::vector<double> values;
};

// Optional shaded band drawn under the lines.
struct Band {
  std::vector<double> lower;
  std::vector<double> upper;
};

inline std::string columns_csv(const std::vector<Series>& cols) {
  std::string out;
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i].name;
  out += '\n';
  const std::size_t rows = cols.empty() ? 0 : cols.front().values.size();
  for (const auto& c : cols)
    if (c.values.size() != rows) throw ShapeError("columns_csv: ragged columns");
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + format_double(cols[i].values[r]);
    out += '\n';
  }
  return out;
}

namespace detail {

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline const char* palette(std::size_t i) {
  static const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  return colours[i % 6];
}

}  // namespace detail

// Lines (and an optional band) over a shared x axis; one panel, no axes ticks.
inline std::string render_svg(const std::string& title, const std::vector<double>& x,
                              const std::vector<Series>& lines, const std::optional<Band>& band = {}) {
  const double w = 640, h = 320, pad = 30;
  double lo = INFINITY, hi = -INFINITY;
  auto widen = [&](const std::vector<double>& v) {
    for (double y : v)
      if (std::isfinite(y)) lo = std::min(lo, y), hi = std::max(hi, y);
  };
  for (const auto& s : lines) widen(s.values);
  if (band) widen(band->lower), widen(band->upper);
  if (!(lo < hi)) lo -= 1.0, hi += 1.0;
  const double x0 = x.empty() ? 0.0 : x.front();
  const double x1 = x.size() > 1 ? x.back() : x0 + 1.0;
  auto px = [&](double v) { return pad + (v - x0) / (x1 - x0) * (w - 2 * pad); };
  auto py = [&](double v) { return h - pad - (v - lo) / (hi - lo) * (h - 2 * pad); };

  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"320\" viewBox=\"0 0 640 320\">\n";
  out += "<rect width=\"640\" height=\"320\" fill=\"white\"/>\n";
  out += "<text x=\"" + detail::svg_num(pad) + "\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\">" + title + "</text>\n";
  if (band) {
    std::string pts;
    for (std::size_t i = 0; i < x.size(); ++i) pts += detail::svg_num(px(x[i])) + "," + detail::svg_num(py(band->upper[i])) + " ";
    for (std::size_t i = x.size(); i-- > 0;) pts += detail::svg_num(px(x[i])) + "," + detail::svg_num(py(band->lower[i])) + " ";
    out += "<polygon points=\"" + pts + "\" fill=\"#1f77b4\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
  }
  for (std::size_t s = 0; s < lines.size(); ++s) {
    std::string pts;
    for (std::size_t i = 0; i < x.size() && i < lines[s].values.size(); ++i)
      pts += detail::svg_num(px(x[i])) + "," + detail::svg_num(py(lines[s].values[i])) + " ";
    out += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + detail::palette(s) + "\" stroke-width=\"1\"/>\n";
    out += "<text x=\"" + detail::svg_num(w - 150) + "\" y=\"" + detail::svg_num(18 + 14 * s) +
           "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" + detail::palette(s) + "\">" + lines[s].name + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

inline std::vector<double> index_axis(std::size_t n, double start = 0.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = start + static_cast<double>(i);
  return x;
}

inline std::vector<Series> matrix_series(const Matrix& m, const std::string& prefix) {
  std::vector<Series> out;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    out.push_back({prefix + std::to_string(r + 1), {row.begin(), row.end()}});
  }
  return out;
}

// Writes <stem>.csv (t column then series) and <stem>.svg.
inline void write_figure(const fs::path& out, const std::string& stem, const std::string& title,
                         const std::vector<double>& x, const std::vector<Series>& lines,
                         const std::optional<Band>& band = {}) {
  std::vector<Series> cols{{"t", x}};
  cols.insert(cols.end(), lines.begin(), lines.end());
  if (band) {
    cols.push_back({"lower", band->lower});
    cols.push_back({"upper", band->upper});
  }
  write_text(out / (stem + ".csv"), columns_csv(cols));
  write_text(out / (stem + ".svg"), render_svg(title, x, lines, band));
}

// First directory containing `file`, if any.
inline std::optional<fs::path> locate(const std::vector<fs::path>& dirs, const std::string& file) {
  for (const auto& d : dirs)
    if (fs::is_regular_file(d / file)) return d / file;
  return std::nullopt;
}

inline fs::path locate_required(const std::vector<fs::path>& dirs, const std::string& file,
                                const std::string& producer) {
  if (auto p = locate(dirs, file)) return *p;
  std::string where;
  for (const auto& d : dirs) where += (where.empty() ? "" : ", ") + d.string();
  throw IoError(file + " not found in [" + where + "] (produced by `halfvae " + producer + "`)");
}

// Emits figure files for every artifact found. report.json and metrics.json
// are required; sources/observations figures are added when the dataset
// directory is among `dirs`. Returns the stems written.
inline std::vector<std::string> cmd_plot(const std::vector<fs::path>& dirs, const fs::path& out) {
  if (dirs.empty()) throw ConfigError("plot: at least one --data directory is required");
  const auto report_path = locate_required(dirs, kReportFile, "train");
  const auto metrics_path = locate_required(dirs, kMetricsFile, "evaluate");
  const json report = read_json(report_path);
  const json metrics = read_json(metrics_path);
  std::vector<std::string> stems;

  if (auto p = locate(dirs, kSourcesFile)) {
    const Matrix s = read_signal_csv(*p);
    write_figure(out, "fig_sources", "Independent components", index_axis(s.cols()), matrix_series(s, "component_"));
    stems.push_back("fig_sources");
  }
  if (auto p = locate(dirs, kObservationsFile)) {
    const Matrix x = read_signal_csv(*p);
    write_figure(out, "fig_observations", "Observations", index_axis(x.cols()), matrix_series(x, "channel_"));
    stems.push_back("fig_observations");
  }

  try {
    const auto& curve = report.at("loss_curve");
    std::vector<Series> lines{{"loss", curve.at("loss").get<std::vector<double>>()},
                              {"reconstruction", curve.at("reconstruction").get<std::vector<double>>()},
                              {"kl", curve.at("kl").get<std::vector<double>>()}};
    write_figure(out, "fig_loss", "Training loss", index_axis(lines[0].values.size(), 1.0), lines);
    stems.push_back("fig_loss");

    for (std::size_t epoch : report.at("snapshots").get<std::vector<std::size_t>>()) {
      const Matrix z = read_signal_csv(locate_required(dirs, snapshot_name(epoch), "train --snapshot-every"));
      const std::string stem = "fig_zmu_epoch_" + std::to_string(epoch);
      write_figure(out, stem, "Z_mu at epoch " + std::to_string(epoch), index_axis(z.cols()),
                   matrix_series(z, "component_"));
      stems.push_back(stem);
    }

    const std::string model = metrics.at("model").get<std::string>();
    const Matrix truth = matrix_from_json(metrics.at("truth_zscored"));
    const auto& ci = metrics.at("ci_band");
    const Matrix mean = matrix_from_json(ci.at("mean"));
    const Matrix lower = matrix_from_json(ci.at("lower"));
    const Matrix upper = matrix_from_json(ci.at("upper"));
    const auto x = index_axis(truth.cols());
    std::vector<Series> overlay;
    for (std::size_t i = 0; i < truth.rows(); ++i) {
      const std::string c = std::to_string(i + 1);
      auto t = truth.row(i);
      auto e = mean.row(i);
      overlay.push_back({"truth_" + c, {t.begin(), t.end()}});
      overlay.push_back({"estimate_" + c, {e.begin(), e.end()}});

      auto lo = lower.row(i), hi = upper.row(i);
      Band band{{lo.begin(), lo.end()}, {hi.begin(), hi.end()}};
      const std::string stem = "fig_ci_band_component_" + c;
      write_figure(out, stem, "95% band, component " + c + " (" + model_label(model) + ")", x,
                   {{"mean", {e.begin(), e.end()}}}, band);
      stems.push_back(stem);
    }
    const std::string stem = "fig_overlay_" + model;
    write_figure(out, stem, "Truth vs estimate (" + model_label(model) + ")", x, overlay);
    stems.push_back(stem);
  } catch (const json::exception& e) {
    throw IoError(std::string("plot: malformed input: ") + e.what());
  }
  return stems;
}

}  // namespace halfvae
