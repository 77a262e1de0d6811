#pragma once

// Column tables for traces and trajectories, CSV export, atomic file writes and
// a small hand-written SVG plotter.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "saddlekit/config.hpp"
#include "saddlekit/diagnostics.hpp"
#include "saddlekit/error.hpp"
#include "saddlekit/linalg.hpp"
#include "saddlekit/ode.hpp"
#include "saddlekit/solvers.hpp"

#ifdef _WIN32
#include <process.h>
#define SADDLEKIT_GETPID _getpid
#else
#include <unistd.h>
#define SADDLEKIT_GETPID getpid
#endif

namespace saddlekit {

inline const std::vector<std::string>& diagnostic_columns() {
  static const std::vector<std::string> names{"lyapunov_saddle", "lyapunov_anchor", "ne", "vi_gap_saddle",
                                              "dist_sq_avg_x"};
  return names;
}

struct Table {
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;

  std::size_t column_index(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) {
      std::string msg = "unknown column \"" + name + "\"; available:";
      for (const auto& n : names) msg += " " + n;
      throw ConfigError(msg);
    }
    return static_cast<std::size_t>(it - names.begin());
  }

  std::vector<double> column(const std::string& name) const {
    const std::size_t c = column_index(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[c]);
    return out;
  }
};

namespace detail {

inline std::vector<std::string> state_columns(const char* first, std::size_t d1, std::size_t d2) {
  std::vector<std::string> names{first};
  for (std::size_t i = 0; i < d1; ++i) names.push_back("x_" + std::to_string(i));
  for (std::size_t i = 0; i < d2; ++i) names.push_back("y_" + std::to_string(i));
  for (const auto& n : diagnostic_columns()) names.push_back(n);
  return names;
}

}  // namespace detail

inline Table trace_table(const Trace& trace) {
  Table t;
  const std::size_t d1 = trace.records.empty() ? 0 : trace.records.front().x.size();
  const std::size_t d2 = trace.records.empty() ? 0 : trace.records.front().y.size();
  t.names = detail::state_columns("k", d1, d2);
  for (const auto& rec : trace.records) {
    std::vector<double> row{static_cast<double>(rec.k)};
    row.insert(row.end(), rec.x.begin(), rec.x.end());
    row.insert(row.end(), rec.y.begin(), rec.y.end());
    const auto& d = rec.diag;
    row.insert(row.end(), {d.lyapunov_saddle, d.lyapunov_anchor, d.ne, d.vi_gap_saddle, d.dist_sq_avg_x});
    t.rows.push_back(std::move(row));
  }
  return t;
}

// Same schema with "t" in place of "k"; the Lyapunov columns use the schedule weights.
inline Table trajectory_table(const std::vector<ContinuousState>& traj, const SaddleProblem& p,
                              const StepSchedule& sched, const SaddleCertificate* cert, const Anchor& anchor) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  Table t;
  t.names = detail::state_columns("t", p.d1(), p.d2());
  std::optional<Anchor> star;
  if (cert) star = Anchor::saddle(*cert);
  Vector ix(p.d1());
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const auto& st = traj[i];
    std::vector<double> row{st.t};
    row.insert(row.end(), st.X.begin(), st.X.end());
    row.insert(row.end(), st.Y.begin(), st.Y.end());
    row.push_back(star ? lyapunov(p, st.X, st.Y, *star, sched) : nan);
    row.push_back(lyapunov(p, st.X, st.Y, anchor, sched));
    row.push_back(nan);
    row.push_back(nan);
    double dist = nan;
    if (i > 0) {
      ix += (0.5 * (st.t - traj[i - 1].t)) * (st.X + traj[i - 1].X);
      if (star) dist = norm_sq((1.0 / (st.t - traj.front().t)) * ix - star->x);
    }
    row.push_back(dist);
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string to_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.names.size(); ++i) {
    if (i) out += ',';
    out += t.names[i];
  }
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format_number(row[i]);
    }
    out += '\n';
  }
  return out;
}

// Writes to a sibling temporary file and renames it over the target.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(SADDLEKIT_GETPID());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Error::Category::kConfig, "cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw Error(Error::Category::kConfig, "write to " + tmp.string() + " failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error(Error::Category::kConfig, "cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

namespace detail {

struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  bool log = false;

  double map(double v) const { return ((log ? std::log10(v) : v) - lo) / (hi - lo); }
};

inline Axis make_axis(const std::vector<double>& values, bool log) {
  Axis a;
  a.log = log;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double v : values) {
    const double u = log ? std::log10(v) : v;
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
    lo -= 0.5;
    hi += 0.5;
  } else {
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
  a.lo = lo;
  a.hi = hi;
  return a;
}

inline std::vector<double> ticks(const Axis& a) {
  std::vector<double> out;
  if (a.log && a.hi - a.lo >= 1.0) {
    for (double e = std::ceil(a.lo); e <= a.hi; e += 1.0) out.push_back(std::pow(10.0, e));
    return out;
  }
  const double span = a.hi - a.lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (span / step <= 6.0) break;
  }
  for (double u = std::ceil(a.lo / step) * step; u <= a.hi + 1e-12 * step; u += step) {
    const double v = std::abs(u) < 1e-12 * step ? 0.0 : u;
    out.push_back(a.log ? std::pow(10.0, v) : v);
  }
  return out;
}

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

// Renders the plot as standalone SVG markup. For trajectory-2d, `marker` is drawn as
// the saddle point; the first sample is marked as the start.
inline std::string render_svg(const Table& table, const PlotSpec& spec,
                              const std::optional<std::pair<double, double>>& marker = std::nullopt) {
  using detail::Axis;
  constexpr double kWidth = 640.0;
  constexpr double kHeight = 480.0;
  constexpr double kLeft = 80.0;
  constexpr double kRight = 30.0;
  constexpr double kTop = 40.0;
  constexpr double kBottom = 60.0;
  static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

  if (spec.columns.empty()) throw ConfigError("plot: no columns selected");
  const bool traj = spec.kind == PlotSpec::Kind::kTrajectory2d;
  if (traj && spec.columns.size() != 2) throw ConfigError("plot: trajectory-2d needs exactly two columns");

  auto usable = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && (!spec.log_x || x > 0.0) && (!spec.log_y || y > 0.0);
  };
  std::vector<std::vector<std::pair<double, double>>> series;
  std::vector<std::string> labels;
  const std::vector<double> xs = table.column(traj ? spec.columns[0] : table.names.front());
  for (std::size_t c = traj ? 1 : 0; c < spec.columns.size(); ++c) {
    const std::vector<double> ys = table.column(spec.columns[c]);
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < xs.size(); ++i)
      if (usable(xs[i], ys[i])) pts.emplace_back(xs[i], ys[i]);
    series.push_back(std::move(pts));
    labels.push_back(spec.columns[c]);
  }
  std::vector<double> all_x;
  std::vector<double> all_y;
  for (const auto& s : series)
    for (const auto& [x, y] : s) {
      all_x.push_back(x);
      all_y.push_back(y);
    }
  if (traj && marker && usable(marker->first, marker->second)) {
    all_x.push_back(marker->first);
    all_y.push_back(marker->second);
  }
  const std::size_t max_points =
      std::accumulate(series.begin(), series.end(), std::size_t{0},
                      [](std::size_t m, const auto& s) { return std::max(m, s.size()); });
  if (max_points < 2) throw ConfigError("plot: selection has fewer than two plottable points");

  Axis ax = detail::make_axis(all_x, spec.log_x);
  Axis ay = detail::make_axis(all_y, spec.log_y);
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + ax.map(x) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - ay.map(y)) * ph; };
  using detail::svg_num;

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!spec.title.empty())
    o << "<text x=\"" << svg_num(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
      << detail::escape_xml(spec.title) << "</text>\n";
  o << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : detail::ticks(ax)) {
    const double x = px(t);
    o << "<line x1=\"" << svg_num(x) << "\" y1=\"" << svg_num(kTop + ph) << "\" x2=\"" << svg_num(x) << "\" y2=\""
      << svg_num(kTop + ph + 5) << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << svg_num(x) << "\" y=\"" << svg_num(kTop + ph + 19) << "\" text-anchor=\"middle\">"
      << detail::tick_label(t) << "</text>\n";
  }
  for (double t : detail::ticks(ay)) {
    const double y = py(t);
    o << "<line x1=\"" << svg_num(kLeft - 5) << "\" y1=\"" << svg_num(y) << "\" x2=\"" << svg_num(kLeft) << "\" y2=\""
      << svg_num(y) << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << svg_num(kLeft - 8) << "\" y=\"" << svg_num(y + 4) << "\" text-anchor=\"end\">"
      << detail::tick_label(t) << "</text>\n";
  }
  const std::string x_label = !spec.x_label.empty() ? spec.x_label : (traj ? spec.columns[0] : table.names.front());
  const std::string y_label = !spec.y_label.empty() ? spec.y_label : (traj ? spec.columns[1] : std::string());
  o << "<text x=\"" << svg_num(kLeft + pw / 2) << "\" y=\"" << svg_num(kHeight - 16)
    << "\" text-anchor=\"middle\">" << detail::escape_xml(x_label) << "</text>\n";
  if (!y_label.empty())
    o << "<text x=\"18\" y=\"" << svg_num(kTop + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << svg_num(kTop + ph / 2) << ")\">" << detail::escape_xml(y_label) << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % std::size(kPalette)];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < series[s].size(); ++i) {
      if (i) o << ' ';
      o << svg_num(px(series[s][i].first)) << ',' << svg_num(py(series[s][i].second));
    }
    o << "\"/>\n";
    if (traj && series[s].size() <= 64) {
      for (const auto& [x, y] : series[s])
        o << "<circle cx=\"" << svg_num(px(x)) << "\" cy=\"" << svg_num(py(y)) << "\" r=\"2.5\" fill=\"" << color
          << "\"/>\n";
    }
    if (!traj) {
      const double ly = kTop + 16.0 + 16.0 * static_cast<double>(s);
      o << "<line x1=\"" << svg_num(kLeft + pw - 120) << "\" y1=\"" << svg_num(ly - 4) << "\" x2=\""
        << svg_num(kLeft + pw - 100) << "\" y2=\"" << svg_num(ly - 4) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
      o << "<text x=\"" << svg_num(kLeft + pw - 95) << "\" y=\"" << svg_num(ly) << "\">"
        << detail::escape_xml(labels[s]) << "</text>\n";
    }
  }
  if (traj && !series.front().empty()) {
    const auto [sx, sy] = series.front().front();
    o << "<circle cx=\"" << svg_num(px(sx)) << "\" cy=\"" << svg_num(py(sy))
      << "\" r=\"6\" fill=\"none\" stroke=\"#2ca02c\" stroke-width=\"2\"><title>start</title></circle>\n";
  }
  if (traj && marker && usable(marker->first, marker->second)) {
    const double mx = px(marker->first);
    const double my = py(marker->second);
    o << "<path d=\"M " << svg_num(mx - 6) << ' ' << svg_num(my - 6) << " L " << svg_num(mx + 6) << ' '
      << svg_num(my + 6) << " M " << svg_num(mx - 6) << ' ' << svg_num(my + 6) << " L " << svg_num(mx + 6) << ' '
      << svg_num(my - 6) << "\" stroke=\"#d62728\" stroke-width=\"2\"><title>saddle</title></path>\n";
  }
  o << "</svg>\n";
  return o.str();
}

inline void emit_svg(const Table& table, const PlotSpec& spec, const std::filesystem::path& path,
                     const std::optional<std::pair<double, double>>& marker = std::nullopt) {
  write_atomic(path, render_svg(table, spec, marker));
}

inline void emit_svg(const Trace& trace, const PlotSpec& spec, const std::filesystem::path& path,
                     const std::optional<std::pair<double, double>>& marker = std::nullopt) {
  emit_svg(trace_table(trace), spec, path, marker);
}

}  // namespace saddlekit
