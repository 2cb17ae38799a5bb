#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ftnn/dynamics.hpp"
#include "ftnn/format.hpp"

namespace ftnn {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

inline Series loss_series(const std::string& name, const Trajectory& traj) {
  Series s{name, {}, {}};
  s.x.reserve(traj.records.size());
  s.y.reserve(traj.records.size());
  for (const auto& r : traj.records) {
    s.x.push_back(r.t);
    s.y.push_back(r.E);
  }
  return s;
}

/// gnuplot-friendly blocks: "# name" then "x y" rows, blocks separated by two
/// blank lines so `index N` selects a series.
inline void write_curves_dat(std::ostream& out, const std::vector<Series>& series) {
  for (std::size_t k = 0; k < series.size(); ++k) {
    if (k) out << "\n\n";
    out << "# " << series[k].name << '\n';
    for (std::size_t i = 0; i < series[k].x.size(); ++i)
      out << format_double(series[k].x[i]) << ' ' << format_double(series[k].y[i]) << '\n';
  }
}

namespace detail {

inline const char* palette(std::size_t k) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};
  return colors[k % 7];
}

inline std::string svg_num(double v) { return format_sig(v, 6); }

}  // namespace detail

/// Line chart with axes, ticks and a legend. Output depends only on the data.
inline std::string svg_line_chart(const std::vector<Series>& series, const std::string& title,
                                  const std::string& x_label, const std::string& y_label, bool log_y,
                                  std::size_t max_points = 2000) {
  constexpr double W = 720, H = 440, L = 80, R = 170, T = 40, B = 60;
  constexpr double floor_y = 1e-16;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  auto ty = [&](double y) { return log_y ? std::log10(std::max(y, floor_y)) : y; };
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 <= x0) x1 = x0 + 1;
  if (y1 <= y0) y1 = y0 + 1;
  if (log_y) y0 = std::floor(y0), y1 = std::ceil(y1);
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (ty(y) - y0) / (y1 - y0) * (H - T - B); };
  auto py_raw = [&](double v) { return H - B - (v - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << (L + (W - L - R) / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title
     << "</text>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 5; ++k) {
    const double xv = x0 + (x1 - x0) * k / 5.0;
    os << "<line x1=\"" << detail::svg_num(px(xv)) << "\" y1=\"" << H - B << "\" x2=\"" << detail::svg_num(px(xv))
       << "\" y2=\"" << H - B + 5 << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << detail::svg_num(px(xv)) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">"
       << format_sig(xv, 4) << "</text>\n";
  }
  const int yticks = log_y ? static_cast<int>(std::min(8.0, y1 - y0)) : 5;
  for (int k = 0; k <= yticks; ++k) {
    const double v = y0 + (y1 - y0) * k / std::max(1, yticks);
    const double yp = py_raw(v);
    os << "<line x1=\"" << L - 5 << "\" y1=\"" << detail::svg_num(yp) << "\" x2=\"" << L << "\" y2=\""
       << detail::svg_num(yp) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << L - 8 << "\" y=\"" << detail::svg_num(yp + 4) << "\" text-anchor=\"end\">"
       << (log_y ? "1e" + format_sig(v, 3) : format_sig(v, 4)) << "</text>\n";
  }
  os << "<text x=\"" << (L + (W - L - R) / 2) << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">" << x_label
     << "</text>\n";
  os << "<text x=\"18\" y=\"" << (T + (H - T - B) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
     << (T + (H - T - B) / 2) << ")\">" << y_label << (log_y ? " (log)" : "") << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const std::size_t stride = std::max<std::size_t>(1, s.x.size() / std::max<std::size_t>(1, max_points));
    os << "<polyline fill=\"none\" stroke=\"" << detail::palette(k) << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); i += stride) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      os << detail::svg_num(px(s.x[i])) << ',' << detail::svg_num(py(s.y[i])) << ' ';
    }
    if (!s.x.empty() && (s.x.size() - 1) % stride != 0 && std::isfinite(s.y.back()))
      os << detail::svg_num(px(s.x.back())) << ',' << detail::svg_num(py(s.y.back()));
    os << "\"/>\n";
    const double ly = T + 10 + 20.0 * static_cast<double>(k);
    os << "<line x1=\"" << W - R + 15 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 40 << "\" y2=\"" << ly
       << "\" stroke=\"" << detail::palette(k) << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << W - R + 46 << "\" y=\"" << ly + 4 << "\">" << s.name << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace ftnn
