#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "distlift/errors.hpp"

namespace distlift::svg {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;  // (x, y)
};

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace detail

// Self-contained line chart; no external resources, deterministic output.
inline void write_line_chart(const std::string& path, const std::string& title,
                             const std::string& x_label,
                             const std::string& y_label,
                             const std::vector<Series>& series) {
  constexpr double W = 720, H = 440;
  constexpr double ml = 64, mr = 16, mt = 36, mb = 48;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                  "#9467bd", "#ff7f0e", "#8c564b",
                                  "#17becf", "#7f7f7f"};
  constexpr int kColorCount = 8;

  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool any = false;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      if (!any) {
        xmin = xmax = x;
        ymin = ymax = y;
        any = true;
      }
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (xmax <= xmin) xmax = xmin + 1;
  if (ymax <= ymin) ymax = ymin + 1;

  const auto px = [&](double x) {
    return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr);
  };
  const auto py = [&](double y) {
    return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb);
  };

  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
      << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << ' ' << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" "
         "font-size=\"15\">" << title << "</text>\n";

  for (int i = 0; i <= 5; ++i) {
    const double fx = xmin + (xmax - xmin) * i / 5.0;
    const double fy = ymin + (ymax - ymin) * i / 5.0;
    out << "<line x1=\"" << detail::num(px(fx)) << "\" y1=\"" << H - mb
        << "\" x2=\"" << detail::num(px(fx)) << "\" y2=\"" << mt
        << "\" stroke=\"#dddddd\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << detail::num(py(fy))
        << "\" x2=\"" << W - mr << "\" y2=\"" << detail::num(py(fy))
        << "\" stroke=\"#dddddd\"/>\n";
    out << "<text x=\"" << detail::num(px(fx)) << "\" y=\"" << H - mb + 16
        << "\" text-anchor=\"middle\">" << detail::num(fx) << "</text>\n";
    out << "<text x=\"" << ml - 6 << "\" y=\"" << detail::num(py(fy) + 4)
        << "\" text-anchor=\"end\">" << detail::num(fy) << "</text>\n";
  }
  out << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr
      << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << ml
      << "\" y2=\"" << mt << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 10
      << "\" text-anchor=\"middle\">" << x_label << "</text>\n";
  out << "<text x=\"16\" y=\"" << (mt + H - mb) / 2
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << (mt + H - mb) / 2 << ")\">" << y_label << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % kColorCount];
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : series[s].points)
      out << detail::num(px(x)) << ',' << detail::num(py(y)) << ' ';
    out << "\"/>\n";
    const double ly = mt + 16.0 * static_cast<double>(s);
    out << "<line x1=\"" << W - mr - 150 << "\" y1=\"" << ly + 8 << "\" x2=\""
        << W - mr - 130 << "\" y2=\"" << ly + 8 << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << W - mr - 124 << "\" y=\"" << ly + 12 << "\">"
        << series[s].name << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace distlift::svg
