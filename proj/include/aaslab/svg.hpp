#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

// Minimal static SVG charts (scatter plots and heatmaps) with deterministic output.
namespace aaslab::svg {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
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

inline const std::string& palette(std::size_t i) {
  static const std::vector<std::string> colors = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
                                                  "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939"};
  return colors[i % colors.size()];
}

struct Point {
  double x = 0.0, y = 0.0;
  std::string series;
};

struct ScatterOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  double width = 640, height = 480;
  double radius = 2.5;
  bool diagonal = false;  // draw y = x
};

inline std::string scatter(const std::vector<Point>& points, const ScatterOptions& opt) {
  const double ml = 60, mr = 140, mt = 40, mb = 50;
  const double pw = opt.width - ml - mr, ph = opt.height - mt - mb;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& p : points) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  if (points.empty()) x0 = y0 = 0.0, x1 = y1 = 1.0;
  if (opt.diagonal) {
    x0 = y0 = std::min(x0, y0);
    x1 = y1 = std::max(x1, y1);
  }
  if (!(x1 > x0)) x0 -= 0.5, x1 += 0.5;
  if (!(y1 > y0)) y0 -= 0.5, y1 += 0.5;
  auto sx = [&](double v) { return ml + (v - x0) / (x1 - x0) * pw; };
  auto sy = [&](double v) { return mt + ph - (v - y0) / (y1 - y0) * ph; };

  std::vector<std::string> series;
  for (const auto& p : points)
    if (std::find(series.begin(), series.end(), p.series) == series.end()) series.push_back(p.series);

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(opt.width) + "\" height=\"" +
                  num(opt.height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(opt.width / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" + escape(opt.title) +
       "</text>\n";
  s += "<rect x=\"" + num(ml) + "\" y=\"" + num(mt) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
       "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double vx = x0 + (x1 - x0) * t / 4.0, vy = y0 + (y1 - y0) * t / 4.0;
    s += "<text x=\"" + num(sx(vx)) + "\" y=\"" + num(mt + ph + 15) + "\" text-anchor=\"middle\">" + num(vx) +
         "</text>\n";
    s += "<text x=\"" + num(ml - 5) + "\" y=\"" + num(sy(vy) + 4) + "\" text-anchor=\"end\">" + num(vy) + "</text>\n";
  }
  s += "<text x=\"" + num(ml + pw / 2) + "\" y=\"" + num(opt.height - 10) + "\" text-anchor=\"middle\">" +
       escape(opt.x_label) + "</text>\n";
  s += "<text transform=\"translate(15," + num(mt + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
       escape(opt.y_label) + "</text>\n";
  if (opt.diagonal)
    s += "<line x1=\"" + num(sx(x0)) + "\" y1=\"" + num(sy(y0)) + "\" x2=\"" + num(sx(x1)) + "\" y2=\"" +
         num(sy(y1)) + "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
  for (const auto& p : points) {
    const auto ci = static_cast<std::size_t>(std::find(series.begin(), series.end(), p.series) - series.begin());
    s += "<circle cx=\"" + num(sx(p.x)) + "\" cy=\"" + num(sy(p.y)) + "\" r=\"" + num(opt.radius) + "\" fill=\"" +
         palette(ci) + "\" fill-opacity=\"0.7\"/>\n";
  }
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double ly = mt + 10 + 16.0 * static_cast<double>(i);
    s += "<circle cx=\"" + num(ml + pw + 15) + "\" cy=\"" + num(ly) + "\" r=\"4\" fill=\"" + palette(i) + "\"/>\n";
    s += "<text x=\"" + num(ml + pw + 25) + "\" y=\"" + num(ly + 4) + "\">" + escape(series[i]) + "</text>\n";
  }
  return s + "</svg>\n";
}

struct HeatmapOptions {
  std::string title;
  double lo = 0.0, hi = 100.0;  // colour scale range
  double cell = 44;
};

/// Cells without a value are drawn grey; values are printed in each cell.
inline std::string heatmap(const std::vector<std::string>& rows, const std::vector<std::string>& cols,
                           const std::vector<std::vector<std::optional<double>>>& values, const HeatmapOptions& opt) {
  const double ml = 150, mt = 120;
  const double w = ml + opt.cell * static_cast<double>(cols.size()) + 20;
  const double h = mt + opt.cell * static_cast<double>(rows.size()) + 20;
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w) + "\" height=\"" + num(h) +
                  "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"10\" y=\"20\" font-size=\"14\">" + escape(opt.title) + "</text>\n";
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const double x = ml + opt.cell * (static_cast<double>(c) + 0.5);
    s += "<text transform=\"translate(" + num(x) + "," + num(mt - 6) + ") rotate(-60)\">" + escape(cols[c]) +
         "</text>\n";
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double y = mt + opt.cell * static_cast<double>(r);
    s += "<text x=\"" + num(ml - 6) + "\" y=\"" + num(y + opt.cell / 2 + 4) + "\" text-anchor=\"end\">" +
         escape(rows[r]) + "</text>\n";
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const double x = ml + opt.cell * static_cast<double>(c);
      const auto& v = values[r][c];
      std::string fill = "#dddddd";
      if (v) {
        const double t = std::clamp((*v - opt.lo) / (opt.hi - opt.lo), 0.0, 1.0);
        const int red = static_cast<int>(std::lround(255 * (1.0 - t)));
        const int green = static_cast<int>(std::lround(120 + 100 * t));
        const int blue = static_cast<int>(std::lround(255 * (1.0 - t) * 0.6 + 80 * t));
        char buf[8];
        std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", red, green, blue);
        fill = buf;
      }
      s += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(opt.cell) + "\" height=\"" +
           num(opt.cell) + "\" fill=\"" + fill + "\" stroke=\"white\"/>\n";
      s += "<text x=\"" + num(x + opt.cell / 2) + "\" y=\"" + num(y + opt.cell / 2 + 3) +
           "\" text-anchor=\"middle\">" + (v ? num(*v) : std::string("-")) + "</text>\n";
    }
  }
  return s + "</svg>\n";
}

}  // namespace aaslab::svg
