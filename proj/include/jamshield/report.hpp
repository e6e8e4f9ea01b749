#pragma once

#include <algorithm>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "jamshield/common.hpp"

namespace jamshield::report {

struct Series {
  std::string label;
  std::vector<double> x, y;
};

namespace detail {

inline const char* color(size_t i) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                  "#9467bd", "#ff7f0e", "#8c564b"};
  return palette[i % 6];
}

inline std::string num(double v, int prec = 4) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

}  // namespace detail

inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) throw std::domain_error("percentile: empty sample");
  std::sort(v.begin(), v.end());
  double pos = q * (v.size() - 1);
  size_t lo = static_cast<size_t>(pos);
  size_t hi = std::min(lo + 1, v.size() - 1);
  double frac = pos - lo;
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

inline Series cdf_series(const std::string& label, std::vector<double> samples) {
  std::sort(samples.begin(), samples.end());
  Series s;
  s.label = label;
  for (size_t i = 0; i < samples.size(); ++i) {
    s.x.push_back(samples[i]);
    s.y.push_back(static_cast<double>(i + 1) / samples.size());
  }
  return s;
}

inline std::string svg_chart(const std::string& title, const std::string& xlabel,
                             const std::string& ylabel,
                             const std::vector<Series>& series, int width = 720,
                             int height = 400) {
  const double ml = 60, mr = 20, mt = 32, mb = 46;
  const double pw = width - ml - mr, ph = height - mt - mb;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const auto& s : series)
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (first) {
        xmin = xmax = s.x[i];
        ymin = ymax = s.y[i];
        first = false;
      }
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (xmax - xmin < 1e-12) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (ymax - ymin < 1e-12) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
    << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " " << height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"" << width << "\" height=\"" << height
    << "\" fill=\"white\"/>\n";
  o << "<text x=\"" << width / 2 << "\" y=\"18\" text-anchor=\"middle\" "
       "font-size=\"14\">" << title << "</text>\n";
  o << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw
    << "\" y2=\"" << mt + ph << "\" stroke=\"#444\"/>\n";
  o << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
    << mt + ph << "\" stroke=\"#444\"/>\n";
  for (int g = 0; g <= 4; ++g) {
    double fx = xmin + (xmax - xmin) * g / 4.0;
    double fy = ymin + (ymax - ymin) * g / 4.0;
    o << "<text x=\"" << px(fx) << "\" y=\"" << mt + ph + 16
      << "\" text-anchor=\"middle\" fill=\"#444\">" << detail::num(fx)
      << "</text>\n";
    o << "<text x=\"" << ml - 6 << "\" y=\"" << py(fy) + 4
      << "\" text-anchor=\"end\" fill=\"#444\">" << detail::num(fy)
      << "</text>\n";
    if (g > 0 && g < 4) {
      o << "<line x1=\"" << ml << "\" y1=\"" << py(fy) << "\" x2=\"" << ml + pw
        << "\" y2=\"" << py(fy) << "\" stroke=\"#ddd\"/>\n";
    }
  }
  o << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 8
    << "\" text-anchor=\"middle\">" << xlabel << "</text>\n";
  o << "<text x=\"16\" y=\"" << mt + ph / 2
    << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << mt + ph / 2
    << ")\">" << ylabel << "</text>\n";
  for (size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    o << "<polyline fill=\"none\" stroke=\"" << detail::color(si)
      << "\" stroke-width=\"1.6\" points=\"";
    for (size_t i = 0; i < s.x.size(); ++i)
      o << detail::num(px(s.x[i]), 6) << "," << detail::num(py(s.y[i]), 6) << " ";
    o << "\"/>\n";
    double lx = ml + pw - 150, ly = mt + 14 + 16.0 * si;
    o << "<line x1=\"" << lx << "\" y1=\"" << ly - 4 << "\" x2=\"" << lx + 18
      << "\" y2=\"" << ly - 4 << "\" stroke=\"" << detail::color(si)
      << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << lx + 24 << "\" y=\"" << ly << "\">" << s.label
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

struct LatencyRow {
  std::string label;
  double mean_ms = 0.0, median_ms = 0.0, p95_ms = 0.0;
};

inline std::string latency_table_html(const std::vector<LatencyRow>& rows) {
  std::ostringstream o;
  o << "<table border=\"1\" cellpadding=\"6\" style=\"border-collapse:collapse\">\n";
  o << "<tr><th>policy</th><th>mean latency (ms)</th><th>median (ms)</th>"
       "<th>p95 (ms)</th></tr>\n";
  for (const auto& r : rows) {
    o << "<tr><td>" << r.label << "</td><td>" << detail::num(r.mean_ms)
      << "</td><td>" << detail::num(r.median_ms) << "</td><td>"
      << detail::num(r.p95_ms) << "</td></tr>\n";
  }
  o << "</table>\n";
  return o.str();
}

inline std::string report_html(const std::string& title,
                               const std::vector<std::string>& blocks) {
  std::ostringstream o;
  o << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>" << title
    << "</title></head>\n<body style=\"font-family:sans-serif\">\n<h1>" << title
    << "</h1>\n";
  for (const auto& b : blocks) o << "<div style=\"margin:18px 0\">" << b
                                 << "</div>\n";
  o << "</body></html>\n";
  return o.str();
}

}  // namespace jamshield::report
