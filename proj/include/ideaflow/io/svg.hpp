#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "ideaflow/error.hpp"

namespace ideaflow::io {

// Minimal SVG canvas with a single pair of axes. Coordinates are data units;
// the y axis may be logarithmic (base 10 ticks). Output is deterministic text.
class SvgPlot {
 public:
  struct Series {
    std::string label;
    std::vector<double> x, y;
    std::string color = "#1f77b4";
    bool line = true;
    double radius = 2.5;
  };

  SvgPlot(std::string title, std::string xlabel, std::string ylabel, bool log_y = false)
      : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)), log_y_(log_y) {}

  void add(Series s) {
    if (s.x.size() != s.y.size()) throw DomainError("svg: x and y differ in length");
    series_.push_back(std::move(s));
  }

  // Horizontal reference line.
  void hline(double y, std::string color = "#999999") { hlines_.push_back({y, std::move(color)}); }

  // Violin of `values` centred at x = position; widths are relative to the group spacing.
  void violin(double position, const std::vector<double>& values, std::string color = "#8c6bb1") {
    violins_.push_back({position, values, std::move(color)});
  }

  void set_x_categories(std::vector<std::string> labels) { categories_ = std::move(labels); }

  std::string render() const {
    double x0 = inf(), x1 = -inf(), y0 = inf(), y1 = -inf();
    auto take_y = [&](double y) {
      const double v = ty(y);
      if (std::isfinite(v)) y0 = std::min(y0, v), y1 = std::max(y1, v);
    };
    for (const auto& s : series_) {
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(ty(s.y[i]))) continue;
        x0 = std::min(x0, s.x[i]), x1 = std::max(x1, s.x[i]);
        take_y(s.y[i]);
      }
    }
    for (const auto& h : hlines_) take_y(h.y);
    for (const auto& v : violins_) {
      x0 = std::min(x0, v.position - 0.5), x1 = std::max(x1, v.position + 0.5);
      for (double y : v.values) take_y(y);
    }
    if (!(x0 <= x1)) x0 = 0.0, x1 = 1.0;
    if (!(y0 <= y1)) y0 = 0.0, y1 = 1.0;
    if (x0 == x1) x0 -= 0.5, x1 += 0.5;
    if (y0 == y1) y0 -= 0.5, y1 += 0.5;
    const double pad = 0.04 * (y1 - y0);
    y0 -= pad, y1 += pad;

    auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); };
    auto py = [&](double v) { return kHeight - kBottom - (v - y0) / (y1 - y0) * (kHeight - kTop - kBottom); };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title_)
      << "</text>\n";
    // Axes and ticks.
    o << "<g stroke=\"black\" fill=\"none\"><line x1=\"" << kLeft << "\" y1=\"" << kHeight - kBottom << "\" x2=\""
      << kWidth - kRight << "\" y2=\"" << kHeight - kBottom << "\"/><line x1=\"" << kLeft << "\" y1=\"" << kTop
      << "\" x2=\"" << kLeft << "\" y2=\"" << kHeight - kBottom << "\"/></g>\n";
    if (categories_.empty()) {
      for (double t : ticks(x0, x1))
        o << "<text x=\"" << f(px(t)) << "\" y=\"" << kHeight - kBottom + 16 << "\" text-anchor=\"middle\">" << label(t)
          << "</text>\n";
    } else {
      for (std::size_t i = 0; i < categories_.size(); ++i)
        o << "<text x=\"" << f(px(static_cast<double>(i))) << "\" y=\"" << kHeight - kBottom + 16
          << "\" text-anchor=\"middle\">" << escape(categories_[i]) << "</text>\n";
    }
    for (double t : ticks(y0, y1)) {
      o << "<line x1=\"" << kLeft - 4 << "\" y1=\"" << f(py(t)) << "\" x2=\"" << kLeft << "\" y2=\"" << f(py(t))
        << "\" stroke=\"black\"/>";
      o << "<text x=\"" << kLeft - 7 << "\" y=\"" << f(py(t) + 4) << "\" text-anchor=\"end\">"
        << (log_y_ ? "1e" + label(t) : label(t)) << "</text>\n";
    }
    o << "<text x=\"" << (kLeft + kWidth - kRight) / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">"
      << escape(xlabel_) << "</text>\n";
    o << "<text transform=\"translate(16," << (kTop + kHeight - kBottom) / 2
      << ") rotate(-90)\" text-anchor=\"middle\">" << escape(ylabel_) << (log_y_ ? " (log10)" : "") << "</text>\n";

    for (const auto& h : hlines_) {
      if (!std::isfinite(ty(h.y))) continue;
      o << "<line x1=\"" << kLeft << "\" y1=\"" << f(py(ty(h.y))) << "\" x2=\"" << kWidth - kRight << "\" y2=\""
        << f(py(ty(h.y))) << "\" stroke=\"" << h.color << "\" stroke-dasharray=\"4 3\"/>\n";
    }
    for (const auto& v : violins_) render_violin(o, v, px, py);
    for (const auto& s : series_) {
      if (s.line) {
        o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i)
          if (std::isfinite(ty(s.y[i]))) o << f(px(s.x[i])) << ',' << f(py(ty(s.y[i]))) << ' ';
        o << "\"/>\n";
      } else {
        o << "<g fill=\"" << s.color << "\" fill-opacity=\"0.6\">";
        for (std::size_t i = 0; i < s.x.size(); ++i)
          if (std::isfinite(s.x[i]) && std::isfinite(ty(s.y[i])))
            o << "<circle cx=\"" << f(px(s.x[i])) << "\" cy=\"" << f(py(ty(s.y[i]))) << "\" r=\"" << f(s.radius)
              << "\"/>";
        o << "</g>\n";
      }
    }
    // Legend.
    double ly = kTop + 8;
    for (const auto& s : series_) {
      if (s.label.empty()) continue;
      o << "<rect x=\"" << kWidth - kRight - 150 << "\" y=\"" << f(ly - 9) << "\" width=\"10\" height=\"10\" fill=\""
        << s.color << "\"/><text x=\"" << kWidth - kRight - 135 << "\" y=\"" << f(ly) << "\">" << escape(s.label)
        << "</text>\n";
      ly += 16;
    }
    o << "</svg>\n";
    return o.str();
  }

 private:
  struct HLine {
    double y;
    std::string color;
  };
  struct Violin {
    double position;
    std::vector<double> values;
    std::string color;
  };

  static constexpr int kWidth = 720, kHeight = 480, kLeft = 70, kRight = 20, kTop = 36, kBottom = 50;

  static double inf() { return std::numeric_limits<double>::infinity(); }

  double ty(double y) const {
    if (!std::isfinite(y)) return std::numeric_limits<double>::quiet_NaN();
    if (!log_y_) return y;
    return y > 0.0 ? std::log10(y) : std::numeric_limits<double>::quiet_NaN();
  }

  static std::string f(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", x);
    return buf;
  }

  static std::string label(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", std::abs(x) < 1e-12 ? 0.0 : x);
    return buf;
  }

  static std::string escape(const std::string& s) {
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

  // About six round-number ticks covering [lo, hi].
  static std::vector<double> ticks(double lo, double hi) {
    const double span = hi - lo;
    const double raw = span / 6.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
      if (m * mag >= raw) {
        step = m * mag;
        break;
      }
    std::vector<double> out;
    for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) out.push_back(t);
    return out;
  }

  template <typename PX, typename PY>
  void render_violin(std::ostringstream& o, const Violin& v, PX px, PY py) const {
    std::vector<double> ys;
    for (double y : v.values)
      if (std::isfinite(ty(y))) ys.push_back(ty(y));
    if (ys.size() < 2) return;
    std::sort(ys.begin(), ys.end());
    const double lo = ys.front(), hi = ys.back();
    const double n = static_cast<double>(ys.size());
    double mean = 0.0, var = 0.0;
    for (double y : ys) mean += y;
    mean /= n;
    for (double y : ys) var += (y - mean) * (y - mean);
    const double sd = std::sqrt(var / (n - 1.0));
    const double bw = std::max(1.06 * sd * std::pow(n, -0.2), 1e-9 * (1.0 + std::abs(mean)));
    // Gaussian KDE on 60 levels, evaluated on a thinned sample for speed.
    const std::size_t stride = std::max<std::size_t>(1, ys.size() / 4000);
    std::vector<double> grid, dens;
    double peak = 0.0;
    for (int k = 0; k <= 60; ++k) {
      const double y = lo + (hi - lo) * k / 60.0;
      double d = 0.0;
      for (std::size_t i = 0; i < ys.size(); i += stride) {
        const double z = (y - ys[i]) / bw;
        d += std::exp(-0.5 * z * z);
      }
      grid.push_back(y);
      dens.push_back(d);
      peak = std::max(peak, d);
    }
    const double half = px(v.position + 0.4) - px(v.position);
    o << "<polygon fill=\"" << v.color << "\" fill-opacity=\"0.55\" stroke=\"" << v.color << "\" points=\"";
    for (std::size_t k = 0; k < grid.size(); ++k)
      o << f(px(v.position) + half * dens[k] / peak) << ',' << f(py(grid[k])) << ' ';
    for (std::size_t k = grid.size(); k-- > 0;)
      o << f(px(v.position) - half * dens[k] / peak) << ',' << f(py(grid[k])) << ' ';
    o << "\"/>\n";
    const double med = ys[ys.size() / 2];
    o << "<line x1=\"" << f(px(v.position) - half * 0.5) << "\" y1=\"" << f(py(med)) << "\" x2=\""
      << f(px(v.position) + half * 0.5) << "\" y2=\"" << f(py(med)) << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
  }

  std::string title_, xlabel_, ylabel_;
  bool log_y_;
  std::vector<Series> series_;
  std::vector<HLine> hlines_;
  std::vector<Violin> violins_;
  std::vector<std::string> categories_;
};

}  // namespace ideaflow::io
