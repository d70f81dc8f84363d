#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace ada::tools {
namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 60, kRight = 150, kTop = 40, kBottom = 50;
constexpr std::array<const char*, 8> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                              "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string escape(const std::string& s) {
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

const char* color(std::size_t i) { return kPalette[i % kPalette.size()]; }

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const {
    return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight);
  }
  double py(double y) const {
    return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom);
  }
};

// Widens degenerate ranges so the frame never divides by zero.
void pad_range(double& lo, double& hi) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
}

std::string open_svg(const std::string& title) {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" "
      "font-family=\"sans-serif\" font-size=\"11\">\n"
      "<rect width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n"
      "<text x=\"{2}\" y=\"22\" font-size=\"14\">{3}</text>\n",
      kWidth, kHeight, kLeft, escape(title));
}

std::string axes(const Frame& f, const std::string& x_label, const std::string& y_label,
                 bool x_ticks) {
  std::string out = fmt::format(
      "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n"
      "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{3}\" stroke=\"black\"/>\n",
      kLeft, kHeight - kBottom, kWidth - kRight, kTop);
  for (int i = 0; i <= 4; ++i) {
    const double y = f.y0 + (f.y1 - f.y0) * i / 4.0;
    out += fmt::format("<text x=\"{}\" y=\"{:.1f}\" text-anchor=\"end\">{:.3g}</text>\n", kLeft - 6,
                       f.py(y) + 4, y);
    if (x_ticks) {
      const double x = f.x0 + (f.x1 - f.x0) * i / 4.0;
      out += fmt::format("<text x=\"{:.1f}\" y=\"{}\" text-anchor=\"middle\">{:.3g}</text>\n", f.px(x),
                         kHeight - kBottom + 16, x);
    }
  }
  out += fmt::format("<text x=\"{:.1f}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
                     (kLeft + kWidth - kRight) / 2, kHeight - 10, escape(x_label));
  out += fmt::format(
      "<text x=\"14\" y=\"{:.1f}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.1f})\">{}</text>\n",
      kHeight / 2, kHeight / 2, escape(y_label));
  return out;
}

std::string legend(const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double y = kTop + 16.0 * static_cast<double>(i);
    out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n",
                       kWidth - kRight + 12, y, color(i));
    out += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", kWidth - kRight + 26, y + 9,
                       escape(names[i]));
  }
  return out;
}

}  // namespace

std::string bar_chart(const std::string& title, const std::vector<std::string>& categories,
                      const std::vector<Series>& series, const std::string& y_label) {
  double hi = 0.0;
  for (const auto& s : series)
    for (const auto& v : s.values)
      if (v) hi = std::max(hi, *v);
  Frame f{0.0, static_cast<double>(std::max<std::size_t>(1, categories.size())), 0.0,
          hi > 0.0 ? hi * 1.05 : 1.0};
  std::string out = open_svg(title) + axes(f, "", y_label, false);
  const double group = f.px(1.0) - f.px(0.0);
  const double bar = group * 0.8 / static_cast<double>(std::max<std::size_t>(1, series.size()));
  for (std::size_t c = 0; c < categories.size(); ++c) {
    const double gx = f.px(static_cast<double>(c)) + group * 0.1;
    for (std::size_t s = 0; s < series.size(); ++s) {
      if (c >= series[s].values.size() || !series[s].values[c]) continue;
      const double v = *series[s].values[c];
      out += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"{}\"/>\n",
                         gx + bar * static_cast<double>(s), f.py(v), bar, f.py(0.0) - f.py(v), color(s));
    }
    out += fmt::format("<text x=\"{:.1f}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
                       gx + group * 0.4, kHeight - kBottom + 16, escape(categories[c]));
  }
  std::vector<std::string> names;
  for (const auto& s : series) names.push_back(s.name);
  return out + legend(names) + "</svg>\n";
}

std::string line_chart(const std::string& title, const std::vector<double>& xs,
                       const std::vector<Series>& series, const std::string& x_label,
                       const std::string& y_label) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0;
  for (double x : xs) {
    x0 = std::min(x0, x);
    x1 = std::max(x1, x);
  }
  if (xs.empty()) x0 = x1 = 0.0;
  double y1 = 0.0;
  for (const auto& s : series)
    for (const auto& v : s.values)
      if (v) y1 = std::max(y1, *v);
  pad_range(x0, x1);
  Frame f{x0, x1, 0.0, y1 > 0.0 ? y1 * 1.05 : 1.0};
  std::string out = open_svg(title) + axes(f, x_label, y_label, true);
  for (std::size_t s = 0; s < series.size(); ++s) {
    std::string pts;
    for (std::size_t i = 0; i < xs.size() && i < series[s].values.size(); ++i) {
      if (!series[s].values[i]) continue;
      const double px = f.px(xs[i]), py = f.py(*series[s].values[i]);
      pts += fmt::format("{:.1f},{:.1f} ", px, py);
      out += fmt::format("<circle cx=\"{:.1f}\" cy=\"{:.1f}\" r=\"3\" fill=\"{}\"/>\n", px, py, color(s));
    }
    out += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\"/>\n", pts, color(s));
  }
  std::vector<std::string> names;
  for (const auto& s : series) names.push_back(s.name);
  return out + legend(names) + "</svg>\n";
}

std::string scatter_plot(const std::string& title, const std::vector<PointSet>& sets) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : sets)
    for (const auto& p : s.points) {
      x0 = std::min(x0, p[0]);
      x1 = std::max(x1, p[0]);
      y0 = std::min(y0, p[1]);
      y1 = std::max(y1, p[1]);
    }
  if (!std::isfinite(x0)) x0 = x1 = y0 = y1 = 0.0;
  pad_range(x0, x1);
  pad_range(y0, y1);
  Frame f{x0, x1, y0, y1};
  std::string out = open_svg(title) + axes(f, "PC1", "PC2", true);
  for (std::size_t s = 0; s < sets.size(); ++s) {
    for (const auto& p : sets[s].points) {
      out += fmt::format("<circle cx=\"{:.1f}\" cy=\"{:.1f}\" r=\"2.5\" fill=\"{}\" fill-opacity=\"0.7\"/>\n",
                         f.px(p[0]), f.py(p[1]), color(s));
    }
  }
  std::vector<std::string> names;
  for (const auto& s : sets) names.push_back(s.name);
  return out + legend(names) + "</svg>\n";
}

}  // namespace ada::tools
