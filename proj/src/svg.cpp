#include "bwsl/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace bwsl::svg {

namespace {

constexpr double kWidth = 800, kHeight = 420, kLeft = 70, kRight = 160, kTop = 40, kBottom = 50;
constexpr std::array<const char*, 8> kColors = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

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

void header(std::ostringstream& os, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << num(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
     << "</text>\n";
}

struct Scale {
  double lo, hi;
  double y(double v) const { return kTop + (hi - v) / (hi - lo) * (kHeight - kTop - kBottom); }
};

Scale make_scale(double lo, double hi) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

void y_axis(std::ostringstream& os, const Scale& s) {
  const double plot_right = kWidth - kRight;
  for (int i = 0; i <= 4; ++i) {
    const double v = s.lo + (s.hi - s.lo) * i / 4.0;
    const double y = s.y(v);
    os << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(y) << "\" x2=\"" << num(plot_right) << "\" y2=\""
       << num(y) << "\" stroke=\"#e0e0e0\"/>\n"
       << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">" << tick(v)
       << "</text>\n";
  }
  os << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(kLeft) << "\" y2=\""
     << num(kHeight - kBottom) << "\" stroke=\"black\"/>\n";
}

}  // namespace

std::string line_chart(const std::string& title, const std::vector<Series>& series,
                       const std::vector<std::string>& x_labels) {
  std::ostringstream os;
  header(os, title);
  double lo = INFINITY, hi = -INFINITY;
  std::size_t points = 0;
  for (const Series& s : series) {
    for (double v : s.values) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    points = std::max(points, s.values.size());
  }
  if (!std::isfinite(lo)) lo = hi = 0.0;
  const Scale sc = make_scale(lo, hi);
  y_axis(os, sc);
  const double plot_w = kWidth - kLeft - kRight;
  auto x_of = [&](std::size_t i) { return kLeft + (points > 1 ? plot_w * i / (points - 1) : 0.0); };

  if (!x_labels.empty() && points > 0) {
    const std::size_t step = std::max<std::size_t>(1, x_labels.size() / 6);
    for (std::size_t i = 0; i < x_labels.size() && i < points; i += step) {
      os << "<text x=\"" << num(x_of(i)) << "\" y=\"" << num(kHeight - kBottom + 18)
         << "\" text-anchor=\"middle\">" << escape(x_labels[i]) << "</text>\n";
    }
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = kColors[k % kColors.size()];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < series[k].values.size(); ++i) {
      if (!std::isfinite(series[k].values[i])) continue;
      os << num(x_of(i)) << ',' << num(sc.y(series[k].values[i])) << ' ';
    }
    os << "\"/>\n";
    const double ly = kTop + 18.0 * static_cast<double>(k);
    os << "<line x1=\"" << num(kWidth - kRight + 10) << "\" y1=\"" << num(ly) << "\" x2=\""
       << num(kWidth - kRight + 30) << "\" y2=\"" << num(ly) << "\" stroke=\"" << color
       << "\" stroke-width=\"3\"/>\n"
       << "<text x=\"" << num(kWidth - kRight + 36) << "\" y=\"" << num(ly + 4) << "\">" << escape(series[k].name)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string bar_chart(const std::string& title, const std::vector<std::string>& labels,
                      const std::vector<double>& values) {
  std::ostringstream os;
  header(os, title);
  double lo = 0.0, hi = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const Scale sc = make_scale(lo, hi);
  y_axis(os, sc);
  const double plot_w = kWidth - kLeft - kRight;
  const double slot = values.empty() ? plot_w : plot_w / static_cast<double>(values.size());
  const double zero = sc.y(0.0);
  os << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(zero) << "\" x2=\"" << num(kWidth - kRight) << "\" y2=\""
     << num(zero) << "\" stroke=\"black\"/>\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = std::isfinite(values[i]) ? values[i] : 0.0;
    const double y = sc.y(v);
    const double x = kLeft + slot * static_cast<double>(i) + 0.15 * slot;
    os << "<rect x=\"" << num(x) << "\" y=\"" << num(std::min(y, zero)) << "\" width=\"" << num(0.7 * slot)
       << "\" height=\"" << num(std::abs(zero - y)) << "\" fill=\"" << (v < 0 ? kColors[1] : kColors[0]) << "\"/>\n";
    if (i < labels.size()) {
      os << "<text x=\"" << num(x + 0.35 * slot) << "\" y=\"" << num(kHeight - kBottom + 18)
         << "\" text-anchor=\"middle\">" << escape(labels[i]) << "</text>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace bwsl::svg
