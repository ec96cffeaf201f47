#include "pigeon/svg.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace pigeon::svg {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 80, kRight = 20, kTop = 40, kBottom = 60;

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Step of 1, 2 or 5 times a power of ten giving about five ticks.
double nice_step(double span) {
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0})
    if (raw <= m * mag) return m * mag;
  return 10.0 * mag;
}

struct Range {
  double lo = 0.0, hi = 1.0;
  void include(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
};

}  // namespace

std::string render(const Plot& plot) {
  Range xr{1e300, -1e300}, yr{1e300, -1e300};
  for (const auto& p : plot.data) {
    xr.include(p.x);
    yr.include(p.y - p.err);
    yr.include(p.y + p.err);
  }
  for (const auto& [x, y] : plot.model) {
    xr.include(x);
    yr.include(y);
  }
  if (plot.bound) yr.include(*plot.bound);
  if (xr.lo > xr.hi) xr = {0, 1};
  if (yr.lo > yr.hi) yr = {0, 1};
  if (xr.hi == xr.lo) xr = {xr.lo - 1, xr.hi + 1};
  if (yr.hi == yr.lo) yr = {yr.lo - 1, yr.hi + 1};
  const double xpad = 0.05 * (xr.hi - xr.lo), ypad = 0.08 * (yr.hi - yr.lo);
  xr = {xr.lo - xpad, xr.hi + xpad};
  yr = {yr.lo - ypad, yr.hi + ypad};

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  const auto sx = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  const auto sy = [&](double y) { return kTop + (yr.hi - y) / (yr.hi - yr.lo) * ph; };

  std::string s = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      kWidth, kHeight);
  s += fmt::format("<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
                   kLeft + pw / 2, escape(plot.title));
  s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", kLeft,
                   kTop, pw, ph);

  const double xs = nice_step(xr.hi - xr.lo), ys = nice_step(yr.hi - yr.lo);
  for (double t = std::ceil(xr.lo / xs) * xs; t <= xr.hi; t += xs) {
    s += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1}\" x2=\"{0:.2f}\" y2=\"{2}\" stroke=\"black\"/>\n", sx(t),
                     kTop + ph, kTop + ph + 5);
    s += fmt::format("<text x=\"{:.2f}\" y=\"{}\" text-anchor=\"middle\">{:g}</text>\n", sx(t), kTop + ph + 18,
                     std::abs(t) < 1e-12 * xs ? 0.0 : t);
  }
  for (double t = std::ceil(yr.lo / ys) * ys; t <= yr.hi; t += ys) {
    s += fmt::format("<line x1=\"{0}\" y1=\"{1:.2f}\" x2=\"{2}\" y2=\"{1:.2f}\" stroke=\"black\"/>\n", kLeft - 5,
                     sy(t), kLeft);
    s += fmt::format("<text x=\"{}\" y=\"{:.2f}\" text-anchor=\"end\">{:g}</text>\n", kLeft - 8, sy(t) + 4,
                     std::abs(t) < 1e-12 * ys ? 0.0 : t);
  }
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", kLeft + pw / 2, kHeight - 15,
                   escape(plot.x_label));
  s += fmt::format(
      "<text x=\"20\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 20 {0})\">{1}</text>\n",
      kTop + ph / 2, escape(plot.y_label));

  if (plot.bound)
    s += fmt::format(
        "<line x1=\"{}\" y1=\"{:.2f}\" x2=\"{}\" y2=\"{:.2f}\" stroke=\"red\" stroke-dasharray=\"6,4\"/>\n", kLeft,
        sy(*plot.bound), kLeft + pw, sy(*plot.bound));
  if (!plot.model.empty()) {
    s += "<polyline fill=\"none\" stroke=\"blue\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : plot.model) s += fmt::format("{:.2f},{:.2f} ", sx(x), sy(y));
    s += "\"/>\n";
  }
  for (const auto& p : plot.data) {
    if (p.err > 0.0)
      s += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"orange\"/>\n",
                       sx(p.x), sy(p.y - p.err), sy(p.y + p.err));
    s += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3.5\" fill=\"orange\"/>\n", sx(p.x), sy(p.y));
  }
  s += "</svg>\n";
  return s;
}

}  // namespace pigeon::svg
