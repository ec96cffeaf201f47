#pragma once

#include <optional>
#include <string>
#include <vector>

namespace pigeon::svg {

struct Point {
  double x = 0.0;
  double y = 0.0;
  double err = 0.0;  // half-length of the vertical error bar; 0 draws none
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Point> data;                         // markers with error bars
  std::vector<std::pair<double, double>> model;    // solid polyline
  std::optional<double> bound;                     // dashed horizontal line
};

/// Standalone SVG document with axes, ticks, the bound line, model curve and data.
std::string render(const Plot& plot);

}  // namespace pigeon::svg
