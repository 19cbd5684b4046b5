#pragma once

#include "fanova/curves.hpp"
#include "fanova/simulate.hpp"
#include "fanova/stats.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace fanova {

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// Data-to-pixel mapping of the plotting area.
struct PlotFrame {
  double x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0;
  double width = 720.0, height = 420.0;
  double left = 64.0, right = 150.0, top = 36.0, bottom = 48.0;

  double px(double x) const { return left + (x - x_min) / (x_max - x_min) * (width - left - right); }
  double py(double y) const { return height - bottom - (y - y_min) / (y_max - y_min) * (height - top - bottom); }
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotSeries> series;
  std::vector<double> rules;  // vertical rules at these x positions
};

PlotFrame frame_for(const LinePlot& plot);

/// Display-only SVG: one <path class="series"> per series and one
/// <line class="rule"> per vertical rule.
void write_svg(std::ostream& out, const LinePlot& plot);

/// Group-mean curves with interval boundaries as vertical rules.
LinePlot means_plot(const FunctionalDataset& ds, const IntervalPartition* partition = nullptr);
void plot_means(std::ostream& out, const FunctionalDataset& ds, const IntervalPartition* partition = nullptr);

/// Rejection rate against beta, one series per interval (or per pair).
LinePlot power_plot(const PowerTable& table, const std::string& hypothesis = "interval");

}  // namespace fanova
