#include "fanova/plot.hpp"

#include "fanova/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <set>

namespace fanova {

namespace {

const char* const palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                               "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

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

}  // namespace

PlotFrame frame_for(const LinePlot& plot) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : plot.series) {
    if (s.x.size() != s.y.size()) throw ValidationError("plot series '" + s.name + "' has mismatched x and y");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!std::isfinite(x0)) throw ValidationError("nothing to plot");
  PlotFrame f;
  f.x_min = x0;
  f.x_max = x1 > x0 ? x1 : x0 + 1.0;
  double pad = (y1 - y0) * 0.05;
  if (pad <= 0.0) pad = std::max(std::abs(y0) * 0.05, 0.5);
  f.y_min = y0 - pad;
  f.y_max = y1 + pad;
  return f;
}

void write_svg(std::ostream& out, const LinePlot& plot) {
  const PlotFrame f = frame_for(plot);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(f.width) << "\" height=\"" << num(f.height)
      << "\" viewBox=\"0 0 " << num(f.width) << ' ' << num(f.height) << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!plot.title.empty())
    out << "<text x=\"" << num(f.width / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
        << escape(plot.title) << "</text>\n";

  const double ax_bottom = f.py(f.y_min), ax_top = f.py(f.y_max);
  const double ax_left = f.px(f.x_min), ax_right = f.px(f.x_max);
  out << "<g class=\"axes\" stroke=\"black\" fill=\"none\">\n";
  out << "<line x1=\"" << num(ax_left) << "\" y1=\"" << num(ax_bottom) << "\" x2=\"" << num(ax_right) << "\" y2=\""
      << num(ax_bottom) << "\"/>\n";
  out << "<line x1=\"" << num(ax_left) << "\" y1=\"" << num(ax_bottom) << "\" x2=\"" << num(ax_left) << "\" y2=\""
      << num(ax_top) << "\"/>\n";
  out << "</g>\n<g class=\"ticks\" font-size=\"11\">\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = f.x_min + (f.x_max - f.x_min) * i / 5.0;
    const double yv = f.y_min + (f.y_max - f.y_min) * i / 5.0;
    out << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << num(ax_bottom + 16) << "\" text-anchor=\"middle\">"
        << tick_label(std::round(xv * 1000) / 1000) << "</text>\n";
    out << "<text x=\"" << num(ax_left - 6) << "\" y=\"" << num(f.py(yv) + 4) << "\" text-anchor=\"end\">"
        << tick_label(std::round(yv * 1000) / 1000) << "</text>\n";
  }
  out << "</g>\n";
  if (!plot.x_label.empty())
    out << "<text x=\"" << num((ax_left + ax_right) / 2) << "\" y=\"" << num(f.height - 10)
        << "\" text-anchor=\"middle\" font-size=\"12\">" << escape(plot.x_label) << "</text>\n";
  if (!plot.y_label.empty())
    out << "<text transform=\"translate(16 " << num((ax_top + ax_bottom) / 2)
        << ") rotate(-90)\" text-anchor=\"middle\" font-size=\"12\">" << escape(plot.y_label) << "</text>\n";

  for (double r : plot.rules) {
    if (r < f.x_min || r > f.x_max) continue;
    out << "<line class=\"rule\" x1=\"" << num(f.px(r)) << "\" y1=\"" << num(ax_bottom) << "\" x2=\"" << num(f.px(r))
        << "\" y2=\"" << num(ax_top) << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
  }

  for (std::size_t s = 0; s < plot.series.size(); ++s) {
    const auto& ser = plot.series[s];
    const char* color = palette[s % std::size(palette)];
    out << "<path class=\"series\" data-name=\"" << escape(ser.name) << "\" fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.6\" d=\"";
    bool pen_down = false;
    for (std::size_t i = 0; i < ser.x.size(); ++i) {
      if (!std::isfinite(ser.x[i]) || !std::isfinite(ser.y[i])) {
        pen_down = false;
        continue;
      }
      out << (pen_down ? " L" : (i == 0 ? "M" : " M")) << num(f.px(ser.x[i])) << ',' << num(f.py(ser.y[i]));
      pen_down = true;
    }
    out << "\"/>\n";
    const double ly = f.top + 18.0 * static_cast<double>(s) + 10.0;
    out << "<line x1=\"" << num(f.width - f.right + 12) << "\" y1=\"" << num(ly) << "\" x2=\""
        << num(f.width - f.right + 32) << "\" y2=\"" << num(ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << num(f.width - f.right + 38) << "\" y=\"" << num(ly + 4) << "\" font-size=\"12\">"
        << escape(ser.name) << "</text>\n";
  }
  out << "</svg>\n";
}

LinePlot means_plot(const FunctionalDataset& ds, const IntervalPartition* partition) {
  const GroupMeans means = group_means(ds);
  LinePlot plot;
  plot.title = "Group mean curves";
  plot.x_label = "time";
  plot.y_label = "mean";
  const std::vector<double> x(ds.grid().begin(), ds.grid().end());
  for (std::size_t g = 0; g < ds.k(); ++g) {
    PlotSeries s{ds.group_names()[g], x, std::vector<double>(x.size())};
    for (std::size_t j = 0; j < x.size(); ++j) s.y[j] = means.group(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(j));
    plot.series.push_back(std::move(s));
  }
  if (partition) {
    std::set<double> edges;
    for (std::size_t i = 0; i < partition->size(); ++i) {
      edges.insert(partition->lower(i));
      edges.insert(partition->upper(i));
    }
    plot.rules.assign(edges.begin(), edges.end());
  }
  return plot;
}

void plot_means(std::ostream& out, const FunctionalDataset& ds, const IntervalPartition* partition) {
  write_svg(out, means_plot(ds, partition));
}

LinePlot power_plot(const PowerTable& table, const std::string& hypothesis) {
  LinePlot plot;
  plot.title = "Rejection rate (" + hypothesis + ")";
  plot.x_label = "beta";
  plot.y_label = "rejection rate";
  std::set<std::size_t> intervals;
  for (const auto& r : table.rows)
    if (r.hypothesis == hypothesis) intervals.insert(r.interval);
  if (intervals.empty()) throw ValidationError("no power rows for hypothesis '" + hypothesis + "'");
  for (std::size_t iv : intervals) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : table.rows)
      if (r.hypothesis == hypothesis && r.interval == iv) pts.emplace_back(r.beta, r.rate);
    std::sort(pts.begin(), pts.end());
    PlotSeries s;
    s.name = "interval " + std::to_string(iv);
    for (auto [b, rate] : pts) {
      s.x.push_back(b);
      s.y.push_back(rate);
    }
    plot.series.push_back(std::move(s));
  }
  return plot;
}

}  // namespace fanova
