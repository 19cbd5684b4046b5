#include "fanova/stats.hpp"

#include "fanova/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fanova {

namespace {

void require_groups(const FunctionalDataset& ds) {
  if (ds.k() < 2) throw ValidationError("at least two groups are required");
}

void check_interval(std::span<const double> grid, const Interval& interval) {
  if (interval.last >= grid.size() || interval.first >= interval.last) {
    throw ValidationError("interval '" + interval.name + "' must contain at least two grid points");
  }
}

std::size_t nearest_index(std::span<const double> grid, double t) {
  const auto it = std::lower_bound(grid.begin(), grid.end(), t);
  if (it == grid.begin()) return 0;
  if (it == grid.end()) return grid.size() - 1;
  const auto hi = static_cast<std::size_t>(it - grid.begin());
  return (t - grid[hi - 1] <= grid[hi] - t) ? hi - 1 : hi;
}

double max_step(std::span<const double> grid, std::size_t index) {
  double step = 0.0;
  if (index > 0) step = std::max(step, grid[index] - grid[index - 1]);
  if (index + 1 < grid.size()) step = std::max(step, grid[index + 1] - grid[index]);
  return step;
}

}  // namespace

IntervalPartition::IntervalPartition(std::vector<double> grid, std::vector<Interval> intervals)
    : grid_(std::move(grid)), intervals_(std::move(intervals)) {
  if (intervals_.empty()) throw ValidationError("partition needs at least one interval");
  if (grid_.size() < 2) throw ValidationError("partition grid needs at least two points");
  if (intervals_.front().first != 0 || intervals_.back().last != grid_.size() - 1) {
    throw ValidationError("intervals must cover the whole domain");
  }
  for (std::size_t i = 0; i < intervals_.size(); ++i) {
    check_interval(grid_, intervals_[i]);
    if (i > 0 && intervals_[i].first != intervals_[i - 1].last) {
      throw ValidationError("intervals '" + intervals_[i - 1].name + "' and '" + intervals_[i].name +
                            "' are not contiguous");
    }
  }
  weights_.resize(static_cast<Eigen::Index>(grid_.size()), static_cast<Eigen::Index>(intervals_.size()));
  for (std::size_t i = 0; i < intervals_.size(); ++i) {
    weights_.col(static_cast<Eigen::Index>(i)) = trapezoid_weights(grid_, intervals_[i]);
  }
}

IntervalPartition IntervalPartition::equal_split(std::span<const double> grid, std::size_t m) {
  if (m == 0) throw ValidationError("number of intervals must be positive");
  const std::size_t segments = grid.size() - 1;
  if (grid.size() < 2 || m > segments) throw ValidationError("too many intervals for the grid");
  std::vector<Interval> intervals;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t first = i * segments / m;
    const std::size_t last = (i + 1) * segments / m;
    intervals.push_back(Interval{std::to_string(i + 1), first, last});
  }
  return IntervalPartition(std::vector<double>(grid.begin(), grid.end()), std::move(intervals));
}

IntervalPartition IntervalPartition::from_ranges(std::span<const double> grid, std::span<const NamedRange> ranges,
                                                 std::vector<std::string>* warnings) {
  if (ranges.empty()) throw ValidationError("no intervals given");
  if (grid.size() < 2) throw ValidationError("partition grid needs at least two points");
  std::vector<Interval> intervals;
  auto snap = [&](double t, const std::string& name) {
    const std::size_t idx = nearest_index(grid, t);
    if (warnings && std::abs(grid[idx] - t) > max_step(grid, idx)) {
      warnings->push_back("interval '" + name + "': endpoint " + std::to_string(t) + " snapped to " +
                          std::to_string(grid[idx]) + ", more than one grid step away");
    }
    return idx;
  };
  for (const auto& r : ranges) {
    if (!(r.b > r.a)) throw ValidationError("interval '" + r.name + "' has b <= a");
    std::size_t first = snap(r.a, r.name);
    const std::size_t last = snap(r.b, r.name);
    if (!intervals.empty()) {
      const std::size_t prev = intervals.back().last;
      if (first == prev + 1) {
        first = prev;
      } else if (first != prev) {
        throw ValidationError("interval '" + r.name + "' does not start where '" + intervals.back().name +
                              "' ends");
      }
    }
    intervals.push_back(Interval{r.name, first, last});
  }
  if (intervals.front().first != 0 || intervals.back().last != grid.size() - 1) {
    throw ValidationError("intervals must cover the domain [" + std::to_string(grid.front()) + ", " +
                          std::to_string(grid.back()) + "]");
  }
  return IntervalPartition(std::vector<double>(grid.begin(), grid.end()), std::move(intervals));
}

Eigen::VectorXd trapezoid_weights(std::span<const double> grid, const Interval& interval) {
  check_interval(grid, interval);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t g = interval.first; g < interval.last; ++g) {
    const double half = 0.5 * (grid[g + 1] - grid[g]);
    w(static_cast<Eigen::Index>(g)) += half;
    w(static_cast<Eigen::Index>(g + 1)) += half;
  }
  return w;
}

double integrate(std::span<const double> values, std::span<const double> grid, const Interval& interval) {
  check_interval(grid, interval);
  if (values.size() != grid.size()) throw ValidationError("values and grid differ in length");
  double sum = 0.0;
  for (std::size_t g = interval.first; g < interval.last; ++g) {
    sum += 0.5 * (grid[g + 1] - grid[g]) * (values[g] + values[g + 1]);
  }
  return sum;
}

namespace {

Eigen::MatrixXd means_under(const FunctionalDataset& ds, std::span<const int> labels) {
  if (labels.size() != ds.n()) throw ValidationError("labeling must cover every curve");
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ds.k()), ds.values().cols());
  for (std::size_t i = 0; i < labels.size(); ++i) sums.row(labels[i]) += ds.values().row(static_cast<Eigen::Index>(i));
  for (std::size_t j = 0; j < ds.k(); ++j) sums.row(static_cast<Eigen::Index>(j)) /= static_cast<double>(ds.group_sizes()[j]);
  return sums;
}

double integrate_vector(const Eigen::VectorXd& f, std::span<const double> grid, const Interval& interval) {
  return integrate(std::span<const double>(f.data(), static_cast<std::size_t>(f.size())), grid, interval);
}

}  // namespace

Eigen::VectorXd pointwise_between(const FunctionalDataset& ds, std::span<const int> labels) {
  const Eigen::MatrixXd means = means_under(ds, labels);
  Eigen::VectorXd grand = Eigen::VectorXd::Zero(means.cols());
  for (std::size_t j = 0; j < ds.k(); ++j) {
    grand += static_cast<double>(ds.group_sizes()[j]) * means.row(static_cast<Eigen::Index>(j)).transpose();
  }
  grand /= static_cast<double>(ds.n());
  Eigen::VectorXd between = Eigen::VectorXd::Zero(means.cols());
  for (std::size_t j = 0; j < ds.k(); ++j) {
    between += static_cast<double>(ds.group_sizes()[j]) *
               (means.row(static_cast<Eigen::Index>(j)).transpose() - grand).array().square().matrix();
  }
  return between;
}

Eigen::VectorXd pointwise_within(const FunctionalDataset& ds, std::span<const int> labels) {
  const Eigen::MatrixXd means = means_under(ds, labels);
  Eigen::VectorXd within = Eigen::VectorXd::Zero(means.cols());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    within += (ds.values().row(static_cast<Eigen::Index>(i)) - means.row(labels[i])).array().square().matrix().transpose();
  }
  return within;
}

double interval_T(const FunctionalDataset& ds, const Interval& interval) {
  require_groups(ds);
  const Eigen::VectorXd between = pointwise_between(ds, ds.labels());
  return integrate_vector(between, ds.grid(), interval) / static_cast<double>(ds.k() - 1);
}

Eigen::VectorXd interval_stats(const FunctionalDataset& ds, const IntervalPartition& partition) {
  return interval_stats(ds, partition, ds.labels());
}

Eigen::VectorXd interval_stats(const FunctionalDataset& ds, const IntervalPartition& partition,
                               std::span<const int> labels) {
  require_groups(ds);
  if (partition.grid().size() != ds.grid().size()) throw ValidationError("partition grid does not match the dataset");
  const Eigen::VectorXd between = pointwise_between(ds, labels);
  return partition.weights().transpose() * between / static_cast<double>(ds.k() - 1);
}

double functional_F(const FunctionalDataset& ds, const Interval& interval) {
  require_groups(ds);
  if (ds.n() <= ds.k()) throw ValidationError("functional F needs more curves than groups");
  const double numerator = interval_T(ds, interval);
  const Eigen::VectorXd within = pointwise_within(ds, ds.labels());
  const double internal = integrate_vector(within, ds.grid(), interval);
  const double total = internal + numerator * static_cast<double>(ds.k() - 1);
  if (!(internal > 1e-12 * total) || !(internal > 0.0)) {
    throw DegenerateStatisticError("functional F is undefined on interval '" + interval.name +
                                   "': no within-group variation");
  }
  return numerator / (internal / static_cast<double>(ds.n() - ds.k()));
}

double vn_stat(const FunctionalDataset& ds, const Interval& interval) {
  require_groups(ds);
  const Eigen::MatrixXd means = means_under(ds, ds.labels());
  double total = 0.0;
  for (std::size_t i = 0; i < ds.k(); ++i) {
    for (std::size_t j = i + 1; j < ds.k(); ++j) {
      const Eigen::VectorXd diff2 =
          (means.row(static_cast<Eigen::Index>(i)) - means.row(static_cast<Eigen::Index>(j))).array().square().matrix().transpose();
      total += static_cast<double>(ds.group_sizes()[i]) * integrate_vector(diff2, ds.grid(), interval);
    }
  }
  return total;
}

double combine_sum(std::span<const double> stats, std::span<const std::size_t> members) {
  if (members.empty()) throw ValidationError("cannot combine an empty set of statistics");
  double sum = 0.0;
  for (const auto i : members) {
    if (i >= stats.size()) throw ValidationError("statistic index out of range");
    sum += stats[i];
  }
  return sum;
}

}  // namespace fanova
