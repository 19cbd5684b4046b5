#pragma once

#include "fanova/curves.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace fanova {

/// Closed interval of the evaluation grid, by inclusive grid indices.
struct Interval {
  std::string name;
  std::size_t first = 0;
  std::size_t last = 0;
};

/// A user-facing interval in data units, e.g. {"latent", 0, 60}.
struct NamedRange {
  std::string name;
  double a = 0.0;
  double b = 0.0;
};

/// m contiguous intervals covering the grid. Neighbouring intervals share
/// their boundary grid point, so trapezoid segments are split without overlap
/// and interval integrals add up to the whole-domain integral.
class IntervalPartition {
 public:
  IntervalPartition(std::vector<double> grid, std::vector<Interval> intervals);

  /// m intervals of (nearly) equal index length; boundary points go to the
  /// interval on the left.
  static IntervalPartition equal_split(std::span<const double> grid, std::size_t m);

  /// Snaps each endpoint to the nearest grid point. A range may begin at the
  /// previous range's end or at the grid point right after it ("0-60",
  /// "61-165"). Adds a warning whenever a snap moves an endpoint by more than
  /// one grid step.
  static IntervalPartition from_ranges(std::span<const double> grid, std::span<const NamedRange> ranges,
                                       std::vector<std::string>* warnings = nullptr);

  std::size_t size() const { return intervals_.size(); }
  const Interval& operator[](std::size_t i) const { return intervals_[i]; }
  const std::vector<Interval>& intervals() const { return intervals_; }
  std::span<const double> grid() const { return grid_; }
  double lower(std::size_t i) const { return grid_[intervals_[i].first]; }
  double upper(std::size_t i) const { return grid_[intervals_[i].last]; }
  Interval whole() const { return Interval{"whole", 0, grid_.size() - 1}; }

  /// Trapezoid weights over the full grid, one column per interval.
  const Eigen::MatrixXd& weights() const { return weights_; }

 private:
  std::vector<double> grid_;
  std::vector<Interval> intervals_;
  Eigen::MatrixXd weights_;
};

/// Trapezoid weights over the full grid for one interval (zero outside).
Eigen::VectorXd trapezoid_weights(std::span<const double> grid, const Interval& interval);

/// Trapezoid rule over the grid points inside the interval.
double integrate(std::span<const double> values, std::span<const double> grid, const Interval& interval);

/// Pointwise between-group sum of squares sum_j n_j (mean_j(t) - mean(t))^2
/// under the given labeling.
Eigen::VectorXd pointwise_between(const FunctionalDataset& ds, std::span<const int> labels);

/// Pointwise within-group sum of squares sum_j sum_s (y_js(t) - mean_j(t))^2.
Eigen::VectorXd pointwise_within(const FunctionalDataset& ds, std::span<const int> labels);

/// Integrated between-group variation divided by k - 1 (the numerator of the
/// functional F).
double interval_T(const FunctionalDataset& ds, const Interval& interval);

/// T_i for every interval of the partition, under the dataset's own labels or
/// a rearrangement of them.
Eigen::VectorXd interval_stats(const FunctionalDataset& ds, const IntervalPartition& partition);
Eigen::VectorXd interval_stats(const FunctionalDataset& ds, const IntervalPartition& partition,
                               std::span<const int> labels);

/// Functional F: T over the integrated within-group variation / (n - k).
/// The within-group sum runs over the actual group sizes. Throws
/// DegenerateStatisticError when the within-group variation vanishes.
double functional_F(const FunctionalDataset& ds, const Interval& interval);

/// sum_{i<j} n_i |mean_i - mean_j|^2 with the L2 norm over the interval.
double vn_stat(const FunctionalDataset& ds, const Interval& interval);

/// Sum-combining function over the interval indices in `members`.
double combine_sum(std::span<const double> stats, std::span<const std::size_t> members);

}  // namespace fanova
