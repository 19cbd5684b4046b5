#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fanova {

/// One subject's discretized response y(t) together with its group label.
struct RawCurve {
  std::string subject_id;
  std::string group;
  std::vector<double> times;
  std::vector<double> values;
};

/// Throws ValidationError unless times are strictly increasing, values finite
/// and there are at least four samples.
void validate(const RawCurve& curve);

enum class CsvLayout { automatic, long_format, wide_format };

struct LoadOptions {
  CsvLayout layout = CsvLayout::automatic;
  /// Reject inputs with fewer distinct groups than this.
  std::size_t min_groups = 2;
};

/// Reads curves from CSV. Long format has the columns
/// `subject,group,time,value`; wide format has `subject,group,t_<time>...`.
/// Curves keep first-appearance order; samples are sorted by time.
std::vector<RawCurve> load_dataset(std::istream& in, const LoadOptions& options = {});
std::vector<RawCurve> load_dataset(const std::filesystem::path& path, const LoadOptions& options = {});

/// Writes curves in long format (the inverse of load_dataset).
void write_long_csv(std::ostream& out, std::span<const RawCurve> curves);

/// Clamped B-spline basis on [lower, upper].
///
/// Breakpoints strictly inside the domain become interior knots; breakpoints
/// equal to the domain ends are accepted and absorbed into the clamped ends.
/// The dimension is interior_knots + degree + 1, so a cubic basis built from
/// knots that include both endpoints has (number of knots + 2) functions.
class BSplineBasis {
 public:
  BSplineBasis(double lower, double upper, std::span<const double> knot_times, int degree = 3);

  int degree() const { return degree_; }
  double lower() const { return lower_; }
  double upper() const { return upper_; }
  std::size_t size() const { return knots_.size() - static_cast<std::size_t>(degree_) - 1; }
  std::span<const double> interior_knots() const { return interior_; }
  std::span<const double> knot_vector() const { return knots_; }

  /// Index of the first of the degree+1 functions that are nonzero at t.
  /// Fills `out` (size degree+1) with their values or derivatives.
  std::size_t evaluate_nonzero(double t, int derivative, std::span<double> out) const;

  Eigen::VectorXd evaluate(double t, int derivative = 0) const;
  Eigen::MatrixXd design_matrix(std::span<const double> times, int derivative = 0) const;

  /// Gram matrix of second derivatives, R(i,j) = integral of B_i'' B_j''.
  const Eigen::MatrixXd& roughness_penalty() const { return penalty_; }

  std::string describe() const;

 private:
  std::size_t find_span(double t) const;
  void build_penalty();

  int degree_;
  double lower_;
  double upper_;
  std::vector<double> interior_;
  std::vector<double> knots_;
  Eigen::MatrixXd penalty_;
};

BSplineBasis build_basis(double lower, double upper, std::span<const double> knot_times, int degree = 3);

/// Penalized least-squares smoother for a fixed set of sample times:
/// coefficients minimize |y - B c|^2 + lambda * c' R c.
///
/// With lambda == 0 and a rank-deficient design (more basis functions than
/// informative samples) the minimizer with the smallest roughness is used,
/// which is the lambda -> 0+ limit of the penalized fit.
class LinearSmoother {
 public:
  LinearSmoother(const BSplineBasis& basis, std::span<const double> times, double lambda);

  double lambda() const { return lambda_; }
  std::size_t samples() const { return static_cast<std::size_t>(hat_.rows()); }
  /// Effective degrees of freedom, trace of the hat matrix.
  double edf() const { return edf_; }

  Eigen::VectorXd coefficients(const Eigen::Ref<const Eigen::VectorXd>& values) const;
  Eigen::VectorXd fitted(const Eigen::Ref<const Eigen::VectorXd>& values) const;
  double residual_sum_of_squares(const Eigen::Ref<const Eigen::VectorXd>& values) const;
  /// n * RSS / (n - multiplier * edf)^2, or +inf when the denominator is not positive.
  double gcv(const Eigen::Ref<const Eigen::VectorXd>& values, double multiplier) const;

 private:
  double lambda_;
  Eigen::MatrixXd coef_map_;  // K x n
  Eigen::MatrixXd hat_;       // n x n
  double edf_ = 0.0;
};

/// Solves (B'B + lambda R) c = B'y as a linear map y -> c (K x n). Throws
/// SingularFitError when no unique (or roughness-minimal) solution exists.
Eigen::MatrixXd penalized_coefficient_map(const Eigen::MatrixXd& design, const Eigen::MatrixXd& penalty,
                                          double lambda, const std::string& config);

struct SmoothedCurve {
  std::shared_ptr<const BSplineBasis> basis;
  Eigen::VectorXd coefficients;
  double lambda = 0.0;
  double gcv_score = 0.0;
  std::string subject_id;
  std::string group;
};

inline constexpr double default_gcv_multiplier = 1.4;

SmoothedCurve fit_curve(const RawCurve& raw, std::shared_ptr<const BSplineBasis> basis, double lambda,
                        double gcv_multiplier = default_gcv_multiplier);

/// Logarithmic search grid: 41 points from 1e-8 s to 1e4 s, where
/// s = trace(B'B) / trace(R) puts the penalty on the scale of the data term.
std::vector<double> lambda_grid(const BSplineBasis& basis, std::span<const double> times);

struct GcvSelection {
  double lambda = 0.0;
  double score = 0.0;
  std::vector<double> grid;
  std::vector<double> scores;
};

/// Grid search for the GCV-minimizing lambda; ties go to the larger lambda.
GcvSelection select_lambda_gcv(const RawCurve& raw, const BSplineBasis& basis,
                               double multiplier = default_gcv_multiplier);

Eigen::VectorXd evaluate_on_grid(const SmoothedCurve& curve, std::span<const double> grid);

enum class KnotRule { every_observation, equispaced };
enum class LambdaRule { fixed, gcv };

struct SmoothingOptions {
  int degree = 3;
  KnotRule knots = KnotRule::every_observation;
  std::size_t knot_count = 49;  // used by KnotRule::equispaced
  LambdaRule lambda_rule = LambdaRule::fixed;
  double lambda = 0.0;
  double gcv_multiplier = default_gcv_multiplier;
};

/// Smoothed curves evaluated on a shared grid, with integer group labels.
class FunctionalDataset {
 public:
  /// Wraps curves already evaluated on `grid`; `values` is curves x grid.
  FunctionalDataset(std::vector<double> grid, Eigen::MatrixXd values, std::vector<int> labels,
                    std::vector<std::string> group_names, std::vector<std::string> subject_ids = {});

  /// Fits every curve on a common basis and evaluates on the union of the
  /// observed times inside the shared domain. Rejects domains that differ by
  /// more than 1% of the span.
  static FunctionalDataset smooth(std::span<const RawCurve> curves, const SmoothingOptions& options = {});

  std::span<const double> grid() const { return grid_; }
  const Eigen::MatrixXd& values() const { return values_; }
  std::span<const int> labels() const { return labels_; }
  const std::vector<std::string>& group_names() const { return group_names_; }
  const std::vector<std::string>& subject_ids() const { return subject_ids_; }
  const std::vector<std::size_t>& group_sizes() const { return group_sizes_; }
  const std::vector<SmoothedCurve>& fits() const { return fits_; }
  std::size_t n() const { return labels_.size(); }
  std::size_t k() const { return group_names_.size(); }

  /// Same curves under a different labeling (a rearrangement of labels()).
  FunctionalDataset relabeled(std::span<const int> labels) const;

 private:
  std::vector<double> grid_;
  Eigen::MatrixXd values_;
  std::vector<int> labels_;
  std::vector<std::string> group_names_;
  std::vector<std::string> subject_ids_;
  std::vector<std::size_t> group_sizes_;
  std::vector<SmoothedCurve> fits_;
};

struct GroupMeans {
  Eigen::MatrixXd group;  // k x G
  Eigen::VectorXd grand;  // size-weighted, length G
};

GroupMeans group_means(const FunctionalDataset& ds);

/// Grid x curves matrix: header `time,<subject>...`.
void write_fitted_csv(std::ostream& out, const FunctionalDataset& ds);

}  // namespace fanova
