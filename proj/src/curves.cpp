#include "fanova/curves.hpp"

#include "fanova/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

namespace fanova {

namespace {

// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(static_cast<std::size_t>(n), 0.0);
  weights.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double step = p1 / dp;
      x -= step;
      if (std::abs(step) < 1e-15) break;
    }
    nodes[static_cast<std::size_t>(i)] = x;
    weights[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void validate(const RawCurve& curve) {
  const std::string who = "curve '" + curve.subject_id + "'";
  if (curve.times.size() != curve.values.size()) {
    throw ValidationError(who + ": times and values differ in length");
  }
  if (curve.times.size() < 4) {
    throw ValidationError(who + ": at least 4 samples are required, got " + std::to_string(curve.times.size()));
  }
  for (std::size_t i = 0; i < curve.times.size(); ++i) {
    if (!std::isfinite(curve.times[i]) || !std::isfinite(curve.values[i])) {
      throw ValidationError(who + ": non-finite sample at position " + std::to_string(i));
    }
    if (i > 0 && !(curve.times[i] > curve.times[i - 1])) {
      throw ValidationError(who + ": times must be strictly increasing");
    }
  }
}

// ---------------------------------------------------------------------------
// BSplineBasis
// ---------------------------------------------------------------------------

BSplineBasis::BSplineBasis(double lower, double upper, std::span<const double> knot_times, int degree)
    : degree_(degree), lower_(lower), upper_(upper) {
  if (!(std::isfinite(lower) && std::isfinite(upper)) || !(upper > lower)) {
    throw ValidationError("B-spline domain is empty: [" + format_double(lower) + ", " + format_double(upper) + "]");
  }
  if (degree < 0) {
    throw ValidationError("B-spline degree must be nonnegative");
  }
  for (std::size_t i = 0; i < knot_times.size(); ++i) {
    const double t = knot_times[i];
    if (!std::isfinite(t) || t < lower || t > upper) {
      throw ValidationError("knot " + format_double(t) + " lies outside the domain");
    }
    if (i > 0 && !(t > knot_times[i - 1])) {
      throw ValidationError("knots must be strictly increasing");
    }
    if (t > lower && t < upper) interior_.push_back(t);
  }
  const auto order = static_cast<std::size_t>(degree) + 1;
  knots_.reserve(interior_.size() + 2 * order);
  knots_.insert(knots_.end(), order, lower);
  knots_.insert(knots_.end(), interior_.begin(), interior_.end());
  knots_.insert(knots_.end(), order, upper);
  build_penalty();
}

BSplineBasis build_basis(double lower, double upper, std::span<const double> knot_times, int degree) {
  return BSplineBasis(lower, upper, knot_times, degree);
}

std::size_t BSplineBasis::find_span(double t) const {
  const auto p = static_cast<std::size_t>(degree_);
  const std::size_t last = size() - 1;  // index of the last nonempty span
  if (t >= upper_) return last;
  if (t <= lower_) return p;
  const auto it = std::upper_bound(knots_.begin() + static_cast<std::ptrdiff_t>(p),
                                   knots_.begin() + static_cast<std::ptrdiff_t>(last + 1), t);
  return static_cast<std::size_t>(it - knots_.begin()) - 1;
}

std::size_t BSplineBasis::evaluate_nonzero(double t, int derivative, std::span<double> out) const {
  const int p = degree_;
  const auto order = static_cast<std::size_t>(p) + 1;
  if (out.size() != order) {
    throw std::invalid_argument("evaluate_nonzero: output span must have degree+1 entries");
  }
  if (derivative > p) {
    std::fill(out.begin(), out.end(), 0.0);
    return find_span(t) - static_cast<std::size_t>(p);
  }
  const std::size_t span = find_span(t);
  const auto& U = knots_;

  // Triangular table of basis values (upper) and knot differences (lower).
  std::vector<double> ndu(order * order, 0.0);
  auto NDU = [&](std::size_t r, std::size_t c) -> double& { return ndu[r * order + c]; };
  std::vector<double> left(order, 0.0);
  std::vector<double> right(order, 0.0);
  NDU(0, 0) = 1.0;
  for (std::size_t j = 1; j < order; ++j) {
    left[j] = t - U[span + 1 - j];
    right[j] = U[span + j] - t;
    double saved = 0.0;
    for (std::size_t r = 0; r < j; ++r) {
      NDU(j, r) = right[r + 1] + left[j - r];
      const double temp = NDU(r, j - 1) / NDU(j, r);
      NDU(r, j) = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    NDU(j, j) = saved;
  }
  if (derivative == 0) {
    for (std::size_t j = 0; j < order; ++j) out[j] = NDU(j, static_cast<std::size_t>(p));
    return span - static_cast<std::size_t>(p);
  }

  const int n = derivative;
  std::vector<double> a(2 * order, 0.0);
  auto A = [&](int row, int col) -> double& { return a[static_cast<std::size_t>(row) * order + static_cast<std::size_t>(col)]; };
  for (int r = 0; r <= p; ++r) {
    int s1 = 0;
    int s2 = 1;
    A(0, 0) = 1.0;
    double value = 0.0;
    for (int k = 1; k <= n; ++k) {
      double d = 0.0;
      const int rk = r - k;
      const int pk = p - k;
      if (r >= k) {
        A(s2, 0) = A(s1, 0) / NDU(static_cast<std::size_t>(pk + 1), static_cast<std::size_t>(rk));
        d = A(s2, 0) * NDU(static_cast<std::size_t>(rk), static_cast<std::size_t>(pk));
      }
      const int j1 = (rk >= -1) ? 1 : -rk;
      const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
      for (int j = j1; j <= j2; ++j) {
        A(s2, j) = (A(s1, j) - A(s1, j - 1)) / NDU(static_cast<std::size_t>(pk + 1), static_cast<std::size_t>(rk + j));
        d += A(s2, j) * NDU(static_cast<std::size_t>(rk + j), static_cast<std::size_t>(pk));
      }
      if (r <= pk) {
        A(s2, k) = -A(s1, k - 1) / NDU(static_cast<std::size_t>(pk + 1), static_cast<std::size_t>(r));
        d += A(s2, k) * NDU(static_cast<std::size_t>(r), static_cast<std::size_t>(pk));
      }
      value = d;
      std::swap(s1, s2);
    }
    out[static_cast<std::size_t>(r)] = value;
  }
  double factor = p;
  for (int k = 1; k < n; ++k) factor *= (p - k);
  for (auto& v : out) v *= factor;
  return span - static_cast<std::size_t>(p);
}

Eigen::VectorXd BSplineBasis::evaluate(double t, int derivative) const {
  Eigen::VectorXd row = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size()));
  std::vector<double> local(static_cast<std::size_t>(degree_) + 1);
  const std::size_t first = evaluate_nonzero(t, derivative, local);
  for (std::size_t j = 0; j < local.size(); ++j) row(static_cast<Eigen::Index>(first + j)) = local[j];
  return row;
}

Eigen::MatrixXd BSplineBasis::design_matrix(std::span<const double> times, int derivative) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(times.size()),
                                              static_cast<Eigen::Index>(size()));
  std::vector<double> local(static_cast<std::size_t>(degree_) + 1);
  for (std::size_t i = 0; i < times.size(); ++i) {
    const std::size_t first = evaluate_nonzero(times[i], derivative, local);
    for (std::size_t j = 0; j < local.size(); ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(first + j)) = local[j];
    }
  }
  return out;
}

void BSplineBasis::build_penalty() {
  const auto K = static_cast<Eigen::Index>(size());
  penalty_ = Eigen::MatrixXd::Zero(K, K);
  if (degree_ < 2) return;
  // B'' has degree p-2, so the product has degree 2p-4 and p Gauss points are exact.
  std::vector<double> nodes;
  std::vector<double> weights;
  gauss_legendre(degree_, nodes, weights);
  std::vector<double> local(static_cast<std::size_t>(degree_) + 1);
  for (std::size_t s = 0; s + 1 < knots_.size(); ++s) {
    const double lo = knots_[s];
    const double hi = knots_[s + 1];
    if (!(hi > lo)) continue;
    const double half = 0.5 * (hi - lo);
    const double mid = 0.5 * (hi + lo);
    for (std::size_t q = 0; q < nodes.size(); ++q) {
      const std::size_t first = evaluate_nonzero(mid + half * nodes[q], 2, local);
      const double w = half * weights[q];
      for (std::size_t r = 0; r < local.size(); ++r) {
        for (std::size_t c = 0; c < local.size(); ++c) {
          penalty_(static_cast<Eigen::Index>(first + r), static_cast<Eigen::Index>(first + c)) += w * local[r] * local[c];
        }
      }
    }
  }
}

std::string BSplineBasis::describe() const {
  std::ostringstream os;
  os << "degree " << degree_ << " B-spline basis on [" << lower_ << ", " << upper_ << "] with "
     << interior_.size() << " interior knots (" << size() << " functions)";
  return os.str();
}

// ---------------------------------------------------------------------------
// Penalized least squares
// ---------------------------------------------------------------------------

Eigen::MatrixXd penalized_coefficient_map(const Eigen::MatrixXd& design, const Eigen::MatrixXd& penalty,
                                          double lambda, const std::string& config) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ValidationError("smoothing parameter must be finite and nonnegative");
  }
  const Eigen::Index n = design.rows();
  const Eigen::Index K = design.cols();

  if (lambda > 0.0) {
    // Stacked system [B; sqrt(lambda) L] c = [y; 0] with R = L'L, solved by QR
    // to avoid squaring the condition number of B.
    // Eigenvalues at rounding level belong to penalty-free functions (lines
    // for a curvature penalty); zero them so large lambdas leave those exact.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(penalty);
    const double top = eig.eigenvalues().cwiseAbs().maxCoeff();
    const Eigen::VectorXd d =
        (eig.eigenvalues().array() > 1e-10 * top).select(eig.eigenvalues().array().sqrt(), 0.0).matrix();
    const Eigen::MatrixXd L = d.asDiagonal() * eig.eigenvectors().transpose();
    Eigen::MatrixXd stacked(n + K, K);
    stacked.topRows(n) = design;
    stacked.bottomRows(K) = std::sqrt(lambda) * L;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(stacked);
    qr.setThreshold(1e-12);
    if (qr.rank() < K) {
      throw SingularFitError("singular penalized normal equations for " + config + " at lambda " +
                             format_double(lambda));
    }
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + K, n);
    rhs.topRows(n).setIdentity();
    return qr.solve(rhs);
  }

  Eigen::BDCSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double tol = (sv.size() > 0 ? sv(0) : 0.0) * 1e-10;
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv(rank) > tol) ++rank;
  if (rank == 0) {
    throw SingularFitError("design matrix has rank zero for " + config);
  }
  const Eigen::MatrixXd& V = svd.matrixV();
  const Eigen::MatrixXd pinv = V.leftCols(rank) * sv.head(rank).cwiseInverse().asDiagonal() *
                               svd.matrixU().leftCols(rank).transpose();
  if (rank == K) return pinv;

  // Among least-squares minimizers c = pinv y + N z pick the least rough one.
  const Eigen::MatrixXd N = V.rightCols(K - rank);
  const Eigen::MatrixXd M = N.transpose() * penalty * N;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
  const double scale = std::max(M.diagonal().cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 1e-12 * scale) {
    throw SingularFitError("least-squares fit is not unique for " + config +
                           ": the design null space contains penalty-free functions");
  }
  return pinv - N * ldlt.solve(N.transpose() * penalty * pinv);
}

LinearSmoother::LinearSmoother(const BSplineBasis& basis, std::span<const double> times, double lambda)
    : lambda_(lambda) {
  for (const double t : times) {
    if (t < basis.lower() || t > basis.upper()) {
      throw ValidationError("sample time " + format_double(t) + " lies outside the " + basis.describe());
    }
  }
  const Eigen::MatrixXd design = basis.design_matrix(times);
  coef_map_ = penalized_coefficient_map(design, basis.roughness_penalty(), lambda, basis.describe());
  hat_ = design * coef_map_;
  edf_ = hat_.trace();
}

Eigen::VectorXd LinearSmoother::coefficients(const Eigen::Ref<const Eigen::VectorXd>& values) const {
  return coef_map_ * values;
}

Eigen::VectorXd LinearSmoother::fitted(const Eigen::Ref<const Eigen::VectorXd>& values) const {
  return hat_ * values;
}

double LinearSmoother::residual_sum_of_squares(const Eigen::Ref<const Eigen::VectorXd>& values) const {
  return (values - hat_ * values).squaredNorm();
}

double LinearSmoother::gcv(const Eigen::Ref<const Eigen::VectorXd>& values, double multiplier) const {
  const auto n = static_cast<double>(samples());
  const double denom = n - multiplier * edf_;
  if (!(denom > 0.0)) return std::numeric_limits<double>::infinity();
  return n * residual_sum_of_squares(values) / (denom * denom);
}

// ---------------------------------------------------------------------------
// Fitting and GCV
// ---------------------------------------------------------------------------

SmoothedCurve fit_curve(const RawCurve& raw, std::shared_ptr<const BSplineBasis> basis, double lambda,
                        double gcv_multiplier) {
  validate(raw);
  if (!basis) throw std::invalid_argument("fit_curve: null basis");
  const LinearSmoother smoother(*basis, raw.times, lambda);
  const Eigen::Map<const Eigen::VectorXd> y(raw.values.data(), static_cast<Eigen::Index>(raw.values.size()));
  SmoothedCurve out;
  out.coefficients = smoother.coefficients(y);
  out.lambda = lambda;
  out.gcv_score = smoother.gcv(y, gcv_multiplier);
  out.subject_id = raw.subject_id;
  out.group = raw.group;
  out.basis = std::move(basis);
  return out;
}

std::vector<double> lambda_grid(const BSplineBasis& basis, std::span<const double> times) {
  const Eigen::MatrixXd design = basis.design_matrix(times);
  const double data_trace = design.squaredNorm();
  const double penalty_trace = basis.roughness_penalty().trace();
  if (!(penalty_trace > 0.0)) {
    throw ValidationError("GCV needs a roughness penalty; use a basis of degree >= 2");
  }
  const double scale = data_trace / penalty_trace;
  constexpr int points = 41;
  std::vector<double> grid(points);
  for (int i = 0; i < points; ++i) {
    const double exponent = -8.0 + 12.0 * i / (points - 1);
    grid[static_cast<std::size_t>(i)] = scale * std::pow(10.0, exponent);
  }
  return grid;
}

namespace {

// Smoothers over the lambda grid for one set of sample times.
class GcvSearch {
 public:
  GcvSearch(const BSplineBasis& basis, std::span<const double> times) : grid_(lambda_grid(basis, times)) {
    smoothers_.reserve(grid_.size());
    for (const double lambda : grid_) smoothers_.emplace_back(basis, times, lambda);
  }

  GcvSelection select(const Eigen::Ref<const Eigen::VectorXd>& y, double multiplier) const {
    GcvSelection out;
    out.grid = grid_;
    out.scores.reserve(grid_.size());
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : smoothers_) {
      out.scores.push_back(s.gcv(y, multiplier));
      best = std::min(best, out.scores.back());
    }
    if (!std::isfinite(best)) {
      throw ValidationError("GCV is undefined for every lambda (edf >= n / multiplier); use fewer basis functions");
    }
    // Scores within a relative 1e-9 (or at rounding level of the data) tie;
    // the largest tied lambda wins.
    const double tol = 1e-9 * best + 1e-14 * y.squaredNorm() / static_cast<double>(y.size());
    for (std::size_t i = grid_.size(); i-- > 0;) {
      if (out.scores[i] <= best + tol) {
        out.lambda = grid_[i];
        out.score = out.scores[i];
        break;
      }
    }
    return out;
  }

  const LinearSmoother& smoother_for(double lambda) const {
    const auto it = std::find(grid_.begin(), grid_.end(), lambda);
    return smoothers_[static_cast<std::size_t>(it - grid_.begin())];
  }

 private:
  std::vector<double> grid_;
  std::vector<LinearSmoother> smoothers_;
};

}  // namespace

GcvSelection select_lambda_gcv(const RawCurve& raw, const BSplineBasis& basis, double multiplier) {
  validate(raw);
  if (!(multiplier >= 1.0)) throw ValidationError("GCV penalty multiplier must be >= 1");
  const GcvSearch search(basis, raw.times);
  const Eigen::Map<const Eigen::VectorXd> y(raw.values.data(), static_cast<Eigen::Index>(raw.values.size()));
  return search.select(y, multiplier);
}

Eigen::VectorXd evaluate_on_grid(const SmoothedCurve& curve, std::span<const double> grid) {
  if (!curve.basis) throw std::invalid_argument("evaluate_on_grid: curve has no basis");
  for (const double t : grid) {
    if (t < curve.basis->lower() || t > curve.basis->upper()) {
      throw ValidationError("grid point " + format_double(t) + " lies outside the curve domain");
    }
  }
  return curve.basis->design_matrix(grid) * curve.coefficients;
}

// ---------------------------------------------------------------------------
// FunctionalDataset
// ---------------------------------------------------------------------------

FunctionalDataset::FunctionalDataset(std::vector<double> grid, Eigen::MatrixXd values, std::vector<int> labels,
                                     std::vector<std::string> group_names, std::vector<std::string> subject_ids)
    : grid_(std::move(grid)),
      values_(std::move(values)),
      labels_(std::move(labels)),
      group_names_(std::move(group_names)),
      subject_ids_(std::move(subject_ids)) {
  if (group_names_.empty()) throw ValidationError("dataset has no groups");
  if (grid_.size() < 2) throw ValidationError("evaluation grid needs at least two points");
  for (std::size_t i = 1; i < grid_.size(); ++i) {
    if (!(grid_[i] > grid_[i - 1])) throw ValidationError("evaluation grid must be strictly increasing");
  }
  if (static_cast<std::size_t>(values_.rows()) != labels_.size() ||
      static_cast<std::size_t>(values_.cols()) != grid_.size()) {
    throw ValidationError("value matrix must be curves x grid points");
  }
  if (!values_.allFinite()) throw ValidationError("curve values must be finite");
  if (subject_ids_.empty()) {
    for (std::size_t i = 0; i < labels_.size(); ++i) subject_ids_.push_back("s" + std::to_string(i + 1));
  }
  if (subject_ids_.size() != labels_.size()) throw ValidationError("one subject id per curve is required");
  group_sizes_.assign(group_names_.size(), 0);
  for (const int g : labels_) {
    if (g < 0 || static_cast<std::size_t>(g) >= group_names_.size()) {
      throw ValidationError("group label out of range");
    }
    ++group_sizes_[static_cast<std::size_t>(g)];
  }
  for (std::size_t j = 0; j < group_sizes_.size(); ++j) {
    if (group_sizes_[j] == 0) throw ValidationError("group '" + group_names_[j] + "' is empty");
  }
}

FunctionalDataset FunctionalDataset::relabeled(std::span<const int> labels) const {
  FunctionalDataset out = *this;
  if (labels.size() != labels_.size()) throw ValidationError("relabeling must cover every curve");
  std::vector<std::size_t> sizes(group_names_.size(), 0);
  for (const int g : labels) {
    if (g < 0 || static_cast<std::size_t>(g) >= sizes.size()) throw ValidationError("group label out of range");
    ++sizes[static_cast<std::size_t>(g)];
  }
  if (sizes != group_sizes_) throw ValidationError("relabeling must preserve group sizes");
  out.labels_.assign(labels.begin(), labels.end());
  return out;
}

FunctionalDataset FunctionalDataset::smooth(std::span<const RawCurve> curves, const SmoothingOptions& options) {
  if (curves.empty()) throw ValidationError("no curves to smooth");
  for (const auto& c : curves) validate(c);

  double min_lo = curves.front().times.front();
  double max_lo = min_lo;
  double min_hi = curves.front().times.back();
  double max_hi = min_hi;
  for (const auto& c : curves) {
    min_lo = std::min(min_lo, c.times.front());
    max_lo = std::max(max_lo, c.times.front());
    min_hi = std::min(min_hi, c.times.back());
    max_hi = std::max(max_hi, c.times.back());
  }
  const double span = max_hi - min_lo;
  if (max_lo - min_lo > 0.01 * span || max_hi - min_hi > 0.01 * span) {
    throw ValidationError("curve domains differ by more than 1% of the time span");
  }

  std::vector<double> all_times;
  for (const auto& c : curves) all_times.insert(all_times.end(), c.times.begin(), c.times.end());
  std::sort(all_times.begin(), all_times.end());
  const double eps = 1e-9 * span;
  std::vector<double> knots;
  for (const double t : all_times) {
    if (knots.empty() || t - knots.back() > eps) knots.push_back(t);
  }
  std::vector<double> grid;
  for (const double t : knots) {
    if (t >= max_lo - eps && t <= min_hi + eps) grid.push_back(std::clamp(t, max_lo, min_hi));
  }

  if (options.knots == KnotRule::equispaced) {
    if (options.knot_count < 2) throw ValidationError("equispaced knots need a count of at least 2");
    knots.resize(options.knot_count);
    for (std::size_t i = 0; i < knots.size(); ++i) {
      knots[i] = min_lo + span * static_cast<double>(i) / static_cast<double>(knots.size() - 1);
    }
    knots.back() = max_hi;
  }
  auto basis = std::make_shared<const BSplineBasis>(min_lo, max_hi, knots, options.degree);
  const Eigen::MatrixXd grid_design = basis->design_matrix(grid);

  // Curves sharing sample times share smoothers.
  std::map<std::vector<double>, LinearSmoother> fixed;
  std::map<std::vector<double>, GcvSearch> searches;

  std::vector<std::string> names;
  std::vector<int> labels;
  std::vector<std::string> subjects;
  std::vector<SmoothedCurve> fits;
  Eigen::MatrixXd values(static_cast<Eigen::Index>(curves.size()), static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto& c = curves[i];
    const Eigen::Map<const Eigen::VectorXd> y(c.values.data(), static_cast<Eigen::Index>(c.values.size()));
    SmoothedCurve fit;
    fit.basis = basis;
    fit.subject_id = c.subject_id;
    fit.group = c.group;
    if (options.lambda_rule == LambdaRule::gcv) {
      auto it = searches.find(c.times);
      if (it == searches.end()) it = searches.emplace(c.times, GcvSearch(*basis, c.times)).first;
      const GcvSelection sel = it->second.select(y, options.gcv_multiplier);
      fit.lambda = sel.lambda;
      fit.gcv_score = sel.score;
      fit.coefficients = it->second.smoother_for(sel.lambda).coefficients(y);
    } else {
      auto it = fixed.find(c.times);
      if (it == fixed.end()) it = fixed.emplace(c.times, LinearSmoother(*basis, c.times, options.lambda)).first;
      fit.lambda = options.lambda;
      fit.gcv_score = it->second.gcv(y, options.gcv_multiplier);
      fit.coefficients = it->second.coefficients(y);
    }
    values.row(static_cast<Eigen::Index>(i)) = (grid_design * fit.coefficients).transpose();
    fits.push_back(std::move(fit));

    auto pos = std::find(names.begin(), names.end(), c.group);
    if (pos == names.end()) {
      names.push_back(c.group);
      pos = names.end() - 1;
    }
    labels.push_back(static_cast<int>(pos - names.begin()));
    subjects.push_back(c.subject_id);
  }
  FunctionalDataset ds(std::move(grid), std::move(values), std::move(labels), std::move(names), std::move(subjects));
  ds.fits_ = std::move(fits);
  return ds;
}

GroupMeans group_means(const FunctionalDataset& ds) {
  const auto k = static_cast<Eigen::Index>(ds.k());
  const Eigen::Index G = ds.values().cols();
  GroupMeans out{Eigen::MatrixXd::Zero(k, G), Eigen::VectorXd::Zero(G)};
  const auto labels = ds.labels();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out.group.row(labels[i]) += ds.values().row(static_cast<Eigen::Index>(i));
  }
  out.grand = out.group.colwise().sum().transpose() / static_cast<double>(ds.n());
  for (Eigen::Index j = 0; j < k; ++j) {
    out.group.row(j) /= static_cast<double>(ds.group_sizes()[static_cast<std::size_t>(j)]);
  }
  return out;
}

void write_fitted_csv(std::ostream& out, const FunctionalDataset& ds) {
  out.precision(10);
  out << "time";
  for (const auto& s : ds.subject_ids()) out << ',' << s;
  out << '\n';
  for (std::size_t g = 0; g < ds.grid().size(); ++g) {
    out << ds.grid()[g];
    for (Eigen::Index i = 0; i < ds.values().rows(); ++i) out << ',' << ds.values()(i, static_cast<Eigen::Index>(g));
    out << '\n';
  }
}

}  // namespace fanova
