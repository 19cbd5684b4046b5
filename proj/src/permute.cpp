#include "fanova/permute.hpp"

#include "fanova/error.hpp"

#include <algorithm>
#include <limits>
#include <ostream>
#include <set>
#include <thread>

namespace fanova {

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("uniform_below: empty range");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t draw = rng();
  while (draw >= limit) draw = rng();
  return draw % bound;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

void check_labels(std::span<const int> labels) {
  if (std::set<int>(labels.begin(), labels.end()).size() < 2) {
    throw ValidationError("permutation needs at least two distinct groups");
  }
}

}  // namespace

PermutationPlan generate_plan(std::uint64_t seed, std::size_t count, std::span<const int> labels,
                              const PlanOptions& options) {
  if (count == 0) throw ValidationError("number of permutations must be at least 1");
  check_labels(labels);
  PermutationPlan plan;
  plan.seed = seed;
  plan.original.assign(labels.begin(), labels.end());
  plan.labelings.reserve(count);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> index(labels.size());
  std::size_t start = 0;
  if (options.identity_first) {
    plan.labelings.push_back(plan.original);
    start = 1;
  }
  for (std::size_t b = start; b < count; ++b) {
    for (std::size_t i = 0; i < index.size(); ++i) index[i] = i;
    for (std::size_t i = index.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_below(rng, i));
      std::swap(index[i - 1], index[j]);
    }
    std::vector<int> row(labels.size());
    for (std::size_t i = 0; i < index.size(); ++i) row[i] = labels[index[i]];
    plan.labelings.push_back(std::move(row));
  }
  return plan;
}

PermutationPlan exhaustive_plan(std::span<const int> labels, bool include_identity) {
  check_labels(labels);
  PermutationPlan plan;
  plan.original.assign(labels.begin(), labels.end());
  std::vector<int> row = plan.original;
  std::sort(row.begin(), row.end());
  do {
    if (include_identity || row != plan.original) plan.labelings.push_back(row);
  } while (std::next_permutation(row.begin(), row.end()));
  return plan;
}

NullStatMatrix null_matrix(const FunctionalDataset& ds, const IntervalPartition& partition,
                           const PermutationPlan& plan, unsigned threads) {
  if (plan.labelings.empty()) throw ValidationError("permutation plan is empty");
  NullStatMatrix out;
  out.observed = interval_stats(ds, partition);
  out.stats.resize(static_cast<Eigen::Index>(plan.size()), static_cast<Eigen::Index>(partition.size()));

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t b = begin; b < end; ++b) {
      out.stats.row(static_cast<Eigen::Index>(b)) = interval_stats(ds, partition, plan.labelings[b]).transpose();
    }
  };
  const std::size_t rows = plan.size();
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, rows);
  if (workers == 1) {
    work(0, rows);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back(work, w * rows / workers, (w + 1) * rows / workers);
    }
  }
  return out;
}

void write_null_matrix_csv(std::ostream& out, const NullStatMatrix& nulls, const IntervalPartition& partition) {
  out.precision(17);
  out << "row";
  for (const auto& iv : partition.intervals()) out << ',' << iv.name;
  out << '\n' << "observed";
  for (Eigen::Index i = 0; i < nulls.observed.size(); ++i) out << ',' << nulls.observed(i);
  out << '\n';
  for (Eigen::Index b = 0; b < nulls.stats.rows(); ++b) {
    out << b + 1;
    for (Eigen::Index i = 0; i < nulls.stats.cols(); ++i) out << ',' << nulls.stats(b, i);
    out << '\n';
  }
}

double p_value(double observed, std::span<const double> nulls, PValueRule rule) {
  if (nulls.empty()) throw ValidationError("p-value needs at least one permutation");
  std::size_t count = 0;
  for (const double v : nulls) count += at_least(v, observed) ? 1 : 0;
  const auto B = static_cast<double>(nulls.size());
  if (rule == PValueRule::add_one) return (1.0 + static_cast<double>(count)) / (B + 1.0);
  return static_cast<double>(count) / B;
}

double p_value(double observed, const Eigen::Ref<const Eigen::VectorXd>& nulls, PValueRule rule) {
  return p_value(observed, std::span<const double>(nulls.data(), static_cast<std::size_t>(nulls.size())), rule);
}

}  // namespace fanova
