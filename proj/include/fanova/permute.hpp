#pragma once

#include "fanova/curves.hpp"
#include "fanova/stats.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

namespace fanova {

/// Uniform integer in [0, bound) from a 64-bit engine by rejection sampling.
/// Unlike std::uniform_int_distribution the result is the same on every
/// standard library.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound);

/// SplitMix64 mix of a base seed and a stream index, for per-replicate seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct PlanOptions {
  /// Put the observed labeling in row 0.
  bool identity_first = false;
};

/// Rearrangements of an observed group-label vector. Every row is a
/// permutation of `original`; whole curves move together across t.
struct PermutationPlan {
  std::uint64_t seed = 0;
  std::vector<int> original;
  std::vector<std::vector<int>> labelings;

  std::size_t size() const { return labelings.size(); }
};

/// B labelings by Fisher-Yates shuffles of curve indices, seeded once from
/// `seed` and drawn sequentially.
PermutationPlan generate_plan(std::uint64_t seed, std::size_t count, std::span<const int> labels,
                              const PlanOptions& options = {});

/// Every distinct rearrangement of the label multiset, in lexicographic order,
/// optionally without the observed one.
PermutationPlan exhaustive_plan(std::span<const int> labels, bool include_identity = false);

/// Interval statistics under every labeling of a plan. Row b of `stats` holds
/// T_1..T_m under plan.labelings[b]; `observed` uses the dataset's labels.
struct NullStatMatrix {
  Eigen::MatrixXd stats;  // B x m
  Eigen::VectorXd observed;

  std::size_t permutations() const { return static_cast<std::size_t>(stats.rows()); }
  std::size_t intervals() const { return static_cast<std::size_t>(stats.cols()); }
};

/// Rows are independent and may be split across `threads` workers; the result
/// does not depend on the thread count.
NullStatMatrix null_matrix(const FunctionalDataset& ds, const IntervalPartition& partition,
                           const PermutationPlan& plan, unsigned threads = 1);

void write_null_matrix_csv(std::ostream& out, const NullStatMatrix& nulls,
                           const IntervalPartition& partition);

enum class PValueRule {
  add_one,         // (1 + #{null >= observed}) / (B + 1)
  raw_proportion,  // #{null >= observed} / B; can return 0
};

/// Permutation p-value. Nulls within a relative 1e-12 of the observed value
/// count as ties, and ties count as "at least as extreme".
double p_value(double observed, std::span<const double> nulls, PValueRule rule = PValueRule::add_one);
double p_value(double observed, const Eigen::Ref<const Eigen::VectorXd>& nulls,
               PValueRule rule = PValueRule::add_one);

/// True when `candidate` is at least as large as `observed` up to the tie tolerance.
inline bool at_least(double candidate, double observed) {
  return candidate >= observed - 1e-12 * std::max(std::abs(observed), std::abs(candidate));
}

}  // namespace fanova
