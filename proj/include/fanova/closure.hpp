#pragma once

#include "fanova/curves.hpp"
#include "fanova/permute.hpp"
#include "fanova/stats.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace fanova {

/// Subset of elementary hypotheses; bit i stands for hypothesis i.
using NodeMask = std::uint64_t;

inline NodeMask full_mask(std::size_t m) { return m >= 64 ? ~NodeMask{0} : (NodeMask{1} << m) - 1; }

/// "H1", "H13", "H{1,2,10}" style label (1-based) for a node.
std::string node_label(NodeMask node, std::size_t m);

/// p-value of an intersection hypothesis given its member set.
using NodePFunction = std::function<double(NodeMask)>;

/// Node p from the shared null matrix: the node statistic is the sum of its
/// members' statistics, observed and under every permuted labeling.
NodePFunction permutation_node_p(const NullStatMatrix& nulls, PValueRule rule = PValueRule::add_one);

/// Node p as a fixed decreasing function of the summed observed statistics.
NodePFunction monotone_node_p(std::span<const double> observed, std::function<double(double)> survival);

/// Memoizing front end for node p-values with an optional override (used to
/// pin the top node to a p-value from an earlier testing stage).
class NodeEvaluator {
 public:
  NodeEvaluator(std::size_t m, NodePFunction fn);

  std::size_t size() const { return m_; }
  double p_value(NodeMask node);
  /// The node's own p-value, ignoring any override.
  double base_p(NodeMask node);
  void override_p(NodeMask node, double p);
  /// Number of distinct nodes whose p-value has been requested.
  std::size_t distinct_evaluations() const { return cache_.size(); }

 private:
  std::size_t m_;
  NodePFunction fn_;
  std::unordered_map<NodeMask, double> cache_;
  std::unordered_map<NodeMask, double> overrides_;
  std::unordered_map<NodeMask, double> base_cache_;
};

enum class ClosureMethod { full, shortcut_stat, shortcut_p, combined };

std::string to_string(ClosureMethod method);
ClosureMethod parse_closure_method(const std::string& text);

struct AdjustedHypothesis {
  std::string name;
  double raw_p = 1.0;
  double adjusted_p = 1.0;
  NodeMask achieving_node = 0;
};

struct ClosureReport {
  ClosureMethod method = ClosureMethod::combined;
  std::size_t m = 0;
  std::vector<AdjustedHypothesis> hypotheses;
  double global_p = 1.0;
  std::size_t node_evaluations = 0;

  bool rejected(std::size_t i, double alpha) const { return hypotheses[i].adjusted_p <= alpha; }
};

/// One pass of the ordered shortcut: hypotheses are ordered (smallest
/// statistic or largest raw p first) and H_(i) is adjusted over the nodes
/// {(i)}, {(i),(1)}, ..., {(1)..(i)} plus the already evaluated
/// {(1)..(j)}, j > i. m(m+1)/2 distinct nodes in total.
struct ShortcutPass {
  std::vector<std::size_t> order;  // order[r] = hypothesis with rank r
  std::vector<double> adjusted;
  std::vector<NodeMask> achieving;
  std::size_t node_evaluations = 0;
};

/// Adjusted p_i = max of p_S over every S containing i. Refuses m above `cap`.
ClosureReport full_closure(std::span<const double> observed, NodeEvaluator& nodes, std::size_t cap = 12);

ShortcutPass shortcut_stat_ordered(std::span<const double> observed, NodeEvaluator& nodes);
ShortcutPass shortcut_p_ordered(std::span<const double> observed, NodeEvaluator& nodes);

/// max{p_i, p*_i} of the two shortcut passes.
ClosureReport combined_shortcut(std::span<const double> observed, NodeEvaluator& nodes);

/// Report from a single shortcut pass (method shortcut_stat or shortcut_p).
ClosureReport shortcut_report(std::span<const double> observed, NodeEvaluator& nodes, ClosureMethod method);

ClosureReport adjust(std::span<const double> observed, NodeEvaluator& nodes, ClosureMethod method,
                     std::size_t full_cap = 12);

/// Interval-level adjustment straight from a null matrix. `top_override`
/// replaces the p-value of the all-intervals node.
ClosureReport adjust_intervals(const NullStatMatrix& nulls, ClosureMethod method,
                               std::optional<double> top_override = std::nullopt,
                               PValueRule rule = PValueRule::add_one, std::size_t full_cap = 12);

// ---------------------------------------------------------------------------
// Pairwise follow-up within one interval
// ---------------------------------------------------------------------------

/// Partition of groups into equality classes; an intersection of pairwise
/// equality hypotheses. block[g] is the class of group g, numbered in order
/// of first appearance.
struct GroupPartition {
  std::vector<int> block;

  std::size_t classes() const;
  bool joins(int a, int b) const { return block[static_cast<std::size_t>(a)] == block[static_cast<std::size_t>(b)]; }
  std::string describe(const std::vector<std::string>& names) const;
};

/// Set partitions of k groups with at least one class of two or more groups,
/// i.e. the nodes of the pairwise closure set (top node first).
std::vector<GroupPartition> pairwise_closure_nodes(std::size_t k);

/// Node statistic: for each class C with |C| >= 2, the between-group T of the
/// groups in C (around their own pooled mean, divided by |C| - 1),
/// integrated over the interval; summed over classes.
double partition_statistic(const Eigen::MatrixXd& interval_means, std::span<const std::size_t> sizes,
                           std::span<const double> weights, const GroupPartition& partition);

struct PairwiseNode {
  std::string label;
  double statistic = 0.0;
  double p_value = 1.0;
  bool overridden = false;
};

struct PairwiseHypothesis {
  std::string name;  // e.g. "A-C"
  int first = 0;
  int second = 0;
  double raw_p = 1.0;
  double adjusted_p = 1.0;
  std::string achieving_node;
};

struct PairwiseReport {
  std::string interval;
  double interval_adjusted_p = 1.0;
  std::vector<PairwiseNode> nodes;
  std::vector<PairwiseHypothesis> pairs;

  const PairwiseHypothesis& pair(const std::string& name) const;
};

/// Closure over all pairwise equalities of group means on one interval.
/// Node p-values come from the global permutation plan; the top node (all
/// groups equal) is pinned to `interval_adjusted_p`.
PairwiseReport pairwise_followup(const FunctionalDataset& ds, const IntervalPartition& partition,
                                 std::size_t interval, double interval_adjusted_p, const PermutationPlan& plan,
                                 PValueRule rule = PValueRule::add_one, std::size_t max_groups = 8);

}  // namespace fanova
