#include "fanova/closure.hpp"

#include "fanova/error.hpp"

#include <algorithm>

namespace fanova {

std::size_t GroupPartition::classes() const {
  return block.empty() ? 0 : static_cast<std::size_t>(*std::max_element(block.begin(), block.end())) + 1;
}

std::string GroupPartition::describe(const std::vector<std::string>& names) const {
  std::string out;
  for (std::size_t c = 0; c < classes(); ++c) {
    out += "{";
    bool first = true;
    for (std::size_t g = 0; g < block.size(); ++g) {
      if (block[g] != static_cast<int>(c)) continue;
      if (!first) out += ",";
      out += g < names.size() ? names[g] : std::to_string(g + 1);
      first = false;
    }
    out += "}";
  }
  return out;
}

std::vector<GroupPartition> pairwise_closure_nodes(std::size_t k) {
  std::vector<GroupPartition> out;
  if (k < 2) return out;
  // Restricted growth strings: block[0] = 0, block[i] <= 1 + max(block[0..i-1]).
  std::vector<int> rgs(k, 0);
  std::vector<int> prefix_max(k, 0);
  while (true) {
    if (static_cast<std::size_t>(prefix_max[k - 1]) + 1 < k) out.push_back(GroupPartition{rgs});
    std::size_t i = k - 1;
    while (i > 0 && rgs[i] > prefix_max[i - 1]) --i;
    if (i == 0) break;
    ++rgs[i];
    prefix_max[i] = std::max(prefix_max[i - 1], rgs[i]);
    for (std::size_t j = i + 1; j < k; ++j) {
      rgs[j] = 0;
      prefix_max[j] = prefix_max[i];
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const GroupPartition& a, const GroupPartition& b) { return a.classes() < b.classes(); });
  return out;
}

double partition_statistic(const Eigen::MatrixXd& interval_means, std::span<const std::size_t> sizes,
                           std::span<const double> weights, const GroupPartition& partition) {
  const Eigen::Index G = interval_means.cols();
  const Eigen::Map<const Eigen::VectorXd> w(weights.data(), G);
  double total = 0.0;
  for (std::size_t c = 0; c < partition.classes(); ++c) {
    std::vector<std::size_t> members;
    double n_class = 0.0;
    for (std::size_t g = 0; g < partition.block.size(); ++g) {
      if (partition.block[g] == static_cast<int>(c)) {
        members.push_back(g);
        n_class += static_cast<double>(sizes[g]);
      }
    }
    if (members.size() < 2) continue;
    Eigen::VectorXd pooled = Eigen::VectorXd::Zero(G);
    for (const auto g : members) {
      pooled += static_cast<double>(sizes[g]) * interval_means.row(static_cast<Eigen::Index>(g)).transpose();
    }
    pooled /= n_class;
    Eigen::VectorXd between = Eigen::VectorXd::Zero(G);
    for (const auto g : members) {
      between += static_cast<double>(sizes[g]) *
                 (interval_means.row(static_cast<Eigen::Index>(g)).transpose() - pooled).array().square().matrix();
    }
    total += w.dot(between) / static_cast<double>(members.size() - 1);
  }
  return total;
}

const PairwiseHypothesis& PairwiseReport::pair(const std::string& name) const {
  for (const auto& p : pairs) {
    if (p.name == name) return p;
  }
  throw std::out_of_range("no pairwise hypothesis named '" + name + "'");
}

PairwiseReport pairwise_followup(const FunctionalDataset& ds, const IntervalPartition& partition,
                                 std::size_t interval, double interval_adjusted_p, const PermutationPlan& plan,
                                 PValueRule rule, std::size_t max_groups) {
  if (interval >= partition.size()) throw ValidationError("interval index is not in the partition");
  if (!(interval_adjusted_p > 0.0 && interval_adjusted_p <= 1.0)) {
    throw ValidationError("interval adjusted p-value must lie in (0, 1]");
  }
  const std::size_t k = ds.k();
  if (k < 2) throw ValidationError("pairwise comparison needs at least two groups");
  if (k > max_groups) {
    throw ValidationError("pairwise closure over " + std::to_string(k) + " groups exceeds the cap of " +
                          std::to_string(max_groups));
  }
  if (partition.grid().size() != ds.grid().size()) throw ValidationError("partition grid does not match the dataset");
  if (plan.labelings.empty()) throw ValidationError("permutation plan is empty");

  const Interval& iv = partition[interval];
  const auto first = static_cast<Eigen::Index>(iv.first);
  const auto width = static_cast<Eigen::Index>(iv.last - iv.first + 1);
  const Eigen::VectorXd weights = trapezoid_weights(ds.grid(), iv).segment(first, width);
  const std::span<const double> w(weights.data(), static_cast<std::size_t>(width));
  const Eigen::MatrixXd values = ds.values().middleCols(first, width);
  const auto& sizes = ds.group_sizes();
  const std::vector<GroupPartition> nodes = pairwise_closure_nodes(k);

  auto node_stats = [&](std::span<const int> labels) {
    Eigen::MatrixXd means = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), width);
    for (std::size_t i = 0; i < labels.size(); ++i) means.row(labels[i]) += values.row(static_cast<Eigen::Index>(i));
    for (std::size_t g = 0; g < k; ++g) means.row(static_cast<Eigen::Index>(g)) /= static_cast<double>(sizes[g]);
    Eigen::VectorXd out(static_cast<Eigen::Index>(nodes.size()));
    for (std::size_t j = 0; j < nodes.size(); ++j) out(static_cast<Eigen::Index>(j)) = partition_statistic(means, sizes, w, nodes[j]);
    return out;
  };

  const Eigen::VectorXd observed = node_stats(ds.labels());
  Eigen::MatrixXd null_stats(static_cast<Eigen::Index>(plan.size()), static_cast<Eigen::Index>(nodes.size()));
  for (std::size_t b = 0; b < plan.size(); ++b) {
    null_stats.row(static_cast<Eigen::Index>(b)) = node_stats(plan.labelings[b]).transpose();
  }

  PairwiseReport report;
  report.interval = iv.name;
  report.interval_adjusted_p = interval_adjusted_p;
  std::vector<double> computed(nodes.size());
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    computed[j] = p_value(observed(col), null_stats.col(col), rule);
    PairwiseNode node;
    node.label = nodes[j].describe(ds.group_names());
    node.statistic = observed(col);
    node.overridden = nodes[j].classes() == 1;
    node.p_value = node.overridden ? interval_adjusted_p : computed[j];
    report.nodes.push_back(std::move(node));
  }

  for (int a = 0; a < static_cast<int>(k); ++a) {
    for (int b = a + 1; b < static_cast<int>(k); ++b) {
      PairwiseHypothesis h;
      h.first = a;
      h.second = b;
      h.name = ds.group_names()[static_cast<std::size_t>(a)] + "-" + ds.group_names()[static_cast<std::size_t>(b)];
      for (std::size_t j = 0; j < nodes.size(); ++j) {
        const bool elementary = nodes[j].classes() == k - 1 && nodes[j].joins(a, b);
        if (elementary) {
          h.raw_p = computed[j];
          h.adjusted_p = computed[j];
          h.achieving_node = report.nodes[j].label;
        }
      }
      for (std::size_t j = 0; j < nodes.size(); ++j) {
        if (nodes[j].joins(a, b) && report.nodes[j].p_value > h.adjusted_p) {
          h.adjusted_p = report.nodes[j].p_value;
          h.achieving_node = report.nodes[j].label;
        }
      }
      report.pairs.push_back(std::move(h));
    }
  }
  return report;
}

}  // namespace fanova
