#include "fanova/closure.hpp"
#include "fanova/error.hpp"
#include "fanova/permute.hpp"
#include "fanova/stats.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

using namespace fanova;

namespace {

FunctionalDataset shifted_groups(std::uint64_t seed, const std::vector<int>& sizes, const std::vector<double>& shift,
                                 std::size_t G = 31) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::vector<double> grid(G);
  for (std::size_t g = 0; g < G; ++g) grid[g] = static_cast<double>(g) / static_cast<double>(G - 1);
  std::vector<int> labels;
  for (std::size_t j = 0; j < sizes.size(); ++j) labels.insert(labels.end(), static_cast<std::size_t>(sizes[j]), static_cast<int>(j));
  Eigen::MatrixXd values(static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(G));
  for (Eigen::Index r = 0; r < values.rows(); ++r)
    for (Eigen::Index c = 0; c < values.cols(); ++c)
      values(r, c) = z(rng) + shift[static_cast<std::size_t>(labels[static_cast<std::size_t>(r)])] * grid[static_cast<std::size_t>(c)];
  std::vector<std::string> names;
  for (std::size_t j = 0; j < sizes.size(); ++j) names.push_back(std::string(1, static_cast<char>('A' + j)));
  return FunctionalDataset(grid, values, labels, names);
}

std::vector<std::vector<double>> rows_of(const FunctionalDataset& ds) {
  std::vector<std::vector<double>> out;
  for (Eigen::Index r = 0; r < ds.values().rows(); ++r) {
    const Eigen::VectorXd row = ds.values().row(r).transpose();
    out.emplace_back(row.data(), row.data() + row.size());
  }
  return out;
}

// Sum over classes with two or more groups of the between-group T computed
// from the curves of that class alone.
double brute_partition_stat(const std::vector<std::vector<double>>& curves, const std::vector<int>& labels,
                            const std::vector<int>& block, const std::vector<double>& grid, std::size_t first,
                            std::size_t last) {
  const int classes = *std::max_element(block.begin(), block.end()) + 1;
  double total = 0.0;
  for (int c = 0; c < classes; ++c) {
    std::vector<int> members;
    for (std::size_t g = 0; g < block.size(); ++g)
      if (block[g] == c) members.push_back(static_cast<int>(g));
    if (members.size() < 2) continue;
    std::vector<std::vector<double>> sub;
    std::vector<int> sub_labels;
    for (std::size_t i = 0; i < curves.size(); ++i) {
      const auto it = std::find(members.begin(), members.end(), labels[i]);
      if (it == members.end()) continue;
      sub.push_back(curves[i]);
      sub_labels.push_back(static_cast<int>(it - members.begin()));
    }
    total += oracle::brute_T(sub, sub_labels, static_cast<int>(members.size()), grid, first, last);
  }
  return total;
}

// Canonical form of a partition given as blocks: the class index of each
// element, numbered in order of first appearance.
std::vector<int> canonical(const std::vector<std::vector<int>>& blocks, int k) {
  std::vector<int> raw(static_cast<std::size_t>(k));
  for (std::size_t b = 0; b < blocks.size(); ++b)
    for (int e : blocks[b]) raw[static_cast<std::size_t>(e)] = static_cast<int>(b);
  std::vector<int> renum(blocks.size(), -1), out;
  int next = 0;
  for (int v : raw) {
    if (renum[static_cast<std::size_t>(v)] < 0) renum[static_cast<std::size_t>(v)] = next++;
    out.push_back(renum[static_cast<std::size_t>(v)]);
  }
  return out;
}

}  // namespace

TEST(PairwiseNodes, AreTheSetPartitionsWithSomeJoinedPair) {
  const std::size_t bell[] = {1, 1, 2, 5, 15, 52, 203};
  EXPECT_TRUE(pairwise_closure_nodes(1).empty());
  for (int k = 2; k <= 6; ++k) {
    const auto nodes = pairwise_closure_nodes(static_cast<std::size_t>(k));
    EXPECT_EQ(nodes.size(), bell[k] - 1);
    std::set<std::vector<int>> engine;
    for (const auto& n : nodes) engine.insert(n.block);
    EXPECT_EQ(engine.size(), nodes.size());
    std::set<std::vector<int>> expected;
    for (const auto& blocks : oracle::set_partitions(k))
      if (std::any_of(blocks.begin(), blocks.end(), [](const auto& b) { return b.size() >= 2; }))
        expected.insert(canonical(blocks, k));
    EXPECT_EQ(engine, expected);
    EXPECT_EQ(nodes.front().classes(), 1u);
  }
}

TEST(PairwiseNodes, Describe) {
  const std::vector<std::string> names{"A", "B", "C"};
  EXPECT_EQ((GroupPartition{{0, 0, 1}}).describe(names), "{A,B}{C}");
  EXPECT_EQ((GroupPartition{{0, 1, 0}}).describe(names), "{A,C}{B}");
  EXPECT_EQ((GroupPartition{{0, 0, 0}}).describe(names), "{A,B,C}");
  EXPECT_TRUE((GroupPartition{{0, 1, 0}}).joins(0, 2));
  EXPECT_FALSE((GroupPartition{{0, 1, 0}}).joins(0, 1));
}

TEST(PartitionStatistic, ReducesToGroupStatistics) {
  const auto ds = shifted_groups(5, {4, 3, 5, 4}, {0.0, 1.0, -0.5, 2.0});
  const auto part = IntervalPartition::equal_split(ds.grid(), 3);
  const auto curves = rows_of(ds);
  const std::vector<int> labels(ds.labels().begin(), ds.labels().end());
  const std::vector<double> grid(ds.grid().begin(), ds.grid().end());
  const auto means = group_means(ds).group;
  for (std::size_t i = 0; i < part.size(); ++i) {
    const auto& iv = part[i];
    const auto first = static_cast<Eigen::Index>(iv.first), width = static_cast<Eigen::Index>(iv.last - iv.first + 1);
    const Eigen::VectorXd w = trapezoid_weights(ds.grid(), iv).segment(first, width);
    const Eigen::MatrixXd m = means.middleCols(first, width);
    const std::span<const double> ws(w.data(), static_cast<std::size_t>(width));
    // All groups joined: the k-group statistic.
    EXPECT_NEAR(partition_statistic(m, ds.group_sizes(), ws, GroupPartition{{0, 0, 0, 0}}), interval_T(ds, iv), 1e-12);
    for (const auto& node : pairwise_closure_nodes(4)) {
      EXPECT_NEAR(partition_statistic(m, ds.group_sizes(), ws, node),
                  brute_partition_stat(curves, labels, node.block, grid, iv.first, iv.last), 1e-11);
    }
  }
}

TEST(PairwiseFollowup, NodePValuesMatchBruteForce) {
  const auto ds = shifted_groups(8, {4, 4, 5}, {0.0, 0.3, 1.5});
  const auto part = IntervalPartition::equal_split(ds.grid(), 2);
  const auto plan = generate_plan(3, 99, ds.labels());
  const auto report = pairwise_followup(ds, part, 1, 0.02, plan);
  const auto curves = rows_of(ds);
  const std::vector<int> labels(ds.labels().begin(), ds.labels().end());
  const std::vector<double> grid(ds.grid().begin(), ds.grid().end());
  const auto nodes = pairwise_closure_nodes(3);
  ASSERT_EQ(report.nodes.size(), nodes.size());
  std::vector<double> brute_p(nodes.size());
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    const double obs = brute_partition_stat(curves, labels, nodes[j].block, grid, part[1].first, part[1].last);
    std::size_t count = 0;
    for (const auto& row : plan.labelings)
      count += brute_partition_stat(curves, row, nodes[j].block, grid, part[1].first, part[1].last) >= obs * (1 - 1e-12);
    brute_p[j] = (1.0 + static_cast<double>(count)) / (static_cast<double>(plan.size()) + 1.0);
    EXPECT_NEAR(report.nodes[j].statistic, obs, 1e-11);
    EXPECT_EQ(report.nodes[j].overridden, j == 0);
    EXPECT_DOUBLE_EQ(report.nodes[j].p_value, j == 0 ? 0.02 : brute_p[j]);
    EXPECT_EQ(report.nodes[j].label, nodes[j].describe(ds.group_names()));
  }
  // Adjusted p of each pair: largest node p over partitions joining the pair.
  ASSERT_EQ(report.pairs.size(), 3u);
  for (const auto& h : report.pairs) {
    double expected = 0.0;
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      if (!nodes[j].joins(h.first, h.second)) continue;
      expected = std::max(expected, j == 0 ? 0.02 : brute_p[j]);
      if (nodes[j].classes() == 2) EXPECT_DOUBLE_EQ(h.raw_p, brute_p[j]);
    }
    EXPECT_DOUBLE_EQ(h.adjusted_p, expected);
    EXPECT_GE(h.adjusted_p, 0.02);
    EXPECT_GE(h.adjusted_p, h.raw_p);
  }
  EXPECT_EQ(report.pair("A-C").first, 0);
  EXPECT_EQ(report.pair("A-C").second, 2);
  EXPECT_THROW(report.pair("C-A"), std::out_of_range);
}

TEST(PairwiseFollowup, TwoGroupsTakeTheLargerOfRawAndIntervalP) {
  const auto ds = shifted_groups(2, {5, 5}, {0.0, 0.8});
  const auto part = IntervalPartition::equal_split(ds.grid(), 2);
  const auto plan = generate_plan(1, 199, ds.labels());
  for (double interval_p : {0.005, 0.04, 0.7}) {
    const auto report = pairwise_followup(ds, part, 0, interval_p, plan);
    ASSERT_EQ(report.pairs.size(), 1u);
    const auto& h = report.pairs[0];
    EXPECT_EQ(h.name, "A-B");
    EXPECT_DOUBLE_EQ(h.adjusted_p, std::max(h.raw_p, interval_p));
  }
}

TEST(PairwiseFollowup, ValidatesInputs) {
  const auto ds = shifted_groups(2, {3, 3, 3}, {0.0, 0.0, 0.0});
  const auto part = IntervalPartition::equal_split(ds.grid(), 2);
  const auto plan = generate_plan(1, 20, ds.labels());
  EXPECT_THROW(pairwise_followup(ds, part, 2, 0.01, plan), ValidationError);
  EXPECT_THROW(pairwise_followup(ds, part, 0, 0.0, plan), ValidationError);
  EXPECT_THROW(pairwise_followup(ds, part, 0, 0.01, plan, PValueRule::add_one, 2), ValidationError);
  EXPECT_THROW(pairwise_followup(ds, part, 0, 0.01, PermutationPlan{}), ValidationError);
}
