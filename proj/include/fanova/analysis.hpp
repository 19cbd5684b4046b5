#pragma once

#include "fanova/closure.hpp"
#include "fanova/curves.hpp"
#include "fanova/permute.hpp"
#include "fanova/stats.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fanova {

inline constexpr const char* version_string = "fanova 0.1.0";

struct AnalysisConfig {
  std::vector<std::filesystem::path> inputs;  // one dataset per file
  std::vector<NamedRange> intervals;
  double alpha = 0.05;
  std::size_t permutations = 1000;
  std::uint64_t seed = 42;
  SmoothingOptions smoothing{3, KnotRule::every_observation, 49, LambdaRule::gcv, 0.0, default_gcv_multiplier};
  ClosureMethod method = ClosureMethod::combined;
  PValueRule rule = PValueRule::add_one;
  /// Intervals with adjusted p at or below this go on to pairwise
  /// comparisons; defaults to alpha.
  std::optional<double> pairwise_gate;
  unsigned threads = 1;
};

struct NamedData {
  std::string name;
  std::vector<RawCurve> curves;
};

struct IntervalResult {
  std::string name;
  double a = 0.0;
  double b = 0.0;
  double statistic = 0.0;
  double raw_p = 1.0;
  double adjusted_p = 1.0;
  std::string achieving_node;
  bool rejected = false;
  std::optional<PairwiseReport> pairwise;
  std::string note;
};

struct DatasetResult {
  std::string name;
  std::size_t curves = 0;
  std::vector<std::string> groups;
  double global_statistic = 0.0;
  double raw_p = 1.0;
  double bonferroni_p = 1.0;
  bool passed = false;
  std::string note;
  std::vector<IntervalResult> intervals;
  std::vector<std::string> warnings;
};

struct Provenance {
  std::string version = version_string;
  std::uint64_t seed = 0;
  std::size_t permutations = 0;
  double alpha = 0.05;
  std::string method;
  std::string p_rule;
  std::string smoothing;
  std::optional<double> pairwise_gate;
  std::vector<NamedRange> intervals;
  std::size_t datasets = 0;
  std::string config_hash;
};

struct AnalysisReport {
  Provenance provenance;
  std::vector<DatasetResult> datasets;
};

/// Intermediate objects kept for plotting and audit exports.
struct AnalysisArtifacts {
  std::vector<FunctionalDataset> datasets;
  std::vector<IntervalPartition> partitions;
  std::vector<NullStatMatrix> nulls;
};

/// Three-stage workflow: a whole-domain permutation test per dataset with a
/// Bonferroni correction across datasets; closure over intervals (top node
/// pinned to the Bonferroni p) for datasets that pass; pairwise closure (top
/// node pinned to the interval p) for intervals that pass.
AnalysisReport run_analysis(const AnalysisConfig& cfg);
AnalysisReport run_analysis(const AnalysisConfig& cfg, const std::vector<NamedData>& data,
                            AnalysisArtifacts* artifacts = nullptr);

std::string config_hash(const AnalysisConfig& cfg, const std::vector<std::string>& dataset_names);

enum class ReportFormat { json, text, csv };
ReportFormat parse_report_format(const std::string& text);

std::string render_report(const AnalysisReport& report, ReportFormat format);
AnalysisReport parse_report_json(const std::string& json);

/// Reads `[{"name": "latent", "a": 0, "b": 60}, ...]`.
std::vector<NamedRange> parse_intervals_json(const std::string& json);
std::vector<NamedRange> load_intervals(const std::filesystem::path& path);
std::string intervals_to_json(const std::vector<NamedRange>& ranges);

std::string render_pairwise_json(const PairwiseReport& report);

}  // namespace fanova
