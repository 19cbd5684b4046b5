#include "fanova/analysis.hpp"

#include "fanova/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fanova {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string knot_rule_name(KnotRule rule) {
  return rule == KnotRule::every_observation ? "every_observation" : "equispaced";
}

std::string describe_smoothing(const SmoothingOptions& s) {
  std::ostringstream out;
  out << "degree=" << s.degree << " knots=" << knot_rule_name(s.knots);
  if (s.knots == KnotRule::equispaced) out << '(' << s.knot_count << ')';
  if (s.lambda_rule == LambdaRule::gcv)
    out << " lambda=gcv(" << s.gcv_multiplier << ')';
  else
    out << " lambda=" << s.lambda;
  return out.str();
}

std::string p_rule_name(PValueRule rule) { return rule == PValueRule::add_one ? "add_one" : "raw_proportion"; }

void check_config(const AnalysisConfig& cfg) {
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  if (cfg.permutations == 0) throw ValidationError("number of permutations must be positive");
  if (cfg.intervals.empty()) throw ValidationError("at least one interval is required");
  if (cfg.pairwise_gate && !(*cfg.pairwise_gate > 0.0 && *cfg.pairwise_gate <= 1.0))
    throw ValidationError("pairwise gate must lie in (0, 1]");
}

}  // namespace

std::string config_hash(const AnalysisConfig& cfg, const std::vector<std::string>& dataset_names) {
  ordered_json j;
  j["datasets"] = dataset_names;
  j["intervals"] = ordered_json::array();
  for (const auto& r : cfg.intervals) j["intervals"].push_back({{"name", r.name}, {"a", r.a}, {"b", r.b}});
  j["alpha"] = cfg.alpha;
  j["permutations"] = cfg.permutations;
  j["seed"] = cfg.seed;
  j["method"] = to_string(cfg.method);
  j["p_rule"] = p_rule_name(cfg.rule);
  j["smoothing"] = describe_smoothing(cfg.smoothing);
  j["pairwise_gate"] = cfg.pairwise_gate ? ordered_json(*cfg.pairwise_gate) : ordered_json(nullptr);
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

AnalysisReport run_analysis(const AnalysisConfig& cfg) {
  std::vector<NamedData> data;
  for (const auto& path : cfg.inputs) data.push_back({path.stem().string(), load_dataset(path)});
  return run_analysis(cfg, data);
}

AnalysisReport run_analysis(const AnalysisConfig& cfg, const std::vector<NamedData>& data,
                            AnalysisArtifacts* artifacts) {
  check_config(cfg);
  if (data.empty()) throw ValidationError("no datasets supplied");

  std::vector<std::string> names;
  for (const auto& d : data) names.push_back(d.name);

  AnalysisReport report;
  auto& prov = report.provenance;
  prov.seed = cfg.seed;
  prov.permutations = cfg.permutations;
  prov.alpha = cfg.alpha;
  prov.method = to_string(cfg.method);
  prov.p_rule = p_rule_name(cfg.rule);
  prov.smoothing = describe_smoothing(cfg.smoothing);
  prov.pairwise_gate = cfg.pairwise_gate;
  prov.intervals = cfg.intervals;
  prov.datasets = data.size();
  prov.config_hash = config_hash(cfg, names);

  const double D = static_cast<double>(data.size());
  const double gate = cfg.pairwise_gate.value_or(cfg.alpha);

  for (std::size_t d = 0; d < data.size(); ++d) {
    DatasetResult res;
    res.name = data[d].name;
    res.curves = data[d].curves.size();

    FunctionalDataset ds = FunctionalDataset::smooth(data[d].curves, cfg.smoothing);
    if (ds.k() < 2) throw ValidationError("dataset '" + res.name + "' has fewer than two groups");
    res.groups = ds.group_names();

    std::vector<std::string> warnings;
    IntervalPartition partition = [&] {
      try {
        return IntervalPartition::from_ranges(ds.grid(), cfg.intervals, &warnings);
      } catch (const ValidationError& e) {
        throw ValidationError("dataset '" + res.name + "': " + e.what());
      }
    }();
    res.warnings = warnings;

    const PermutationPlan plan = generate_plan(derive_seed(cfg.seed, d), cfg.permutations, ds.labels());
    NullStatMatrix nulls = null_matrix(ds, partition, plan, cfg.threads);

    // Stage 1: whole-domain statistic is the sum over the partition.
    res.global_statistic = nulls.observed.sum();
    const Eigen::VectorXd global_null = nulls.stats.rowwise().sum();
    res.raw_p = p_value(res.global_statistic, global_null, cfg.rule);
    res.bonferroni_p = std::min(1.0, D * res.raw_p);
    res.passed = res.bonferroni_p <= cfg.alpha;

    if (!res.passed) {
      res.note = "not significant after Bonferroni correction; no further analysis";
    } else {
      // Stage 2.
      const ClosureReport closure =
          adjust_intervals(nulls, cfg.method, res.bonferroni_p, cfg.rule);
      for (std::size_t i = 0; i < partition.size(); ++i) {
        IntervalResult ir;
        ir.name = partition[i].name;
        ir.a = partition.lower(i);
        ir.b = partition.upper(i);
        ir.statistic = nulls.observed(static_cast<Eigen::Index>(i));
        ir.raw_p = closure.hypotheses[i].raw_p;
        ir.adjusted_p = closure.hypotheses[i].adjusted_p;
        ir.achieving_node = node_label(closure.hypotheses[i].achieving_node, partition.size());
        ir.rejected = ir.adjusted_p <= cfg.alpha;
        // Stage 3.
        if (ir.adjusted_p <= gate) {
          ir.pairwise = pairwise_followup(ds, partition, i, ir.adjusted_p, plan, cfg.rule);
          if (!ir.rejected) ir.note = "pairwise comparisons run under the marginal gate";
        } else {
          ir.note = "not significant; no pairwise comparisons";
        }
        res.intervals.push_back(std::move(ir));
      }
    }

    if (artifacts) {
      artifacts->datasets.push_back(std::move(ds));
      artifacts->partitions.push_back(std::move(partition));
      artifacts->nulls.push_back(std::move(nulls));
    }
    report.datasets.push_back(std::move(res));
  }
  return report;
}

std::vector<NamedRange> parse_intervals_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("interval file is not valid JSON: ") + e.what());
  }
  if (!j.is_array() || j.empty()) throw ValidationError("interval file must hold a non-empty JSON array");
  std::vector<NamedRange> out;
  for (const auto& item : j) {
    if (!item.is_object() || !item.contains("a") || !item.contains("b") || !item["a"].is_number() ||
        !item["b"].is_number())
      throw ValidationError("each interval needs numeric \"a\" and \"b\"");
    NamedRange r;
    r.name = item.contains("name") && item["name"].is_string() ? item["name"].get<std::string>()
                                                                : "I" + std::to_string(out.size() + 1);
    r.a = item["a"].get<double>();
    r.b = item["b"].get<double>();
    if (!(r.a < r.b)) throw ValidationError("interval '" + r.name + "' must have a < b");
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<NamedRange> load_intervals(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open interval file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_intervals_json(buf.str());
}

std::string intervals_to_json(const std::vector<NamedRange>& ranges) {
  ordered_json j = ordered_json::array();
  for (const auto& r : ranges) j.push_back({{"name", r.name}, {"a", r.a}, {"b", r.b}});
  return j.dump(2) + "\n";
}

}  // namespace fanova
