#include "fanova/analysis.hpp"

#include "fanova/error.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <sstream>

namespace fanova {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string p3(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", p);
  return buf;
}

std::string shortest(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

ordered_json pairwise_to_json(const PairwiseReport& pw, const std::vector<std::string>& groups, double alpha) {
  ordered_json j;
  j["interval"] = pw.interval;
  j["interval_adjusted_p"] = pw.interval_adjusted_p;
  j["nodes"] = ordered_json::array();
  for (const auto& n : pw.nodes)
    j["nodes"].push_back(
        {{"label", n.label}, {"statistic", n.statistic}, {"p_value", n.p_value}, {"overridden", n.overridden}});
  j["pairs"] = ordered_json::array();
  for (const auto& h : pw.pairs)
    j["pairs"].push_back({{"name", h.name},
                          {"first", h.first},
                          {"second", h.second},
                          {"raw_p", h.raw_p},
                          {"adjusted_p", h.adjusted_p},
                          {"achieving_node", h.achieving_node},
                          {"rejected_at_alpha", h.adjusted_p <= alpha}});
  if (!groups.empty()) {
    // Symmetric matrix of adjusted p-values, null on the diagonal.
    ordered_json m = ordered_json::array();
    for (std::size_t a = 0; a < groups.size(); ++a) {
      ordered_json row = ordered_json::array();
      for (std::size_t b = 0; b < groups.size(); ++b) row.push_back(nullptr);
      m.push_back(row);
    }
    for (const auto& h : pw.pairs) {
      m[static_cast<std::size_t>(h.first)][static_cast<std::size_t>(h.second)] = h.adjusted_p;
      m[static_cast<std::size_t>(h.second)][static_cast<std::size_t>(h.first)] = h.adjusted_p;
    }
    j["adjusted_p_matrix"] = {{"groups", groups}, {"values", m}};
  }
  return j;
}

PairwiseReport pairwise_from_json(const nlohmann::json& j) {
  PairwiseReport pw;
  pw.interval = j.at("interval").get<std::string>();
  pw.interval_adjusted_p = j.at("interval_adjusted_p").get<double>();
  for (const auto& n : j.at("nodes"))
    pw.nodes.push_back({n.at("label").get<std::string>(), n.at("statistic").get<double>(),
                        n.at("p_value").get<double>(), n.at("overridden").get<bool>()});
  for (const auto& h : j.at("pairs"))
    pw.pairs.push_back({h.at("name").get<std::string>(), h.at("first").get<int>(), h.at("second").get<int>(),
                        h.at("raw_p").get<double>(), h.at("adjusted_p").get<double>(),
                        h.at("achieving_node").get<std::string>()});
  return pw;
}

ordered_json report_to_json(const AnalysisReport& r) {
  const auto& pv = r.provenance;
  ordered_json j;
  ordered_json prov;
  prov["version"] = pv.version;
  prov["seed"] = pv.seed;
  prov["permutations"] = pv.permutations;
  prov["alpha"] = pv.alpha;
  prov["method"] = pv.method;
  prov["p_rule"] = pv.p_rule;
  prov["smoothing"] = pv.smoothing;
  prov["pairwise_gate"] = pv.pairwise_gate ? ordered_json(*pv.pairwise_gate) : ordered_json(nullptr);
  prov["intervals"] = ordered_json::array();
  for (const auto& iv : pv.intervals) prov["intervals"].push_back({{"name", iv.name}, {"a", iv.a}, {"b", iv.b}});
  prov["datasets"] = pv.datasets;
  prov["config_hash"] = pv.config_hash;
  j["provenance"] = prov;

  j["datasets"] = ordered_json::array();
  for (const auto& d : r.datasets) {
    ordered_json dj;
    dj["name"] = d.name;
    dj["curves"] = d.curves;
    dj["groups"] = d.groups;
    dj["global"] = {{"name", "H0"},
                    {"statistic", d.global_statistic},
                    {"raw_p", d.raw_p},
                    {"bonferroni_p", d.bonferroni_p},
                    {"rejected_at_alpha", d.passed}};
    dj["note"] = d.note;
    dj["warnings"] = d.warnings;
    dj["intervals"] = ordered_json::array();
    for (const auto& iv : d.intervals) {
      ordered_json ij;
      ij["name"] = iv.name;
      ij["a"] = iv.a;
      ij["b"] = iv.b;
      ij["statistic"] = iv.statistic;
      ij["raw_p"] = iv.raw_p;
      ij["adjusted_p"] = iv.adjusted_p;
      ij["achieving_node"] = iv.achieving_node;
      ij["rejected_at_alpha"] = iv.rejected;
      ij["note"] = iv.note;
      ij["pairwise"] = iv.pairwise ? pairwise_to_json(*iv.pairwise, d.groups, pv.alpha) : ordered_json(nullptr);
      dj["intervals"].push_back(std::move(ij));
    }
    j["datasets"].push_back(std::move(dj));
  }
  return j;
}

std::string render_text(const AnalysisReport& r) {
  const auto& pv = r.provenance;
  std::ostringstream out;
  out << pv.version << "  seed=" << pv.seed << "  permutations=" << pv.permutations << "  alpha=" << p3(pv.alpha)
      << "  method=" << pv.method << "\n";
  out << "smoothing: " << pv.smoothing << "\n";
  if (pv.pairwise_gate) out << "pairwise gate: " << p3(*pv.pairwise_gate) << "\n";
  out << "config hash: " << pv.config_hash << "\n";
  out << "[*] rejected at alpha, [ ] not rejected\n";
  auto mark = [](bool rej) { return rej ? "[*] " : "[ ] "; };
  for (const auto& d : r.datasets) {
    out << "\nDataset " << d.name << " (" << d.curves << " curves; groups:";
    for (std::size_t g = 0; g < d.groups.size(); ++g) out << (g ? ", " : " ") << d.groups[g];
    out << ")\n";
    for (const auto& w : d.warnings) out << "  warning: " << w << "\n";
    out << "  " << mark(d.passed) << "H0 all groups equal over the whole domain: raw p = " << p3(d.raw_p)
        << ", Bonferroni p = " << p3(d.bonferroni_p) << "\n";
    if (!d.note.empty()) out << "      " << d.note << "\n";
    for (const auto& iv : d.intervals) {
      out << "      " << mark(iv.rejected) << iv.name << " [" << shortest(iv.a) << ", " << shortest(iv.b)
          << "]: adjusted p = " << p3(iv.adjusted_p) << " (raw " << p3(iv.raw_p) << ", via " << iv.achieving_node
          << ")\n";
      if (!iv.note.empty()) out << "          " << iv.note << "\n";
      if (iv.pairwise)
        for (const auto& h : iv.pairwise->pairs)
          out << "          " << mark(h.adjusted_p <= pv.alpha) << h.name << ": adjusted p = " << p3(h.adjusted_p)
              << " (raw " << p3(h.raw_p) << ", via " << h.achieving_node << ")\n";
    }
  }
  return out.str();
}

std::string render_csv(const AnalysisReport& r) {
  const double alpha = r.provenance.alpha;
  std::ostringstream out;
  out << "dataset,level,interval,hypothesis,statistic,raw_p,adjusted_p,achieving_node,rejected\n";
  for (const auto& d : r.datasets) {
    out << csv_field(d.name) << ",dataset,,H0," << shortest(d.global_statistic) << ',' << shortest(d.raw_p) << ','
        << shortest(d.bonferroni_p) << ",," << (d.passed ? 1 : 0) << "\n";
    for (const auto& iv : d.intervals) {
      out << csv_field(d.name) << ",interval," << csv_field(iv.name) << ',' << csv_field(iv.name) << ','
          << shortest(iv.statistic) << ',' << shortest(iv.raw_p) << ',' << shortest(iv.adjusted_p) << ','
          << csv_field(iv.achieving_node) << ',' << (iv.rejected ? 1 : 0) << "\n";
      if (iv.pairwise)
        for (const auto& h : iv.pairwise->pairs)
          out << csv_field(d.name) << ",pair," << csv_field(iv.name) << ',' << csv_field(h.name) << ",,"
              << shortest(h.raw_p) << ',' << shortest(h.adjusted_p) << ',' << csv_field(h.achieving_node) << ','
              << (h.adjusted_p <= alpha ? 1 : 0) << "\n";
    }
  }
  return out.str();
}

}  // namespace

ReportFormat parse_report_format(const std::string& text) {
  if (text == "json") return ReportFormat::json;
  if (text == "text" || text == "txt") return ReportFormat::text;
  if (text == "csv") return ReportFormat::csv;
  throw ValidationError("unknown report format '" + text + "' (json, text, csv)");
}

std::string render_report(const AnalysisReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::json: return report_to_json(report).dump(2) + "\n";
    case ReportFormat::text: return render_text(report);
    case ReportFormat::csv: return render_csv(report);
  }
  throw ValidationError("unknown report format");
}

std::string render_pairwise_json(const PairwiseReport& report) {
  return pairwise_to_json(report, {}, 0.05).dump(2) + "\n";
}

AnalysisReport parse_report_json(const std::string& text) {
  AnalysisReport r;
  try {
    const auto j = nlohmann::json::parse(text);
    const auto& pj = j.at("provenance");
    auto& pv = r.provenance;
    pv.version = pj.at("version").get<std::string>();
    pv.seed = pj.at("seed").get<std::uint64_t>();
    pv.permutations = pj.at("permutations").get<std::size_t>();
    pv.alpha = pj.at("alpha").get<double>();
    pv.method = pj.at("method").get<std::string>();
    pv.p_rule = pj.at("p_rule").get<std::string>();
    pv.smoothing = pj.at("smoothing").get<std::string>();
    if (!pj.at("pairwise_gate").is_null()) pv.pairwise_gate = pj.at("pairwise_gate").get<double>();
    for (const auto& iv : pj.at("intervals"))
      pv.intervals.push_back({iv.at("name").get<std::string>(), iv.at("a").get<double>(), iv.at("b").get<double>()});
    pv.datasets = pj.at("datasets").get<std::size_t>();
    pv.config_hash = pj.at("config_hash").get<std::string>();

    for (const auto& dj : j.at("datasets")) {
      DatasetResult d;
      d.name = dj.at("name").get<std::string>();
      d.curves = dj.at("curves").get<std::size_t>();
      d.groups = dj.at("groups").get<std::vector<std::string>>();
      const auto& g = dj.at("global");
      d.global_statistic = g.at("statistic").get<double>();
      d.raw_p = g.at("raw_p").get<double>();
      d.bonferroni_p = g.at("bonferroni_p").get<double>();
      d.passed = g.at("rejected_at_alpha").get<bool>();
      d.note = dj.at("note").get<std::string>();
      d.warnings = dj.at("warnings").get<std::vector<std::string>>();
      for (const auto& ij : dj.at("intervals")) {
        IntervalResult iv;
        iv.name = ij.at("name").get<std::string>();
        iv.a = ij.at("a").get<double>();
        iv.b = ij.at("b").get<double>();
        iv.statistic = ij.at("statistic").get<double>();
        iv.raw_p = ij.at("raw_p").get<double>();
        iv.adjusted_p = ij.at("adjusted_p").get<double>();
        iv.achieving_node = ij.at("achieving_node").get<std::string>();
        iv.rejected = ij.at("rejected_at_alpha").get<bool>();
        iv.note = ij.at("note").get<std::string>();
        if (!ij.at("pairwise").is_null()) iv.pairwise = pairwise_from_json(ij.at("pairwise"));
        d.intervals.push_back(std::move(iv));
      }
      r.datasets.push_back(std::move(d));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed report JSON: ") + e.what());
  }
  return r;
}

}  // namespace fanova
