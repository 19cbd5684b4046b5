#include "fanova/analysis.hpp"
#include "fanova/closure.hpp"
#include "fanova/curves.hpp"
#include "fanova/error.hpp"
#include "fanova/permute.hpp"
#include "fanova/plot.hpp"
#include "fanova/simulate.hpp"
#include "fanova/stats.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using namespace fanova;

namespace {

struct SmoothingFlags {
  int degree = 3;
  std::string knots = "every";
  std::size_t knot_count = 49;
  std::string lambda;
  double gcv_multiplier = default_gcv_multiplier;

  void add(CLI::App* cmd, const std::string& default_lambda) {
    lambda = default_lambda;
    cmd->add_option("--degree", degree, "spline degree")->capture_default_str();
    cmd->add_option("--knots", knots, "knot placement: every (one per observation time) or equispaced")
        ->check(CLI::IsMember({"every", "equispaced"}))
        ->capture_default_str();
    cmd->add_option("--knot-count", knot_count, "number of knots for --knots equispaced")->capture_default_str();
    cmd->add_option("--lambda", lambda, "roughness penalty weight, or 'gcv'")->capture_default_str();
    cmd->add_option("--gcv-multiplier", gcv_multiplier, "degrees-of-freedom inflation in the GCV score")
        ->capture_default_str();
  }

  SmoothingOptions options() const {
    SmoothingOptions s;
    s.degree = degree;
    s.knots = knots == "every" ? KnotRule::every_observation : KnotRule::equispaced;
    s.knot_count = knot_count;
    s.gcv_multiplier = gcv_multiplier;
    if (lambda == "gcv") {
      s.lambda_rule = LambdaRule::gcv;
    } else {
      s.lambda_rule = LambdaRule::fixed;
      try {
        std::size_t used = 0;
        s.lambda = std::stod(lambda, &used);
        if (used != lambda.size()) throw std::invalid_argument(lambda);
      } catch (const std::exception&) {
        throw ValidationError("--lambda expects a number or 'gcv', got '" + lambda + "'");
      }
      if (!(s.lambda >= 0.0)) throw ValidationError("--lambda must be non-negative");
    }
    return s;
  }
};

PValueRule parse_p_rule(const std::string& text) {
  if (text == "add-one" || text == "add_one") return PValueRule::add_one;
  if (text == "raw" || text == "raw_proportion") return PValueRule::raw_proportion;
  throw ValidationError("unknown p-value rule '" + text + "'");
}

std::optional<double> parse_gate(const std::string& text) {
  if (text.empty() || text == "alpha") return std::nullopt;
  const std::string prefix = "marginal:";
  if (text.rfind(prefix, 0) != 0) throw ValidationError("--gate expects 'alpha' or 'marginal:<p>'");
  try {
    return std::stod(text.substr(prefix.size()));
  } catch (const std::exception&) {
    throw ValidationError("--gate: cannot read a p-value from '" + text + "'");
  }
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out << text;
  if (!out) throw ValidationError("failed writing " + path);
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  return out;
}

ReportFormat format_for(const std::string& format, const std::string& out) {
  if (!format.empty()) return parse_report_format(format);
  const std::string ext = fs::path(out).extension().string();
  if (ext == ".txt") return ReportFormat::text;
  if (ext == ".csv") return ReportFormat::csv;
  return ReportFormat::json;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ValidationError("cannot read number '" + item + "'");
    }
  }
  if (out.empty()) throw ValidationError("empty list");
  return out;
}

unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Permutation-based functional ANOVA with interval and pairwise follow-up tests"};
  app.set_version_flag("--version", std::string(version_string));
  app.require_subcommand(1);

  // test
  auto* test = app.add_subcommand("test", "dataset screen, interval closure and pairwise follow-up");
  std::vector<std::string> test_data;
  std::string test_intervals, test_method = "combined", test_out, test_format, test_gate, test_null_dir,
                              test_rule = "add-one";
  double test_alpha = 0.05;
  std::size_t test_B = 1000;
  std::uint64_t test_seed = 42;
  unsigned test_threads = default_threads();
  SmoothingFlags test_smooth;
  test->add_option("--data", test_data, "curve CSV files, one per dataset")->required()->expected(1, -1);
  test->add_option("--intervals", test_intervals, "interval JSON file")->required();
  test->add_option("--alpha", test_alpha, "significance level")->capture_default_str();
  test->add_option("--permutations", test_B, "number of permutations")->capture_default_str();
  test->add_option("--seed", test_seed, "random seed")->capture_default_str();
  test->add_option("--method", test_method, "closure method: full, shortcut, shortcut_p, combined")
      ->capture_default_str();
  test->add_option("--p-rule", test_rule, "p-value rule: add-one or raw")->capture_default_str();
  test->add_option("--gate", test_gate, "pairwise gate: alpha (default) or marginal:<p>");
  test->add_option("--out", test_out, "report path (default stdout)");
  test->add_option("--format", test_format, "json, text or csv (default from --out extension, else json)");
  test->add_option("--null-dir", test_null_dir, "write each dataset's permutation statistic matrix here");
  test->add_option("--threads", test_threads, "worker threads")->capture_default_str();
  test_smooth.add(test, "gcv");

  // pairwise
  auto* pair = app.add_subcommand("pairwise", "pairwise closure within intervals of one dataset");
  std::string pair_data, pair_intervals, pair_interval, pair_out, pair_method = "combined";
  std::size_t pair_B = 1000;
  std::uint64_t pair_seed = 42;
  SmoothingFlags pair_smooth;
  pair->add_option("--data", pair_data, "curve CSV file")->required();
  pair->add_option("--intervals", pair_intervals, "interval JSON file")->required();
  pair->add_option("--interval", pair_interval, "interval name (default: every interval)");
  pair->add_option("--permutations", pair_B, "number of permutations")->capture_default_str();
  pair->add_option("--seed", pair_seed, "random seed")->capture_default_str();
  pair->add_option("--method", pair_method, "closure method for the interval level")->capture_default_str();
  pair->add_option("--out", pair_out, "JSON output (default stdout)");
  pair_smooth.add(pair, "gcv");

  // smooth
  auto* smooth = app.add_subcommand("smooth", "fit curves and export them on the common grid");
  std::string smooth_data, smooth_out, smooth_plot;
  SmoothingFlags smooth_flags;
  smooth->add_option("--data", smooth_data, "curve CSV file")->required();
  smooth->add_option("--out", smooth_out, "fitted curves CSV (default stdout)");
  smooth->add_option("--plot", smooth_plot, "also write an SVG of the group means");
  smooth_flags.add(smooth, "gcv");

  // plot
  auto* plot = app.add_subcommand("plot", "SVG of group mean curves");
  std::string plot_data, plot_intervals, plot_out;
  SmoothingFlags plot_smooth;
  plot->add_option("--data", plot_data, "curve CSV file")->required();
  plot->add_option("--intervals", plot_intervals, "interval JSON file; boundaries drawn as rules");
  plot->add_option("--out", plot_out, "SVG output (default stdout)");
  plot_smooth.add(plot, "gcv");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Monte Carlo power study");
  std::string sim_model = "M2", sim_betas, sim_out, sim_plot, sim_method = "combined", sim_rule = "add-one";
  std::size_t sim_m = 5, sim_nsim = 200, sim_B = 200, sim_per_group = 5, sim_grid = 101;
  std::uint64_t sim_seed = 42;
  double sim_alpha = 0.05, sim_var = 0.3;
  bool sim_pairwise = false, sim_full_scale = false;
  unsigned sim_threads = default_threads();
  SmoothingFlags sim_smooth;
  sim->add_option("--model", sim_model, "M1 (spike) or M2 (drift)")->check(CLI::IsMember({"M1", "M2"}))->capture_default_str();
  sim->add_option("--m", sim_m, "number of equal intervals")->capture_default_str();
  sim->add_option("--nsim", sim_nsim, "replicates per beta")->capture_default_str();
  sim->add_option("--permutations", sim_B, "permutations per replicate")->capture_default_str();
  sim->add_option("--seed", sim_seed, "random seed")->capture_default_str();
  sim->add_option("--betas", sim_betas, "comma-separated effect sizes (default: 0 to 0.5 in 12 steps)");
  sim->add_option("--alpha", sim_alpha, "significance level")->capture_default_str();
  sim->add_option("--noise-variance", sim_var, "error variance")->capture_default_str();
  sim->add_option("--per-group", sim_per_group, "curves per group")->capture_default_str();
  sim->add_option("--grid-points", sim_grid, "observation times on [0, 1]")->capture_default_str();
  sim->add_option("--method", sim_method, "closure method")->capture_default_str();
  sim->add_option("--p-rule", sim_rule, "p-value rule: add-one or raw")->capture_default_str();
  sim->add_flag("--pairwise", sim_pairwise, "also run pairwise follow-up on rejected intervals");
  sim->add_flag("--full-scale", sim_full_scale, "1000 replicates and 1000 permutations");
  sim->add_option("--threads", sim_threads, "worker threads")->capture_default_str();
  sim->add_option("--out", sim_out, "power table CSV (default stdout)");
  sim->add_option("--plot", sim_plot, "power curve SVG");
  sim_smooth.add(sim, "0");

  // demo
  auto* demo = app.add_subcommand("demo", "write the synthetic hemolysis datasets and their intervals");
  std::string demo_out = "data/demo";
  std::uint64_t demo_seed = 42;
  demo->add_option("--out", demo_out, "output directory")->capture_default_str();
  demo->add_option("--seed", demo_seed, "random seed")->capture_default_str();

  // report
  auto* rep = app.add_subcommand("report", "re-render a JSON report");
  std::string rep_in, rep_out, rep_format = "text";
  rep->add_option("--in", rep_in, "JSON report")->required();
  rep->add_option("--format", rep_format, "json, text or csv")->capture_default_str();
  rep->add_option("--out", rep_out, "output (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*test) {
      AnalysisConfig cfg;
      for (const auto& d : test_data) cfg.inputs.emplace_back(d);
      cfg.intervals = load_intervals(test_intervals);
      cfg.alpha = test_alpha;
      cfg.permutations = test_B;
      cfg.seed = test_seed;
      cfg.method = parse_closure_method(test_method);
      cfg.rule = parse_p_rule(test_rule);
      cfg.pairwise_gate = parse_gate(test_gate);
      cfg.smoothing = test_smooth.options();
      cfg.threads = test_threads;
      const ReportFormat format = format_for(test_format, test_out);

      std::vector<NamedData> data;
      for (const auto& path : cfg.inputs) data.push_back({path.stem().string(), load_dataset(path)});
      AnalysisArtifacts artifacts;
      const AnalysisReport report = run_analysis(cfg, data, &artifacts);
      for (const auto& d : report.datasets)
        for (const auto& w : d.warnings) std::cerr << "warning: " << d.name << ": " << w << "\n";
      if (!test_null_dir.empty()) {
        for (std::size_t i = 0; i < data.size(); ++i) {
          auto out = open_output(fs::path(test_null_dir) / (data[i].name + "_null.csv"));
          write_null_matrix_csv(out, artifacts.nulls[i], artifacts.partitions[i]);
        }
      }
      write_output(test_out, render_report(report, format));
    } else if (*pair) {
      const auto curves = load_dataset(fs::path(pair_data));
      const auto ds = FunctionalDataset::smooth(curves, pair_smooth.options());
      const auto ranges = load_intervals(pair_intervals);
      std::vector<std::string> warnings;
      const auto partition = IntervalPartition::from_ranges(ds.grid(), ranges, &warnings);
      for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
      const auto plan = generate_plan(derive_seed(pair_seed, 0), pair_B, ds.labels());
      const auto nulls = null_matrix(ds, partition, plan, default_threads());
      const auto closure = adjust_intervals(nulls, parse_closure_method(pair_method));
      std::string out;
      bool found = pair_interval.empty();
      out += "[\n";
      bool first = true;
      for (std::size_t i = 0; i < partition.size(); ++i) {
        if (!pair_interval.empty() && partition[i].name != pair_interval) continue;
        found = true;
        const auto rep_i = pairwise_followup(ds, partition, i, closure.hypotheses[i].adjusted_p, plan);
        if (!first) out += ",\n";
        first = false;
        out += render_pairwise_json(rep_i);
      }
      out += "]\n";
      if (!found) throw ValidationError("no interval named '" + pair_interval + "'");
      write_output(pair_out, out);
    } else if (*smooth) {
      const auto curves = load_dataset(fs::path(smooth_data));
      const auto ds = FunctionalDataset::smooth(curves, smooth_flags.options());
      std::ostringstream out;
      write_fitted_csv(out, ds);
      write_output(smooth_out, out.str());
      if (!smooth_plot.empty()) {
        auto svg = open_output(smooth_plot);
        plot_means(svg, ds);
      }
    } else if (*plot) {
      const auto curves = load_dataset(fs::path(plot_data), LoadOptions{CsvLayout::automatic, 1});
      const auto ds = FunctionalDataset::smooth(curves, plot_smooth.options());
      std::optional<IntervalPartition> partition;
      if (!plot_intervals.empty()) partition = IntervalPartition::from_ranges(ds.grid(), load_intervals(plot_intervals));
      std::ostringstream out;
      plot_means(out, ds, partition ? &*partition : nullptr);
      write_output(plot_out, out.str());
    } else if (*sim) {
      SimConfig cfg;
      cfg.model = parse_model(sim_model);
      cfg.betas = sim_betas.empty() ? default_betas() : parse_list(sim_betas);
      cfg.intervals = sim_m;
      cfg.nsim = sim_full_scale ? 1000 : sim_nsim;
      cfg.permutations = sim_full_scale ? 1000 : sim_B;
      cfg.seed = sim_seed;
      cfg.alpha = sim_alpha;
      cfg.noise_variance = sim_var;
      cfg.per_group = sim_per_group;
      cfg.grid_points = sim_grid;
      cfg.pairwise = sim_pairwise;
      cfg.method = parse_closure_method(sim_method);
      cfg.rule = parse_p_rule(sim_rule);
      cfg.smoothing = sim_smooth.options();
      cfg.threads = sim_threads;
      const PowerTable table = run_power(cfg);
      std::ostringstream out;
      table.write_csv(out);
      write_output(sim_out, out.str());
      if (!sim_plot.empty()) {
        auto svg = open_output(sim_plot);
        write_svg(svg, power_plot(table));
      }
    } else if (*demo) {
      const fs::path dir(demo_out);
      fs::create_directories(dir);
      for (const auto& d : gen_demo_erythrograms(demo_seed)) {
        auto out = open_output(dir / (d.name + ".csv"));
        write_long_csv(out, d.curves);
      }
      auto out = open_output(dir / "intervals.json");
      out << intervals_to_json(demo_intervals());
      std::cerr << "wrote demo datasets to " << dir.string() << "\n";
    } else if (*rep) {
      const AnalysisReport report = parse_report_json(read_file(rep_in));
      write_output(rep_out, render_report(report, parse_report_format(rep_format)));
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
