#include "fanova/simulate.hpp"

#include "fanova/error.hpp"
#include "fanova/permute.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>
#include <thread>

namespace fanova {

SimModel parse_model(const std::string& text) {
  if (text == "M1" || text == "m1") return SimModel::M1;
  if (text == "M2" || text == "m2") return SimModel::M2;
  throw ValidationError("unknown model '" + text + "' (M1|M2)");
}

std::string to_string(SimModel model) { return model == SimModel::M1 ? "M1" : "M2"; }

std::vector<double> default_betas() {
  return {0.000, 0.045, 0.091, 0.136, 0.182, 0.227, 0.273, 0.318, 0.364, 0.409, 0.455, 0.500};
}

double model_mean(SimModel model, double beta, double t) {
  const double base = 30.0 * (1.0 - t) * t;
  if (model == SimModel::M1) {
    const bool spike = 0.325 < t && t < 0.3575;
    return spike ? base - 3.0 * beta * std::abs(std::sin(16.0 * std::numbers::pi * t)) : base;
  }
  return base - beta * std::abs(std::sin(std::numbers::pi * t / 4.0));
}

std::vector<RawCurve> gen_dataset(const SimConfig& cfg, double beta, std::uint64_t replicate_seed) {
  if (cfg.groups < 2 || cfg.per_group < 1 || cfg.grid_points < 4) throw ValidationError("invalid simulation design");
  if (!(cfg.noise_variance >= 0.0)) throw ValidationError("noise variance must be nonnegative");
  std::mt19937_64 rng(replicate_seed);
  std::normal_distribution<double> noise(0.0, std::sqrt(cfg.noise_variance));
  std::vector<double> times(cfg.grid_points);
  for (std::size_t g = 0; g < times.size(); ++g) times[g] = static_cast<double>(g) / static_cast<double>(times.size() - 1);

  std::vector<RawCurve> out;
  for (std::size_t j = 0; j < cfg.groups; ++j) {
    const std::string group(1, static_cast<char>('A' + j));
    const double group_beta = (j + 1 == cfg.groups) ? beta : 0.0;
    for (std::size_t s = 0; s < cfg.per_group; ++s) {
      RawCurve c;
      c.subject_id = group + std::to_string(s + 1);
      c.group = group;
      c.times = times;
      c.values.resize(times.size());
      for (std::size_t g = 0; g < times.size(); ++g) c.values[g] = model_mean(cfg.model, group_beta, times[g]) + noise(rng);
      out.push_back(std::move(c));
    }
  }
  return out;
}

const PowerRow& PowerTable::find(double beta, std::size_t interval, const std::string& hypothesis) const {
  for (const auto& r : rows) {
    if (std::abs(r.beta - beta) < 1e-12 && r.interval == interval && r.hypothesis == hypothesis) return r;
  }
  throw std::out_of_range("no power-table row for " + hypothesis + " on interval " + std::to_string(interval));
}

void PowerTable::write_csv(std::ostream& out) const {
  out << "beta,interval,hypothesis,rejections,nsim,rate,se\n";
  for (const auto& r : rows) {
    char line[160];
    std::snprintf(line, sizeof line, "%.3f,%zu,%s,%zu,%zu,%.4f,%.4f\n", r.beta, r.interval, r.hypothesis.c_str(),
                  r.rejections, r.nsim, r.rate, r.se);
    out << line;
  }
}

namespace {

// Rejection indicators of one replicate: m interval flags followed by m x P
// pair flags (interval-major).
std::vector<unsigned char> run_replicate(const SimConfig& cfg, double beta, std::uint64_t seed) {
  const std::vector<RawCurve> raw = gen_dataset(cfg, beta, derive_seed(seed, 0));
  const FunctionalDataset ds = FunctionalDataset::smooth(raw, cfg.smoothing);
  const IntervalPartition partition = IntervalPartition::equal_split(ds.grid(), cfg.intervals);
  const PermutationPlan plan = generate_plan(derive_seed(seed, 1), cfg.permutations, ds.labels());
  const NullStatMatrix nulls = null_matrix(ds, partition, plan);
  const ClosureReport report = adjust_intervals(nulls, cfg.method, std::nullopt, cfg.rule);

  const std::size_t m = cfg.intervals;
  const std::size_t pairs = cfg.groups * (cfg.groups - 1) / 2;
  std::vector<unsigned char> flags(m + (cfg.pairwise ? m * pairs : 0), 0);
  for (std::size_t i = 0; i < m; ++i) {
    if (!report.rejected(i, cfg.alpha)) continue;
    flags[i] = 1;
    if (!cfg.pairwise) continue;
    const PairwiseReport pr = pairwise_followup(ds, partition, i, report.hypotheses[i].adjusted_p, plan, cfg.rule);
    for (std::size_t q = 0; q < pairs; ++q) flags[m + i * pairs + q] = pr.pairs[q].adjusted_p <= cfg.alpha ? 1 : 0;
  }
  return flags;
}

}  // namespace

PowerTable run_power(const SimConfig& cfg) {
  if (cfg.nsim == 0 || cfg.permutations == 0) throw ValidationError("nsim and permutations must be at least 1");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  if (cfg.betas.empty()) throw ValidationError("no beta values given");

  const std::size_t m = cfg.intervals;
  const std::size_t pairs = cfg.groups * (cfg.groups - 1) / 2;
  std::vector<std::string> pair_names;
  for (std::size_t a = 0; a < cfg.groups; ++a) {
    for (std::size_t b = a + 1; b < cfg.groups; ++b) {
      pair_names.push_back(std::string(1, static_cast<char>('A' + a)) + "-" + std::string(1, static_cast<char>('A' + b)));
    }
  }

  PowerTable table;
  for (std::size_t bi = 0; bi < cfg.betas.size(); ++bi) {
    const double beta = cfg.betas[bi];
    const std::uint64_t beta_seed = derive_seed(cfg.seed, bi);
    std::vector<std::vector<unsigned char>> flags(cfg.nsim);
    auto work = [&](std::size_t begin, std::size_t end) {
      for (std::size_t r = begin; r < end; ++r) flags[r] = run_replicate(cfg, beta, derive_seed(beta_seed, r));
    };
    const std::size_t workers = std::clamp<std::size_t>(cfg.threads, 1, cfg.nsim);
    if (workers == 1) {
      work(0, cfg.nsim);
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w * cfg.nsim / workers, (w + 1) * cfg.nsim / workers);
    }

    auto add_row = [&](std::size_t interval, const std::string& hypothesis, std::size_t column) {
      PowerRow row;
      row.beta = beta;
      row.interval = interval;
      row.hypothesis = hypothesis;
      row.nsim = cfg.nsim;
      for (const auto& f : flags) row.rejections += f[column];
      row.rate = static_cast<double>(row.rejections) / static_cast<double>(cfg.nsim);
      row.se = std::sqrt(row.rate * (1.0 - row.rate) / static_cast<double>(cfg.nsim));
      table.rows.push_back(std::move(row));
    };
    for (std::size_t i = 0; i < m; ++i) {
      add_row(i + 1, "interval", i);
      if (!cfg.pairwise) continue;
      for (std::size_t q = 0; q < pairs; ++q) add_row(i + 1, pair_names[q], m + i * pairs + q);
    }
  }
  return table;
}

std::vector<DemoDataset> gen_demo_erythrograms(std::uint64_t seed) {
  // Each curve is a Weibull-shaped S curve that stays at zero through a
  // dose-independent latent lag; the rise time shrinks with dose. The 0-min
  // incubation has no dose effect.
  struct Incubation {
    std::string name;
    double rise[4];
  };
  const Incubation incubations[] = {
      {"incubation_00", {150.0, 150.0, 150.0, 150.0}},
      {"incubation_15", {170.0, 150.0, 130.0, 110.0}},
      {"incubation_30", {165.0, 140.0, 120.0, 100.0}},
  };
  const char* groups[] = {"control", "low", "medium", "high"};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> lag_jitter(0.0, 3.0);
  std::normal_distribution<double> rise_jitter(0.0, 6.0);
  std::normal_distribution<double> plateau_jitter(0.0, 1.0);
  std::normal_distribution<double> reading(0.0, 0.25);

  std::vector<DemoDataset> out;
  for (const auto& inc : incubations) {
    DemoDataset ds{inc.name, {}};
    for (std::size_t g = 0; g < 4; ++g) {
      for (std::size_t s = 0; s < 5; ++s) {
        RawCurve c;
        c.group = groups[g];
        c.subject_id = std::string(groups[g]) + "_" + std::to_string(s + 1);
        const double lag = 60.0 + lag_jitter(rng);
        const double rise = inc.rise[g] + rise_jitter(rng);
        const double plateau = std::min(100.0, 98.0 + plateau_jitter(rng));
        double running = 0.0;
        for (int step = 0; step <= 48; ++step) {
          const double t = 15.0 * step;
          const double x = std::max(0.0, t - lag) / rise;
          const double level = plateau * (1.0 - std::exp(-std::pow(x, 2.5))) + reading(rng);
          running = std::max(running, std::clamp(level, 0.0, 100.0));
          c.times.push_back(t);
          c.values.push_back(running);
        }
        ds.curves.push_back(std::move(c));
      }
    }
    out.push_back(std::move(ds));
  }
  return out;
}

std::vector<NamedRange> demo_intervals() {
  return {{"latent", 0.0, 60.0}, {"least_stable", 61.0, 165.0}, {"general", 166.0, 240.0}, {"plateau", 241.0, 720.0}};
}

}  // namespace fanova
