#pragma once

#include "fanova/closure.hpp"
#include "fanova/curves.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace fanova {

enum class SimModel {
  M1,  // spike: 30(1-t)t - 3 beta |sin(16 pi t)| on 0.325 < t < 0.3575
  M2,  // drift: 30(1-t)t - beta |sin(pi t / 4)|
};

SimModel parse_model(const std::string& text);
std::string to_string(SimModel model);

/// Default beta grid: twelve values from 0 to 0.5.
std::vector<double> default_betas();

struct SimConfig {
  SimModel model = SimModel::M2;
  std::vector<double> betas = {0.0};
  std::size_t groups = 3;
  std::size_t per_group = 5;
  std::size_t grid_points = 101;  // t_1 = 0, ..., t_G = 1
  double noise_variance = 0.3;
  std::size_t intervals = 5;
  std::size_t nsim = 200;
  std::size_t permutations = 200;
  std::uint64_t seed = 42;
  double alpha = 0.05;
  bool pairwise = false;
  ClosureMethod method = ClosureMethod::combined;
  PValueRule rule = PValueRule::add_one;
  SmoothingOptions smoothing{};  // knot at every observation, lambda = 0
  unsigned threads = 1;
};

/// Mean of the deviating (last) group at time t; other groups use beta = 0.
double model_mean(SimModel model, double beta, double t);

/// One replicate: groups A, B, ... with i.i.d. N(0, noise_variance) errors at
/// every grid point; only the last group's mean depends on beta.
std::vector<RawCurve> gen_dataset(const SimConfig& cfg, double beta, std::uint64_t replicate_seed);

struct PowerRow {
  double beta = 0.0;
  std::size_t interval = 0;   // 1-based
  std::string hypothesis;     // "interval" or a pair such as "A-C"
  std::size_t rejections = 0;
  std::size_t nsim = 0;
  double rate = 0.0;
  double se = 0.0;
};

struct PowerTable {
  std::vector<PowerRow> rows;

  const PowerRow& find(double beta, std::size_t interval, const std::string& hypothesis) const;
  void write_csv(std::ostream& out) const;
};

/// Monte Carlo rejection rates at level alpha for every interval (and every
/// pair within every interval when cfg.pairwise). Replicates use seeds derived
/// from cfg.seed, so the table does not depend on cfg.threads.
PowerTable run_power(const SimConfig& cfg);

/// Synthetic hemolysis curves: lagged Weibull "S" shapes on 0..720 s every 15 s,
/// 4 groups x 5 curves, monotone nondecreasing, in percent.
struct DemoDataset {
  std::string name;
  std::vector<RawCurve> curves;
};

/// Three incubation-time datasets; the first has no dose effect, the other
/// two have onset times that shift with dose. Groups are listed in dose order.
std::vector<DemoDataset> gen_demo_erythrograms(std::uint64_t seed);

/// Interval definitions used with the demo data (latent / least stable /
/// general / plateau), in seconds.
std::vector<NamedRange> demo_intervals();

}  // namespace fanova
