#include "fanova/error.hpp"
#include "fanova/simulate.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <sstream>

using namespace fanova;

TEST(ModelMean, FormulaValues) {
  const double pi = std::numbers::pi;
  EXPECT_NEAR(model_mean(SimModel::M1, 0.5, 0.34) - model_mean(SimModel::M1, 0.0, 0.34),
              -1.5 * std::abs(std::sin(16 * pi * 0.34)), 1e-12);
  EXPECT_NEAR(model_mean(SimModel::M2, 0.5, 1.0) - model_mean(SimModel::M2, 0.0, 1.0), -0.3536, 1e-4);
  EXPECT_DOUBLE_EQ(model_mean(SimModel::M2, 0.0, 0.5), 7.5);
  // The spike window is open at both ends.
  for (double t : {0.0, 0.2, 0.325, 0.3575, 0.5, 1.0})
    EXPECT_DOUBLE_EQ(model_mean(SimModel::M1, 0.5, t), 30 * (1 - t) * t) << t;
  EXPECT_LT(model_mean(SimModel::M1, 0.5, 0.33), 30 * (1 - 0.33) * 0.33);
}

TEST(ModelNames, ParseAndBetas) {
  EXPECT_EQ(parse_model("M1"), SimModel::M1);
  EXPECT_EQ(parse_model("m2"), SimModel::M2);
  EXPECT_EQ(to_string(SimModel::M2), "M2");
  EXPECT_THROW(parse_model("M3"), ValidationError);
  const auto betas = default_betas();
  ASSERT_EQ(betas.size(), 12u);
  EXPECT_DOUBLE_EQ(betas.front(), 0.0);
  EXPECT_DOUBLE_EQ(betas.back(), 0.5);
}

TEST(GenDataset, DesignAndDeterminism) {
  SimConfig cfg;
  const auto a = gen_dataset(cfg, 0.3, 17);
  const auto b = gen_dataset(cfg, 0.3, 17);
  ASSERT_EQ(a.size(), 15u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].values, b[i].values);
    EXPECT_EQ(a[i].times.size(), 101u);
    EXPECT_DOUBLE_EQ(a[i].times.back(), 1.0);
    EXPECT_EQ(a[i].group, std::string(1, static_cast<char>('A' + i / 5)));
  }
  EXPECT_NE(gen_dataset(cfg, 0.3, 18)[0].values, a[0].values);
}

TEST(GenDataset, ZeroBetaGivesIdenticalMeansAndTheStatedNoise) {
  SimConfig cfg;
  cfg.model = SimModel::M1;
  cfg.per_group = 400;
  cfg.noise_variance = 0.0;
  for (const auto& c : gen_dataset(cfg, 0.0, 3))
    for (std::size_t g = 0; g < c.times.size(); ++g) EXPECT_DOUBLE_EQ(c.values[g], model_mean(SimModel::M1, 0.0, c.times[g]));

  cfg.noise_variance = 0.3;
  double sum = 0.0, sum2 = 0.0;
  std::size_t count = 0;
  for (const auto& c : gen_dataset(cfg, 0.0, 4)) {
    for (std::size_t g = 0; g < c.times.size(); ++g) {
      const double e = c.values[g] - model_mean(SimModel::M1, 0.0, c.times[g]);
      sum += e;
      sum2 += e * e;
      ++count;
    }
  }
  const double mean = sum / static_cast<double>(count);
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(sum2 / static_cast<double>(count) - mean * mean, 0.3, 0.01);
}

TEST(RunPower, DeterministicAndThreadInvariant) {
  SimConfig cfg;
  cfg.betas = {0.0, 0.5};
  cfg.nsim = 6;
  cfg.permutations = 19;
  cfg.pairwise = true;
  const auto one = run_power(cfg);
  cfg.threads = 3;
  const auto three = run_power(cfg);
  ASSERT_EQ(one.rows.size(), three.rows.size());
  // 2 betas x 5 intervals x (interval + 3 pairs)
  EXPECT_EQ(one.rows.size(), 40u);
  for (std::size_t i = 0; i < one.rows.size(); ++i) {
    const auto& r = one.rows[i];
    EXPECT_EQ(r.rejections, three.rows[i].rejections);
    EXPECT_EQ(r.hypothesis, three.rows[i].hypothesis);
    EXPECT_EQ(r.nsim, 6u);
    EXPECT_DOUBLE_EQ(r.rate, static_cast<double>(r.rejections) / 6.0);
    EXPECT_DOUBLE_EQ(r.se, std::sqrt(r.rate * (1 - r.rate) / 6.0));
  }
  EXPECT_NO_THROW(one.find(0.5, 3, "A-C"));
  EXPECT_NO_THROW(one.find(0.0, 1, "interval"));
  std::ostringstream csv;
  one.write_csv(csv);
  const std::string text = csv.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 41);

  cfg.nsim = 0;
  EXPECT_THROW(run_power(cfg), ValidationError);
}

TEST(DemoData, ShapesAndDoseOrdering) {
  const auto sets = gen_demo_erythrograms(42);
  ASSERT_EQ(sets.size(), 3u);
  const char* groups[] = {"control", "low", "medium", "high"};
  for (const auto& ds : sets) {
    ASSERT_EQ(ds.curves.size(), 20u);
    for (std::size_t c = 0; c < 20; ++c) {
      const auto& curve = ds.curves[c];
      EXPECT_EQ(curve.group, groups[c / 5]);
      ASSERT_EQ(curve.times.size(), 49u);
      EXPECT_DOUBLE_EQ(curve.times.back(), 720.0);
      for (std::size_t g = 1; g < curve.values.size(); ++g) EXPECT_GE(curve.values[g], curve.values[g - 1]);
      EXPECT_GE(curve.values.front(), 0.0);
      EXPECT_LE(curve.values.back(), 100.0);
      EXPECT_GT(curve.values.back(), 90.0);
    }
  }
  // Mean level at 165 s (index 11) rises with dose once incubation is applied.
  for (std::size_t d = 1; d < 3; ++d) {
    double previous = -1.0;
    for (std::size_t g = 0; g < 4; ++g) {
      double mean = 0.0;
      for (std::size_t s = 0; s < 5; ++s) mean += sets[d].curves[g * 5 + s].values[11] / 5.0;
      EXPECT_GT(mean, previous);
      previous = mean;
    }
  }
}

TEST(DemoData, BundledFilesMatchTheGenerator) {
  const std::filesystem::path dir = FANOVA_DEMO_DIR;
  for (const auto& ds : gen_demo_erythrograms(42)) {
    const auto loaded = load_dataset(dir / (ds.name + ".csv"));
    ASSERT_EQ(loaded.size(), ds.curves.size());
    for (std::size_t c = 0; c < loaded.size(); ++c) {
      EXPECT_EQ(loaded[c].subject_id, ds.curves[c].subject_id);
      EXPECT_EQ(loaded[c].values, ds.curves[c].values);
    }
  }
  EXPECT_EQ(demo_intervals().size(), 4u);
}
