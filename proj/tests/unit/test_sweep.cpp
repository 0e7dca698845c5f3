#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lipattn/sweep.hpp"

using namespace lipattn;

namespace {

SweepConfig small_config(SweepVariant v, SweepGenerator g) {
  SweepConfig cfg;
  cfg.variant = v;
  cfg.generator = g;
  cfg.n_grid = {3, 5};
  cfg.R_grid = {0.5, 1.5};
  cfg.d = 4;
  cfg.seeds = {1, 2};
  if (v == SweepVariant::MultiHead) cfg.H = 2;
  if (g == SweepGenerator::Prop35) cfg.n_grid = {2};
  return cfg;
}

}  // namespace

TEST(SweepConfig, ParsesExactFieldNames) {
  const SweepConfig cfg = parse_sweep_config(R"({
    "variant": "multi_head", "n_grid": [8, 16], "R_grid": [1.5], "d": 8, "k": 4, "H": 2,
    "seeds": [3, 4], "generator": "section52", "tol": 1e-9, "max_iter": 500, "output_path": "out.csv"})");
  EXPECT_EQ(cfg.variant, SweepVariant::MultiHead);
  EXPECT_EQ(cfg.generator, SweepGenerator::Section52);
  EXPECT_EQ(cfg.n_grid, (std::vector<std::size_t>{8, 16}));
  EXPECT_EQ(cfg.H, 2u);
  EXPECT_EQ(cfg.max_iter, 500u);
  EXPECT_EQ(cfg.output_path, "out.csv");
}

TEST(SweepConfig, RejectsUnknownAndMissingKeys) {
  EXPECT_THROW(parse_sweep_config(R"({"variant": "unmasked", "n_grid": [2], "R_grid": [1], "d": 2,
    "seeds": [1], "generator": "random_ball", "seed": 4})"),
               std::invalid_argument);
  EXPECT_THROW(parse_sweep_config(R"({"variant": "unmasked", "n_grid": [2], "R_grid": [1], "d": 2,
    "generator": "random_ball"})"),
               std::invalid_argument);
  EXPECT_THROW(parse_sweep_config(R"({"variant": "sideways", "n_grid": [2], "R_grid": [1], "d": 2,
    "seeds": [1], "generator": "random_ball"})"),
               std::invalid_argument);
  EXPECT_THROW(parse_sweep_config("[1, 2]"), std::invalid_argument);
  EXPECT_THROW(parse_sweep_config("{"), std::invalid_argument);
}

TEST(SweepConfig, ValidatesVariantGeneratorPairs) {
  EXPECT_THROW(small_config(SweepVariant::Unmasked, SweepGenerator::Section52).validate(), std::invalid_argument);
  EXPECT_THROW(small_config(SweepVariant::Unmasked, SweepGenerator::Prop35).validate(), std::invalid_argument);
  SweepConfig bad_h = small_config(SweepVariant::MultiHead, SweepGenerator::RandomBall);
  bad_h.H = 3;
  EXPECT_THROW(bad_h.validate(), std::invalid_argument);
  SweepConfig empty = small_config(SweepVariant::Unmasked, SweepGenerator::RandomBall);
  empty.R_grid.clear();
  EXPECT_THROW(empty.validate(), std::invalid_argument);
  EXPECT_NO_THROW(small_config(SweepVariant::Weighted, SweepGenerator::Prop35).validate());
}

TEST(RunSweep, EveryVariantRunsAndRespectsBound) {
  const std::pair<SweepVariant, SweepGenerator> combos[] = {
      {SweepVariant::Unmasked, SweepGenerator::RandomBall},   {SweepVariant::Unmasked, SweepGenerator::Prop32},
      {SweepVariant::Masked, SweepGenerator::RandomGeneric},  {SweepVariant::Weighted, SweepGenerator::Prop35},
      {SweepVariant::Biased, SweepGenerator::RandomBall},     {SweepVariant::MultiHead, SweepGenerator::Section52},
      {SweepVariant::Unmasked, SweepGenerator::Quadratic},
  };
  for (const auto& [v, g] : combos) {
    const auto records = run_sweep(small_config(v, g), {1, false});
    const SweepConfig cfg = small_config(v, g);
    EXPECT_EQ(records.size(), cfg.n_grid.size() * cfg.R_grid.size() * cfg.seeds.size());
    for (const auto& r : records) {
      EXPECT_TRUE(r.converged);
      EXPECT_EQ(r.variant, to_string(v));
      if (r.bound_general) EXPECT_LE(r.measured_lipschitz, *r.bound_general * (1 + 1e-9));
      EXPECT_EQ(r.wall_time_ms, 0.0);
    }
  }
}

TEST(RunSweep, SortedAndThreadCountInvariant) {
  SweepConfig cfg = small_config(SweepVariant::Unmasked, SweepGenerator::RandomBall);
  cfg.seeds = {9, 4, 7};
  const auto one = run_sweep(cfg, {1, false});
  const auto many = run_sweep(cfg, {4, false});
  EXPECT_EQ(one, many);
  EXPECT_EQ(emit_csv(one), emit_csv(many));
  for (std::size_t i = 1; i < one.size(); ++i) {
    const auto& a = one[i - 1];
    const auto& b = one[i];
    EXPECT_TRUE(a.n < b.n || (a.n == b.n && (a.R < b.R || (a.R == b.R && a.seed < b.seed))));
  }
}

TEST(RunSweep, IdenticalTokensGiveUnitLipschitz) {
  SweepConfig cfg;
  cfg.variant = SweepVariant::Unmasked;
  cfg.generator = SweepGenerator::Quadratic;
  cfg.n_grid = {4};
  cfg.R_grid = {0.0};
  cfg.d = 3;
  cfg.seeds = {1};
  const auto records = run_sweep(cfg);
  ASSERT_EQ(records.size(), 1u);
  EXPECT_NEAR(records[0].measured_lipschitz, 1.0, 1e-9);
}

TEST(Csv, RoundTripFieldForField) {
  SweepConfig cfg = small_config(SweepVariant::Masked, SweepGenerator::RandomBall);
  auto records = run_sweep(cfg, {2, true});
  records[0].bound_rho_r = 0.1 + 0.2;
  records[0].gamma_diagnostic.reset();
  records[1].measured_lipschitz = 1e-310;
  const std::string text = emit_csv(records);
  EXPECT_EQ(text.substr(0, text.find('\n')), csv_header());
  EXPECT_EQ(parse_csv(text), records);
  EXPECT_EQ(emit_csv(parse_csv(text)), text);
}

TEST(Csv, RejectsMalformedInput) {
  EXPECT_THROW(parse_csv(""), std::invalid_argument);
  EXPECT_THROW(parse_csv("a,b\n"), std::invalid_argument);
  const std::string header(csv_header());
  EXPECT_THROW(parse_csv(header + "\nunmasked,random_ball,3\n"), std::invalid_argument);
  EXPECT_THROW(parse_csv(header + "\nunmasked,random_ball,x,1,2,3,1,true,4,,,,,,,0\n"), std::invalid_argument);
  EXPECT_NO_THROW(parse_csv(header + "\r\nunmasked,random_ball,3,1,2,3,1,true,4,,,,,,,0\r\n"));
}

TEST(Slope, ExactPowerLaw) {
  std::vector<double> x;
  std::vector<double> y;
  for (double n = 8; n <= 512; n *= 2) {
    x.push_back(n);
    y.push_back(7.0 * std::sqrt(n));
  }
  const LinearFit f = fit_loglog_slope(x, y);
  EXPECT_NEAR(f.slope, 0.5, 1e-12);
  EXPECT_NEAR(std::exp(f.intercept), 7.0, 1e-10);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
}

TEST(Slope, NoisyQuarterPower) {
  std::mt19937_64 rng(91);
  std::uniform_real_distribution<double> noise(-0.01, 0.01);
  std::vector<double> x;
  std::vector<double> y;
  for (double n = 8; n <= 512; n *= 2) {
    for (int s = 0; s < 5; ++s) {
      x.push_back(n);
      y.push_back(std::pow(n, 0.25) * (1 + noise(rng)));
    }
  }
  const LinearFit f = fit_loglog_slope(x, y);
  EXPECT_GE(f.slope, 0.23);
  EXPECT_LE(f.slope, 0.27);
}

TEST(Slope, ConstantAndMedianAggregation) {
  const std::vector<double> x{1, 2, 4, 8};
  const std::vector<double> y{3, 3, 3, 3};
  EXPECT_NEAR(fit_loglog_slope(x, y).slope, 0.0, 1e-15);
  // Medians 2 and 8 at x = 1 and 4 give slope 1 despite the outliers.
  const std::vector<double> xs{1, 1, 1, 4, 4, 4};
  const std::vector<double> ys{2, 2, 1000, 8, 8, 1e-3};
  EXPECT_NEAR(fit_loglog_slope(xs, ys).slope, 1.0, 1e-12);
  EXPECT_THROW(fit_loglog_slope(std::vector<double>{1, 2, 3}, std::vector<double>{1, 0, 1}), std::invalid_argument);
  EXPECT_THROW(fit_loglog_slope(std::vector<double>{1, 2}, std::vector<double>{1, 2}), std::invalid_argument);
}

TEST(Slope, FromRecords) {
  std::vector<SweepRecord> records;
  for (std::size_t n : {4u, 16u, 64u}) {
    SweepRecord r;
    r.n = n;
    r.measured_lipschitz = 2.0 * std::sqrt(static_cast<double>(n));
    records.push_back(r);
  }
  EXPECT_NEAR(fit_loglog_slope(records, "n", "measured_lipschitz").slope, 0.5, 1e-12);
  EXPECT_THROW(fit_loglog_slope(records, "n", "variant"), std::invalid_argument);
}

TEST(LinearFit, Basic) {
  const std::vector<double> x{1, 2, 3, 4};
  const std::vector<double> y{3, 5, 7, 9};
  const LinearFit f = fit_linear(x, y);
  EXPECT_NEAR(f.slope, 2.0, 1e-14);
  EXPECT_NEAR(f.intercept, 1.0, 1e-14);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-14);
}
