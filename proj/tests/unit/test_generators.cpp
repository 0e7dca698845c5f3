#include <gtest/gtest.h>

#include <cmath>
#include <iomanip>
#include <random>

#include "lipattn/attention.hpp"
#include "lipattn/bounds.hpp"
#include "lipattn/error.hpp"
#include "lipattn/generators.hpp"
#include "lipattn/jacobian.hpp"
#include "lipattn/linalg.hpp"
#include "lipattn/spectral.hpp"
#include "oracle.hpp"

using namespace lipattn;

namespace {

AttentionParams bilinear(const Matrix& a) { return AttentionParams::from_bilinear(a, Matrix::identity(a.rows())); }

PowerIterationOptions tight() { return {1e-13, 200000, 1, false}; }

void expect_in_ball(const TokenSequence& x, double r) {
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_LE(norm2(x[i]), r * (1 + 1e-12));
}

}  // namespace

TEST(Prop32Config, IdentityExample) {
  const AdversarialConfig c = prop32_config(bilinear(Matrix::identity(3)), 3.0, 10);
  EXPECT_EQ(c.case_tag, CaseTag::PositiveEigenvalue);
  EXPECT_NEAR(norm2(c.x[0]), 3.0, 1e-12);
  for (std::size_t i = 1; i < 10; ++i) {
    EXPECT_NEAR(norm2(c.x[i]), 1.5, 1e-12);
    EXPECT_NEAR(dot(c.x[0], c.x[i]), 4.5, 1e-12);
  }
  EXPECT_NEAR(c.expected_lower_bound, 3.0 / (1 + 9 * std::exp(-9.0 / 4)), 1e-12);
  const double lip = local_lipschitz(JacobianOperator::unmasked(c.x, bilinear(Matrix::identity(3))), tight()).lipschitz;
  EXPECT_GE(lip, c.expected_lower_bound);
}

TEST(Prop32Config, NegativeCaseAndDispatch) {
  const AdversarialConfig c = prop32_config(bilinear(Matrix::identity(2) * -1.0), 2.0, 5);
  EXPECT_EQ(c.case_tag, CaseTag::NegativeEigenvalue);
  for (std::size_t i = 1; i < 5; ++i) EXPECT_NEAR(dot(c.x[0], c.x[i]), -4.0, 1e-12);
  EXPECT_NEAR(c.expected_lower_bound, 2.0 / (1 + 4 * std::exp(-8.0)), 1e-12);
}

TEST(Prop32Config, RejectsDegenerateInputs) {
  EXPECT_THROW(prop32_config(bilinear(Matrix::identity(2)), 1.0, 1), std::invalid_argument);
  EXPECT_THROW(prop32_config(bilinear(Matrix::from_rows({{0, -1}, {1, 0}})), 1.0, 4), EmptySpectrumError);
}

TEST(Prop32Config, MeasuredDominatesWitnessBound) {
  std::mt19937_64 rng(81);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 1 + 2 * (rng() % 3);
    const AttentionParams p = bilinear(oracle::from_eigen(oracle::uniform_matrix(d, d, -1, 1, rng)));
    for (std::size_t n : {2u, 5u, 17u}) {
      for (double r : {0.5, 1.5, 3.0}) {
        const AdversarialConfig c = prop32_config(p, r, n);
        expect_in_ball(c.x, r);
        // Exact norm: power iteration approaches the top singular value from below.
        const double lip = oracle::spectral_norm(oracle::to_eigen(assemble_dense(JacobianOperator::unmasked(c.x, p))));
        EXPECT_GE(lip, c.expected_lower_bound * (1 - 1e-12)) << std::setprecision(17) << "n " << n << " R " << r << " lip " << lip << " lb " << c.expected_lower_bound << " tag " << to_string(c.case_tag) << " d " << d;
      }
    }
  }
}

TEST(Prop35Config, NegativeIdentityExample) {
  const AdversarialConfig c = prop35_weighted_config(bilinear(Matrix::identity(2) * -1.0), 2.0);
  EXPECT_EQ(c.case_tag, CaseTag::NegativeEigenvalue);
  ASSERT_TRUE(c.weights.has_value());
  EXPECT_NEAR((*c.weights)[0], 1 - std::exp(-8.0), 1e-15);
  EXPECT_NEAR((*c.weights)[1], std::exp(-8.0), 1e-15);
  EXPECT_NEAR(dot(c.x[0], c.x[1]), -4.0, 1e-12);
  EXPECT_NEAR(norm2(c.x[0]), 2.0, 1e-12);
  EXPECT_NEAR(c.expected_lower_bound, 109.196300066, 1e-8);
}

TEST(Prop35Config, PositiveCase) {
  const AdversarialConfig c = prop35_weighted_config(bilinear(Matrix::identity(2)), 2.0);
  EXPECT_EQ(c.case_tag, CaseTag::PositiveEigenvalue);
  EXPECT_NEAR((*c.weights)[0], std::exp(-2.0 * 4 / 8.0), 1e-15);
  EXPECT_NEAR(norm2(c.x[1]), 1.0, 1e-12);
  EXPECT_NEAR(c.expected_lower_bound, lower_prop35(2.0, 1.0 / 8), 1e-12);
}

TEST(Prop35Config, ZeroRadiusAndUnderflow) {
  const AdversarialConfig c = prop35_weighted_config(bilinear(Matrix::identity(2) * -1.0), 0.0);
  EXPECT_EQ((*c.weights)[0], 0.5);
  EXPECT_EQ(c.expected_lower_bound, 0.0);
  EXPECT_EQ(c.x.radius(), 0.0);
  EXPECT_THROW(prop35_weighted_config(bilinear(Matrix::identity(2) * -1.0), 30.0), LimitExceededError);
}

TEST(Section52, DispatchFollowsSignTest) {
  struct Planted {
    double top, bottom;
    CaseTag tag;
  };
  // gamma_1 >= -8 gamma_delta picks the positive branch; the tie 1 = -8 (-1/8) does too.
  for (const Planted& pl : {Planted{2.0, -0.125, CaseTag::PositiveEigenvalue},
                            Planted{0.5, -0.125, CaseTag::NegativeEigenvalue},
                            Planted{1.0, -0.125, CaseTag::PositiveEigenvalue}}) {
    const Matrix a = Matrix::diagonal(std::vector<double>{pl.top, pl.bottom});
    const MultiHeadParams mp({bilinear(a)}, {Matrix::identity(2)});
    const AdversarialConfig c = section52_adversarial(mp, 0, 3.0, 6);
    EXPECT_EQ(c.case_tag, pl.tag) << pl.top;
    expect_in_ball(c.x, 3.0);
    const double ratio = dot(c.x[0], c.x[1]) / 9.0;
    EXPECT_NEAR(ratio, pl.tag == CaseTag::PositiveEigenvalue ? 0.5 : -1.0, 1e-12);
  }
  const MultiHeadParams mp({bilinear(Matrix::identity(2))}, {Matrix::identity(2)});
  EXPECT_THROW(section52_adversarial(mp, 1, 1.0, 4), std::out_of_range);
}

TEST(QuadraticGrowth, Construction) {
  const TokenSequence x = quadratic_growth_config(2.0, 5, 3);
  const TokenSequence expected = TokenSequence::from_rows({{0, 0, 0}, {2, 0, 0}, {2, 0, 0}, {-2, 0, 0}, {-2, 0, 0}});
  EXPECT_EQ(x, expected);
  for (std::size_t n = 3; n < 30; ++n) {
    const TokenSequence y = quadratic_growth_config(1.0, n, 2);
    std::size_t plus = 0;
    for (std::size_t i = 1; i < n; ++i) plus += y[i][0] > 0 ? 1 : 0;
    const long j = static_cast<long>(plus) + 1;
    EXPECT_LE(std::abs(2 * j - 1 - static_cast<long>(n)), 1);
  }
  EXPECT_THROW(quadratic_growth_config(1.0, 2, 2), std::invalid_argument);
}

TEST(QuadraticGrowth, ZeroRadiusGivesUnitLipschitz) {
  const AttentionParams p = bilinear(Matrix::identity(3));
  const TokenSequence x = quadratic_growth_config(0.0, 7, 3);
  EXPECT_NEAR(local_lipschitz(JacobianOperator::unmasked(x, p), tight()).lipschitz, 1.0, 1e-9);
}

TEST(RandomGeneric, MembershipAndCollapse) {
  std::mt19937_64 rng(83);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng() % 10;
    const std::size_t d = 1 + rng() % 5;
    const AttentionParams p = bilinear(oracle::from_eigen(oracle::uniform_matrix(d, d, -1, 1, rng)));
    for (bool masked : {false, true}) {
      GenericOptions opts;
      opts.masked = masked;
      const GenericConfig g = random_generic_config(n, d, rng(), p.bilinear(), opts);
      EXPECT_GT(g.margin, 1e-6);
      expect_in_ball(g.x, 1.0);
      // Independent recomputation of the argmax and its gap.
      for (std::size_t i = 0; i < n; ++i) {
        const Vector ax = matvec(p.bilinear(), g.x[i]);
        const std::size_t last = masked ? i + 1 : n;
        for (std::size_t j = 0; j < last; ++j) {
          if (j != g.argmax[i]) EXPECT_GE(dot(ax, g.x[g.argmax[i]]) - dot(ax, g.x[j]), 1e-6);
        }
      }
      const double r = 50.0 / std::sqrt(g.margin);
      const TokenSequence big(r * g.x.matrix());
      const Matrix pm = masked ? masked_attention_matrix(big, p) : attention_matrix(big, p);
      for (std::size_t i = 0; i < n; ++i) EXPECT_GE(pm(i, g.argmax[i]), 1 - 1e-6);
      const JacobianOperator j = masked ? JacobianOperator::masked(big, p) : JacobianOperator::unmasked(big, p);
      EXPECT_LE(local_lipschitz(j, tight()).lipschitz, 1.05 * std::sqrt(static_cast<double>(n)));
    }
  }
}

TEST(RandomGeneric, BudgetExhaustionIsReported) {
  GenericOptions opts;
  opts.margin = 10.0;
  opts.max_attempts = 5;
  EXPECT_THROW(random_generic_config(4, 2, 1, Matrix::identity(2), opts), LimitExceededError);
  EXPECT_THROW(random_generic_config(4, 2, 1, Matrix(2, 2)), std::invalid_argument);
}

TEST(RandomParams, DeterministicAndBiasFlag) {
  const AttentionParams a = random_params(8, 4, 1.0, 99, false);
  const AttentionParams b = random_params(8, 4, 1.0, 99, false);
  EXPECT_EQ(a.query(), b.query());
  EXPECT_EQ(a.key(), b.key());
  EXPECT_EQ(a.value(), b.value());
  EXPECT_FALSE(a.biases().has_value());
  EXPECT_TRUE(random_params(8, 4, 1.0, 99, true).biases().has_value());
  EXPECT_NE(random_params(8, 4, 1.0, 100).query(), a.query());
}

TEST(RandomParams, BilinearNormConcentration) {
  double lo = INFINITY;
  double hi = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const double na = spectral_norm(random_params(64, 64, 1.0, seed).bilinear());
    lo = std::min(lo, na);
    hi = std::max(hi, na);
  }
  EXPECT_GE(lo, 0.5);
  EXPECT_LE(hi, 8.0);
}

TEST(RandomParams, MultiHeadShapes) {
  const MultiHeadParams mp = random_multi_head(12, 3, 1.0, 5);
  EXPECT_EQ(mp.head_count(), 3u);
  EXPECT_EQ(mp.head(0).head_dim(), 4u);
  EXPECT_EQ(mp.projection(2).rows(), 12u);
  EXPECT_THROW(random_multi_head(10, 3, 1.0, 5), DimensionError);
}

TEST(SeedHash, MixesEveryPart) {
  EXPECT_NE(seed_hash({1, 2, 3}), seed_hash({1, 2, 4}));
  EXPECT_NE(seed_hash({1, 2}), seed_hash({2, 1}));
  EXPECT_EQ(seed_hash({7, seed_bits(0.5)}), seed_hash({7, seed_bits(0.5)}));
  EXPECT_EQ(seed_bits(0.0), seed_bits(-0.0));
}
