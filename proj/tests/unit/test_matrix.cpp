#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "lipattn/error.hpp"
#include "lipattn/matrix.hpp"
#include "lipattn/tokens.hpp"
#include "oracle.hpp"

using namespace lipattn;

TEST(Matrix, ProductsMatchEigen) {
  std::mt19937_64 rng(11);
  const oracle::Mat a = oracle::uniform_matrix(4, 3, -2, 2, rng);
  const oracle::Mat b = oracle::uniform_matrix(3, 5, -2, 2, rng);
  const oracle::Mat c = oracle::uniform_matrix(6, 3, -2, 2, rng);
  const Matrix la = oracle::from_eigen(a);
  const Matrix lb = oracle::from_eigen(b);
  const Matrix lc = oracle::from_eigen(c);
  EXPECT_TRUE(oracle::to_eigen(la * lb).isApprox(a * b, 1e-14));
  EXPECT_TRUE(oracle::to_eigen(multiply_transposed(la, lc)).isApprox(a * c.transpose(), 1e-14));
  EXPECT_TRUE(oracle::to_eigen(transposed_multiply(la, oracle::from_eigen(a))).isApprox(a.transpose() * a, 1e-14));
  EXPECT_TRUE(oracle::to_eigen(la.transpose()).isApprox(a.transpose(), 0.0));
  EXPECT_NEAR(la.frobenius_norm(), a.norm(), 1e-14);
}

TEST(Matrix, VectorHelpers) {
  const Matrix m(2, 3, {1, 2, 3, 4, 5, 6});
  const std::vector<double> x{1, 0, -1};
  const std::vector<double> y{1, 1};
  EXPECT_EQ(matvec(m, x), (std::vector<double>{-2, -2}));
  EXPECT_EQ(matvec_transposed(m, y), (std::vector<double>{5, 7, 9}));
  EXPECT_DOUBLE_EQ(dot(x, x), 2.0);
  EXPECT_DOUBLE_EQ(norm2(std::vector<double>{3, 4}), 5.0);
  EXPECT_DOUBLE_EQ(inner(m, m), 91.0);
}

TEST(Matrix, RejectsBadShapesAndValues) {
  EXPECT_THROW(Matrix(2, 2, {1, 2, 3}), DimensionError);
  EXPECT_THROW(Matrix(1, 1, {std::numeric_limits<double>::quiet_NaN()}), DegenerateInputError);
  EXPECT_THROW(Matrix(2, 2) * Matrix(3, 1), DimensionError);
  EXPECT_THROW(Matrix(2, 2) + Matrix(2, 3), DimensionError);
}

TEST(Matrix, IdentityAndDiagonal) {
  EXPECT_EQ(Matrix::identity(3), Matrix::diagonal(std::vector<double>{1, 1, 1}));
  const Matrix m = Matrix::from_rows({{1, 2}, {3, 4}});
  EXPECT_EQ(Matrix::identity(2) * m, m);
}

TEST(Tokens, RadiusAndMeanMagnitude) {
  const TokenSequence x = TokenSequence::from_rows({{3, 4}, {0, 0}, {1, 0}});
  EXPECT_DOUBLE_EQ(x.radius(), 5.0);
  EXPECT_NEAR(x.mean_magnitude(), std::sqrt(26.0 / 3.0), 1e-15);
  EXPECT_THROW(TokenSequence(Matrix(0, 2)), DimensionError);
}

TEST(Tokens, SimplexWeightsValidation) {
  EXPECT_NO_THROW(SimplexWeights({0.25, 0.75}));
  EXPECT_THROW(SimplexWeights({0.5, 0.6}), DegenerateInputError);
  EXPECT_THROW(SimplexWeights({-0.5, 1.5}), DegenerateInputError);
  EXPECT_THROW(SimplexWeights::normalized({0.0, 0.0}), DegenerateInputError);
  EXPECT_FALSE(SimplexWeights({0.0, 1.0}).strictly_positive());
  EXPECT_TRUE(SimplexWeights::uniform(4).strictly_positive());
}

TEST(Tokens, SoftmaxIsStableAndExact) {
  const std::vector<double> big{1000.0, 1000.0 + std::log(3.0)};
  const SimplexWeights s = softmax(big);
  // The stored gap differs from ln 3 by rounding at magnitude 1000.
  const double gap = big[1] - big[0];
  EXPECT_NEAR(s[0], 1.0 / (1.0 + std::exp(gap)), 1e-15);
  EXPECT_NEAR(s[1], 1.0 / (1.0 + std::exp(-gap)), 1e-15);
}

TEST(Tokens, WeightedSoftmaxZeroWeightsGetZero) {
  const std::vector<double> logits{5.0, 1.0, 1.0};
  const SimplexWeights a({0.0, 0.5, 0.5});
  const SimplexWeights s = weighted_softmax(logits, a);
  EXPECT_EQ(s[0], 0.0);
  EXPECT_NEAR(s[1], 0.5, 1e-15);
}
