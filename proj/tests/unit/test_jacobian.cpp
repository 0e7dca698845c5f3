#include <gtest/gtest.h>

#include <random>

#include "lipattn/attention.hpp"
#include "lipattn/error.hpp"
#include "lipattn/generators.hpp"
#include "lipattn/jacobian.hpp"
#include "oracle.hpp"

using namespace lipattn;

namespace {

struct Case {
  JacobianOperator op;
  oracle::Attention ref;
};

Case make_case(Variant v, std::size_t n, std::size_t d, std::size_t k, std::mt19937_64& rng) {
  const bool biased = v == Variant::Biased;
  const AttentionParams p = random_params(d, k, 1.0, rng(), biased);
  const TokenSequence x(oracle::from_eigen(oracle::uniform_matrix(n, d, -2, 2, rng)));
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> raw(n);
  for (double& w : raw) w = u(rng);
  const SimplexWeights a = SimplexWeights::normalized(raw);
  const std::vector<double> av(a.values().begin(), a.values().end());
  switch (v) {
    case Variant::Unmasked:
      return {JacobianOperator::unmasked(x, p), oracle::from_params(p, oracle::Kind::Unmasked)};
    case Variant::Masked:
      return {JacobianOperator::masked(x, p), oracle::from_params(p, oracle::Kind::Masked)};
    case Variant::Weighted:
      return {JacobianOperator::weighted(x, p, a), oracle::from_params(p, oracle::Kind::Weighted, av)};
    case Variant::Biased:
      break;
  }
  return {JacobianOperator::biased(x, p), oracle::from_params(p, oracle::Kind::Biased)};
}

class JacobianVariant : public ::testing::TestWithParam<Variant> {};

}  // namespace

TEST_P(JacobianVariant, JvpMatchesCentralDifferences) {
  std::mt19937_64 rng(100 + static_cast<int>(GetParam()));
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng() % 8;
    const std::size_t d = 1 + rng() % 6;
    const std::size_t k = 1 + rng() % 4;
    const Case c = make_case(GetParam(), n, d, k, rng);
    const oracle::Mat x = oracle::to_eigen(c.op.base_point().matrix());
    const oracle::Mat e = oracle::uniform_matrix(n, d, -1, 1, rng);
    const oracle::Mat ours = oracle::to_eigen(c.op.jvp(oracle::from_eigen(e)));
    const oracle::Mat fd = oracle::finite_difference_jvp(c.ref, x, e, 1e-5);
    EXPECT_LE((ours - fd).norm(), 1e-6 * std::max(ours.norm(), 1e-8)) << "trial " << trial;
  }
}

TEST_P(JacobianVariant, VjpIsTheAdjoint) {
  std::mt19937_64 rng(200 + static_cast<int>(GetParam()));
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + rng() % 8;
    const std::size_t d = 1 + rng() % 6;
    const std::size_t k = 1 + rng() % 4;
    const Case c = make_case(GetParam(), n, d, k, rng);
    const Matrix e = oracle::from_eigen(oracle::uniform_matrix(n, d, -1, 1, rng));
    const Matrix u = oracle::from_eigen(oracle::uniform_matrix(n, k, -1, 1, rng));
    const double lhs = inner(c.op.jvp(e), u);
    const double rhs = inner(e, c.op.vjp(u));
    EXPECT_NEAR(lhs, rhs, 1e-12 * (1 + std::abs(lhs)));
  }
}

TEST_P(JacobianVariant, DenseMatchesFiniteDifferenceJacobian) {
  std::mt19937_64 rng(300 + static_cast<int>(GetParam()));
  const Case c = make_case(GetParam(), 5, 3, 2, rng);
  const oracle::Mat dense = oracle::to_eigen(assemble_dense(c.op));
  const oracle::Mat fd = oracle::finite_difference_jacobian(c.ref, oracle::to_eigen(c.op.base_point().matrix()), 1e-5);
  EXPECT_LE((dense - fd).norm(), 1e-6 * dense.norm());
}

INSTANTIATE_TEST_SUITE_P(AllVariants, JacobianVariant,
                         ::testing::Values(Variant::Unmasked, Variant::Masked, Variant::Weighted, Variant::Biased),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(Jacobian, IdenticalTokensGiveValueMatrixOnAverage) {
  // With all tokens equal, d/dX of (P X) V^T reduces to the averaging map, so
  // for V = I the Jacobian applied to a constant direction is that direction.
  const AttentionParams p = AttentionParams::from_bilinear(Matrix::from_rows({{1, 2}, {3, -1}}), Matrix::identity(2));
  const TokenSequence x = TokenSequence::from_rows({{0.5, 1}, {0.5, 1}, {0.5, 1}});
  const JacobianOperator j = JacobianOperator::unmasked(x, p);
  const Matrix e = Matrix::from_rows({{1, -2}, {1, -2}, {1, -2}});
  EXPECT_LT((j.jvp(e) - e).frobenius_norm(), 1e-14);
}

TEST(Jacobian, MultiHeadMatchesCentralDifferences) {
  std::mt19937_64 rng(400);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t heads = 1 + rng() % 3;
    const std::size_t d = heads * (1 + rng() % 3);
    const std::size_t n = 1 + rng() % 6;
    const MultiHeadParams mp = random_multi_head(d, heads, 1.0, rng());
    const TokenSequence x(oracle::from_eigen(oracle::uniform_matrix(n, d, -2, 2, rng)));
    const MultiHeadJacobian j(x, mp);
    auto f = [&](const oracle::Mat& z) { return oracle::to_eigen(multi_head(TokenSequence(oracle::from_eigen(z)), mp).matrix()); };
    const oracle::Mat e = oracle::uniform_matrix(n, d, -1, 1, rng);
    const oracle::Mat ours = oracle::to_eigen(j.jvp(oracle::from_eigen(e)));
    const oracle::Mat fd = oracle::finite_difference_jvp(f, oracle::to_eigen(x.matrix()), e, 1e-5);
    EXPECT_LE((ours - fd).norm(), 1e-6 * std::max(ours.norm(), 1e-8));
    const Matrix u = oracle::from_eigen(oracle::uniform_matrix(n, d, -1, 1, rng));
    EXPECT_NEAR(inner(j.jvp(oracle::from_eigen(e)), u), inner(oracle::from_eigen(e), j.vjp(u)), 1e-12);
  }
}

TEST(Jacobian, ShapeChecks) {
  const AttentionParams p = random_params(3, 2, 1.0, 1);
  const JacobianOperator j = JacobianOperator::unmasked(TokenSequence(4, 3), p);
  EXPECT_THROW(j.jvp(Matrix(4, 2)), DimensionError);
  EXPECT_THROW(j.vjp(Matrix(4, 3)), DimensionError);
  EXPECT_THROW(JacobianOperator::biased(TokenSequence(4, 3), p), std::invalid_argument);
  EXPECT_THROW(JacobianOperator::weighted(TokenSequence(4, 3), p, SimplexWeights::uniform(3)), DimensionError);
}

TEST(Jacobian, DenseSizeGuard) {
  const AttentionParams p = random_params(64, 1, 1.0, 1);
  const JacobianOperator j = JacobianOperator::unmasked(TokenSequence(65, 64), p);
  EXPECT_THROW(assemble_dense(j), LimitExceededError);
}
