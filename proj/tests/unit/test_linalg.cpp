#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <complex>
#include <random>

#include "lipattn/error.hpp"
#include "lipattn/linalg.hpp"
#include "oracle.hpp"

using namespace lipattn;

TEST(SingularValues, MatchEigenOnRandomShapes) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t r = 1 + rng() % 9;
    const std::size_t c = 1 + rng() % 9;
    const oracle::Mat m = oracle::uniform_matrix(r, c, -3, 3, rng);
    const Vector sv = singular_values(oracle::from_eigen(m));
    Eigen::JacobiSVD<oracle::Mat> svd(m);
    ASSERT_EQ(sv.size(), static_cast<std::size_t>(svd.singularValues().size()));
    for (std::size_t i = 0; i < sv.size(); ++i) EXPECT_NEAR(sv[i], svd.singularValues()(i), 1e-12 * (1 + sv[0]));
  }
}

TEST(SingularValues, RankDeficientAndZero) {
  EXPECT_EQ(spectral_norm(Matrix(3, 4)), 0.0);
  const Matrix outer = Matrix::from_rows({{1, 2}, {2, 4}, {3, 6}});
  const Vector sv = singular_values(outer);
  EXPECT_NEAR(sv[0], std::sqrt(14.0 * 5.0), 1e-12);
  EXPECT_NEAR(sv[1], 0.0, 1e-12);
}

TEST(Eigenvalues, MatchEigenOnRandomMatrices) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 1 + rng() % 10;
    const oracle::Mat m = oracle::uniform_matrix(n, n, -2, 2, rng);
    auto ours = eigenvalues(oracle::from_eigen(m));
    Eigen::EigenSolver<oracle::Mat> es(m, false);
    std::vector<std::complex<double>> ref(es.eigenvalues().data(), es.eigenvalues().data() + n);
    ASSERT_EQ(ours.size(), n);
    // Greedy matching is exact here because eigenvalues of random matrices are well separated.
    for (const auto& [re, im] : ours) {
      auto it = std::min_element(ref.begin(), ref.end(), [&](auto a, auto b) {
        return std::abs(a - std::complex<double>(re, im)) < std::abs(b - std::complex<double>(re, im));
      });
      EXPECT_NEAR(std::abs(*it - std::complex<double>(re, im)), 0.0, 1e-8);
      ref.erase(it);
    }
  }
}

TEST(Eigenvalues, RealEigenpairsHaveSmallResiduals) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 1 + rng() % 8;
    const oracle::Mat m = oracle::uniform_matrix(n, n, -2, 2, rng);
    const EigenReport rep = real_eigenpairs(oracle::from_eigen(m));
    if (n % 2 == 1) EXPECT_FALSE(rep.empty_flag);
    for (std::size_t i = 0; i < rep.real_eigenvalues.size(); ++i) {
      const oracle::Vec u = Eigen::Map<const oracle::Vec>(rep.eigenvectors[i].data(), n);
      EXPECT_NEAR(u.norm(), 1.0, 1e-12);
      EXPECT_LT((m * u - rep.real_eigenvalues[i] * u).norm(), 1e-8 * (1 + m.norm()));
    }
    EXPECT_TRUE(std::is_sorted(rep.real_eigenvalues.rbegin(), rep.real_eigenvalues.rend()));
  }
}

TEST(Eigenvalues, PlantedSpectrum) {
  std::mt19937_64 rng(9);
  const oracle::Mat basis = oracle::uniform_matrix(4, 4, -1, 1, rng) + 3 * oracle::Mat::Identity(4, 4);
  const oracle::Vec diag = (oracle::Vec(4) << 2.5, -1.0, 0.5, -3.0).finished();
  const oracle::Mat a = basis * diag.asDiagonal() * basis.inverse();
  const EigenReport rep = real_eigenpairs(oracle::from_eigen(a));
  ASSERT_EQ(rep.real_eigenvalues.size(), 4u);
  EXPECT_NEAR(rep.gamma_top, 2.5, 1e-9);
  EXPECT_NEAR(rep.gamma_bottom, -3.0, 1e-9);
  const oracle::Vec top = Eigen::Map<const oracle::Vec>(rep.unit_vector_top.data(), 4);
  EXPECT_LT((a * top - 2.5 * top).norm(), 1e-8);
}

TEST(Eigenvalues, RotationHasEmptyRealSpectrum) {
  const EigenReport rep = real_eigenpairs(Matrix::from_rows({{0, -1}, {1, 0}}));
  EXPECT_TRUE(rep.empty_flag);
  EXPECT_TRUE(rep.real_eigenvalues.empty());
}

TEST(Eigenvalues, RepeatedEigenvalue) {
  const EigenReport rep = real_eigenpairs(Matrix::identity(3) * -2.0);
  ASSERT_EQ(rep.real_eigenvalues.size(), 3u);
  EXPECT_DOUBLE_EQ(rep.gamma_top, -2.0);
  EXPECT_DOUBLE_EQ(rep.gamma_bottom, -2.0);
}

TEST(WeightedOperatorNorm, MatchesDenseOracle) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng() % 5;
    const std::size_t bo = 1 + rng() % 3;
    const std::size_t bi = 1 + rng() % 3;
    const oracle::Mat l = oracle::uniform_matrix(n * bo, n * bi, -1, 1, rng);
    std::vector<double> a(n);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    for (double& v : a) v = u(rng);
    EXPECT_NEAR(weighted_operator_norm(oracle::from_eigen(l), a), oracle::weighted_norm(l, a, bo, bi), 1e-10);
  }
  EXPECT_THROW(weighted_operator_norm(Matrix(2, 2), std::vector<double>{0.0, 1.0}), DegenerateInputError);
}

TEST(LuSolve, SolvesAndDetectsSingularity) {
  std::mt19937_64 rng(17);
  const oracle::Mat a = oracle::uniform_matrix(5, 5, -1, 1, rng) + 2 * oracle::Mat::Identity(5, 5);
  const oracle::Vec b = oracle::uniform_matrix(5, 1, -1, 1, rng);
  const Vector x = lu_solve(oracle::from_eigen(a), Vector(b.data(), b.data() + 5));
  const oracle::Vec xe = Eigen::Map<const oracle::Vec>(x.data(), 5);
  EXPECT_LT((a * xe - b).norm(), 1e-12);
  EXPECT_THROW(lu_solve(Matrix(2, 2), Vector{1, 1}), DegenerateInputError);
}
