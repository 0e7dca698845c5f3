#pragma once

// Independent reference implementations built on Eigen. They share no code
// with the library beyond the Matrix container used to pass data in.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "lipattn/attention.hpp"
#include "lipattn/matrix.hpp"
#include "lipattn/tokens.hpp"

namespace oracle {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

inline Mat to_eigen(const lipattn::Matrix& m) {
  Mat out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(i, j);
  return out;
}

inline lipattn::Matrix from_eigen(const Mat& m) {
  lipattn::Matrix out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out(i, j) = m(i, j);
  return out;
}

inline Mat uniform_matrix(std::size_t r, std::size_t c, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

inline Mat row_softmax(Mat s, const std::vector<double>& weights = {}, bool causal = false) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    double top = -INFINITY;
    for (Eigen::Index j = 0; j < s.cols(); ++j)
      if (!causal || j <= i) top = std::max(top, s(i, j));
    double z = 0.0;
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
      const double w = weights.empty() ? 1.0 : weights[j];
      s(i, j) = (causal && j > i) ? 0.0 : w * std::exp(s(i, j) - top);
      z += s(i, j);
    }
    s.row(i) /= z;
  }
  return s;
}

enum class Kind { Unmasked, Masked, Weighted, Biased };

// Rows of x are tokens; returns rows of outputs.
struct Attention {
  Mat q, k, v;
  Vec bq, bk, bv;
  std::vector<double> weights;
  Kind kind = Kind::Unmasked;

  Mat scores(const Mat& x) const {
    if (kind == Kind::Biased) {
      const Mat qs = (x * q.transpose()).rowwise() + bq.transpose();
      const Mat ks = (x * k.transpose()).rowwise() + bk.transpose();
      return qs * ks.transpose();
    }
    return (x * q.transpose()) * (x * k.transpose()).transpose() / std::sqrt(static_cast<double>(q.rows()));
  }

  Mat attention(const Mat& x) const {
    return row_softmax(scores(x), kind == Kind::Weighted ? weights : std::vector<double>{}, kind == Kind::Masked);
  }

  Mat operator()(const Mat& x) const {
    Mat out = attention(x) * x * v.transpose();
    if (kind == Kind::Biased) out.rowwise() += bv.transpose();
    return out;
  }
};

inline Attention from_params(const lipattn::AttentionParams& p, Kind kind, std::vector<double> weights = {}) {
  Attention a;
  a.q = to_eigen(p.query());
  a.k = to_eigen(p.key());
  a.v = to_eigen(p.value());
  a.kind = kind;
  a.weights = std::move(weights);
  if (p.biases()) {
    a.bq = Eigen::Map<const Vec>(p.biases()->query.data(), p.biases()->query.size());
    a.bk = Eigen::Map<const Vec>(p.biases()->key.data(), p.biases()->key.size());
    a.bv = Eigen::Map<const Vec>(p.biases()->value.data(), p.biases()->value.size());
  }
  return a;
}

// Row-major vectorisation, matching the library's dense Jacobian layout.
inline Vec vec(const Mat& m) {
  Vec out(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out(i * m.cols() + j) = m(i, j);
  return out;
}

/// Dense Jacobian by central differences with step h.
inline Mat finite_difference_jacobian(const std::function<Mat(const Mat&)>& f, const Mat& x, double h) {
  const Mat f0 = f(x);
  Mat jac(f0.size(), x.size());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      Mat xp = x;
      Mat xm = x;
      xp(i, j) += h;
      xm(i, j) -= h;
      jac.col(i * x.cols() + j) = (vec(f(xp)) - vec(f(xm))) / (2.0 * h);
    }
  }
  return jac;
}

/// Directional derivative by central differences.
inline Mat finite_difference_jvp(const std::function<Mat(const Mat&)>& f, const Mat& x, const Mat& e, double h) {
  return (f(x + h * e) - f(x - h * e)) / (2.0 * h);
}

inline double spectral_norm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues()(0);
}

/// ||S J S^{-1}|| with S scaling output block i by sqrt(a_i) and input block i likewise.
inline double weighted_norm(const Mat& jac, const std::vector<double>& a, std::size_t out_block,
                            std::size_t in_block) {
  Mat scaled = jac;
  for (Eigen::Index r = 0; r < jac.rows(); ++r)
    for (Eigen::Index c = 0; c < jac.cols(); ++c)
      scaled(r, c) *= std::sqrt(a[r / out_block]) / std::sqrt(a[c / in_block]);
  return spectral_norm(scaled);
}

// Minimum of sum c_ij pi_ij over the vertices of the 3 x 3 transportation
// polytope. Each vertex is supported on at most 5 cells; enumerate every
// 5-cell support, solve the marginal equations, keep feasible solutions.
inline double transport_cost_3x3(const oracle::Mat& cost, const oracle::Vec& a, const oracle::Vec& b) {
  double best = INFINITY;
  for (int mask = 0; mask < (1 << 9); ++mask) {
    if (__builtin_popcount(mask) != 5) continue;
    std::vector<int> cells;
    for (int c = 0; c < 9; ++c)
      if (mask & (1 << c)) cells.push_back(c);
    oracle::Mat sys = oracle::Mat::Zero(6, 5);
    oracle::Vec rhs(6);
    rhs << a, b;
    for (int t = 0; t < 5; ++t) {
      sys(cells[t] / 3, t) = 1.0;
      sys(3 + cells[t] % 3, t) = 1.0;
    }
    Eigen::ColPivHouseholderQR<oracle::Mat> qr(sys);
    if (qr.rank() < 5) continue;
    const oracle::Vec f = qr.solve(rhs);
    if ((sys * f - rhs).norm() > 1e-12 || f.minCoeff() < -1e-13) continue;
    double c = 0.0;
    for (int t = 0; t < 5; ++t) c += f(t) * cost(cells[t] / 3, cells[t] % 3);
    best = std::min(best, c);
  }
  return best;
}

}  // namespace oracle
