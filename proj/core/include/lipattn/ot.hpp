#pragma once

#include <limits>
#include <vector>

#include "lipattn/attention.hpp"
#include "lipattn/matrix.hpp"
#include "lipattn/tokens.hpp"

namespace lipattn {

/// sum_i a_i delta_{x_i}. Points are rows of an m x d matrix.
class DiscreteMeasure {
 public:
  DiscreteMeasure(Matrix points, SimplexWeights weights);

  /// m(X) = (1/n) sum_i delta_{x_i}.
  static DiscreteMeasure empirical(const TokenSequence& x);
  /// m_a(X) = sum_i a_i delta_{x_i}.
  static DiscreteMeasure weighted(const TokenSequence& x, SimplexWeights a);

  std::size_t size() const noexcept { return points_.rows(); }
  std::size_t dim() const noexcept { return points_.cols(); }
  const Matrix& points() const noexcept { return points_; }
  const SimplexWeights& weights() const noexcept { return weights_; }

 private:
  Matrix points_;
  SimplexWeights weights_;
};

/// sum_i a_i delta_{(s_i, x_i)} on [0, 1] x R^d.
class OrderedDiscreteMeasure {
 public:
  OrderedDiscreteMeasure(Vector positions, Matrix points, SimplexWeights weights);

  /// ord(X) = (1/n) sum_i delta_{(s_i, x_i)} with s_i = (i + 1) / n.
  static OrderedDiscreteMeasure ord(const TokenSequence& x);
  /// ord(X) with caller-supplied positions.
  static OrderedDiscreteMeasure ord(const TokenSequence& x, Vector positions);

  std::size_t size() const noexcept { return points_.rows(); }
  std::size_t dim() const noexcept { return points_.cols(); }
  const Vector& positions() const noexcept { return positions_; }
  const Matrix& points() const noexcept { return points_; }
  const SimplexWeights& weights() const noexcept { return weights_; }

 private:
  Vector positions_;
  Matrix points_;
  SimplexWeights weights_;
};

/// Optimal coupling of two discrete measures for the cost |x - y|^p.
struct TransportPlan {
  Matrix coupling;  // mu.size() x nu.size(), entries sum to 1
  double cost = 0.0;  // sum_ij pi_ij |x_i - y_j|^p
};

/// Exact discrete optimal transport by successive shortest augmenting paths
/// (Dijkstra with node potentials) on the bipartite support graph.
TransportPlan optimal_transport(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p);

/// W_p(mu, nu) = (min_pi sum_ij pi_ij |x_i - y_j|^p)^{1/p}.
double wasserstein_p(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p);

/// Largest |x_i - y_j| over pairs carrying mass in an optimal W_2 coupling;
/// zero iff the measures coincide.
double max_coupled_displacement(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

inline constexpr double kInfiniteDistance = std::numeric_limits<double>::infinity();

/// Conditional transport distance: +infinity when the position marginals
/// differ (by more than 1e-12 in location or mass), otherwise
/// (sum_tau theta(tau) W_p(mu^tau, nu^tau)^p)^{1/p}.
double conditional_dp(const OrderedDiscreteMeasure& mu, const OrderedDiscreteMeasure& nu, double p);

/// (Gamma_mu)_# mu with Gamma_mu(x) = sum_j a_j e^{x^T A^T y_j} V y_j / sum_j a_j e^{x^T A^T y_j}.
DiscreteMeasure pushforward_attention(const DiscreteMeasure& mu, const AttentionParams& p);

/// Causal version: the atom at position s only sees atoms with tau <= s.
/// Positions are carried through unchanged.
OrderedDiscreteMeasure pushforward_masked_attention(const OrderedDiscreteMeasure& mu, const AttentionParams& p);

/// ||Var mu||_2, the spectral norm of the covariance matrix.
double measure_variance_norm(const DiscreteMeasure& mu);

}  // namespace lipattn
