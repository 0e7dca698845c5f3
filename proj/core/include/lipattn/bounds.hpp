#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "lipattn/attention.hpp"
#include "lipattn/linalg.hpp"
#include "lipattn/tokens.hpp"

namespace lipattn {

/// Scalar inputs of the closed-form bounds.
struct BoundInputs {
  std::size_t n = 1;
  double radius = 0.0;
  double norm_a = 0.0;
  double norm_v = 0.0;
  double norm_q = 0.0;
  double norm_k = 0.0;
  double gamma = 0.0;        // max(-gamma_bottom, gamma_top / 8)
  double rho = 0.0;          // max_i |A x_i|
  double r = 0.0;            // max_{i,j} |x_i - x_j|
  double bias_norm_q = 0.0;  // |b_Q|

  /// Spectral norms of A, V, Q, K and |b_Q| from `p`. For parameters with
  /// biases, norm_a is ||K^T Q|| (the biased convention); otherwise ||K^T Q / sqrt(k)||.
  static BoundInputs from_params(const AttentionParams& p, std::size_t n, double radius);
};

/// sqrt(3) ||V|| (||A||^2 R^4 (4n + 1) + n)^{1/2}.
double upper_general(const BoundInputs& bi);
/// Same with (n + 1) in place of (4n + 1), which is what the term-by-term
/// estimate of the Jacobian actually yields.
double upper_general_tight(const BoundInputs& bi);

/// sqrt(3) ||V|| ((rho^2 r^2 + 1) n + rho^2 r^2)^{1/2}.
double upper_rho_r(const BoundInputs& bi);

struct RhoR {
  double rho = 0.0;            // max_i |A x_i|
  double r = 0.0;              // max_{i,j} |x_i - x_j|
  double rho_symmetric = 0.0;  // max_i max(|A x_i|, |A^T x_i|)
};
RhoR measure_rho_r(const TokenSequence& x, const Matrix& a);

/// ||V|| (1 + 3 ||A|| R^2) exp(2 ||A|| R^2). Also bounds ||D_X f|| pointwise on B_R^n.
double upper_mean_field(const BoundInputs& bi);

/// sqrt(3) ||V|| (||A||^2 R^4 (n + 1) + n)^{1/2}.
double upper_masked(const BoundInputs& bi);
/// ||V|| (1 + 3 ||A|| R^2) exp(2 ||A|| R^2), proposed for the conditional
/// distance d_p. It is not an upper bound: at A = 0 the masked map is a
/// running mean with Lipschitz constant above ||V|| for n >= 2.
double upper_masked_mean_field(const BoundInputs& bi);

/// sqrt(3) ||V|| (||A||^2 R^4 + n (||K|| (||Q|| R + |b_Q|)^2 R^2 + 1))^{1/2},
/// with A = K^T Q (scaling absorbed into Q and K).
double upper_biased(const BoundInputs& bi);
/// As upper_biased with ||K||^2 in the n-term, matching the Cauchy-Schwarz
/// estimate of the key-side term |K^T (Q x_i + b_Q)| <= ||K|| (||Q|| R + |b_Q|).
double upper_biased_squared_key(const BoundInputs& bi);

/// sum_h ||W^(h)|| Lip^(h).
double upper_multi_head(std::span<const double> per_head_lipschitz, std::span<const double> projection_norms);

/// sqrt(n - 1) / (1 + (n - 1) exp(-2 R^2 gamma)).
double lower_prop32(std::size_t n, double radius, double gamma);
/// Two-cluster witness bounds for a single real eigenvalue g of A:
/// sqrt(n-1) / (1 + (n-1) exp(-R^2 g / 4)) for g >= 0 (tokens u, u/2, ..., u/2), and
/// sqrt(n-1) / (1 + (n-1) exp(-2 R^2 |g|)) for g < 0 (tokens u, -u, ..., -u).
double lower_witness_positive(std::size_t n, double radius, double eigenvalue);
double lower_witness_negative(std::size_t n, double radius, double eigenvalue);

/// (gamma / 2) R^2 exp(gamma R^2), the mean-field lower bound without its
/// asymptotically unit prefactor.
double lower_prop35(double radius, double gamma);

/// max(-gamma_bottom, gamma_top / 8), or nullopt for an empty real spectrum.
std::optional<double> lower_bound_gamma(const EigenReport& report);

/// 2 R^2 gamma with R the mean token magnitude of X; nullopt when A has no
/// real eigenvalue.
std::optional<double> gamma_diagnostic(const AttentionParams& p, const TokenSequence& x);

/// Smallest n in [1, n_max] for which upper_general exceeds upper_mean_field
/// at the norms and radius of `bi` (bi.n is ignored).
std::optional<std::size_t> general_vs_mean_field_crossover(const BoundInputs& bi, std::size_t n_max);

}  // namespace lipattn
