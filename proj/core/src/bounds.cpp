#include "lipattn/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lipattn/error.hpp"

namespace lipattn {
namespace {

const double kSqrt3 = std::sqrt(3.0);

double nd(std::size_t n) { return static_cast<double>(n); }

}  // namespace

BoundInputs BoundInputs::from_params(const AttentionParams& p, std::size_t n, double radius) {
  BoundInputs bi;
  bi.n = n;
  bi.radius = radius;
  bi.norm_v = spectral_norm(p.value());
  bi.norm_q = spectral_norm(p.query());
  bi.norm_k = spectral_norm(p.key());
  if (p.biases()) {
    bi.norm_a = spectral_norm(p.unscaled_bilinear());
    bi.bias_norm_q = norm2(p.biases()->query);
  } else {
    bi.norm_a = spectral_norm(p.bilinear());
  }
  if (const auto g = lower_bound_gamma(real_eigenpairs(p.bilinear()))) bi.gamma = *g;
  return bi;
}

double upper_general(const BoundInputs& bi) {
  const double r4 = std::pow(bi.radius, 4);
  return kSqrt3 * bi.norm_v * std::sqrt(bi.norm_a * bi.norm_a * r4 * (4.0 * nd(bi.n) + 1.0) + nd(bi.n));
}

double upper_general_tight(const BoundInputs& bi) {
  const double r4 = std::pow(bi.radius, 4);
  return kSqrt3 * bi.norm_v * std::sqrt(bi.norm_a * bi.norm_a * r4 * (nd(bi.n) + 1.0) + nd(bi.n));
}

double upper_rho_r(const BoundInputs& bi) {
  const double c = bi.rho * bi.rho * bi.r * bi.r;
  return kSqrt3 * bi.norm_v * std::sqrt((c + 1.0) * nd(bi.n) + c);
}

RhoR measure_rho_r(const TokenSequence& x, const Matrix& a) {
  RhoR out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double forward = norm2(matvec(a, x[i]));
    const double backward = norm2(matvec_transposed(a, x[i]));
    out.rho = std::max(out.rho, forward);
    out.rho_symmetric = std::max({out.rho_symmetric, forward, backward});
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < x.dim(); ++c) s += (x[i][c] - x[j][c]) * (x[i][c] - x[j][c]);
      out.r = std::max(out.r, std::sqrt(s));
    }
  }
  return out;
}

double upper_mean_field(const BoundInputs& bi) {
  const double t = bi.norm_a * bi.radius * bi.radius;
  return bi.norm_v * (1.0 + 3.0 * t) * std::exp(2.0 * t);
}

double upper_masked(const BoundInputs& bi) { return upper_general_tight(bi); }

double upper_masked_mean_field(const BoundInputs& bi) { return upper_mean_field(bi); }

double upper_biased(const BoundInputs& bi) {
  const double r2 = bi.radius * bi.radius;
  const double reach = bi.norm_q * bi.radius + bi.bias_norm_q;
  return kSqrt3 * bi.norm_v *
         std::sqrt(bi.norm_a * bi.norm_a * r2 * r2 + nd(bi.n) * (bi.norm_k * reach * reach * r2 + 1.0));
}

double upper_biased_squared_key(const BoundInputs& bi) {
  const double r2 = bi.radius * bi.radius;
  const double reach = bi.norm_k * (bi.norm_q * bi.radius + bi.bias_norm_q);
  return kSqrt3 * bi.norm_v * std::sqrt(bi.norm_a * bi.norm_a * r2 * r2 + nd(bi.n) * (reach * reach * r2 + 1.0));
}

double upper_multi_head(std::span<const double> per_head_lipschitz, std::span<const double> projection_norms) {
  if (per_head_lipschitz.size() != projection_norms.size()) {
    throw DimensionError("upper_multi_head: one projection norm per head");
  }
  double total = 0.0;
  for (std::size_t h = 0; h < per_head_lipschitz.size(); ++h) total += projection_norms[h] * per_head_lipschitz[h];
  return total;
}

double lower_prop32(std::size_t n, double radius, double gamma) {
  if (n == 0) throw std::invalid_argument("lower_prop32: n must be >= 1");
  const double m = nd(n - 1);
  return std::sqrt(m) / (1.0 + m * std::exp(-2.0 * radius * radius * gamma));
}

double lower_witness_positive(std::size_t n, double radius, double eigenvalue) {
  if (n == 0) throw std::invalid_argument("lower_witness_positive: n must be >= 1");
  const double m = nd(n - 1);
  return std::sqrt(m) / (1.0 + m * std::exp(-radius * radius * eigenvalue / 4.0));
}

double lower_witness_negative(std::size_t n, double radius, double eigenvalue) {
  if (n == 0) throw std::invalid_argument("lower_witness_negative: n must be >= 1");
  const double m = nd(n - 1);
  return std::sqrt(m) / (1.0 + m * std::exp(-2.0 * radius * radius * std::abs(eigenvalue)));
}

double lower_prop35(double radius, double gamma) {
  const double r2 = radius * radius;
  return 0.5 * gamma * r2 * std::exp(gamma * r2);
}

std::optional<double> lower_bound_gamma(const EigenReport& report) {
  if (report.empty_flag) return std::nullopt;
  return std::max(-report.gamma_bottom, report.gamma_top / 8.0);
}

std::optional<double> gamma_diagnostic(const AttentionParams& p, const TokenSequence& x) {
  const auto gamma = lower_bound_gamma(real_eigenpairs(p.bilinear()));
  if (!gamma) return std::nullopt;
  const double r = x.mean_magnitude();
  return 2.0 * r * r * *gamma;
}

std::optional<std::size_t> general_vs_mean_field_crossover(const BoundInputs& bi, std::size_t n_max) {
  const double mean_field = upper_mean_field(bi);
  if (bi.norm_v == 0.0) return std::nullopt;
  // 3 V^2 (a^2 R^4 (4n + 1) + n) > MF^2 is linear in n; solve, then nudge
  // across the rounding boundary with the exact comparison.
  const double a2r4 = bi.norm_a * bi.norm_a * std::pow(bi.radius, 4);
  const double target = mean_field * mean_field / (3.0 * bi.norm_v * bi.norm_v);
  const double estimate = (target - a2r4) / (4.0 * a2r4 + 1.0);
  if (estimate > static_cast<double>(n_max)) return std::nullopt;
  BoundInputs probe = bi;
  probe.n = estimate < 1.0 ? 1 : static_cast<std::size_t>(estimate);
  while (probe.n > 1) {
    --probe.n;
    if (!(upper_general(probe) > mean_field)) {
      ++probe.n;
      break;
    }
  }
  while (probe.n <= n_max && !(upper_general(probe) > mean_field)) ++probe.n;
  if (probe.n > n_max) return std::nullopt;
  return probe.n;
}

}  // namespace lipattn
