#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lipattn {

/// Where a metric attained its worst value; enough to rebuild the instance.
struct CheckInstance {
  std::uint64_t seed = 0;
  std::size_t n = 0;
  std::size_t d = 0;
};

/// worst <= tolerance for every instance of the battery.
struct CheckMetric {
  std::string name;
  double worst = 0.0;
  double tolerance = 0.0;
  bool passed = true;
  CheckInstance where;
  std::size_t instances = 0;
};

struct CheckReport {
  std::string name;
  bool passed = true;
  std::vector<CheckMetric> metrics;

  /// Multi-line human-readable summary.
  std::string describe() const;
};

/// F(m(X)) = m(f(X)) including inputs with repeated tokens, and
/// F^m(ord(X)) = ord(f^m(X)), measured as transport displacements.
CheckReport check_pushforward_consistency(std::uint64_t seed, std::size_t instances = 100);

/// ||D_X f|| equals the weighted local constant at uniform weights; finite
/// perturbation ratios W_2(F(m(X)), F(m(X + h e))) / W_2(m(X), m(X + h e))
/// stay below ||D_X f|| (1 + O(h)); identical tokens with V = I give 1.
CheckReport check_frobenius_wasserstein_link(std::uint64_t seed, std::size_t instances = 100);

/// Dense masked Jacobians vanish above the block diagonal, stay below the
/// masked bound, and masked attention collapses to prefix argmaxes at large radius.
CheckReport check_masked_jacobian_structure(std::uint64_t seed, std::size_t instances = 100);

/// W_2(F(mu), F(nu)) <= L W_2(mu, nu) with L the mean-field bound, on random
/// discrete measure pairs.
CheckReport check_mean_field_ratio(std::uint64_t seed, std::size_t instances = 200);

/// d_2(F^m(mu), F^m(nu)) <= L d_2(mu, nu) with L the masked mean-field bound,
/// on random ordered measure pairs sharing their position marginal. This
/// inequality does not hold in general: the masked map at A = 0 is a running
/// mean, whose d_2 ratio exceeds |V|. The check reports the observed excess.
CheckReport check_masked_mean_field_ratio(std::uint64_t seed, std::size_t instances = 200);

/// Pushforward consistency, the Frobenius/Wasserstein link, masked Jacobian
/// structure and the unmasked mean-field ratio.
std::vector<CheckReport> run_all_checks(std::uint64_t seed);

/// {"passed": bool, "checks": [{"name", "passed", "metrics": [...]}]}.
std::string checks_to_json(std::span<const CheckReport> reports);

}  // namespace lipattn
