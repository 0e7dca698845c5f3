#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string_view>
#include <vector>

#include "lipattn/attention.hpp"
#include "lipattn/matrix.hpp"
#include "lipattn/tokens.hpp"

namespace lipattn {

enum class CaseTag { PositiveEigenvalue, NegativeEigenvalue };

std::string_view to_string(CaseTag tag) noexcept;

/// A lower-bound witness. Every token satisfies |x_i| <= R (1 + 1e-12).
struct AdversarialConfig {
  TokenSequence x;
  std::optional<SimplexWeights> weights;
  CaseTag case_tag = CaseTag::PositiveEigenvalue;
  double radius = 0.0;
  double expected_lower_bound = 0.0;
};

/// splitmix64 chained over the inputs, each part absorbed into the previous output.
std::uint64_t seed_hash(std::initializer_list<std::uint64_t> parts) noexcept;
/// Bit pattern of a double, for use in seed_hash.
std::uint64_t seed_bits(double value) noexcept;

/// (Ru, Ru/2, ..., Ru/2) along the top eigenvector when gamma_top >= 0, or
/// (Ru, -Ru, ..., -Ru) along the bottom eigenvector when gamma_bottom < 0,
/// whichever witness bound is larger. Requires n >= 2 and a real eigenvalue.
AdversarialConfig prop32_config(const AttentionParams& p, double radius, std::size_t n);

/// Two weighted Diracs. With C = gamma_top / 8 when gamma_top >= -8 gamma_bottom:
/// points (Ru_1, (R/2)u_1), weights (e^{-2CR^2}, 1 - e^{-2CR^2}).
/// Otherwise, with C = |gamma_bottom|: points (Ru, -Ru), weights
/// (1 - e^{-2CR^2}, e^{-2CR^2}). At R = 0 both points sit at the origin with
/// weight 1/2. Throws LimitExceededError when the small weight underflows.
AdversarialConfig prop35_weighted_config(const AttentionParams& p, double radius);

/// Same two-cluster recipe on head `head_index` of a multi-head model, with
/// the case chosen by gamma_top >= -8 gamma_bottom (ties go to the positive case).
AdversarialConfig section52_adversarial(const MultiHeadParams& mp, std::size_t head_index, double radius,
                                        std::size_t n);

/// (0, Re_1, ..., Re_1, -Re_1, ..., -Re_1) with (n + 1) / 2 - 1 copies of Re_1.
TokenSequence quadratic_growth_config(double radius, std::size_t n, std::size_t d);

struct GenericConfig {
  TokenSequence x;
  std::vector<std::size_t> argmax;  // m_i
  double margin = 0.0;              // min_i (top score - runner-up score)
  std::size_t attempts = 0;
};

struct GenericOptions {
  double margin = 1e-6;
  bool masked = false;  // argmax over j <= i
  std::size_t max_attempts = 10000;
};

/// Uniform points in the unit ball whose score rows x_i^T A^T x_j have a
/// unique maximiser with gap above `margin`. Throws LimitExceededError after
/// max_attempts draws.
GenericConfig random_generic_config(std::size_t n, std::size_t d, std::uint64_t seed, const Matrix& a,
                                    const GenericOptions& opts = {});

/// Gaussian parameters. Q and K entries have standard deviation scale d^{-1/4},
/// so that ||K^T Q / sqrt(k)|| stays of order scale; V and the biases have
/// standard deviation scale / sqrt(d).
AttentionParams random_params(std::size_t d, std::size_t k, double scale, std::uint64_t seed,
                              bool with_biases = false);

/// H heads of width d / H built with random_params, and d x (d / H)
/// projections with standard deviation scale / sqrt(d).
MultiHeadParams random_multi_head(std::size_t d, std::size_t heads, double scale, std::uint64_t seed);

/// n points uniform in the ball of radius R.
TokenSequence random_ball(std::size_t n, std::size_t d, double radius, std::uint64_t seed);

}  // namespace lipattn
