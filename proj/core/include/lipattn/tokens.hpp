#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lipattn/matrix.hpp"

namespace lipattn {

/// Ordered sequence of n tokens in R^d, stored as an n x d matrix whose
/// rows are the tokens.
class TokenSequence {
 public:
  TokenSequence() = default;
  /// n zero tokens of dimension d.
  TokenSequence(std::size_t n, std::size_t d);
  /// Takes ownership of an n x d matrix; rejects non-finite entries and n = 0.
  explicit TokenSequence(Matrix tokens);

  static TokenSequence from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t size() const noexcept { return tokens_.rows(); }
  std::size_t dim() const noexcept { return tokens_.cols(); }

  std::span<const double> operator[](std::size_t i) const noexcept { return tokens_.row(i); }
  std::span<double> operator[](std::size_t i) noexcept { return tokens_.row(i); }

  const Matrix& matrix() const noexcept { return tokens_; }
  Matrix& matrix() noexcept { return tokens_; }

  /// max_i |x_i|.
  double radius() const;
  /// (1/n sum_i |x_i|^2)^{1/2}.
  double mean_magnitude() const;

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;

 private:
  Matrix tokens_;
};

/// Probability weights on n atoms.
class SimplexWeights {
 public:
  SimplexWeights() = default;
  /// Rejects negative entries and sums off by more than 1e-12.
  explicit SimplexWeights(std::vector<double> weights);

  static SimplexWeights uniform(std::size_t n);
  /// Divides by the sum; rejects negative or all-zero input.
  static SimplexWeights normalized(std::vector<double> raw);

  std::size_t size() const noexcept { return weights_.size(); }
  double operator[](std::size_t i) const noexcept { return weights_[i]; }
  std::span<const double> values() const noexcept { return weights_; }
  bool strictly_positive() const noexcept;

 private:
  std::vector<double> weights_;
};

/// softmax(w)_i = exp(w_i) / sum_j exp(w_j), evaluated with max subtraction.
SimplexWeights softmax(std::span<const double> logits);

/// softmax_a(w)_i = a_i exp(w_i) / sum_j a_j exp(w_j).
SimplexWeights weighted_softmax(std::span<const double> logits, const SimplexWeights& a);

}  // namespace lipattn
