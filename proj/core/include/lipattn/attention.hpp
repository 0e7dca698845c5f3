#pragma once

#include <optional>
#include <vector>

#include "lipattn/matrix.hpp"
#include "lipattn/tokens.hpp"

namespace lipattn {

/// Query/key/value biases, each in R^k.
struct Biases {
  Vector query;
  Vector key;
  Vector value;
};

/// Single-head parameters Q, K, V in R^{k x d} with the cached bilinear
/// form A = K^T Q / sqrt(k).
///
/// The biased variant uses Q and K as given (the 1/sqrt(k) factor is taken
/// to be already absorbed into Q, K, b_Q, b_K); its bilinear form is
/// `unscaled_bilinear()` = K^T Q.
class AttentionParams {
 public:
  AttentionParams(Matrix q, Matrix k, Matrix v, std::optional<Biases> biases = std::nullopt);

  /// Parameters whose bilinear form is exactly `a` (K = I_d, Q = sqrt(d) a).
  static AttentionParams from_bilinear(const Matrix& a, Matrix v);

  const Matrix& query() const noexcept { return q_; }
  const Matrix& key() const noexcept { return k_; }
  const Matrix& value() const noexcept { return v_; }
  const Matrix& bilinear() const noexcept { return a_; }
  Matrix unscaled_bilinear() const;
  const std::optional<Biases>& biases() const noexcept { return biases_; }

  std::size_t head_dim() const noexcept { return q_.rows(); }
  std::size_t model_dim() const noexcept { return q_.cols(); }

  AttentionParams with_biases(Biases b) const;
  AttentionParams with_value(Matrix v) const;

 private:
  Matrix q_;
  Matrix k_;
  Matrix v_;
  Matrix a_;
  std::optional<Biases> biases_;
};

/// H heads with k = d / H and output projections W^(h) in R^{d x k}.
class MultiHeadParams {
 public:
  MultiHeadParams(std::vector<AttentionParams> heads, std::vector<Matrix> projections);

  std::size_t head_count() const noexcept { return heads_.size(); }
  std::size_t model_dim() const noexcept { return heads_.front().model_dim(); }
  const AttentionParams& head(std::size_t h) const { return heads_.at(h); }
  const Matrix& projection(std::size_t h) const { return projections_.at(h); }

 private:
  std::vector<AttentionParams> heads_;
  std::vector<Matrix> projections_;
};

enum class NormKind { LayerNorm, RMSNorm };

struct NormParams {
  NormKind kind = NormKind::RMSNorm;
  Vector gamma;
  Vector beta;  // LayerNorm only
};

// Attention matrices (n x n, rows in the simplex).
Matrix attention_matrix(const TokenSequence& x, const AttentionParams& p);
/// Row i only sees columns j <= i.
Matrix masked_attention_matrix(const TokenSequence& x, const AttentionParams& p);
Matrix weighted_attention_matrix(const TokenSequence& x, const AttentionParams& p, const SimplexWeights& a);
Matrix biased_attention_matrix(const TokenSequence& x, const AttentionParams& p);

/// f(X)_i = V sum_j P_ij x_j, P_i = softmax((x_i^T A^T x_j)_j).
TokenSequence self_attention(const TokenSequence& x, const AttentionParams& p);
/// f^m(X)_i = f(x_1, ..., x_i)_i.
TokenSequence masked_self_attention(const TokenSequence& x, const AttentionParams& p);
/// f^MH(X) = sum_h W^(h) f^(h)(X).
TokenSequence multi_head(const TokenSequence& x, const MultiHeadParams& mp);
/// Attention weights proportional to a_j exp(x_i^T A^T x_j).
TokenSequence weighted_self_attention(const TokenSequence& x, const AttentionParams& p, const SimplexWeights& a);
/// V sum_j P_ij x_j + b_V with P_i = softmax((Q x_i + b_Q)^T (K x_j + b_K)).
TokenSequence biased_self_attention(const TokenSequence& x, const AttentionParams& p);

/// gamma ⊙ (x - mean(x)) / std(x) + beta, per token.
TokenSequence layer_norm(const TokenSequence& x, const NormParams& np);
/// gamma ⊙ x / |x| * sqrt(d), per token.
TokenSequence rms_norm(const TokenSequence& x, const NormParams& np);

/// x_i / |x_i| for every token.
TokenSequence project_to_sphere(const TokenSequence& x);
/// theta' = (Q diag(l), K diag(l), V diag(l)) with l = gamma * sqrt(d), so
/// that f_theta(rms_norm(X)) = f_theta'(project_to_sphere(X)).
AttentionParams absorb_rms_gain(const AttentionParams& p, const NormParams& np);

}  // namespace lipattn
