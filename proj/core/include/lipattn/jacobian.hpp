#pragma once

#include <optional>
#include <vector>

#include "lipattn/attention.hpp"
#include "lipattn/matrix.hpp"
#include "lipattn/tokens.hpp"

namespace lipattn {

enum class Variant { Unmasked, Masked, Weighted, Biased };

const char* to_string(Variant v) noexcept;

/// Closed-form differential D_X f of one attention variant at a fixed base
/// point X. Perturbations are n x d matrices (one row per token), outputs
/// are n x k.
///
/// Every variant shares the same structure once the attention matrix P and
/// the score derivative are fixed:
///
///   (D_X f)(e)_i = V sum_j P_ij (x_j - xbar_i) ds_ij + V sum_j P_ij e_j,
///   ds_ij = y_i . e_j + (B e_i) . x_j,   xbar_i = sum_k P_ik x_k,
///
/// where y_i = A x_i and B = A for the plain variants, and
/// y_i = K^T (Q x_i + b_Q), B = K^T Q with biases. The first part of ds_ij
/// is the key-side term, the second the query-side term.
///
/// The operator is immutable; the attention matrix is computed once.
class JacobianOperator {
 public:
  static JacobianOperator unmasked(TokenSequence x, AttentionParams p);
  static JacobianOperator masked(TokenSequence x, AttentionParams p);
  static JacobianOperator weighted(TokenSequence x, AttentionParams p, SimplexWeights a);
  static JacobianOperator biased(TokenSequence x, AttentionParams p);

  Variant variant() const noexcept { return variant_; }
  const TokenSequence& base_point() const noexcept { return x_; }
  const AttentionParams& params() const noexcept { return p_; }
  const std::optional<SimplexWeights>& weights() const noexcept { return weights_; }
  /// Cached attention matrix P (lower-triangular for the masked variant).
  const Matrix& attention() const noexcept { return attn_; }

  std::size_t tokens() const noexcept { return x_.size(); }
  std::size_t in_dim() const noexcept { return x_.dim(); }
  std::size_t out_dim() const noexcept { return p_.value().rows(); }

  /// Directional derivative of the forward map at X along `e` (n x d).
  Matrix jvp(const Matrix& e) const;
  /// Adjoint: <jvp(e), u> = <e, vjp(u)> for u of shape n x k.
  Matrix vjp(const Matrix& u) const;

 private:
  JacobianOperator(Variant v, TokenSequence x, AttentionParams p, std::optional<SimplexWeights> a, Matrix attn);

  Variant variant_;
  TokenSequence x_;
  AttentionParams p_;
  std::optional<SimplexWeights> weights_;
  Matrix attn_;
  Matrix mean_;          // rows xbar_i = sum_j P_ij x_j
  Matrix key_side_;      // rows y_i
  Matrix query_form_;    // B
};

/// D_X f^MH = sum_h W^(h) D_X f^(h).
class MultiHeadJacobian {
 public:
  MultiHeadJacobian(const TokenSequence& x, const MultiHeadParams& mp);

  std::size_t tokens() const noexcept { return heads_.front().tokens(); }
  std::size_t in_dim() const noexcept { return heads_.front().in_dim(); }
  std::size_t out_dim() const noexcept { return projections_.front().rows(); }
  const JacobianOperator& head(std::size_t h) const { return heads_.at(h); }
  std::size_t head_count() const noexcept { return heads_.size(); }

  Matrix jvp(const Matrix& e) const;
  Matrix vjp(const Matrix& u) const;

 private:
  std::vector<JacobianOperator> heads_;
  std::vector<Matrix> projections_;
};

/// Largest n * d accepted by assemble_dense.
inline constexpr std::size_t kMaxDenseInputSize = 4096;

/// Dense (n k) x (n d) matrix whose column c is vec(jvp(e_c)), with
/// row-major vectorization of token sequences. Throws LimitExceededError
/// when n * d exceeds kMaxDenseInputSize.
Matrix assemble_dense(const JacobianOperator& j);
Matrix assemble_dense(const MultiHeadJacobian& j);

}  // namespace lipattn
