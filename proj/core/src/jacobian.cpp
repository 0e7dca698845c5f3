#include "lipattn/jacobian.hpp"

#include <string>

#include "lipattn/error.hpp"

namespace lipattn {
namespace {

void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* who) {
  if (m.rows() != rows || m.cols() != cols) {
    throw DimensionError(std::string(who) + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                         ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

template <class Op>
Matrix assemble(const Op& j) {
  const std::size_t n = j.tokens();
  const std::size_t d = j.in_dim();
  const std::size_t k = j.out_dim();
  if (n * d > kMaxDenseInputSize) {
    throw LimitExceededError("assemble_dense: n*d = " + std::to_string(n * d) + " exceeds " +
                             std::to_string(kMaxDenseInputSize));
  }
  Matrix dense(n * k, n * d);
  Matrix e(n, d);
  for (std::size_t c = 0; c < n * d; ++c) {
    e.entries()[c] = 1.0;
    const Matrix col = j.jvp(e);
    e.entries()[c] = 0.0;
    const auto vals = col.entries();
    for (std::size_t r = 0; r < vals.size(); ++r) dense(r, c) = vals[r];
  }
  return dense;
}

}  // namespace

const char* to_string(Variant v) noexcept {
  switch (v) {
    case Variant::Unmasked: return "unmasked";
    case Variant::Masked: return "masked";
    case Variant::Weighted: return "weighted";
    case Variant::Biased: return "biased";
  }
  return "unknown";
}

JacobianOperator::JacobianOperator(Variant v, TokenSequence x, AttentionParams p, std::optional<SimplexWeights> a,
                                   Matrix attn)
    : variant_(v), x_(std::move(x)), p_(std::move(p)), weights_(std::move(a)), attn_(std::move(attn)) {
  mean_ = attn_ * x_.matrix();
  if (variant_ == Variant::Biased) {
    const Biases& b = *p_.biases();
    Matrix queries = multiply_transposed(x_.matrix(), p_.query());
    for (std::size_t i = 0; i < queries.rows(); ++i)
      for (std::size_t j = 0; j < queries.cols(); ++j) queries(i, j) += b.query[j];
    key_side_ = queries * p_.key();  // rows K^T (Q x_i + b_Q)
    query_form_ = p_.unscaled_bilinear();
  } else {
    key_side_ = multiply_transposed(x_.matrix(), p_.bilinear());  // rows A x_i
    query_form_ = p_.bilinear();
  }
}

JacobianOperator JacobianOperator::unmasked(TokenSequence x, AttentionParams p) {
  Matrix attn = attention_matrix(x, p);
  return JacobianOperator(Variant::Unmasked, std::move(x), std::move(p), std::nullopt, std::move(attn));
}

JacobianOperator JacobianOperator::masked(TokenSequence x, AttentionParams p) {
  Matrix attn = masked_attention_matrix(x, p);
  return JacobianOperator(Variant::Masked, std::move(x), std::move(p), std::nullopt, std::move(attn));
}

JacobianOperator JacobianOperator::weighted(TokenSequence x, AttentionParams p, SimplexWeights a) {
  Matrix attn = weighted_attention_matrix(x, p, a);
  return JacobianOperator(Variant::Weighted, std::move(x), std::move(p), std::move(a), std::move(attn));
}

JacobianOperator JacobianOperator::biased(TokenSequence x, AttentionParams p) {
  Matrix attn = biased_attention_matrix(x, p);
  return JacobianOperator(Variant::Biased, std::move(x), std::move(p), std::nullopt, std::move(attn));
}

Matrix JacobianOperator::jvp(const Matrix& e) const {
  const std::size_t n = tokens();
  require_shape(e, n, in_dim(), "jvp");
  const Matrix& x = x_.matrix();
  // ds_ij = y_i . e_j + (B e_i) . x_j
  Matrix ds = multiply_transposed(key_side_, e);
  ds += multiply_transposed(multiply_transposed(e, query_form_), x);
  // G_ij = P_ij ds_ij; row i of the variance terms is sum_j G_ij x_j - (sum_j G_ij) xbar_i.
  Matrix mixed = attn_ * e;
  for (std::size_t i = 0; i < n; ++i) {
    auto prow = attn_.row(i);
    auto drow = ds.row(i);
    double gsum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      drow[j] *= prow[j];
      gsum += drow[j];
    }
    auto out = mixed.row(i);
    auto xbar = mean_.row(i);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] -= gsum * xbar[c];
  }
  mixed += ds * x;
  return multiply_transposed(mixed, p_.value());
}

Matrix JacobianOperator::vjp(const Matrix& u) const {
  const std::size_t n = tokens();
  require_shape(u, n, out_dim(), "vjp");
  const Matrix& x = x_.matrix();
  const Matrix g = u * p_.value();  // rows V^T u_i
  // T_ij = P_ij (g_i . x_j - sum_l P_il g_i . x_l)
  Matrix t = multiply_transposed(g, x);
  for (std::size_t i = 0; i < n; ++i) {
    auto prow = attn_.row(i);
    auto trow = t.row(i);
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += prow[j] * trow[j];
    for (std::size_t j = 0; j < n; ++j) trow[j] = prow[j] * (trow[j] - mean);
  }
  Matrix out = transposed_multiply(attn_, g);
  out += transposed_multiply(t, key_side_);
  out += (t * x) * query_form_;
  return out;
}

MultiHeadJacobian::MultiHeadJacobian(const TokenSequence& x, const MultiHeadParams& mp) {
  heads_.reserve(mp.head_count());
  for (std::size_t h = 0; h < mp.head_count(); ++h) {
    heads_.push_back(JacobianOperator::unmasked(x, mp.head(h)));
    projections_.push_back(mp.projection(h));
  }
}

Matrix MultiHeadJacobian::jvp(const Matrix& e) const {
  Matrix out(tokens(), out_dim());
  for (std::size_t h = 0; h < heads_.size(); ++h) out += multiply_transposed(heads_[h].jvp(e), projections_[h]);
  return out;
}

Matrix MultiHeadJacobian::vjp(const Matrix& u) const {
  require_shape(u, tokens(), out_dim(), "multi-head vjp");
  Matrix out(tokens(), in_dim());
  for (std::size_t h = 0; h < heads_.size(); ++h) out += heads_[h].vjp(u * projections_[h]);
  return out;
}

Matrix assemble_dense(const JacobianOperator& j) { return assemble(j); }
Matrix assemble_dense(const MultiHeadJacobian& j) { return assemble(j); }

}  // namespace lipattn
