#include "lipattn/attention.hpp"

#include <cmath>
#include <string>

#include "lipattn/error.hpp"

namespace lipattn {
namespace {

void check_dim(const TokenSequence& x, const AttentionParams& p, const char* who) {
  if (x.dim() != p.model_dim()) {
    throw DimensionError(std::string(who) + ": token dimension " + std::to_string(x.dim()) +
                         " does not match parameter dimension " + std::to_string(p.model_dim()));
  }
}

// S_ij = x_i^T A^T x_j
Matrix scores(const TokenSequence& x, const Matrix& a) {
  const Matrix queries = multiply_transposed(x.matrix(), a);  // rows A x_i
  return multiply_transposed(queries, x.matrix());
}

void softmax_rows(Matrix& s, std::size_t (*row_extent)(std::size_t, std::size_t)) {
  for (std::size_t i = 0; i < s.rows(); ++i) {
    const std::size_t len = row_extent(i, s.cols());
    auto row = s.row(i);
    const auto probs = softmax(row.first(len));
    for (std::size_t j = 0; j < len; ++j) row[j] = probs[j];
    for (std::size_t j = len; j < s.cols(); ++j) row[j] = 0.0;
  }
}

std::size_t full_row(std::size_t, std::size_t n) { return n; }
std::size_t causal_row(std::size_t i, std::size_t) { return i + 1; }

Matrix add_bias_rows(Matrix m, const Vector& b) {
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) += b[j];
  return m;
}

// Rows V sum_j P_ij x_j, i.e. (P X) V^T.
TokenSequence mix_and_project(const Matrix& attn, const TokenSequence& x, const Matrix& v) {
  return TokenSequence(multiply_transposed(attn * x.matrix(), v));
}

const Biases& require_biases(const AttentionParams& p) {
  if (!p.biases()) throw std::invalid_argument("biased attention: parameters carry no biases");
  return *p.biases();
}

}  // namespace

AttentionParams::AttentionParams(Matrix q, Matrix k, Matrix v, std::optional<Biases> biases)
    : q_(std::move(q)), k_(std::move(k)), v_(std::move(v)), biases_(std::move(biases)) {
  if (q_.rows() == 0 || q_.cols() == 0) throw DimensionError("AttentionParams: empty Q");
  if (k_.rows() != q_.rows() || k_.cols() != q_.cols() || v_.rows() != q_.rows() || v_.cols() != q_.cols()) {
    throw DimensionError("AttentionParams: Q, K, V must all be k x d");
  }
  if (!q_.all_finite() || !k_.all_finite() || !v_.all_finite()) {
    throw DegenerateInputError("AttentionParams: non-finite parameter entry");
  }
  if (biases_) {
    const std::size_t kk = q_.rows();
    if (biases_->query.size() != kk || biases_->key.size() != kk || biases_->value.size() != kk) {
      throw DimensionError("AttentionParams: biases must live in R^k");
    }
  }
  a_ = transposed_multiply(k_, q_) * (1.0 / std::sqrt(static_cast<double>(q_.rows())));
}

AttentionParams AttentionParams::from_bilinear(const Matrix& a, Matrix v) {
  if (a.rows() != a.cols()) throw DimensionError("from_bilinear: A must be square");
  const std::size_t d = a.rows();
  return AttentionParams(a * std::sqrt(static_cast<double>(d)), Matrix::identity(d), std::move(v));
}

Matrix AttentionParams::unscaled_bilinear() const { return transposed_multiply(k_, q_); }

AttentionParams AttentionParams::with_biases(Biases b) const { return AttentionParams(q_, k_, v_, std::move(b)); }

AttentionParams AttentionParams::with_value(Matrix v) const { return AttentionParams(q_, k_, std::move(v), biases_); }

MultiHeadParams::MultiHeadParams(std::vector<AttentionParams> heads, std::vector<Matrix> projections)
    : heads_(std::move(heads)), projections_(std::move(projections)) {
  if (heads_.empty()) throw DimensionError("MultiHeadParams: need at least one head");
  if (projections_.size() != heads_.size()) throw DimensionError("MultiHeadParams: one projection per head");
  const std::size_t d = heads_.front().model_dim();
  const std::size_t h = heads_.size();
  if (d % h != 0) throw DimensionError("MultiHeadParams: head count must divide d");
  const std::size_t k = d / h;
  for (std::size_t i = 0; i < h; ++i) {
    if (heads_[i].model_dim() != d || heads_[i].head_dim() != k) {
      throw DimensionError("MultiHeadParams: head " + std::to_string(i) + " is not k x d with k = d / H");
    }
    if (projections_[i].rows() != d || projections_[i].cols() != k) {
      throw DimensionError("MultiHeadParams: projection " + std::to_string(i) + " is not d x k");
    }
  }
}

Matrix attention_matrix(const TokenSequence& x, const AttentionParams& p) {
  check_dim(x, p, "attention_matrix");
  Matrix s = scores(x, p.bilinear());
  softmax_rows(s, full_row);
  return s;
}

Matrix masked_attention_matrix(const TokenSequence& x, const AttentionParams& p) {
  check_dim(x, p, "masked_attention_matrix");
  Matrix s = scores(x, p.bilinear());
  softmax_rows(s, causal_row);
  return s;
}

Matrix weighted_attention_matrix(const TokenSequence& x, const AttentionParams& p, const SimplexWeights& a) {
  check_dim(x, p, "weighted_attention_matrix");
  if (a.size() != x.size()) throw DimensionError("weighted_attention_matrix: one weight per token");
  Matrix s = scores(x, p.bilinear());
  for (std::size_t i = 0; i < s.rows(); ++i) {
    auto row = s.row(i);
    const auto probs = weighted_softmax(row, a);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = probs[j];
  }
  return s;
}

Matrix biased_attention_matrix(const TokenSequence& x, const AttentionParams& p) {
  check_dim(x, p, "biased_attention_matrix");
  const Biases& b = require_biases(p);
  const Matrix queries = add_bias_rows(multiply_transposed(x.matrix(), p.query()), b.query);
  const Matrix keys = add_bias_rows(multiply_transposed(x.matrix(), p.key()), b.key);
  Matrix s = multiply_transposed(queries, keys);
  softmax_rows(s, full_row);
  return s;
}

TokenSequence self_attention(const TokenSequence& x, const AttentionParams& p) {
  return mix_and_project(attention_matrix(x, p), x, p.value());
}

TokenSequence masked_self_attention(const TokenSequence& x, const AttentionParams& p) {
  return mix_and_project(masked_attention_matrix(x, p), x, p.value());
}

TokenSequence multi_head(const TokenSequence& x, const MultiHeadParams& mp) {
  Matrix out(x.size(), mp.model_dim());
  for (std::size_t h = 0; h < mp.head_count(); ++h) {
    const TokenSequence head_out = self_attention(x, mp.head(h));
    out += multiply_transposed(head_out.matrix(), mp.projection(h));
  }
  return TokenSequence(std::move(out));
}

TokenSequence weighted_self_attention(const TokenSequence& x, const AttentionParams& p, const SimplexWeights& a) {
  return mix_and_project(weighted_attention_matrix(x, p, a), x, p.value());
}

TokenSequence biased_self_attention(const TokenSequence& x, const AttentionParams& p) {
  const Biases& b = require_biases(p);
  Matrix out = multiply_transposed(biased_attention_matrix(x, p) * x.matrix(), p.value());
  return TokenSequence(add_bias_rows(std::move(out), b.value));
}

TokenSequence layer_norm(const TokenSequence& x, const NormParams& np) {
  const std::size_t d = x.dim();
  if (np.gamma.size() != d || np.beta.size() != d) throw DimensionError("layer_norm: gamma/beta must be in R^d");
  Matrix out(x.size(), d);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto t = x[i];
    double mean = 0.0;
    for (double v : t) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : t) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(d));
    if (!(sd > 0.0)) throw DegenerateInputError("layer_norm: token " + std::to_string(i) + " has zero variance");
    for (std::size_t j = 0; j < d; ++j) out(i, j) = np.gamma[j] * (t[j] - mean) / sd + np.beta[j];
  }
  return TokenSequence(std::move(out));
}

TokenSequence rms_norm(const TokenSequence& x, const NormParams& np) {
  const std::size_t d = x.dim();
  if (np.gamma.size() != d) throw DimensionError("rms_norm: gamma must be in R^d");
  const double root_d = std::sqrt(static_cast<double>(d));
  Matrix out(x.size(), d);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double len = norm2(x[i]);
    if (!(len > 0.0)) throw DegenerateInputError("rms_norm: token " + std::to_string(i) + " is zero");
    for (std::size_t j = 0; j < d; ++j) out(i, j) = np.gamma[j] * x[i][j] / len * root_d;
  }
  return TokenSequence(std::move(out));
}

TokenSequence project_to_sphere(const TokenSequence& x) {
  Matrix out = x.matrix();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double len = norm2(x[i]);
    if (!(len > 0.0)) throw DegenerateInputError("project_to_sphere: zero token");
    for (double& v : out.row(i)) v /= len;
  }
  return TokenSequence(std::move(out));
}

AttentionParams absorb_rms_gain(const AttentionParams& p, const NormParams& np) {
  const std::size_t d = p.model_dim();
  if (np.gamma.size() != d) throw DimensionError("absorb_rms_gain: gamma must be in R^d");
  Vector lambda(d);
  const double root_d = std::sqrt(static_cast<double>(d));
  for (std::size_t j = 0; j < d; ++j) lambda[j] = np.gamma[j] * root_d;
  const Matrix scale = Matrix::diagonal(lambda);
  return AttentionParams(p.query() * scale, p.key() * scale, p.value() * scale, p.biases());
}

}  // namespace lipattn
