#include "lipattn/tokens.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lipattn/error.hpp"

namespace lipattn {

TokenSequence::TokenSequence(std::size_t n, std::size_t d) : tokens_(n, d) {}

TokenSequence::TokenSequence(Matrix tokens) : tokens_(std::move(tokens)) {
  if (tokens_.rows() == 0 || tokens_.cols() == 0) throw DimensionError("TokenSequence: empty sequence");
  if (!tokens_.all_finite()) throw DegenerateInputError("TokenSequence: non-finite token entry");
}

TokenSequence TokenSequence::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  return TokenSequence(Matrix::from_rows(rows));
}

double TokenSequence::radius() const {
  double r = 0.0;
  for (std::size_t i = 0; i < size(); ++i) r = std::max(r, norm2((*this)[i]));
  return r;
}

double TokenSequence::mean_magnitude() const {
  double s = 0.0;
  for (std::size_t i = 0; i < size(); ++i) s += dot((*this)[i], (*this)[i]);
  return std::sqrt(s / static_cast<double>(size()));
}

SimplexWeights::SimplexWeights(std::vector<double> weights) : weights_(std::move(weights)) {
  double sum = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw DegenerateInputError("SimplexWeights: negative or non-finite weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw DegenerateInputError("SimplexWeights: weights sum to " + std::to_string(sum) + ", expected 1");
  }
}

SimplexWeights SimplexWeights::uniform(std::size_t n) {
  return SimplexWeights(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

SimplexWeights SimplexWeights::normalized(std::vector<double> raw) {
  double sum = 0.0;
  for (double w : raw) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw DegenerateInputError("SimplexWeights: negative or non-finite weight");
    sum += w;
  }
  if (!(sum > 0.0)) throw DegenerateInputError("SimplexWeights: all weights are zero");
  for (double& w : raw) w /= sum;
  return SimplexWeights(std::move(raw));
}

bool SimplexWeights::strictly_positive() const noexcept {
  return std::all_of(weights_.begin(), weights_.end(), [](double w) { return w > 0.0; });
}

SimplexWeights softmax(std::span<const double> logits) {
  if (logits.empty()) throw DimensionError("softmax: empty input");
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return SimplexWeights::normalized(std::move(out));
}

SimplexWeights weighted_softmax(std::span<const double> logits, const SimplexWeights& a) {
  if (logits.size() != a.size()) throw DimensionError("weighted_softmax: size mismatch");
  // Max over atoms that carry mass; zero-weight atoms get exactly zero.
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (a[i] > 0.0) top = std::max(top, logits[i]);
  if (!std::isfinite(top)) throw DegenerateInputError("weighted_softmax: all weights are zero");
  std::vector<double> out(logits.size(), 0.0);
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (a[i] > 0.0) out[i] = a[i] * std::exp(logits[i] - top);
  return SimplexWeights::normalized(std::move(out));
}

}  // namespace lipattn
