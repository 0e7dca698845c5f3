#include "lipattn/generators.hpp"

#include <bit>
#include <cfloat>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "lipattn/bounds.hpp"
#include "lipattn/error.hpp"
#include "lipattn/linalg.hpp"

namespace lipattn {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

EigenReport require_real_spectrum(const Matrix& a) {
  EigenReport report = real_eigenpairs(a);
  if (report.empty_flag) throw EmptySpectrumError("A has no real eigenvalue");
  return report;
}

void require_radius(double radius) {
  if (!(radius >= 0.0) || !std::isfinite(radius)) {
    throw std::invalid_argument("radius must be finite and nonnegative");
  }
}

// Rows: first * u, then (n - 1) copies of rest * u.
TokenSequence two_cluster(const Vector& u, double first, double rest, std::size_t n) {
  Matrix x(n, u.size());
  for (std::size_t c = 0; c < u.size(); ++c) {
    x(0, c) = first * u[c];
    for (std::size_t i = 1; i < n; ++i) x(i, c) = rest * u[c];
  }
  return TokenSequence(std::move(x));
}

bool positive_case(const EigenReport& report) { return report.gamma_top >= -8.0 * report.gamma_bottom; }

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  Matrix m(rows, cols);
  for (double& v : m.entries()) v = normal(rng);
  return m;
}

Vector gaussian_vector(std::size_t size, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  Vector v(size);
  for (double& e : v) e = normal(rng);
  return v;
}

void fill_unit_ball(Matrix& x, double radius, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double d = static_cast<double>(x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto row = x.row(i);
    double len = 0.0;
    do {
      for (double& v : row) v = normal(rng);
      len = norm2(row);
    } while (len == 0.0);
    const double r = radius * std::pow(uniform(rng), 1.0 / d);
    for (double& v : row) v *= r / len;
  }
}

}  // namespace

std::string_view to_string(CaseTag tag) noexcept {
  return tag == CaseTag::PositiveEigenvalue ? "positive-eigenvalue" : "negative-eigenvalue";
}

std::uint64_t seed_hash(std::initializer_list<std::uint64_t> parts) noexcept {
  // Each part is absorbed into the full mixed output, so the chain is order
  // sensitive and distinct tuples collide only by accident of the mixer.
  std::uint64_t state = 0x6A09E667F3BCC908ULL;
  std::uint64_t out = splitmix64(state);
  for (std::uint64_t p : parts) {
    state = out ^ p;
    out = splitmix64(state);
  }
  return out;
}

std::uint64_t seed_bits(double value) noexcept { return std::bit_cast<std::uint64_t>(value == 0.0 ? 0.0 : value); }

AdversarialConfig prop32_config(const AttentionParams& p, double radius, std::size_t n) {
  require_radius(radius);
  if (n < 2) throw std::invalid_argument("prop32_config needs n >= 2");
  const EigenReport report = require_real_spectrum(p.bilinear());

  const bool has_pos = report.gamma_top >= 0.0;
  const bool has_neg = report.gamma_bottom < 0.0;
  const double lb_pos = has_pos ? lower_witness_positive(n, radius, report.gamma_top) : -1.0;
  const double lb_neg = has_neg ? lower_witness_negative(n, radius, report.gamma_bottom) : -1.0;

  AdversarialConfig cfg;
  cfg.radius = radius;
  if (lb_pos >= lb_neg) {
    cfg.x = two_cluster(report.unit_vector_top, radius, radius / 2.0, n);
    cfg.case_tag = CaseTag::PositiveEigenvalue;
    cfg.expected_lower_bound = lb_pos;
  } else {
    cfg.x = two_cluster(report.unit_vector_bottom, radius, -radius, n);
    cfg.case_tag = CaseTag::NegativeEigenvalue;
    cfg.expected_lower_bound = lb_neg;
  }
  return cfg;
}

AdversarialConfig prop35_weighted_config(const AttentionParams& p, double radius) {
  require_radius(radius);
  const EigenReport report = require_real_spectrum(p.bilinear());
  const std::size_t d = p.model_dim();

  AdversarialConfig cfg;
  cfg.radius = radius;
  cfg.case_tag = positive_case(report) ? CaseTag::PositiveEigenvalue : CaseTag::NegativeEigenvalue;
  if (radius == 0.0) {
    cfg.x = TokenSequence(2, d);
    cfg.weights = SimplexWeights::uniform(2);
    cfg.expected_lower_bound = 0.0;
    return cfg;
  }

  const bool pos = cfg.case_tag == CaseTag::PositiveEigenvalue;
  const double c = pos ? report.gamma_top / 8.0 : std::abs(report.gamma_bottom);
  const double small = std::exp(-2.0 * c * radius * radius);
  if (small < DBL_MIN) {
    throw LimitExceededError("weight exp(-2 C R^2) underflows at R = " + std::to_string(radius));
  }
  if (pos) {
    cfg.x = two_cluster(report.unit_vector_top, radius, radius / 2.0, 2);
    cfg.weights = SimplexWeights({small, 1.0 - small});
  } else {
    cfg.x = two_cluster(report.unit_vector_bottom, radius, -radius, 2);
    cfg.weights = SimplexWeights({1.0 - small, small});
  }
  cfg.expected_lower_bound = lower_prop35(radius, c);
  return cfg;
}

AdversarialConfig section52_adversarial(const MultiHeadParams& mp, std::size_t head_index, double radius,
                                        std::size_t n) {
  require_radius(radius);
  if (n < 2) throw std::invalid_argument("section52_adversarial needs n >= 2");
  if (head_index >= mp.head_count()) throw std::out_of_range("head index out of range");
  const EigenReport report = require_real_spectrum(mp.head(head_index).bilinear());

  AdversarialConfig cfg;
  cfg.radius = radius;
  if (positive_case(report)) {
    cfg.x = two_cluster(report.unit_vector_top, radius, radius / 2.0, n);
    cfg.case_tag = CaseTag::PositiveEigenvalue;
    cfg.expected_lower_bound = lower_witness_positive(n, radius, report.gamma_top);
  } else {
    cfg.x = two_cluster(report.unit_vector_bottom, radius, -radius, n);
    cfg.case_tag = CaseTag::NegativeEigenvalue;
    cfg.expected_lower_bound = lower_witness_negative(n, radius, report.gamma_bottom);
  }
  return cfg;
}

TokenSequence quadratic_growth_config(double radius, std::size_t n, std::size_t d) {
  require_radius(radius);
  if (n < 3) throw std::invalid_argument("quadratic_growth_config needs n >= 3");
  if (d < 1) throw DimensionError("quadratic_growth_config needs d >= 1");
  const std::size_t j = (n + 1) / 2;
  Matrix x(n, d);
  for (std::size_t i = 1; i < n; ++i) x(i, 0) = i < j ? radius : -radius;
  return TokenSequence(std::move(x));
}

GenericConfig random_generic_config(std::size_t n, std::size_t d, std::uint64_t seed, const Matrix& a,
                                    const GenericOptions& opts) {
  if (n == 0 || d == 0) throw DimensionError("random_generic_config needs n, d >= 1");
  if (a.rows() != d || a.cols() != d) throw DimensionError("A must be d x d");
  if (a.frobenius_norm() == 0.0) throw std::invalid_argument("A must be nonzero");

  std::mt19937_64 rng(seed);
  Matrix x(n, d);
  std::vector<std::size_t> argmax(n);
  for (std::size_t attempt = 1; attempt <= opts.max_attempts; ++attempt) {
    fill_unit_ball(x, 1.0, rng);
    double worst_gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const Vector ax = matvec(a, x.row(i));
      const std::size_t last = opts.masked ? i + 1 : n;
      double top = -std::numeric_limits<double>::infinity();
      double second = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < last; ++j) {
        const double s = dot(ax, x.row(j));
        if (s > top) {
          second = top;
          top = s;
          argmax[i] = j;
        } else if (s > second) {
          second = s;
        }
      }
      worst_gap = std::min(worst_gap, top - second);
    }
    if (worst_gap > opts.margin) {
      return GenericConfig{TokenSequence(x), argmax, worst_gap, attempt};
    }
  }
  throw LimitExceededError("random_generic_config: no draw with margin above " + std::to_string(opts.margin) +
                           " in " + std::to_string(opts.max_attempts) + " attempts");
}

AttentionParams random_params(std::size_t d, std::size_t k, double scale, std::uint64_t seed, bool with_biases) {
  if (d == 0 || k == 0) throw DimensionError("random_params needs d, k >= 1");
  std::mt19937_64 rng(seed);
  const double dd = static_cast<double>(d);
  const double qk_std = scale / std::pow(dd, 0.25);
  const double v_std = scale / std::sqrt(dd);
  Matrix q = gaussian_matrix(k, d, qk_std, rng);
  Matrix key = gaussian_matrix(k, d, qk_std, rng);
  Matrix v = gaussian_matrix(k, d, v_std, rng);
  std::optional<Biases> biases;
  if (with_biases) {
    Biases b;
    b.query = gaussian_vector(k, v_std, rng);
    b.key = gaussian_vector(k, v_std, rng);
    b.value = gaussian_vector(k, v_std, rng);
    biases = std::move(b);
  }
  return AttentionParams(std::move(q), std::move(key), std::move(v), std::move(biases));
}

MultiHeadParams random_multi_head(std::size_t d, std::size_t heads, double scale, std::uint64_t seed) {
  if (heads == 0 || d % heads != 0) throw DimensionError("head count must divide d");
  const std::size_t k = d / heads;
  std::vector<AttentionParams> hs;
  std::vector<Matrix> ws;
  std::mt19937_64 rng(seed_hash({seed, 0x5752ULL}));
  for (std::size_t h = 0; h < heads; ++h) {
    hs.push_back(random_params(d, k, scale, seed_hash({seed, h})));
    ws.push_back(gaussian_matrix(d, k, scale / std::sqrt(static_cast<double>(d)), rng));
  }
  return MultiHeadParams(std::move(hs), std::move(ws));
}

TokenSequence random_ball(std::size_t n, std::size_t d, double radius, std::uint64_t seed) {
  require_radius(radius);
  if (n == 0 || d == 0) throw DimensionError("random_ball needs n, d >= 1");
  std::mt19937_64 rng(seed);
  Matrix x(n, d);
  fill_unit_ball(x, radius, rng);
  return TokenSequence(std::move(x));
}

}  // namespace lipattn
