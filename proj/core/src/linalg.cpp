#include "lipattn/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "lipattn/error.hpp"

namespace lipattn {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void require_finite(const Matrix& m, const char* who) {
  if (!m.all_finite()) throw DegenerateInputError(std::string(who) + ": non-finite input");
}

// Column-major copy of m (or of its transpose when that has more rows),
// so that the Jacobi rotations act on contiguous columns.
struct ColumnStore {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;
  double* col(std::size_t j) { return data.data() + j * rows; }
};

ColumnStore tall_columns(const Matrix& m) {
  ColumnStore s;
  const bool flip = m.rows() < m.cols();
  s.rows = flip ? m.cols() : m.rows();
  s.cols = flip ? m.rows() : m.cols();
  s.data.resize(s.rows * s.cols);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (flip)
        s.data[i * s.rows + j] = m(i, j);
      else
        s.data[j * s.rows + i] = m(i, j);
    }
  return s;
}

double sign_of(double magnitude, double sign_source) {
  return sign_source >= 0.0 ? std::abs(magnitude) : -std::abs(magnitude);
}

// Householder reduction to upper Hessenberg form, in place.
void reduce_to_hessenberg(Matrix& a) {
  const std::size_t n = a.rows();
  if (n < 3) return;
  Vector v(n);
  for (std::size_t k = 0; k + 2 < n; ++k) {
    double scale = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) scale += std::abs(a(i, k));
    if (scale == 0.0) continue;
    double sigma = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) {
      v[i] = a(i, k) / scale;
      sigma += v[i] * v[i];
    }
    const double alpha = -sign_of(std::sqrt(sigma), v[k + 1]);
    v[k + 1] -= alpha;
    double vnorm2 = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) vnorm2 += v[i] * v[i];
    if (vnorm2 == 0.0) continue;
    // A <- (I - 2 v v^T / |v|^2) A (I - 2 v v^T / |v|^2)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = k + 1; i < n; ++i) s += v[i] * a(i, j);
      s *= 2.0 / vnorm2;
      for (std::size_t i = k + 1; i < n; ++i) a(i, j) -= s * v[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = k + 1; j < n; ++j) s += a(i, j) * v[j];
      s *= 2.0 / vnorm2;
      for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= s * v[j];
    }
    a(k + 1, k) = alpha * scale;
    for (std::size_t i = k + 2; i < n; ++i) a(i, k) = 0.0;
  }
}

// Diagonal similarity scaling by powers of two (Parlett-Reinsch balancing).
void balance(Matrix& a) {
  const std::size_t n = a.rows();
  constexpr double radix = 2.0;
  constexpr double sqrdx = radix * radix;
  bool done = false;
  while (!done) {
    done = true;
    for (std::size_t i = 0; i < n; ++i) {
      double r = 0.0;
      double c = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::abs(a(j, i));
        r += std::abs(a(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      double g = r / radix;
      double f = 1.0;
      const double s = c + r;
      while (c < g) {
        f *= radix;
        c *= sqrdx;
      }
      g = r * radix;
      while (c > g) {
        f /= radix;
        c /= sqrdx;
      }
      if ((c + r) / f < 0.95 * s) {
        done = false;
        g = 1.0 / f;
        for (std::size_t j = 0; j < n; ++j) a(i, j) *= g;
        for (std::size_t j = 0; j < n; ++j) a(j, i) *= f;
      }
    }
  }
}

// Francis double-shift QR on an upper Hessenberg matrix (destroys h).
std::vector<std::pair<double, double>> hessenberg_qr(Matrix& h) {
  const int n = static_cast<int>(h.rows());
  std::vector<std::pair<double, double>> roots(static_cast<std::size_t>(n));
  auto A = [&h](int i, int j) -> double& {
    return h(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  };
  double anorm = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = std::max(i - 1, 0); j < n; ++j) anorm += std::abs(A(i, j));

  int nn = n - 1;
  double t = 0.0;
  while (nn >= 0) {
    int its = 0;
    int l = 0;
    do {
      for (l = nn; l >= 1; --l) {
        double s = std::abs(A(l - 1, l - 1)) + std::abs(A(l, l));
        if (s == 0.0) s = anorm;
        if (std::abs(A(l, l - 1)) + s == s) {
          A(l, l - 1) = 0.0;
          break;
        }
      }
      double x = A(nn, nn);
      if (l == nn) {
        roots[static_cast<std::size_t>(nn)] = {x + t, 0.0};
        --nn;
      } else {
        double y = A(nn - 1, nn - 1);
        double w = A(nn, nn - 1) * A(nn - 1, nn);
        if (l == nn - 1) {
          const double p = 0.5 * (y - x);
          const double q = p * p + w;
          double z = std::sqrt(std::abs(q));
          x += t;
          if (q >= 0.0) {
            z = p + sign_of(z, p);
            const double hi = x + z;
            const double lo = z != 0.0 ? x - w / z : hi;
            roots[static_cast<std::size_t>(nn - 1)] = {hi, 0.0};
            roots[static_cast<std::size_t>(nn)] = {lo, 0.0};
          } else {
            roots[static_cast<std::size_t>(nn - 1)] = {x + p, z};
            roots[static_cast<std::size_t>(nn)] = {x + p, -z};
          }
          nn -= 2;
        } else {
          if (its == 60) throw LimitExceededError("eigenvalues: QR iteration did not converge");
          if (its == 10 || its == 20 || its == 40) {
            t += x;
            for (int i = 0; i <= nn; ++i) A(i, i) -= x;
            const double s = std::abs(A(nn, nn - 1)) + std::abs(A(nn - 1, nn - 2));
            x = y = 0.75 * s;
            w = -0.4375 * s * s;
          }
          ++its;
          int m = nn - 2;
          double p = 0.0, q = 0.0, r = 0.0, z = 0.0;
          for (; m >= l; --m) {
            z = A(m, m);
            r = x - z;
            const double s0 = y - z;
            p = (r * s0 - w) / A(m + 1, m) + A(m, m + 1);
            q = A(m + 1, m + 1) - z - r - s0;
            r = A(m + 2, m + 1);
            const double s = std::abs(p) + std::abs(q) + std::abs(r);
            p /= s;
            q /= s;
            r /= s;
            if (m == l) break;
            const double u = std::abs(A(m, m - 1)) * (std::abs(q) + std::abs(r));
            const double v = std::abs(p) * (std::abs(A(m - 1, m - 1)) + std::abs(z) + std::abs(A(m + 1, m + 1)));
            if (u + v == v) break;
          }
          for (int i = m + 2; i <= nn; ++i) {
            A(i, i - 2) = 0.0;
            if (i != m + 2) A(i, i - 3) = 0.0;
          }
          for (int k = m; k <= nn - 1; ++k) {
            if (k != m) {
              p = A(k, k - 1);
              q = A(k + 1, k - 1);
              r = 0.0;
              if (k != nn - 1) r = A(k + 2, k - 1);
              x = std::abs(p) + std::abs(q) + std::abs(r);
              if (x != 0.0) {
                p /= x;
                q /= x;
                r /= x;
              }
            }
            const double s = sign_of(std::sqrt(p * p + q * q + r * r), p);
            if (s == 0.0) continue;
            if (k == m) {
              if (l != m) A(k, k - 1) = -A(k, k - 1);
            } else {
              A(k, k - 1) = -s * x;
            }
            p += s;
            x = p / s;
            y = q / s;
            z = r / s;
            q /= p;
            r /= p;
            for (int j = k; j <= nn; ++j) {
              p = A(k, j) + q * A(k + 1, j);
              if (k != nn - 1) {
                p += r * A(k + 2, j);
                A(k + 2, j) -= p * z;
              }
              A(k + 1, j) -= p * y;
              A(k, j) -= p * x;
            }
            const int mmin = nn < k + 3 ? nn : k + 3;
            for (int i = l; i <= mmin; ++i) {
              p = x * A(i, k) + y * A(i, k + 1);
              if (k != nn - 1) {
                p += z * A(i, k + 2);
                A(i, k + 2) -= p * r;
              }
              A(i, k + 1) -= p * q;
              A(i, k) -= p;
            }
          }
        }
      }
    } while (l < nn - 1);
  }
  return roots;
}

Vector inverse_iteration(const Matrix& a, double lambda, double scale) {
  const std::size_t n = a.rows();
  Matrix shifted = a;
  for (std::size_t i = 0; i < n; ++i) shifted(i, i) -= lambda;
  // Deterministic, non-degenerate start vector.
  Vector x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = 1.0 + 0.37 * static_cast<double>(i % 7) - 0.11 * static_cast<double>(i % 3);
  const double floor = std::max(scale, 1.0) * kEps;
  Vector best = x;
  double best_residual = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 6; ++it) {
    x = lu_solve(shifted, x, floor);
    const double nx = norm2(x);
    if (!(nx > 0.0) || !std::isfinite(nx)) break;
    for (double& v : x) v /= nx;
    const Vector ax = matvec(a, x);
    double res = 0.0;
    for (std::size_t i = 0; i < n; ++i) res += (ax[i] - lambda * x[i]) * (ax[i] - lambda * x[i]);
    res = std::sqrt(res);
    if (res < best_residual) {
      best_residual = res;
      best = x;
    }
  }
  const double nb = norm2(best);
  for (double& v : best) v /= nb;
  return best;
}

}  // namespace

Vector singular_values(const Matrix& m) {
  require_finite(m, "singular_values");
  if (m.empty()) return {};
  ColumnStore s = tall_columns(m);
  const std::size_t rows = s.rows;
  const std::size_t cols = s.cols;
  constexpr int kMaxSweeps = 80;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < cols; ++p) {
      for (std::size_t q = p + 1; q < cols; ++q) {
        double* cp = s.col(p);
        double* cq = s.col(q);
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < rows; ++i) {
          alpha += cp[i] * cp[i];
          beta += cq[i] * cq[i];
          gamma += cp[i] * cq[i];
        }
        if (gamma == 0.0 || std::abs(gamma) <= kEps * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = sign_of(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = c * t;
        for (std::size_t i = 0; i < rows; ++i) {
          const double xp = cp[i];
          const double xq = cq[i];
          cp[i] = c * xp - sn * xq;
          cq[i] = sn * xp + c * xq;
        }
      }
    }
    if (!rotated) break;
  }
  Vector sv(cols);
  for (std::size_t j = 0; j < cols; ++j) sv[j] = norm2(std::span<const double>(s.col(j), rows));
  std::sort(sv.begin(), sv.end(), std::greater<>());
  return sv;
}

double spectral_norm(const Matrix& m) {
  const Vector sv = singular_values(m);
  return sv.empty() ? 0.0 : sv.front();
}

std::vector<std::pair<double, double>> eigenvalues(const Matrix& a) {
  if (a.rows() != a.cols()) throw DimensionError("eigenvalues: matrix must be square");
  require_finite(a, "eigenvalues");
  if (a.empty()) return {};
  Matrix h = a;
  balance(h);
  reduce_to_hessenberg(h);
  return hessenberg_qr(h);
}

EigenReport real_eigenpairs(const Matrix& a) {
  const auto all = eigenvalues(a);
  const double scale = spectral_norm(a);
  const double threshold = 1e-9 * scale;
  EigenReport report;
  for (const auto& [re, im] : all) {
    if (std::abs(im) <= threshold) report.real_eigenvalues.push_back(re);
  }
  std::sort(report.real_eigenvalues.begin(), report.real_eigenvalues.end(), std::greater<>());
  report.empty_flag = report.real_eigenvalues.empty();
  if (report.empty_flag) return report;
  for (double lambda : report.real_eigenvalues) {
    report.eigenvectors.push_back(inverse_iteration(a, lambda, scale));
  }
  report.gamma_top = report.real_eigenvalues.front();
  report.gamma_bottom = report.real_eigenvalues.back();
  report.unit_vector_top = report.eigenvectors.front();
  report.unit_vector_bottom = report.eigenvectors.back();
  return report;
}

double weighted_operator_norm(const Matrix& l, std::span<const double> weights) {
  const std::size_t n = weights.size();
  if (n == 0 || l.rows() % n != 0 || l.cols() % n != 0) {
    throw DimensionError("weighted_operator_norm: operator blocks do not match weight count");
  }
  for (double w : weights) {
    if (!(w > 0.0)) throw DegenerateInputError("weighted_operator_norm: weights must be strictly positive");
  }
  const std::size_t out_block = l.rows() / n;
  const std::size_t in_block = l.cols() / n;
  Matrix scaled = l;
  for (std::size_t r = 0; r < l.rows(); ++r) {
    const double left = std::sqrt(weights[r / out_block]);
    for (std::size_t c = 0; c < l.cols(); ++c) {
      scaled(r, c) *= left / std::sqrt(weights[c / in_block]);
    }
  }
  return spectral_norm(scaled);
}

Vector lu_solve(Matrix a, Vector b, double pivot_floor) {
  const std::size_t n = a.rows();
  if (a.cols() != n || b.size() != n) throw DimensionError("lu_solve: shape mismatch");
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
      std::swap(b[k], b[piv]);
    }
    if (std::abs(a(k, k)) <= pivot_floor) {
      if (pivot_floor == 0.0) throw DegenerateInputError("lu_solve: singular matrix");
      a(k, k) = a(k, k) >= 0.0 ? pivot_floor : -pivot_floor;
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a(i, k) / a(k, k);
      if (f == 0.0) continue;
      a(i, k) = 0.0;
      for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= f * a(k, j);
      b[i] -= f * b[k];
    }
  }
  Vector x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t j = ii + 1; j < n; ++j) s -= a(ii, j) * x[j];
    x[ii] = s / a(ii, ii);
  }
  return x;
}

}  // namespace lipattn
