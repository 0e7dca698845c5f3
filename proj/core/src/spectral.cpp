#include "lipattn/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "lipattn/error.hpp"

namespace lipattn {
namespace {

void scale_rows(Matrix& m, const Vector& factors) {
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (double& v : m.row(i)) v *= factors[i];
}

}  // namespace

PowerIterationResult power_iteration(const LinearMap& op, const PowerIterationOptions& opts) {
  if (!(opts.tol > 0.0)) throw std::invalid_argument("power_iteration: tol must be positive");
  if (opts.max_iter < 1) throw std::invalid_argument("power_iteration: max_iter must be >= 1");

  PowerIterationResult result;
  result.seed = opts.seed;

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix u(op.rows, op.in_cols);
  for (double& v : u.entries()) v = normal(rng);
  u *= 1.0 / u.frobenius_norm();

  double previous = 0.0;
  for (std::size_t k = 0; k < opts.max_iter; ++k) {
    const Matrix v = op.adjoint(op.apply(u));
    const double mu = inner(v, u);
    const double vnorm = v.frobenius_norm();
    result.iterations = k + 1;
    if (opts.record_history) result.rayleigh_quotients.push_back(mu);
    result.lipschitz = std::sqrt(std::max(mu, 0.0));
    if (vnorm == 0.0) {
      // J^T J u = 0 for a generic u: the operator vanishes.
      result.converged = true;
      result.final_residual = 0.0;
      return result;
    }
    if (k > 0) {
      const double denom = std::max(mu, 1e-300);
      result.final_residual = std::abs(mu - previous) / denom;
      if (std::abs(mu - previous) <= opts.tol * denom) {
        result.converged = true;
        return result;
      }
    }
    previous = mu;
    u = v * (1.0 / vnorm);
  }
  return result;
}

LinearMap as_linear_map(const JacobianOperator& j) {
  return LinearMap{j.tokens(), j.in_dim(), j.out_dim(), [&j](const Matrix& e) { return j.jvp(e); },
                   [&j](const Matrix& u) { return j.vjp(u); }};
}

LinearMap as_linear_map(const MultiHeadJacobian& j) {
  return LinearMap{j.tokens(), j.in_dim(), j.out_dim(), [&j](const Matrix& e) { return j.jvp(e); },
                   [&j](const Matrix& u) { return j.vjp(u); }};
}

LinearMap as_weighted_linear_map(const JacobianOperator& j) {
  if (!j.weights()) throw std::invalid_argument("weighted Lipschitz: operator carries no weights");
  const SimplexWeights& a = *j.weights();
  if (!a.strictly_positive()) {
    throw DegenerateInputError("weighted Lipschitz: zero weight makes the similarity transform singular");
  }
  Vector root(a.size());
  Vector inv_root(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    root[i] = std::sqrt(a[i]);
    inv_root[i] = 1.0 / root[i];
  }
  // S J S^{-1} and its adjoint S^{-1} J^T S.
  auto apply = [&j, root, inv_root](const Matrix& e) {
    Matrix in = e;
    scale_rows(in, inv_root);
    Matrix out = j.jvp(in);
    scale_rows(out, root);
    return out;
  };
  auto adjoint = [&j, root, inv_root](const Matrix& u) {
    Matrix in = u;
    scale_rows(in, root);
    Matrix out = j.vjp(in);
    scale_rows(out, inv_root);
    return out;
  };
  return LinearMap{j.tokens(), j.in_dim(), j.out_dim(), apply, adjoint};
}

PowerIterationResult local_lipschitz(const JacobianOperator& j, const PowerIterationOptions& opts) {
  return power_iteration(as_linear_map(j), opts);
}

PowerIterationResult local_lipschitz_weighted(const JacobianOperator& j, const PowerIterationOptions& opts) {
  return power_iteration(as_weighted_linear_map(j), opts);
}

PowerIterationResult multi_head_local_lipschitz(const TokenSequence& x, const MultiHeadParams& mp,
                                                const PowerIterationOptions& opts) {
  const MultiHeadJacobian j(x, mp);
  return power_iteration(as_linear_map(j), opts);
}

}  // namespace lipattn
