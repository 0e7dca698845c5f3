#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "lipattn/attention.hpp"
#include "lipattn/jacobian.hpp"
#include "lipattn/matrix.hpp"

namespace lipattn {

struct PowerIterationOptions {
  double tol = 1e-10;
  std::size_t max_iter = 10000;
  std::uint64_t seed = 0;
  bool record_history = false;
};

struct PowerIterationResult {
  double lipschitz = 0.0;  // sqrt of the converged Rayleigh quotient of J^T J
  std::size_t iterations = 0;
  bool converged = false;
  double final_residual = 0.0;  // |mu_k - mu_{k-1}| / mu_k at exit
  std::uint64_t seed = 0;
  std::vector<double> rayleigh_quotients;  // mu_k, only when record_history
};

/// Linear map between n x in_cols and n x out_cols matrices, with adjoint.
struct LinearMap {
  std::size_t rows = 0;
  std::size_t in_cols = 0;
  std::size_t out_cols = 0;
  std::function<Matrix(const Matrix&)> apply;
  std::function<Matrix(const Matrix&)> adjoint;
};

/// Normalized power iteration on J^T J:
///   v_k = J^T J u_k,  mu_k = <v_k, u_k>,  u_{k+1} = v_k / |v_k|_F,
/// from u_0 ~ N(0, 1) (seeded) normalized to unit Frobenius norm. Stops when
/// |mu_k - mu_{k-1}| <= tol * max(mu_k, 1e-300).
PowerIterationResult power_iteration(const LinearMap& op, const PowerIterationOptions& opts);

/// ||D_X f||_2 for any single-head variant. For the weighted variant this is
/// the plain Euclidean operator norm; use local_lipschitz_weighted for the
/// ||.||_a operator norm.
PowerIterationResult local_lipschitz(const JacobianOperator& j, const PowerIterationOptions& opts = {});

/// ||S J S^{-1}||_2 with S = blockdiag(sqrt(a_i)), i.e. the operator norm
/// of the weighted Jacobian under ||X||_a on both sides.
PowerIterationResult local_lipschitz_weighted(const JacobianOperator& j, const PowerIterationOptions& opts = {});

PowerIterationResult multi_head_local_lipschitz(const TokenSequence& x, const MultiHeadParams& mp,
                                                const PowerIterationOptions& opts = {});

LinearMap as_linear_map(const JacobianOperator& j);
LinearMap as_linear_map(const MultiHeadJacobian& j);
/// S J S^{-1} for the weighted variant.
LinearMap as_weighted_linear_map(const JacobianOperator& j);

}  // namespace lipattn
