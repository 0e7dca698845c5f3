#pragma once

#include <span>
#include <vector>

#include "lipattn/matrix.hpp"

namespace lipattn {

/// Singular values in descending order, by one-sided (Hestenes) Jacobi.
/// Intended for matrices up to roughly 1024 x 1024.
Vector singular_values(const Matrix& m);

/// Largest singular value. Throws DegenerateInputError on non-finite input.
double spectral_norm(const Matrix& m);

/// Real part of the spectrum of a general square matrix.
struct EigenReport {
  Vector real_eigenvalues;  // descending
  double gamma_top = 0.0;
  double gamma_bottom = 0.0;
  Vector unit_vector_top;
  Vector unit_vector_bottom;
  bool empty_flag = true;
  /// One unit eigenvector per entry of real_eigenvalues.
  std::vector<Vector> eigenvectors;
};

/// All eigenvalues (real, imaginary) of a square matrix via Hessenberg
/// reduction and Francis double-shift QR. Order is unspecified.
std::vector<std::pair<double, double>> eigenvalues(const Matrix& a);

/// Eigenvalues with |imag| <= 1e-9 * ||A||_2 are classified as real and
/// paired with a unit eigenvector from inverse iteration.
EigenReport real_eigenpairs(const Matrix& a);

/// Operator norm of a block operator L : (R^d)^n -> (R^k)^n when both
/// sides carry the weighted norm ||X||_a = (sum_i a_i |x_i|^2)^{1/2}.
/// Computed as ||S L S^{-1}||_2 with S scaling block i by sqrt(a_i).
double weighted_operator_norm(const Matrix& l, std::span<const double> weights);

/// Solves A x = b by LU with partial pivoting. Exactly-zero pivots are
/// replaced by `pivot_floor` (used by inverse iteration).
Vector lu_solve(Matrix a, Vector b, double pivot_floor = 0.0);

}  // namespace lipattn
