#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace lipattn {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
///
/// The checked constructor rejects non-finite entries; the zero-filled
/// constructor is used for accumulation buffers.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> diag);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return entries_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return entries_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return entries_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {entries_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {entries_.data() + r * cols_, cols_};
  }

  std::span<const double> entries() const noexcept { return entries_; }
  std::span<double> entries() noexcept { return entries_; }

  Matrix transpose() const;
  double frobenius_norm() const;
  bool all_finite() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> entries_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);
Matrix operator*(const Matrix& a, const Matrix& b);

/// a * bᵀ without materializing the transpose.
Matrix multiply_transposed(const Matrix& a, const Matrix& b);
/// aᵀ * b without materializing the transpose.
Matrix transposed_multiply(const Matrix& a, const Matrix& b);

Vector matvec(const Matrix& m, std::span<const double> x);
Vector matvec_transposed(const Matrix& m, std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
/// Frobenius inner product ⟨a, b⟩.
double inner(const Matrix& a, const Matrix& b);

}  // namespace lipattn
