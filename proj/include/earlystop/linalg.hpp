#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace earlystop {

using Vector = std::vector<double>;

// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::span<const double> data() const noexcept { return data_; }

  Matrix transposed() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// out = A x
Vector multiply(const Matrix& a, std::span<const double> x);
// out = A^T x
Vector multiply_transposed(const Matrix& a, std::span<const double> x);
Matrix multiply(const Matrix& a, const Matrix& b);

double frobenius_norm(const Matrix& a);
double max_abs_entry_diff(const Matrix& a, const Matrix& b);

struct JacobiOptions {
  double relative_tolerance = 1e-12;  // off(A)_F < tol * ||A||_F
  int max_sweeps = 100;
};

// Eigen-pairs sorted by eigenvalue, largest first. Row k of
// `eigenvectors_by_row` is the unit eigenvector of `eigenvalues[k]`.
struct SymmetricEigen {
  Vector eigenvalues;
  Matrix eigenvectors_by_row;
  int sweeps = 0;
};

// Cyclic Jacobi rotations. Throws NumericalError when max_sweeps is hit.
SymmetricEigen jacobi_eigen(const Matrix& symmetric, const JacobiOptions& options = {});

}  // namespace earlystop
