#include "earlystop/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "earlystop/errors.hpp"
#include "earlystop/simd.hpp"

namespace earlystop {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Vector multiply(const Matrix& a, std::span<const double> x) {
  if (x.size() != a.cols()) throw DimensionMismatch("matrix-vector size mismatch");
  Vector out(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) out[i] = simd::dot(a.row(i), x);
  return out;
}

Vector multiply_transposed(const Matrix& a, std::span<const double> x) {
  if (x.size() != a.rows()) throw DimensionMismatch("matrix-vector size mismatch");
  Vector out(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) simd::axpy(out, x[i], a.row(i));
  return out;
}

Matrix multiply(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw DimensionMismatch("matrix-matrix size mismatch");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) simd::axpy(dst, a(i, k), b.row(k));
  }
  return out;
}

double frobenius_norm(const Matrix& a) {
  const auto d = a.data();
  return std::sqrt(simd::dot(d, d));
}

double max_abs_entry_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionMismatch("shape mismatch");
  double worst = 0.0;
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) worst = std::max(worst, std::abs(da[i] - db[i]));
  return worst;
}

namespace {

double off_diagonal_norm(const Matrix& a) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j) acc += 2.0 * a(i, j) * a(i, j);
  return std::sqrt(acc);
}

}  // namespace

SymmetricEigen jacobi_eigen(const Matrix& symmetric, const JacobiOptions& options) {
  const std::size_t n = symmetric.rows();
  if (symmetric.cols() != n) throw DimensionMismatch("jacobi_eigen needs a square matrix");

  Matrix a = symmetric;
  // Rows of vt are the current eigenvector estimates (V^T), so rotations stay contiguous.
  Matrix vt = Matrix::identity(n);
  const double scale = frobenius_norm(a);
  const double target = options.relative_tolerance * scale;

  int sweep = 0;
  while (off_diagonal_norm(a) >= target && scale > 0.0) {
    if (sweep >= options.max_sweeps) {
      throw NumericalError("Jacobi eigensolver did not converge", sweep);
    }
    ++sweep;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::hypot(theta, 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        // Rows p and q of A' = J^T A J (off the 2x2 block), then mirror into columns.
        simd::rotate(a.row(p), a.row(q), c, s);
        for (std::size_t k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          a(k, p) = a(p, k);
          a(k, q) = a(q, k);
        }
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;

        simd::rotate(vt.row(p), vt.row(q), c, s);
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  SymmetricEigen out;
  out.sweeps = sweep;
  out.eigenvalues.resize(n);
  out.eigenvectors_by_row = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    out.eigenvalues[k] = a(order[k], order[k]);
    const auto src = vt.row(order[k]);
    std::copy(src.begin(), src.end(), out.eigenvectors_by_row.row(k).begin());
  }
  return out;
}

}  // namespace earlystop
