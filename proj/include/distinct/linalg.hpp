#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace distinct {

/// Row-major dense matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

/// Scales a vector to unit length. Returns false (and leaves it) if it is zero.
bool normalize(std::span<double> v);

/// Eigen-decomposition of a real symmetric matrix.
struct SymmetricEigen {
  std::size_t n = 0;
  std::vector<double> values;   ///< ascending
  std::vector<double> vectors;  ///< row-major n x n; column k pairs with values[k]
};

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops below
/// `tol` (relative to the matrix norm) or `max_sweeps` is reached. Ties in the
/// eigenvalue order keep the original diagonal index order.
SymmetricEigen jacobi_eigen(std::vector<double> a, std::size_t n, double tol = 1e-10,
                            int max_sweeps = 100);

/// Rounds every entry to the nearest float, for lossless f32 storage.
void round_to_float(Matrix& m);

}  // namespace distinct
