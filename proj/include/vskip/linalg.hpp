#pragma once

#include <cstddef>
#include <vector>

#include "vskip/rng.hpp"

namespace vskip {

// Dense row-major matrix of doubles. Everything in the toy model accumulates
// in double precision.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

  double at(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }
  double& at(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
  const double* row(int r) const { return a.data() + static_cast<std::size_t>(r) * cols; }
  double* row(int r) { return a.data() + static_cast<std::size_t>(r) * cols; }

  static Matrix zeros(int r, int c) { return Matrix(r, c); }
  static Matrix gaussian(int r, int c, double stddev, Rng& rng) {
    Matrix m(r, c);
    for (double& v : m.a) v = rng.normal(0.0, stddev);
    return m;
  }
};

// y = M x
inline void matvec(const Matrix& m, const double* x, double* y) {
  for (int r = 0; r < m.rows; ++r) {
    const double* row = m.row(r);
    double s = 0.0;
    for (int c = 0; c < m.cols; ++c) s += row[c] * x[c];
    y[r] = s;
  }
}

// y += M^T x
inline void matvec_t_add(const Matrix& m, const double* x, double* y) {
  for (int r = 0; r < m.rows; ++r) {
    const double* row = m.row(r);
    const double xr = x[r];
    for (int c = 0; c < m.cols; ++c) y[c] += row[c] * xr;
  }
}

// M += scale * u v^T
inline void add_outer(Matrix& m, const double* u, const double* v, double scale) {
  for (int r = 0; r < m.rows; ++r) {
    double* row = m.row(r);
    const double ur = scale * u[r];
    for (int c = 0; c < m.cols; ++c) row[c] += ur * v[c];
  }
}

}  // namespace vskip
