#pragma once

// Spin operators with basis states ordered by descending m.

#include "locspin/linalg.hpp"

namespace locspin::spin {

inline int dimension(double s) { return static_cast<int>(std::lround(2.0 * s)) + 1; }

inline Matrix sz(double s) {
  const int d = dimension(s);
  Matrix m = Matrix::Zero(d, d);
  for (int i = 0; i < d; ++i) m(i, i) = s - i;
  return m;
}

inline Matrix splus(double s) {
  const int d = dimension(s);
  Matrix m = Matrix::Zero(d, d);
  for (int i = 1; i < d; ++i) {
    const double mz = s - i;
    m(i - 1, i) = std::sqrt(s * (s + 1) - mz * (mz + 1));
  }
  return m;
}

inline Matrix sminus(double s) { return splus(s).adjoint(); }
inline Matrix sx(double s) { return 0.5 * (splus(s) + sminus(s)); }
inline Matrix sy(double s) { return cplx(0.0, -0.5) * (splus(s) - sminus(s)); }

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix r(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) r.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return r;
}

inline Matrix identity(int d) { return Matrix::Identity(d, d); }

/// S_1 . S_2 on the product space of two spins.
inline Matrix heisenberg(double s1, double s2) {
  return kron(sz(s1), sz(s2)) + 0.5 * (kron(splus(s1), sminus(s2)) + kron(sminus(s1), splus(s2)));
}

/// Pauli matrices in the (up, down) basis.
inline Matrix pauli_x() { return 2.0 * sx(0.5); }
inline Matrix pauli_y() { return 2.0 * sy(0.5); }
inline Matrix pauli_z() { return 2.0 * sz(0.5); }
inline Matrix sigma_plus() { return splus(0.5); }
inline Matrix sigma_minus() { return sminus(0.5); }

}  // namespace locspin::spin
