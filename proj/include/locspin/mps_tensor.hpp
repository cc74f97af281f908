#pragma once

// Rank-3 MPS tensors stored as one Dl x Dr matrix per physical index.

#include <cstdint>
#include <random>
#include <vector>

#include "locspin/linalg.hpp"

namespace locspin {

using MpsTensor = std::vector<Matrix>;

inline int phys_dim(const MpsTensor& t) { return static_cast<int>(t.size()); }
inline Eigen::Index left_dim(const MpsTensor& t) { return t.empty() ? 0 : t[0].rows(); }
inline Eigen::Index right_dim(const MpsTensor& t) { return t.empty() ? 0 : t[0].cols(); }

inline void check_tensor(const MpsTensor& t, const char* where) {
  if (t.empty()) throw LinalgError(std::string(where) + ": empty tensor");
  for (const Matrix& m : t)
    if (m.rows() != t[0].rows() || m.cols() != t[0].cols())
      throw LinalgError(std::string(where) + ": ragged tensor");
}

inline MpsTensor zero_tensor(int d, Eigen::Index dl, Eigen::Index dr) {
  return MpsTensor(static_cast<std::size_t>(d), Matrix::Zero(dl, dr));
}

inline MpsTensor random_tensor(int d, Eigen::Index dl, Eigen::Index dr, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  MpsTensor t = zero_tensor(d, dl, dr);
  for (Matrix& m : t)
    for (Eigen::Index j = 0; j < dr; ++j)
      for (Eigen::Index i = 0; i < dl; ++i) m(i, j) = cplx(normal(rng), normal(rng));
  return t;
}

inline double squared_norm(const MpsTensor& t) {
  double s = 0.0;
  for (const Matrix& m : t) s += m.squaredNorm();
  return s;
}

inline double norm(const MpsTensor& t) { return std::sqrt(squared_norm(t)); }

/// Frobenius inner product sum_s Tr(a^s^dag b^s).
inline cplx inner(const MpsTensor& a, const MpsTensor& b) {
  cplx s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i].cwiseProduct(b[i].conjugate()).sum();
  return std::conj(s);
}

inline MpsTensor operator+(const MpsTensor& a, const MpsTensor& b) {
  MpsTensor r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += b[i];
  return r;
}

inline MpsTensor operator-(const MpsTensor& a, const MpsTensor& b) {
  MpsTensor r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
  return r;
}

inline MpsTensor operator*(cplx c, const MpsTensor& a) {
  MpsTensor r = a;
  for (Matrix& m : r) m *= c;
  return r;
}

inline MpsTensor left_multiply(const Matrix& x, const MpsTensor& t) {
  MpsTensor r;
  r.reserve(t.size());
  for (const Matrix& m : t) r.push_back(x * m);
  return r;
}

inline MpsTensor right_multiply(const MpsTensor& t, const Matrix& x) {
  MpsTensor r;
  r.reserve(t.size());
  for (const Matrix& m : t) r.push_back(m * x);
  return r;
}

/// (d*Dl) x Dr matrix with the physical index as the slow row block.
inline Matrix left_stack(const MpsTensor& t) {
  const Eigen::Index dl = left_dim(t), dr = right_dim(t);
  Matrix s(static_cast<Eigen::Index>(t.size()) * dl, dr);
  for (std::size_t i = 0; i < t.size(); ++i) s.middleRows(static_cast<Eigen::Index>(i) * dl, dl) = t[i];
  return s;
}

inline MpsTensor from_left_stack(const Matrix& s, int d) {
  const Eigen::Index dl = s.rows() / d;
  MpsTensor t;
  for (int i = 0; i < d; ++i) t.push_back(s.middleRows(i * dl, dl));
  return t;
}

/// Dl x (d*Dr) matrix with the physical index as the slow column block.
inline Matrix right_stack(const MpsTensor& t) {
  const Eigen::Index dl = left_dim(t), dr = right_dim(t);
  Matrix s(dl, static_cast<Eigen::Index>(t.size()) * dr);
  for (std::size_t i = 0; i < t.size(); ++i) s.middleCols(static_cast<Eigen::Index>(i) * dr, dr) = t[i];
  return s;
}

inline MpsTensor from_right_stack(const Matrix& s, int d) {
  const Eigen::Index dr = s.cols() / d;
  MpsTensor t;
  for (int i = 0; i < d; ++i) t.push_back(s.middleCols(i * dr, dr));
  return t;
}

/// Merges two neighbouring tensors into one on the product space, physical
/// index s*d2 + t.
inline MpsTensor merge(const MpsTensor& a, const MpsTensor& b) {
  MpsTensor r;
  for (const Matrix& x : a)
    for (const Matrix& y : b) r.push_back(x * y);
  return r;
}

/// Acts with a one-site operator on the physical leg: out^s' = sum_s o(s',s) t^s.
inline MpsTensor apply_site_operator(const Matrix& o, const MpsTensor& t) {
  MpsTensor r = zero_tensor(phys_dim(t), left_dim(t), right_dim(t));
  for (int sp = 0; sp < phys_dim(t); ++sp)
    for (int s = 0; s < phys_dim(t); ++s)
      if (o(sp, s) != cplx(0.0)) r[sp] += o(sp, s) * t[s];
  return r;
}

inline Matrix left_isometry_defect(const MpsTensor& t) {
  Matrix s = Matrix::Zero(right_dim(t), right_dim(t));
  for (const Matrix& m : t) s += m.adjoint() * m;
  return s - Matrix::Identity(right_dim(t), right_dim(t));
}

inline Matrix right_isometry_defect(const MpsTensor& t) {
  Matrix s = Matrix::Zero(left_dim(t), left_dim(t));
  for (const Matrix& m : t) s += m * m.adjoint();
  return s - Matrix::Identity(left_dim(t), left_dim(t));
}

}  // namespace locspin
