#pragma once

// Translation-invariant MPS in mixed canonical form:
//   A_L C = C A_R = A_C,  sum A_L^dag A_L = 1,  sum A_R A_R^dag = 1.
// The fixed points are l = 1, r = C C^dag for A_L and l = C^dag C, r = 1 for A_R.

#include "locspin/linalg.hpp"
#include "locspin/mps_tensor.hpp"
#include "locspin/transfer.hpp"

namespace locspin {

struct UniformMps {
  MpsTensor al, ar, ac;
  Matrix c;
  double energy_density = 0.0;  // per unit cell
  double gradient = 0.0;

  int d() const { return phys_dim(al); }
  Eigen::Index bond() const { return left_dim(al); }
  Matrix right_fixed_point() const { return c * c.adjoint(); }  // of T_AL
  Matrix left_fixed_point() const { return c.adjoint() * c; }   // of T_AR
};

inline Vector to_vector(const MpsTensor& t) {
  const Eigen::Index blk = t[0].size();
  Vector v(static_cast<Eigen::Index>(t.size()) * blk);
  for (std::size_t s = 0; s < t.size(); ++s) v.segment(static_cast<Eigen::Index>(s) * blk, blk) = vec(t[s]);
  return v;
}

inline MpsTensor to_tensor(const Vector& v, int d, Eigen::Index dl, Eigen::Index dr) {
  MpsTensor t;
  for (int s = 0; s < d; ++s) t.push_back(unvec(v.segment(s * dl * dr, dl * dr), dl, dr));
  return t;
}

/// Rotates the gauge so that C is real, diagonal and descending.
inline void diagonalize_center(UniformMps& u) {
  Eigen::BDCSVD<Matrix> svd(u.c, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Matrix& uu = svd.matrixU();
  const Matrix& vv = svd.matrixV();
  for (auto& m : u.al) m = uu.adjoint() * m * uu;
  for (auto& m : u.ar) m = vv.adjoint() * m * vv;
  u.c = svd.singularValues().cast<cplx>().asDiagonal();
  u.ac = right_multiply(u.al, u.c);
}

/// Hermitian positive fixed point from an eigenvector, phase and sign fixed.
inline Matrix hermitian_fixed_point(const Matrix& x) {
  const cplx tr = x.trace();
  Matrix y = std::abs(tr) > 0 ? Matrix(x * (std::abs(tr) / tr)) : x;
  return hermitian_part(y);
}

/// Brings an arbitrary injective tensor A into mixed canonical form,
/// normalized so that the dominant transfer eigenvalue is 1.
inline UniformMps canonicalize(const MpsTensor& a_in, double tol = 1e-13) {
  check_tensor(a_in, "canonicalize");
  const Eigen::Index dim = left_dim(a_in);
  if (right_dim(a_in) != dim) throw LinalgError("canonicalize: tensor must be square in the bond indices");
  const DominantPair dp = dominant_eigenpair(transfer_operator(a_in, a_in), tol, 500);
  const double lambda = std::abs(dp.value);
  MpsTensor a = (1.0 / std::sqrt(lambda)) * a_in;
  Matrix r = hermitian_fixed_point(unvec(dp.right, dim, dim));
  Matrix l = hermitian_fixed_point(unvec_left(dp.left, dim, dim));
  const double norm_lr = pairing(l, r).real();
  if (!(norm_lr > 0)) throw LinalgError("canonicalize: fixed points are not positive");
  l /= std::sqrt(norm_lr);
  r /= std::sqrt(norm_lr);
  const Matrix lsq = sqrt_psd(l);
  const Matrix rsq = sqrt_psd(r);
  const Matrix linv = inv_sqrt(l, 1e-28);
  const Matrix rinv = inv_sqrt(r, 1e-28);
  UniformMps u;
  for (const Matrix& m : a) {
    u.al.push_back(lsq * m * linv);
    u.ar.push_back(rinv * m * rsq);
  }
  u.c = lsq * rsq;
  // polish isometries against rounding
  u.al = from_left_stack(polar_isometry(left_stack(u.al)), phys_dim(a));
  u.ar = from_right_stack(polar_isometry(right_stack(u.ar).adjoint()).adjoint(), phys_dim(a));
  diagonalize_center(u);
  const double cn = u.c.norm();
  u.c /= cn;
  u.ac = right_multiply(u.al, u.c);
  return u;
}

/// Mixed-gauge boundary environments: LIBC built from A_L, RIBC from A_R.
inline BoundaryEnvironments boundary_environments(const UniformMps& u, const Matrix& h,
                                                  double tol = tolerances::linear_solve) {
  const Eigen::Index dim = u.bond();
  const Matrix id = Matrix::Identity(dim, dim);
  return boundary_environments(u.al, id, u.right_fixed_point(), u.ar, u.left_fixed_point(), id, h, tol);
}

/// Energy per unit cell of a two-site (two-cell) term, contracted through A_L A_C.
inline double energy_density(const UniformMps& u, const Matrix& h) {
  const Matrix id = Matrix::Identity(u.bond(), u.bond());
  return operator_transfer_right(h, u.ac, u.ar, u.ac, u.ar, id).trace().real();
}

/// Second contraction route for the energy density: left action on A_L A_L
/// paired with the right fixed point C C^dag.
inline double energy_density_left_route(const UniformMps& u, const Matrix& h) {
  const Matrix id = Matrix::Identity(u.bond(), u.bond());
  return pairing(operator_transfer_left(h, u.al, u.al, u.al, u.al, id), u.right_fixed_point()).real();
}

/// Per-cell fidelity |lambda_1| of the mixed transfer between two uniform states.
inline double fidelity_per_cell(const UniformMps& a, const UniformMps& b) {
  const DominantPair dp = dominant_eigenpair(transfer_operator(a.al, b.al), 1e-12, 500);
  return std::abs(dp.value);
}

inline double max_isometry_defect(const UniformMps& u) {
  return std::max(max_abs(left_isometry_defect(u.al)), max_abs(right_isometry_defect(u.ar)));
}

inline double gauge_defect(const UniformMps& u) {
  double g = 0.0;
  for (int s = 0; s < u.d(); ++s) {
    g = std::max(g, max_abs(u.al[s] * u.c - u.ac[s]));
    g = std::max(g, max_abs(u.c * u.ar[s] - u.ac[s]));
  }
  return g;
}

}  // namespace locspin
