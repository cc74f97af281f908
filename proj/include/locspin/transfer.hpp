#pragma once

// Transfer operators T_X^Y(M) = sum_s X^s M (Y^s)^dag with ket X and bra Y,
// their left action l -> sum_s (Y^s)^dag l X^s, operator transfer matrices,
// spectral data and the infinite boundary environments.
//
// Left and right "vectors" are D x D matrices paired by (l|r) = Tr(l r).
// When flattened, r is stored as vec(r) and l as vec(l^T), so the pairing is
// the plain bilinear dot product used by LinearOperator.

#include <algorithm>
#include <limits>
#include <vector>

#include "locspin/linalg.hpp"
#include "locspin/mps_tensor.hpp"

namespace locspin {

inline cplx pairing(const Matrix& l, const Matrix& r) { return l.transpose().cwiseProduct(r).sum(); }

inline Matrix transfer_right(const MpsTensor& ket, const MpsTensor& bra, const Matrix& m) {
  if (ket.size() != bra.size()) throw LinalgError("transfer: physical dimension mismatch");
  Matrix out = Matrix::Zero(ket[0].rows(), bra[0].rows());
  for (std::size_t s = 0; s < ket.size(); ++s) out.noalias() += ket[s] * m * bra[s].adjoint();
  return out;
}

inline Matrix transfer_left(const MpsTensor& ket, const MpsTensor& bra, const Matrix& l) {
  if (ket.size() != bra.size()) throw LinalgError("transfer: physical dimension mismatch");
  Matrix out = Matrix::Zero(bra[0].cols(), ket[0].cols());
  for (std::size_t s = 0; s < ket.size(); ++s) out.noalias() += bra[s].adjoint() * l * ket[s];
  return out;
}

/// Two-site operator transfer: sum h(s't',st) X^s Y^t M (X'^s' Y'^t')^dag.
/// h acts on the product space with index s*dY + t.
inline Matrix operator_transfer_right(const Matrix& h, const MpsTensor& x, const MpsTensor& y,
                                      const MpsTensor& xb, const MpsTensor& yb, const Matrix& m) {
  const int dx = phys_dim(x), dy = phys_dim(y);
  if (h.rows() != dx * dy || h.cols() != dx * dy || phys_dim(xb) != dx || phys_dim(yb) != dy)
    throw LinalgError("operator_transfer: dimension mismatch");
  const Eigen::Index rows = x[0].rows(), cols = m.cols();
  Matrix k(dx * dy, rows * cols);
  for (int s = 0; s < dx; ++s)
    for (int t = 0; t < dy; ++t) {
      const Matrix b = x[s] * (y[t] * m);
      k.row(s * dy + t) = Eigen::Map<const Eigen::RowVectorXcd>(b.data(), b.size());
    }
  const Matrix hk = h * k;
  Matrix out = Matrix::Zero(rows, xb[0].rows());
  for (int sp = 0; sp < dx; ++sp)
    for (int tp = 0; tp < dy; ++tp) {
      const Eigen::Index r = sp * dy + tp;
      if (hk.row(r).squaredNorm() == 0.0) continue;
      const Matrix acc = Eigen::Map<const Matrix>(Matrix(hk.row(r).transpose()).data(), rows, cols);
      out.noalias() += acc * (xb[sp] * yb[tp]).adjoint();
    }
  return out;
}

/// Left action of the two-site operator transfer: sum h(s't',st) (X'^s' Y'^t')^dag l X^s Y^t.
inline Matrix operator_transfer_left(const Matrix& h, const MpsTensor& x, const MpsTensor& y,
                                     const MpsTensor& xb, const MpsTensor& yb, const Matrix& l) {
  const int dx = phys_dim(x), dy = phys_dim(y);
  if (h.rows() != dx * dy || h.cols() != dx * dy || phys_dim(xb) != dx || phys_dim(yb) != dy)
    throw LinalgError("operator_transfer: dimension mismatch");
  const Eigen::Index rows = yb[0].cols(), cols = l.cols();
  Matrix q(dx * dy, rows * cols);
  for (int sp = 0; sp < dx; ++sp)
    for (int tp = 0; tp < dy; ++tp) {
      const Matrix b = yb[tp].adjoint() * (xb[sp].adjoint() * l);
      q.row(sp * dy + tp) = Eigen::Map<const Eigen::RowVectorXcd>(b.data(), b.size());
    }
  const Matrix hq = h.transpose() * q;
  Matrix out = Matrix::Zero(rows, y[0].cols());
  for (int s = 0; s < dx; ++s)
    for (int t = 0; t < dy; ++t) {
      const Eigen::Index c = s * dy + t;
      if (hq.row(c).squaredNorm() == 0.0) continue;
      const Matrix acc = Eigen::Map<const Matrix>(Matrix(hq.row(c).transpose()).data(), rows, cols);
      out.noalias() += acc * (x[s] * y[t]);
    }
  return out;
}

/// One-site operator transfer: sum o(s',s) X^s M (X'^s')^dag.
inline Matrix site_transfer_right(const Matrix& o, const MpsTensor& x, const MpsTensor& xb, const Matrix& m) {
  return transfer_right(apply_site_operator(o, x), xb, m);
}

inline Matrix site_transfer_left(const Matrix& o, const MpsTensor& x, const MpsTensor& xb, const Matrix& l) {
  return transfer_left(apply_site_operator(o, x), xb, l);
}

inline Vector vec(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

inline Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

inline Vector vec_left(const Matrix& l) { return vec(l.transpose()); }
inline Matrix unvec_left(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  return unvec(v, cols, rows).transpose();
}

/// The transfer operator as a flattened LinearOperator on D_ket x D_bra matrices.
inline LinearOperator transfer_operator(const MpsTensor& ket, const MpsTensor& bra) {
  check_tensor(ket, "transfer");
  check_tensor(bra, "transfer");
  if (ket.size() != bra.size()) throw LinalgError("transfer: physical dimension mismatch");
  if (left_dim(ket) != right_dim(ket) || left_dim(bra) != right_dim(bra))
    throw LinalgError("transfer_operator: tensors must be square in the bond indices");
  const Eigen::Index dk = left_dim(ket), db = left_dim(bra);
  LinearOperator op;
  op.dim = static_cast<std::size_t>(dk * db);
  op.apply = [ket, bra, dk, db](const Vector& v) { return vec(transfer_right(ket, bra, unvec(v, dk, db))); };
  op.apply_left = [ket, bra, dk, db](const Vector& v) {
    return vec_left(transfer_left(ket, bra, unvec_left(v, db, dk)));
  };
  return op;
}

inline Matrix dense_matrix(const LinearOperator& op) {
  const auto n = static_cast<Eigen::Index>(op.dim);
  Matrix m(n, n);
  for (Eigen::Index j = 0; j < n; ++j) m.col(j) = op.apply(Vector::Unit(n, j));
  return m;
}

// ---------------------------------------------------------------------------
// Spectral data

struct SpectralData {
  std::vector<cplx> values;    // descending magnitude
  std::vector<Matrix> right;   // r_i
  std::vector<Matrix> left;    // l_i with (l_i|r_j) = delta_ij
  double xi = 0.0;             // -1/ln|lambda_2|; 0 if there is no subleading eigenvalue
};

inline double correlation_length(const std::vector<cplx>& values) {
  if (values.size() < 2 || std::abs(values[1]) == 0.0) return 0.0;
  return -1.0 / std::log(std::abs(values[1]));
}

namespace detail {

inline std::vector<Eigen::Index> magnitude_order(const Vector& ev) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(ev.size()));
  for (Eigen::Index i = 0; i < ev.size(); ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    const double ma = std::abs(ev(a)), mb = std::abs(ev(b));
    if (std::abs(ma - mb) > 1e-12 * std::max(1.0, ma)) return ma > mb;
    if (std::abs(ev(a).real() - ev(b).real()) > 1e-12) return ev(a).real() > ev(b).real();
    return ev(a).imag() > ev(b).imag();
  });
  return order;
}

}  // namespace detail

/// Full eigendecomposition of a dense map, eigenvalues sorted by descending
/// magnitude, with biorthonormal left vectors taken from the inverse of the
/// eigenvector matrix. Degenerate clusters are orthonormalized first.
struct DenseSpectrum {
  Vector values;
  Matrix right;  // columns
  Matrix left;   // columns; left.col(i)^T right.col(j) = delta_ij
};

inline DenseSpectrum dense_spectrum(const Matrix& t, double cluster_tol = 1e-8) {
  Eigen::ComplexEigenSolver<Matrix> es(t);
  if (es.info() != Eigen::Success) throw LinalgError("dense_spectrum: eigensolver failed");
  const auto order = detail::magnitude_order(es.eigenvalues());
  const Eigen::Index n = t.rows();
  DenseSpectrum out;
  out.values.resize(n);
  out.right.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values(i) = es.eigenvalues()(order[static_cast<std::size_t>(i)]);
    out.right.col(i) = es.eigenvectors().col(order[static_cast<std::size_t>(i)]);
  }
  for (Eigen::Index i = 0; i < n;) {
    Eigen::Index j = i + 1;
    while (j < n && std::abs(out.values(j) - out.values(i)) < cluster_tol * std::max(1.0, std::abs(out.values(i)))) ++j;
    if (j - i > 1) {
      Eigen::HouseholderQR<Matrix> qr(out.right.middleCols(i, j - i));
      out.right.middleCols(i, j - i) = qr.householderQ() * Matrix::Identity(n, j - i);
      const cplx mean = out.values.segment(i, j - i).mean();
      out.values.segment(i, j - i).setConstant(mean);
    }
    i = j;
  }
  const Matrix inv = out.right.fullPivLu().inverse();
  out.left = inv.transpose();
  return out;
}

inline SpectralData spectral_data(const MpsTensor& ket, const MpsTensor& bra, int m,
                                  bool require_normalized = true, std::size_t dense_limit = 256) {
  const LinearOperator op = transfer_operator(ket, bra);
  const Eigen::Index dk = left_dim(ket), db = left_dim(bra);
  if (m < 1) throw LinalgError("spectral_data: m must be positive");
  m = std::min<int>(m, static_cast<int>(op.dim));
  SpectralData out;
  if (op.dim <= dense_limit) {
    const DenseSpectrum ds = dense_spectrum(dense_matrix(op));
    for (int i = 0; i < m; ++i) {
      out.values.push_back(ds.values(i));
      out.right.push_back(unvec(ds.right.col(i), dk, db));
      out.left.push_back(unvec_left(ds.left.col(i), db, dk));
    }
  } else {
    const Vector x0 = Vector::Ones(static_cast<Eigen::Index>(op.dim));
    const ArnoldiResult r = arnoldi_largest(op.apply, x0, m, 1e-9, std::max(40, 3 * m + 10));
    const ArnoldiResult l = arnoldi_largest(op.apply_left, x0, m, 1e-9, std::max(40, 3 * m + 10));
    const auto n = static_cast<Eigen::Index>(r.values.size());
    Matrix lv(l.vectors.rows(), n);
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      for (Eigen::Index j = 1; j < static_cast<Eigen::Index>(l.values.size()); ++j)
        if (std::abs(l.values[static_cast<std::size_t>(j)] - r.values[static_cast<std::size_t>(i)]) <
            std::abs(l.values[static_cast<std::size_t>(best)] - r.values[static_cast<std::size_t>(i)]))
          best = j;
      lv.col(i) = l.vectors.col(best);
    }
    const Matrix overlap = lv.transpose() * r.vectors;
    const Matrix lb = lv * overlap.transpose().fullPivLu().inverse();
    for (Eigen::Index i = 0; i < n; ++i) {
      out.values.push_back(r.values[static_cast<std::size_t>(i)]);
      out.right.push_back(unvec(r.vectors.col(i), dk, db));
      out.left.push_back(unvec_left(lb.col(i), db, dk));
    }
  }
  if (require_normalized && std::abs(std::abs(out.values[0]) - 1.0) > 1e-6)
    throw LinalgError("spectral_data: dominant eigenvalue is not 1, state not normalized");
  out.xi = correlation_length(out.values);
  return out;
}

// ---------------------------------------------------------------------------
// Deflated environment solves

/// Solves x (1 - T + |r)(l|) = b - (b|r)(l| for a left environment x.
inline Matrix solve_left_environment(const MpsTensor& ket, const MpsTensor& bra, const Matrix& b,
                                     const Matrix& l, const Matrix& r, double tol = tolerances::linear_solve,
                                     const Matrix& guess = Matrix()) {
  const LinearOperator op = transfer_operator(ket, bra).transposed();
  const Vector x = deflated_solve(op, vec_left(b), vec(r), vec_left(l), tol,
                                  guess.size() ? vec_left(guess) : Vector());
  return unvec_left(x, b.rows(), b.cols());
}

/// Solves (1 - T + |r)(l|) x = b - |r)(l|b) for a right environment x.
inline Matrix solve_right_environment(const MpsTensor& ket, const MpsTensor& bra, const Matrix& b,
                                      const Matrix& l, const Matrix& r, double tol = tolerances::linear_solve,
                                      const Matrix& guess = Matrix()) {
  const LinearOperator op = transfer_operator(ket, bra);
  const Vector x = deflated_solve(op, vec(b), vec_left(l), vec(r), tol, guess.size() ? vec(guess) : Vector());
  return unvec(x, b.rows(), b.cols());
}

struct BoundaryEnvironments {
  Matrix libc;
  Matrix ribc;
  double energy_origin_shift = 0.0;
};

/// Infinite boundary environments of a uniform state A with fixed points
/// (l, r), (l|r) = 1, for the two-site term h. The energy origin is shifted by
/// (l|J_h|r) so both environments are orthogonal to the dominant pair.
/// left_tensor/right_tensor allow the mixed gauge (AL on the left, AR on the
/// right) with their own fixed points.
inline BoundaryEnvironments boundary_environments(const MpsTensor& al, const Matrix& l_left, const Matrix& r_left,
                                                  const MpsTensor& ar, const Matrix& l_right,
                                                  const Matrix& r_right, const Matrix& h,
                                                  double tol = tolerances::linear_solve) {
  if (!is_hermitian(h, 1e-10)) throw LinalgError("boundary_environments: h must be Hermitian");
  const Eigen::Index dim = left_dim(al);
  if (dim * dim <= 256) {
    for (const MpsTensor* t : {&al, &ar}) {
      const SpectralData sd = spectral_data(*t, *t, 2, false);
      if (sd.values.size() > 1 && std::abs(sd.values[1]) >= 1.0 - 1e-8)
        throw LinalgError("boundary_environments: |lambda_2| >= 1, state gapless or not normalized");
    }
  }
  BoundaryEnvironments out;
  const Matrix hl = operator_transfer_left(h, al, al, al, al, l_left);
  const Matrix hr = operator_transfer_right(h, ar, ar, ar, ar, r_right);
  out.energy_origin_shift = pairing(hl, r_left).real();
  out.libc = solve_left_environment(al, al, hl - out.energy_origin_shift * l_left, l_left, r_left, tol);
  out.ribc = solve_right_environment(ar, ar, hr - out.energy_origin_shift * r_right, l_right, r_right, tol);
  return out;
}

inline BoundaryEnvironments boundary_environments(const MpsTensor& a, const Matrix& l, const Matrix& r,
                                                  const Matrix& h, double tol = tolerances::linear_solve) {
  return boundary_environments(a, l, r, a, l, r, h, tol);
}

}  // namespace locspin
