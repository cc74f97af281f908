#pragma once

// Dense and Krylov-space complex linear algebra used by every contraction in
// the library. Matrices are Eigen::MatrixXcd; linear maps are given
// matrix-free through LinearOperator.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace locspin {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

class LinalgError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConvergenceError : public LinalgError {
 public:
  ConvergenceError(const std::string& what, double last_residual)
      : LinalgError(what + " (last residual " + std::to_string(last_residual) + ")"),
        last_residual_(last_residual) {}
  double last_residual() const { return last_residual_; }

 private:
  double last_residual_;
};

namespace tolerances {
inline constexpr double eigensolve = 1e-10;
inline constexpr double linear_solve = 1e-9;
inline constexpr double pd_floor = 1e-12;
inline constexpr double hermitian = 1e-12;
}  // namespace tolerances

/// A square linear map given by its action on column vectors. `apply_left`
/// is the transposed action v -> A^T v, so that a left eigenvector l with
/// l^T A = lambda l^T is an eigenvector of apply_left. The pairing between
/// left and right vectors is the bilinear form l^T r.
struct LinearOperator {
  std::size_t dim = 0;
  std::function<Vector(const Vector&)> apply;
  std::function<Vector(const Vector&)> apply_left;

  LinearOperator transposed() const { return {dim, apply_left, apply}; }
};

inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline bool is_hermitian(const Matrix& m, double rel_tol = tolerances::hermitian) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(max_abs(m), std::numeric_limits<double>::min());
  return max_abs(m - m.adjoint()) <= rel_tol * scale;
}

inline Matrix hermitian_part(const Matrix& m) { return 0.5 * (m + m.adjoint()); }

struct HermitianEig {
  RealVector values;  // ascending
  Matrix vectors;     // columns, orthonormal
};

inline HermitianEig hermitian_eig(const Matrix& m) {
  if (!is_hermitian(m)) throw LinalgError("hermitian_eig: input is not Hermitian");
  if (!all_finite(m)) throw LinalgError("hermitian_eig: non-finite input");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(hermitian_part(m));
  if (solver.info() != Eigen::Success) throw LinalgError("hermitian_eig: solver failed");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

struct GeneralizedEig {
  RealVector values;  // ascending
  Matrix vectors;     // columns v_i with v_i^dag G v_j = delta_ij
  Eigen::Index retained_rank = 0;
};

/// Solves H v = lambda G v for Hermitian H and positive semidefinite G. The
/// null space of G (eigenvalues below null_tol * max eigenvalue) is projected
/// out before the symmetric reduction.
inline GeneralizedEig generalized_eig(const Matrix& h, const Matrix& g,
                                      double null_tol = tolerances::pd_floor) {
  if (h.rows() != g.rows() || h.cols() != g.cols())
    throw LinalgError("generalized_eig: dimension mismatch");
  if (!is_hermitian(h) || !is_hermitian(g))
    throw LinalgError("generalized_eig: H and G must be Hermitian");
  const HermitianEig ge = hermitian_eig(g);
  const double gmax = std::max(std::abs(ge.values.maxCoeff()), std::abs(ge.values.minCoeff()));
  if (gmax == 0.0) throw LinalgError("generalized_eig: G vanishes");
  if (ge.values.minCoeff() < -null_tol * gmax) {
    std::ostringstream msg;
    msg << "generalized_eig: G is indefinite (min eigenvalue " << ge.values.minCoeff() << ")";
    throw LinalgError(msg.str());
  }
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < ge.values.size(); ++i)
    if (ge.values(i) > null_tol * gmax) keep.push_back(i);
  const auto r = static_cast<Eigen::Index>(keep.size());
  Matrix w(g.rows(), r);  // G-whitening map: w^dag G w = 1
  for (Eigen::Index k = 0; k < r; ++k)
    w.col(k) = ge.vectors.col(keep[static_cast<std::size_t>(k)]) /
               std::sqrt(ge.values(keep[static_cast<std::size_t>(k)]));
  const Matrix reduced = hermitian_part(w.adjoint() * h * w);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(reduced);
  return {solver.eigenvalues(), w * solver.eigenvectors(), r};
}

/// Principal inverse square root of a Hermitian positive definite matrix.
inline Matrix inv_sqrt(const Matrix& m, double floor = tolerances::pd_floor) {
  const HermitianEig e = hermitian_eig(m);
  if (e.values.minCoeff() < floor) {
    std::ostringstream msg;
    msg << "inv_sqrt: smallest eigenvalue " << e.values.minCoeff() << " below floor " << floor;
    throw LinalgError(msg.str());
  }
  const RealVector d = e.values.array().rsqrt();
  return e.vectors * d.asDiagonal() * e.vectors.adjoint();
}

/// Principal square root of a Hermitian positive semidefinite matrix; small
/// negative eigenvalues from rounding are clamped to zero.
inline Matrix sqrt_psd(const Matrix& m) {
  const HermitianEig e = hermitian_eig(m);
  const RealVector d = e.values.cwiseMax(0.0).cwiseSqrt();
  return e.vectors * d.asDiagonal() * e.vectors.adjoint();
}

/// Inverse square root with eigenvalues clamped from below at
/// rel_floor * max eigenvalue. Used where the exact inverse is ill-conditioned
/// but only appears sandwiched by the matrix itself.
inline Matrix regularized_inv_sqrt(const Matrix& m, double rel_floor = 1e-14) {
  const HermitianEig e = hermitian_eig(hermitian_part(m));
  const double top = std::max(e.values.maxCoeff(), std::numeric_limits<double>::min());
  const RealVector d = e.values.cwiseMax(rel_floor * top).cwiseSqrt().cwiseInverse();
  return e.vectors * d.asDiagonal() * e.vectors.adjoint();
}

inline Matrix regularized_inverse(const Matrix& m, double rel_floor = 1e-14) {
  const HermitianEig e = hermitian_eig(hermitian_part(m));
  const double top = std::max(e.values.maxCoeff(), std::numeric_limits<double>::min());
  const RealVector d = e.values.cwiseMax(rel_floor * top).cwiseInverse();
  return e.vectors * d.asDiagonal() * e.vectors.adjoint();
}

/// Isometric factor U of the polar decomposition m = U P (rows >= cols).
inline Matrix polar_isometry(const Matrix& m) {
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

/// Orthonormal basis of the orthogonal complement of the column space of m.
inline Matrix null_complement(const Matrix& m) {
  Eigen::ColPivHouseholderQR<Matrix> qr(m);
  qr.setThreshold(1e-13);
  const Eigen::Index rank = qr.rank();
  const Matrix q = qr.householderQ();
  return q.rightCols(m.rows() - rank);
}

// ---------------------------------------------------------------------------
// Krylov methods

struct LanczosResult {
  double value = 0.0;
  Vector vector;
  double residual = 0.0;
  int matvecs = 0;
};

/// Lowest eigenpair of a Hermitian map by restarted Lanczos with full
/// reorthogonalization. If x0 is already an eigenvector the iteration stops
/// at the first breakdown and returns it unchanged.
inline LanczosResult lanczos_lowest(const std::function<Vector(const Vector&)>& apply,
                                    const Vector& x0, double tol = tolerances::eigensolve,
                                    int krylov_dim = 40, int max_restarts = 200) {
  const Eigen::Index n = x0.size();
  if (n == 0) throw LinalgError("lanczos_lowest: empty space");
  Vector x = x0;
  double nx = x.norm();
  if (nx == 0.0) {
    x = Vector::Ones(n);
    nx = x.norm();
  }
  x /= nx;
  const int m = static_cast<int>(std::min<Eigen::Index>(krylov_dim, n));
  LanczosResult out;
  for (int restart = 0; restart <= max_restarts; ++restart) {
    Matrix basis(n, m);
    Matrix proj = Matrix::Zero(m, m);
    basis.col(0) = x;
    int k = 0;
    bool breakdown = false;
    for (; k < m; ++k) {
      Vector w = apply(basis.col(k));
      ++out.matvecs;
      for (int pass = 0; pass < 2; ++pass) {
        const Vector c = basis.leftCols(k + 1).adjoint() * w;
        w -= basis.leftCols(k + 1) * c;
        proj.col(k).head(k + 1) += c;
      }
      const double beta = w.norm();
      if (k + 1 < m) {
        if (beta < 1e-14 * std::max(1.0, proj.col(k).head(k + 1).norm())) {
          breakdown = true;
          ++k;
          break;
        }
        basis.col(k + 1) = w / beta;
        proj(k + 1, k) = beta;
      }
    }
    const Matrix small = hermitian_part(proj.topLeftCorner(k, k));
    Eigen::SelfAdjointEigenSolver<Matrix> es(small);
    Vector y = basis.leftCols(k) * es.eigenvectors().col(0);
    y.normalize();
    const double theta = es.eigenvalues()(0);
    const Vector r = apply(y) - theta * y;
    ++out.matvecs;
    out.value = theta;
    out.vector = y;
    out.residual = r.norm();
    if (out.residual <= tol * std::max(1.0, std::abs(theta)) || breakdown) {
      if (breakdown && out.residual > 1e3 * tol * std::max(1.0, std::abs(theta))) {
        x = y + r / std::max(out.residual, 1e-300) * 1e-3;
        x.normalize();
        continue;
      }
      return out;
    }
    x = y;
  }
  throw ConvergenceError("lanczos_lowest: no convergence", out.residual);
}

struct GmresResult {
  Vector x;
  double residual = 0.0;
  int iterations = 0;
};

/// Restarted GMRES for a general (complex) linear system A x = b.
inline GmresResult gmres(const std::function<Vector(const Vector&)>& apply, const Vector& b,
                         const Vector& x0, double tol = tolerances::linear_solve,
                         int restart = 40, int max_restarts = 100) {
  const Eigen::Index n = b.size();
  GmresResult out;
  out.x = x0.size() == n ? x0 : Vector::Zero(n);
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    out.x.setZero();
    return out;
  }
  double previous = std::numeric_limits<double>::infinity();
  int stagnant = 0;
  for (int cycle = 0; cycle < max_restarts; ++cycle) {
    Vector r = b - apply(out.x);
    double beta = r.norm();
    out.residual = beta / bnorm;
    if (out.residual <= tol) return out;
    if (out.residual > 0.999 * previous) {
      if (++stagnant >= 3) throw ConvergenceError("gmres: stagnation", out.residual);
    } else {
      stagnant = 0;
    }
    previous = out.residual;
    const int m = static_cast<int>(std::min<Eigen::Index>(restart, n));
    Matrix v(n, m + 1);
    Matrix hess = Matrix::Zero(m + 1, m);
    std::vector<cplx> cs(static_cast<std::size_t>(m)), sn(static_cast<std::size_t>(m));
    Vector g = Vector::Zero(m + 1);
    g(0) = beta;
    v.col(0) = r / beta;
    int k = 0;
    for (; k < m; ++k) {
      Vector w = apply(v.col(k));
      ++out.iterations;
      for (int pass = 0; pass < 2; ++pass) {
        const Vector c = v.leftCols(k + 1).adjoint() * w;
        w -= v.leftCols(k + 1) * c;
        hess.col(k).head(k + 1) += c;
      }
      const double hn = w.norm();
      hess(k + 1, k) = hn;
      if (hn > 0.0) v.col(k + 1) = w / hn;
      for (int i = 0; i < k; ++i) {
        const cplx t = std::conj(cs[i]) * hess(i, k) + std::conj(sn[i]) * hess(i + 1, k);
        hess(i + 1, k) = -sn[i] * hess(i, k) + cs[i] * hess(i + 1, k);
        hess(i, k) = t;
      }
      const cplx a = hess(k, k);
      const cplx bb = hess(k + 1, k);
      const double den = std::sqrt(std::norm(a) + std::norm(bb));
      if (den == 0.0) {
        cs[k] = 1.0;
        sn[k] = 0.0;
      } else {
        cs[k] = a / den;
        sn[k] = bb / den;
      }
      hess(k, k) = std::conj(cs[k]) * a + std::conj(sn[k]) * bb;
      hess(k + 1, k) = 0.0;
      g(k + 1) = -sn[k] * g(k);
      g(k) = std::conj(cs[k]) * g(k);
      if (std::abs(g(k + 1)) / bnorm <= 0.1 * tol || hn == 0.0) {
        ++k;
        break;
      }
    }
    const Matrix upper = hess.topLeftCorner(k, k);
    const Vector y = upper.triangularView<Eigen::Upper>().solve(g.head(k));
    out.x += v.leftCols(k) * y;
    if (!out.x.allFinite()) throw ConvergenceError("gmres: non-finite iterate", out.residual);
  }
  const Vector r = b - apply(out.x);
  out.residual = r.norm() / bnorm;
  if (out.residual <= tol) return out;
  throw ConvergenceError("gmres: no convergence", out.residual);
}

struct ArnoldiResult {
  std::vector<cplx> values;  // descending magnitude
  Matrix vectors;            // right eigenvectors (unit norm)
  double residual = 0.0;     // max residual among returned pairs
};

/// Eigenpairs of largest magnitude of a general map by an Arnoldi process
/// with explicit Rayleigh-Ritz and thick restart on the wanted Ritz vectors.
inline ArnoldiResult arnoldi_largest(const std::function<Vector(const Vector&)>& apply,
                                     const Vector& x0, int want, double tol,
                                     int basis_size = 40, int max_restarts = 300) {
  const Eigen::Index n = x0.size();
  if (want < 1 || want > n) throw LinalgError("arnoldi_largest: invalid number of eigenpairs");
  const int m = static_cast<int>(std::min<Eigen::Index>(std::max(basis_size, 2 * want + 10), n));
  Matrix v(n, m);
  Matrix av(n, m);
  int k = 0;
  v.col(0) = x0.norm() > 0 ? Vector(x0 / x0.norm()) : Vector(Vector::Ones(n) / std::sqrt(double(n)));
  ArnoldiResult out;
  Vector next;
  for (int restart = 0; restart <= max_restarts; ++restart) {
    while (k < m) {
      av.col(k) = apply(v.col(k));
      Vector w = av.col(k);
      for (int pass = 0; pass < 2; ++pass) w -= v.leftCols(k + 1) * (v.leftCols(k + 1).adjoint() * w);
      const double wn = w.norm();
      if (k + 1 >= m) {
        ++k;
        break;
      }
      if (wn < 1e-13 * std::max(1.0, av.col(k).norm())) {
        ++k;
        break;  // invariant subspace
      }
      v.col(k + 1) = w / wn;
      ++k;
    }
    const Matrix h = v.leftCols(k).adjoint() * av.leftCols(k);
    Eigen::ComplexEigenSolver<Matrix> es(h);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) order[static_cast<std::size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return std::abs(es.eigenvalues()(a)) > std::abs(es.eigenvalues()(b));
    });
    const int got = std::min(want, k);
    out.values.assign(static_cast<std::size_t>(got), 0.0);
    out.vectors.resize(n, got);
    out.residual = 0.0;
    int keep = std::min(k - 1, std::max(got + 5, k / 2));
    if (k < m) keep = k;  // invariant subspace found: Ritz pairs are exact
    Matrix y(k, keep);
    for (int i = 0; i < keep; ++i) y.col(i) = es.eigenvectors().col(order[static_cast<std::size_t>(i)]);
    double worst = 0.0;
    for (int i = 0; i < got; ++i) {
      const cplx lambda = es.eigenvalues()(order[static_cast<std::size_t>(i)]);
      Vector x = v.leftCols(k) * y.col(i);
      const double xn = x.norm();
      x /= xn;
      const Vector r = av.leftCols(k) * y.col(i) / xn - lambda * x;
      worst = std::max(worst, r.norm() / std::max(1e-300, std::abs(lambda) + 1e-300));
      out.values[static_cast<std::size_t>(i)] = lambda;
      out.vectors.col(i) = x;
    }
    out.residual = worst;
    if (worst <= tol || k < m) return out;
    // thick restart on an orthonormal basis of the kept Ritz vectors
    Eigen::HouseholderQR<Matrix> qr(y);
    const Matrix q = qr.householderQ() * Matrix::Identity(k, keep);
    const Matrix newv = v.leftCols(k) * q;
    const Matrix newav = av.leftCols(k) * q;
    Vector resid = newav.col(0) - newv * (newv.adjoint() * newav.col(0));
    for (int i = 1; i < keep && resid.norm() < 1e-12; ++i)
      resid = newav.col(i) - newv * (newv.adjoint() * newav.col(i));
    v.leftCols(keep) = newv;
    av.leftCols(keep) = newav;
    for (int pass = 0; pass < 2; ++pass) resid -= newv * (newv.adjoint() * resid);
    const double rn = resid.norm();
    if (rn < 1e-300) return out;
    v.col(keep) = resid / rn;
    k = keep;
    // the new vector still needs its image; the while loop computes it
    // starting from index keep
  }
  throw ConvergenceError("arnoldi_largest: no convergence", out.residual);
}

struct DominantPair {
  cplx value;
  Vector right;
  Vector left;  // left^T right = 1
  double residual = 0.0;
};

/// Dominant eigenvalue with its right and left eigenvectors, normalized so that
/// left^T right = 1 and right has unit norm.
inline DominantPair dominant_eigenpair(const LinearOperator& op, double tol = tolerances::eigensolve,
                                       int max_iter = 300, const Vector& guess = Vector()) {
  const Eigen::Index n = static_cast<Eigen::Index>(op.dim);
  if (n == 0) throw LinalgError("dominant_eigenpair: empty space");
  Vector x0 = guess.size() == n ? guess : Vector(Vector::Ones(n) + Vector::LinSpaced(n, 0.0, 1.0) * cplx(0.1, 0.05));
  DominantPair out;
  if (n <= 4) {
    Matrix dense(n, n);
    for (Eigen::Index j = 0; j < n; ++j) dense.col(j) = op.apply(Vector::Unit(n, j));
    Eigen::ComplexEigenSolver<Matrix> es(dense);
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < n; ++i)
      if (std::abs(es.eigenvalues()(i)) > std::abs(es.eigenvalues()(best))) best = i;
    out.value = es.eigenvalues()(best);
    out.right = es.eigenvectors().col(best).normalized();
    Eigen::ComplexEigenSolver<Matrix> esl(Matrix(dense.transpose()));
    Eigen::Index bl = 0;
    for (Eigen::Index i = 1; i < n; ++i)
      if (std::abs(esl.eigenvalues()(i) - out.value) < std::abs(esl.eigenvalues()(bl) - out.value)) bl = i;
    out.left = esl.eigenvectors().col(bl);
  } else {
    const ArnoldiResult r = arnoldi_largest(op.apply, x0, 1, tol, 30, max_iter);
    const ArnoldiResult l = arnoldi_largest(op.apply_left, x0, 1, tol, 30, max_iter);
    out.value = r.values[0];
    out.right = r.vectors.col(0);
    out.left = l.vectors.col(0);
  }
  const cplx pairing = out.left.transpose() * out.right;
  if (std::abs(pairing) < 1e-14) throw LinalgError("dominant_eigenpair: left/right pairing vanishes");
  out.left /= pairing;
  out.residual = (op.apply(out.right) - out.value * out.right).norm();
  if (!(out.residual <= std::max(tol, 1e-12) * std::max(1.0, std::abs(out.value)) * 10))
    throw ConvergenceError("dominant_eigenpair: residual too large", out.residual);
  return out;
}

/// Solves (1 - T + r l^T) x = (1 - r l^T) b, i.e. applies the geometric
/// series of T restricted off its dominant eigenpair (r, l), with l^T r = 1.
/// The solution satisfies l^T x = 0.
inline Vector deflated_solve(const LinearOperator& op, const Vector& rhs, const Vector& left,
                             const Vector& right, double tol = tolerances::linear_solve,
                             const Vector& guess = Vector()) {
  const cplx pairing = left.transpose() * right;
  if (std::abs(pairing - 1.0) > 1e-8) throw LinalgError("deflated_solve: dominant pair not biorthonormal");
  const Vector b = rhs - right * cplx(left.transpose() * rhs);
  const double scale = std::max(rhs.norm(), 1.0);
  if (b.norm() <= 1e-15 * scale) return Vector::Zero(rhs.size());
  auto apply = [&](const Vector& x) -> Vector {
    return x - op.apply(x) + right * cplx(left.transpose() * x);
  };
  GmresResult res = gmres(apply, b, guess, tol, 40, 200);
  Vector x = res.x;
  x -= right * cplx(left.transpose() * x);
  return x;
}

}  // namespace locspin
