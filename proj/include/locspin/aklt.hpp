#pragma once

// Exact valence-bond-solid tensors of the spin-1 AKLT chain with spin-3/2
// impurities, their closed-form profiles and effective-spin algebra, and the
// same quantities by direct transfer contraction.

#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include "locspin/linalg.hpp"
#include "locspin/mps_tensor.hpp"
#include "locspin/spin.hpp"
#include "locspin/transfer.hpp"
#include "locspin/uniform_mps.hpp"
#include "locspin/window.hpp"

namespace locspin::aklt {

enum class Loc { up, down };

inline double third() { return 1.0 / 3.0; }

/// A^+ = sqrt(2/3) sigma^+, A^0 = -sqrt(1/3) sigma^z, A^- = -sqrt(2/3) sigma^-.
inline MpsTensor bulk_tensor() {
  return {std::sqrt(2.0 / 3.0) * spin::sigma_plus(), -std::sqrt(1.0 / 3.0) * spin::pauli_z(),
          -std::sqrt(2.0 / 3.0) * spin::sigma_minus()};
}

/// Spin-3/2 impurity tensor, physical index ordered m = 3/2, 1/2, -1/2, -3/2.
inline MpsTensor impurity_tensor(Loc sigma) {
  MpsTensor b = zero_tensor(4, 2, 2);
  const double s3 = std::sqrt(1.0 / 3.0);
  if (sigma == Loc::up) {
    b[0] = spin::sigma_plus();
    b[1] = -s3 * spin::pauli_z();
    b[2] = -s3 * spin::sigma_minus();
  } else {
    b[1] = s3 * spin::sigma_plus();
    b[2] = -s3 * spin::pauli_z();
    b[3] = -spin::sigma_minus();
  }
  return b;
}

inline Matrix l1() { return Matrix::Identity(2, 2); }
inline Matrix r1() { return 0.5 * Matrix::Identity(2, 2); }
inline Matrix l2() { return spin::pauli_z() / std::sqrt(2.0); }
inline Matrix r2() { return spin::pauli_z() / std::sqrt(2.0); }

/// Bond term S.S + (S.S)^2/3 + 2/3 (twice the projector on total spin 2).
inline Matrix bond_hamiltonian() {
  const Matrix x = spin::heisenberg(1.0, 1.0);
  return x + x * x / 3.0 + (2.0 / 3.0) * Matrix::Identity(9, 9);
}

/// Spin-1 / spin-3/2 bond S.s + (2/7)(S.s)^2 + 5/7, non-negative and
/// vanishing outside total spin 5/2. impurity_first puts the spin-3/2 on
/// the left.
inline Matrix impurity_bond_hamiltonian(bool impurity_first) {
  const Matrix x = impurity_first ? spin::heisenberg(1.5, 1.0) : spin::heisenberg(1.0, 1.5);
  return x + (2.0 / 7.0) * x * x + (5.0 / 7.0) * Matrix::Identity(12, 12);
}

/// The bulk state as a mixed-canonical uniform MPS (A is both left and right
/// isometric, so A_L = A_R = A and C = 1/sqrt(2)).
inline UniformMps background() {
  UniformMps u;
  u.al = bulk_tensor();
  u.ar = bulk_tensor();
  u.c = Matrix::Identity(2, 2) / std::sqrt(2.0);
  u.ac = right_multiply(u.al, u.c);
  return u;
}

/// <up|S^z_i|up> for one impurity at site 0.
inline double single_impurity_profile(int i) {
  if (i == 0) return 5.0 / 6.0;
  return (2.0 / 3.0) * std::pow(-third(), std::abs(i));
}

/// <S^z_i> at distance i >= 1 from an up edge of a half-infinite chain.
inline double edge_profile(int i) {
  if (i < 1) throw std::invalid_argument("edge_profile: site index must be >= 1");
  return -2.0 * std::pow(-third(), i);
}

inline double g1(int i, int sep) { return (1.0 + (i == sep ? 0.25 : 0.0)) * single_impurity_profile(i); }
inline double g2(int i, int sep) { return g1(sep - i, sep); }

inline double delta_l(int sep) { return std::pow(-third(), sep + 1); }

/// Spin operators of the physical site held by a tensor of dimension d.
inline double spin_of_dim(int d) { return 0.5 * (d - 1); }

/// State with impurities at the given positions and labels, as a window over
/// the bulk background covering [min position, max position].
inline WindowMps impurity_state(const std::vector<int>& positions, const std::vector<Loc>& labels) {
  if (positions.empty() || positions.size() != labels.size())
    throw std::invalid_argument("impurity_state: need one label per impurity");
  for (std::size_t i = 1; i < positions.size(); ++i)
    if (positions[i] <= positions[i - 1]) throw std::invalid_argument("impurity_state: positions must increase");
  WindowMps w;
  w.background = background();
  w.offset = positions.front();
  std::size_t next = 0;
  for (int p = positions.front(); p <= positions.back(); ++p) {
    if (next < positions.size() && positions[next] == p) {
      w.tensors.push_back(impurity_tensor(labels[next]));
      ++next;
    } else {
      w.tensors.push_back(bulk_tensor());
    }
  }
  w.tensors.back() = right_multiply(w.tensors.back(), w.background.c);
  return w;
}

/// <S^z_i> by transfer contraction, normalized by the state norm.
inline double profile_via_contraction(const WindowMps& w, int i) {
  const auto ops = [](int, const WindowMps& x, int p) {
    const int d = phys_dim(p >= x.first() && p <= x.last() ? x.at_position(p) : x.background.al);
    return std::vector<Matrix>{spin::sz(spin_of_dim(d))};
  };
  return expectation_profile(w, i, i, [&](int p) { return ops(0, w, p); })[0];
}

/// Edge profile by contraction: the left boundary vector selects the up
/// virtual state, the right boundary is the bulk fixed point.
inline double edge_profile_via_contraction(int i) {
  if (i < 1) throw std::invalid_argument("edge_profile: site index must be >= 1");
  const MpsTensor a = bulk_tensor();
  Matrix l = Matrix::Zero(2, 2);
  l(0, 0) = 1.0;
  const double nrm = pairing(l, Matrix::Identity(2, 2)).real();
  for (int k = 1; k < i; ++k) l = transfer_left(a, a, l);
  return pairing(l, site_transfer_right(spin::sz(1.0), a, a, Matrix::Identity(2, 2))).real() / nrm;
}

// ---------------------------------------------------------------------------
// Two effective spins

inline std::vector<std::vector<Loc>> basis_labels(int k) {
  std::vector<std::vector<Loc>> out;
  for (int mask = 0; mask < (1 << k); ++mask) {
    std::vector<Loc> l;
    for (int j = k - 1; j >= 0; --j) l.push_back((mask >> j) & 1 ? Loc::down : Loc::up);
    out.push_back(l);
  }
  return out;
}

/// G = u^dag u from the closed form with Delta_L = (-1/3)^{L+1}.
inline Matrix gram_matrix(int sep) {
  if (sep < 2) throw std::invalid_argument("gram_matrix: separation must be >= 2");
  const double dl = delta_l(sep);
  Matrix g = Matrix::Zero(4, 4);
  g(0, 0) = g(3, 3) = 1.0 - dl;
  g(1, 1) = g(2, 2) = 1.0 + dl;
  g(1, 2) = g(2, 1) = -2.0 * dl;
  return g;
}

namespace detail {

/// <u_a| O |u_b> for impurity states at `positions`, where O is a product of
/// one-site operators given per position (identity when absent).
inline cplx matrix_element(const std::vector<int>& positions, const std::vector<Loc>& bra, const std::vector<Loc>& ket,
                           const std::map<int, Matrix>& ops) {
  int first = positions.front(), last = positions.back();
  if (!ops.empty()) {
    first = std::min(first, ops.begin()->first);
    last = std::max(last, ops.rbegin()->first);
  }
  const MpsTensor a = bulk_tensor();
  Matrix r = r1();
  std::size_t imp = positions.size();
  for (int p = last; p >= first; --p) {
    const MpsTensor* kt = &a;
    const MpsTensor* bt = &a;
    MpsTensor kb, bb;
    if (imp > 0 && positions[imp - 1] == p) {
      --imp;
      kb = impurity_tensor(ket[imp]);
      bb = impurity_tensor(bra[imp]);
      kt = &kb;
      bt = &bb;
    }
    const auto it = ops.find(p);
    r = it == ops.end() ? transfer_right(*kt, *bt, r) : site_transfer_right(it->second, *kt, *bt, r);
  }
  return pairing(l1(), r);
}

}  // namespace detail

/// Gram matrix of the impurity basis by transfer contraction.
inline Matrix gram_matrix_contraction(const std::vector<int>& positions) {
  const auto labels = basis_labels(static_cast<int>(positions.size()));
  const auto n = static_cast<Eigen::Index>(labels.size());
  Matrix g(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) g(a, b) = detail::matrix_element(positions, labels[a], labels[b], {});
  return g;
}

inline Matrix gram_matrix_contraction(int sep) { return gram_matrix_contraction(std::vector<int>{0, sep}); }

using Field = std::map<int, Eigen::Vector3d>;  // site -> (h_x, h_y, h_z)

/// u^dag (sum_i h_i . S_i) u by contraction.
inline Matrix field_matrix_contraction(const std::vector<int>& positions, const Field& fields) {
  const auto labels = basis_labels(static_cast<int>(positions.size()));
  const auto n = static_cast<Eigen::Index>(labels.size());
  Matrix h = Matrix::Zero(n, n);
  for (const auto& [site, vecf] : fields) {
    const bool is_imp = std::find(positions.begin(), positions.end(), site) != positions.end();
    const double s = is_imp ? 1.5 : 1.0;
    const Matrix op = vecf(0) * spin::sx(s) + vecf(1) * spin::sy(s) + vecf(2) * spin::sz(s);
    if (max_abs(op) == 0.0) continue;
    for (Eigen::Index a = 0; a < n; ++a)
      for (Eigen::Index b = 0; b < n; ++b) h(a, b) += detail::matrix_element(positions, labels[a], labels[b], {{site, op}});
  }
  return h;
}

/// Effective fields h^eff_alpha = 2 sum_i w(i) h_{i,alpha} for a weight function.
inline Eigen::Vector3d effective_field(const Field& fields, const std::function<double(int)>& weight) {
  Eigen::Vector3d h = Eigen::Vector3d::Zero();
  for (const auto& [site, v] : fields) h += 2.0 * weight(site) * v;
  return h;
}

inline Matrix spin_half_field(const Eigen::Vector3d& h) {
  return 0.5 * (h(0) * spin::pauli_x() + h(1) * spin::pauli_y() + h(2) * spin::pauli_z());
}

/// Closed-form effective Hamiltonian in the (non-orthonormal) impurity basis.
/// One impurity at positions[0]: (1/2) h^eff . sigma. Two impurities at 0 and
/// L: the 4x4 form with h^eff_j = 2 sum_i g_j(i) h_i.
inline Matrix effective_field_matrix(const Field& fields, const std::vector<int>& positions) {
  if (positions.size() == 1) {
    const int j = positions[0];
    return spin_half_field(effective_field(fields, [j](int i) { return single_impurity_profile(i - j); }));
  }
  if (positions.size() == 2) {
    const int j0 = positions[0], sep = positions[1] - positions[0];
    if (sep < 2) throw std::invalid_argument("effective_field_matrix: separation must be >= 2");
    const Eigen::Vector3d h1 = effective_field(fields, [=](int i) { return g1(i - j0, sep); });
    const Eigen::Vector3d h2 = effective_field(fields, [=](int i) { return g2(i - j0, sep); });
    const Matrix i2 = spin::identity(2);
    return spin::kron(spin_half_field(h1), i2) + spin::kron(i2, spin_half_field(h2));
  }
  throw std::invalid_argument("effective_field_matrix: one or two impurities only");
}

struct QubitBasis {
  double beta_plus = 1.0;
  double beta_minus = 0.0;
  Matrix transform;  // sqrt(G)^{-1}
};

inline QubitBasis qubit_basis(int sep) {
  const double dl = delta_l(sep);
  if (!(1.0 + 3.0 * dl > 0.0)) throw std::invalid_argument("qubit_basis: 1 + 3 Delta_L must be positive");
  QubitBasis q;
  const double a = std::sqrt(1.0 / (1.0 - dl)), b = std::sqrt(1.0 / (1.0 + 3.0 * dl));
  q.beta_plus = 0.5 * (a + b);
  q.beta_minus = 0.5 * (a - b);
  q.transform = Matrix::Zero(4, 4);
  q.transform(0, 0) = q.transform(3, 3) = q.beta_plus + q.beta_minus;
  q.transform(1, 1) = q.transform(2, 2) = q.beta_plus;
  q.transform(1, 2) = q.transform(2, 1) = q.beta_minus;
  return q;
}

// ---------------------------------------------------------------------------
// Three effective spins

struct NoGoReport {
  int configurations = 0;
  int resampled = 0;
  double max_subspace_angle = 0.0;
  double min_config_angle = 0.0;  // smallest per-configuration angle against the first
  bool dependent = false;
  std::uint64_t seed = 0;
};

/// Generalized eigenvector frames of u^dag (sum h_i S^z_i) u against
/// G = u^dag u for random field configurations. Eigenvectors of different
/// configurations are matched by G-overlap of their eigenspaces; the report
/// holds the largest principal angle. `uniform` draws one random magnitude
/// for a uniform field instead of independent site fields.
inline NoGoReport three_spin_no_go_test(int configs, int sep1, int sep2, std::uint64_t seed, int k = 3,
                                        bool uniform = false, double threshold = 1e-6) {
  if (configs < 2) throw std::invalid_argument("three_spin_no_go_test: need at least two configurations");
  if (k != 2 && k != 3) throw std::invalid_argument("three_spin_no_go_test: k must be 2 or 3");
  std::vector<int> positions{0, sep1 + 1};
  if (k == 3) positions.push_back(sep1 + sep2 + 2);
  const Matrix g = gram_matrix_contraction(positions);
  const int lo = -5, hi = positions.back() + 5;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  NoGoReport rep;
  rep.seed = seed;
  std::vector<std::vector<Matrix>> frames;  // per config: eigenspace bases
  while (static_cast<int>(frames.size()) < configs) {
    Field f;
    const double hu = uni(rng);
    for (int i = lo; i <= hi; ++i) f[i] = Eigen::Vector3d(0.0, 0.0, uniform ? hu : uni(rng));
    const Matrix h = field_matrix_contraction(positions, f);
    const GeneralizedEig ge = generalized_eig(hermitian_part(h), hermitian_part(g));
    std::vector<Matrix> spaces;
    const double scale = std::max(1.0, ge.values.cwiseAbs().maxCoeff());
    bool degenerate = false;
    for (Eigen::Index i = 0; i < ge.values.size();) {
      Eigen::Index j = i + 1;
      while (j < ge.values.size() && ge.values(j) - ge.values(i) < 1e-9 * scale) ++j;
      if (j - i > 1) degenerate = true;
      spaces.push_back(ge.vectors.middleCols(i, j - i));
      i = j;
    }
    if (degenerate && !uniform) {
      ++rep.resampled;
      continue;
    }
    frames.push_back(spaces);
  }
  rep.configurations = configs;
  // sin of the largest principal angle from the G-norm of the residual of sp
  // after projecting onto ref; stays accurate for tiny angles.
  const Matrix gh = sqrt_psd(hermitian_part(g));
  double worst = 0.0, weakest = 1e300;
  for (std::size_t c = 1; c < frames.size(); ++c) {
    double config_angle = 0.0;
    for (const Matrix& sp : frames[c]) {
      double best = 1.0;
      for (const Matrix& ref : frames[0]) {
        if (ref.cols() != sp.cols()) continue;
        const Matrix res = gh * (sp - ref * (ref.adjoint() * g * sp));
        best = std::min(best, Eigen::JacobiSVD<Matrix>(res).singularValues()(0));
      }
      config_angle = std::max(config_angle, std::asin(std::min(1.0, best)));
    }
    worst = std::max(worst, config_angle);
    weakest = std::min(weakest, config_angle);
  }
  rep.max_subspace_angle = worst;
  rep.min_config_angle = weakest;
  rep.dependent = worst > threshold;
  return rep;
}

// ---------------------------------------------------------------------------
// Multiple scattering

struct ScatteringAmplitude {
  double contraction = 0.0;     // the full transfer-chain value
  double triple_path = 0.0;     // l1 -> l2 -> l1 -> l2 channel path alone
  double stated_closed_form = 0.0;  // -(2/3)(-1/3)^{L+L''+2}
  double path_closed_form = 0.0;    // (2/9)(-1/3)^{L+L''+2}, the product of the path factors
};

/// (l1| T_B (T_A)^L T_B (T_A)^L' T_B (T_A)^L'' J_Sz |r1) with B = B_up.
inline ScatteringAmplitude scattering_amplitude(int len1, int len2, int len3) {
  if (len1 < 0 || len2 < 0 || len3 < 0) throw std::invalid_argument("scattering_amplitude: lengths must be >= 0");
  const MpsTensor a = bulk_tensor();
  const MpsTensor b = impurity_tensor(Loc::up);
  const auto ta = [&](const Matrix& m) { return transfer_right(a, a, m); };
  const auto tb = [&](const Matrix& m) { return transfer_right(b, b, m); };
  const auto proj = [](const Matrix& l, const Matrix& r, const Matrix& m) -> Matrix { return r * pairing(l, m); };
  ScatteringAmplitude out;
  Matrix m = site_transfer_right(spin::sz(1.0), a, a, r1());
  for (int i = 0; i < len3; ++i) m = ta(m);
  m = tb(m);
  for (int i = 0; i < len2; ++i) m = ta(m);
  m = tb(m);
  for (int i = 0; i < len1; ++i) m = ta(m);
  m = tb(m);
  out.contraction = pairing(l1(), m).real();

  Matrix p = proj(l2(), r2(), site_transfer_right(spin::sz(1.0), a, a, r1()));
  for (int i = 0; i < len3; ++i) p = proj(l2(), r2(), ta(p));
  p = proj(l1(), r1(), tb(p));
  for (int i = 0; i < len2; ++i) p = proj(l1(), r1(), ta(p));
  p = proj(l2(), r2(), tb(p));
  for (int i = 0; i < len1; ++i) p = proj(l2(), r2(), ta(p));
  p = tb(p);
  out.triple_path = pairing(l1(), p).real();

  out.stated_closed_form = -(2.0 / 3.0) * std::pow(-third(), len1 + len3 + 2);
  out.path_closed_form = (2.0 / 9.0) * std::pow(-third(), len1 + len3 + 2);
  return out;
}

}  // namespace locspin::aklt
