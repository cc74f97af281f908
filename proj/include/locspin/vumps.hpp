#pragma once

// Bond-alternating Heisenberg chain and the VUMPS ground-state search for
// nearest-neighbour (two-cell) Hamiltonians.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "locspin/linalg.hpp"
#include "locspin/mps_tensor.hpp"
#include "locspin/spin.hpp"
#include "locspin/transfer.hpp"
#include "locspin/uniform_mps.hpp"

namespace locspin {

/// H = sum_i (1 + (-1)^i delta) S_i.S_{i+1} - h_z sum_i S^z_i, blocked into
/// two-site cells (a, b) with the 1+delta bond inside the cell. Cell index is
/// 2*s_a + s_b. The field is split half-and-half over the two bond terms
/// touching each site, and the intra-cell bond half-and-half over the two
/// cell-cell terms touching each cell.
struct AbahcHamiltonian {
  double delta = 0.03;
  double hz = 0.0;

  double strong() const { return 1.0 + delta; }
  double weak() const { return 1.0 - delta; }

  static Matrix spin_dot(const Matrix& ax, const Matrix& ay, const Matrix& az, const Matrix& bx,
                         const Matrix& by, const Matrix& bz) {
    return spin::kron(ax, bx) + spin::kron(ay, by) + spin::kron(az, bz);
  }

  /// (1+delta) S_a.S_b inside one cell.
  Matrix intra() const { return strong() * spin::heisenberg(0.5, 0.5); }

  Matrix cell_sz() const {
    const Matrix i2 = spin::identity(2);
    return spin::kron(spin::sz(0.5), i2) + spin::kron(i2, spin::sz(0.5));
  }

  /// Cell-cell term on d = 4 x 4.
  Matrix bond() const {
    const Matrix i2 = spin::identity(2), i4 = spin::identity(4);
    const Matrix bx = spin::kron(i2, spin::sx(0.5)), by = spin::kron(i2, spin::sy(0.5)), bz = spin::kron(i2, spin::sz(0.5));
    const Matrix ax = spin::kron(spin::sx(0.5), i2), ay = spin::kron(spin::sy(0.5), i2), az = spin::kron(spin::sz(0.5), i2);
    Matrix h = weak() * spin_dot(bx, by, bz, ax, ay, az);
    h += 0.5 * (spin::kron(intra(), i4) + spin::kron(i4, intra()));
    h -= 0.5 * hz * (spin::kron(cell_sz(), i4) + spin::kron(i4, cell_sz()));
    return h;
  }

  /// Cell followed by a single inserted site (d = 4 x 2): weak bond b-c.
  Matrix defect_left() const {
    const Matrix i2 = spin::identity(2), i4 = spin::identity(4);
    const Matrix bx = spin::kron(i2, spin::sx(0.5)), by = spin::kron(i2, spin::sy(0.5)), bz = spin::kron(i2, spin::sz(0.5));
    Matrix h = weak() * spin_dot(bx, by, bz, spin::sx(0.5), spin::sy(0.5), spin::sz(0.5));
    h += 0.5 * spin::kron(intra(), i2);
    h -= 0.5 * hz * (spin::kron(cell_sz(), i2) + spin::kron(i4, spin::sz(0.5)));
    return h;
  }

  /// Single inserted site followed by a cell (d = 2 x 4): weak bond c-a.
  Matrix defect_right() const {
    const Matrix i2 = spin::identity(2), i4 = spin::identity(4);
    const Matrix ax = spin::kron(spin::sx(0.5), i2), ay = spin::kron(spin::sy(0.5), i2), az = spin::kron(spin::sz(0.5), i2);
    Matrix h = weak() * spin_dot(spin::sx(0.5), spin::sy(0.5), spin::sz(0.5), ax, ay, az);
    h += 0.5 * spin::kron(i2, intra());
    h -= 0.5 * hz * (spin::kron(i2, cell_sz()) + spin::kron(spin::sz(0.5), i4));
    return h;
  }
};

struct VumpsOptions {
  double tol = 1e-8;
  int max_iter = 500;
  std::uint64_t seed = 1;
  std::function<void(int iteration, double energy, double gradient)> observer;
};

struct VumpsResult {
  UniformMps state;
  int iterations = 0;
  std::vector<double> energy_history;
  std::vector<double> gradient_history;
};

class VumpsError : public ConvergenceError {
 public:
  VumpsError(const std::string& what, double gradient, VumpsResult best)
      : ConvergenceError(what, gradient), best_(std::move(best)) {}
  const VumpsResult& best() const { return best_; }

 private:
  VumpsResult best_;
};

namespace detail {

/// hl[t'][t] = sum_{s,s'} h(s't', st) AL^s'^dag AL^s
inline std::vector<Matrix> left_bond_blocks(const Matrix& h, const MpsTensor& al) {
  const int d = phys_dim(al);
  std::vector<Matrix> p(static_cast<std::size_t>(d * d));
  for (int sp = 0; sp < d; ++sp)
    for (int s = 0; s < d; ++s) p[sp * d + s] = al[sp].adjoint() * al[s];
  std::vector<Matrix> out(static_cast<std::size_t>(d * d), Matrix::Zero(right_dim(al), right_dim(al)));
  for (int tp = 0; tp < d; ++tp)
    for (int t = 0; t < d; ++t)
      for (int sp = 0; sp < d; ++sp)
        for (int s = 0; s < d; ++s) {
          const cplx c = h(sp * d + tp, s * d + t);
          if (c != cplx(0.0)) out[tp * d + t] += c * p[sp * d + s];
        }
  return out;
}

/// hr[s'][s] = sum_{t,t'} h(s't', st) AR^t AR^t'^dag
inline std::vector<Matrix> right_bond_blocks(const Matrix& h, const MpsTensor& ar) {
  const int d = phys_dim(ar);
  std::vector<Matrix> p(static_cast<std::size_t>(d * d));
  for (int t = 0; t < d; ++t)
    for (int tp = 0; tp < d; ++tp) p[t * d + tp] = ar[t] * ar[tp].adjoint();
  std::vector<Matrix> out(static_cast<std::size_t>(d * d), Matrix::Zero(left_dim(ar), left_dim(ar)));
  for (int sp = 0; sp < d; ++sp)
    for (int s = 0; s < d; ++s)
      for (int tp = 0; tp < d; ++tp)
        for (int t = 0; t < d; ++t) {
          const cplx c = h(sp * d + tp, s * d + t);
          if (c != cplx(0.0)) out[sp * d + s] += c * p[t * d + tp];
        }
  return out;
}

struct VumpsEnvironment {
  Matrix le, re;
  std::vector<Matrix> hl, hr;
  double energy = 0.0;
};

inline VumpsEnvironment vumps_environment(const UniformMps& u, const Matrix& h, double tol,
                                          const VumpsEnvironment* previous) {
  VumpsEnvironment env;
  const Eigen::Index dim = u.bond();
  const Matrix id = Matrix::Identity(dim, dim);
  env.energy = energy_density_left_route(u, h);
  const Matrix hs = h - env.energy * Matrix::Identity(h.rows(), h.cols());
  env.hl = left_bond_blocks(hs, u.al);
  env.hr = right_bond_blocks(hs, u.ar);
  const Matrix hl = operator_transfer_left(hs, u.al, u.al, u.al, u.al, id);
  const Matrix hr = operator_transfer_right(hs, u.ar, u.ar, u.ar, u.ar, id);
  env.le = solve_left_environment(u.al, u.al, hl, id, u.right_fixed_point(), tol,
                                  previous ? previous->le : Matrix());
  env.re = solve_right_environment(u.ar, u.ar, hr, u.left_fixed_point(), id, tol,
                                   previous ? previous->re : Matrix());
  return env;
}

inline MpsTensor apply_hac(const VumpsEnvironment& env, const UniformMps& u, const MpsTensor& x) {
  const int d = u.d();
  MpsTensor out(static_cast<std::size_t>(d));
  for (int s = 0; s < d; ++s) out[s] = env.le * x[s] + x[s] * env.re;
  for (int tp = 0; tp < d; ++tp)
    for (int t = 0; t < d; ++t) out[tp].noalias() += env.hl[tp * d + t] * x[t];
  for (int sp = 0; sp < d; ++sp)
    for (int s = 0; s < d; ++s) out[sp].noalias() += x[s] * env.hr[sp * d + s];
  return out;
}

inline Matrix apply_hc(const VumpsEnvironment& env, const UniformMps& u, const Matrix& x) {
  const int d = u.d();
  Matrix out = env.le * x + x * env.re;
  for (int tp = 0; tp < d; ++tp)
    for (int t = 0; t < d; ++t) out.noalias() += env.hl[tp * d + t] * x * u.ar[t] * u.ar[tp].adjoint();
  return out;
}

}  // namespace detail

inline UniformMps random_uniform_mps(int d, Eigen::Index dim, std::uint64_t seed) {
  return canonicalize(random_tensor(d, dim, dim, seed));
}

/// One VUMPS iteration. Returns the updated state with its gradient norm.
inline UniformMps vumps_step(const UniformMps& u, const Matrix& h, double inner_tol,
                             detail::VumpsEnvironment& env, bool have_env) {
  env = detail::vumps_environment(u, h, inner_tol, have_env ? &env : nullptr);
  const int d = u.d();
  const Eigen::Index dim = u.bond();
  const auto hac = [&](const Vector& v) { return to_vector(detail::apply_hac(env, u, to_tensor(v, d, dim, dim))); };
  const auto hc = [&](const Vector& v) { return vec(detail::apply_hc(env, u, unvec(v, dim, dim))); };
  const LanczosResult rac = lanczos_lowest(hac, to_vector(right_multiply(u.al, u.c)), inner_tol);
  const LanczosResult rc = lanczos_lowest(hc, vec(u.c), inner_tol);
  const MpsTensor ac = to_tensor(rac.vector, d, dim, dim);
  const Matrix c = unvec(rc.vector, dim, dim);
  const Matrix uc = polar_isometry(c);
  UniformMps out;
  const Matrix ual = polar_isometry(left_stack(ac));
  out.al = right_multiply(from_left_stack(ual, d), uc.adjoint());
  const Matrix uar = polar_isometry(right_stack(ac).adjoint()).adjoint();
  out.ar = left_multiply(uc.adjoint(), from_right_stack(uar, d));
  out.c = c;
  out.ac = ac;
  double g = 0.0;
  double g2 = 0.0;
  for (int s = 0; s < d; ++s) {
    g += (ac[s] - out.al[s] * c).squaredNorm();
    g2 += (ac[s] - c * out.ar[s]).squaredNorm();
  }
  out.gradient = std::max(std::sqrt(g), std::sqrt(g2));
  out.energy_density = env.energy;
  return out;
}

inline VumpsResult vumps_ground_state(const Matrix& h, int d, Eigen::Index dim, const VumpsOptions& opt = {}) {
  if (dim < 1) throw LinalgError("vumps: bond dimension must be positive");
  if (!(opt.tol > 0)) throw LinalgError("vumps: tolerance must be positive");
  if (h.rows() != d * d || !is_hermitian(h, 1e-10)) throw LinalgError("vumps: h must be a Hermitian two-cell operator");
  VumpsResult res;
  UniformMps u = random_uniform_mps(d, dim, opt.seed);
  detail::VumpsEnvironment env;
  bool have_env = false;
  double grad = 1.0;
  for (int it = 1; it <= opt.max_iter; ++it) {
    const double inner = std::max(grad / 100.0, 1e-12);
    UniformMps next = vumps_step(u, h, inner, env, have_env);
    have_env = true;
    grad = next.gradient;
    u = std::move(next);
    res.iterations = it;
    res.energy_history.push_back(u.energy_density);
    res.gradient_history.push_back(grad);
    if (opt.observer) opt.observer(it, u.energy_density, grad);
    if (grad <= opt.tol) break;
  }
  diagonalize_center(u);
  u.energy_density = energy_density(u, h);
  u.gradient = grad;
  res.state = u;
  if (grad > opt.tol) throw VumpsError("vumps: max_iter exceeded", grad, res);
  return res;
}

struct SeedConsistencyReport {
  std::vector<std::uint64_t> seeds;
  std::vector<double> energies;
  std::vector<bool> converged;
  double energy_spread = 0.0;
  double min_fidelity_per_cell = 1.0;
  bool all_converged = true;
  bool pass = false;
};

inline SeedConsistencyReport multi_seed_consistency(const Matrix& h, int d, Eigen::Index dim,
                                                    const VumpsOptions& base, int n_seeds) {
  if (n_seeds < 2) throw LinalgError("multi_seed_consistency: need at least two seeds");
  SeedConsistencyReport rep;
  std::vector<UniformMps> states;
  for (int i = 0; i < n_seeds; ++i) {
    VumpsOptions o = base;
    o.seed = base.seed + static_cast<std::uint64_t>(i);
    rep.seeds.push_back(o.seed);
    try {
      const VumpsResult r = vumps_ground_state(h, d, dim, o);
      states.push_back(r.state);
      rep.converged.push_back(true);
    } catch (const VumpsError& e) {
      states.push_back(e.best().state);
      rep.converged.push_back(false);
      rep.all_converged = false;
    }
    rep.energies.push_back(states.back().energy_density);
  }
  const auto [mn, mx] = std::minmax_element(rep.energies.begin(), rep.energies.end());
  rep.energy_spread = *mx - *mn;
  for (std::size_t i = 0; i < states.size(); ++i)
    for (std::size_t j = i + 1; j < states.size(); ++j)
      rep.min_fidelity_per_cell = std::min(rep.min_fidelity_per_cell, fidelity_per_cell(states[i], states[j]));
  rep.pass = rep.all_converged && rep.energy_spread < 10.0 * base.tol;
  return rep;
}

}  // namespace locspin
