#pragma once

// Uniform MPS with a window of replaced tensors:
//   ... A_L A_L W_0 W_1 ... W_{n-1} A_R A_R ...
// together with the window effective Hamiltonian built on the infinite
// boundary environments, and its imaginary-time TDVP optimization.
//
// The single-gauge form ... A A B A A ... is equivalent: with A = A_L
// on both sides the last window tensor carries an extra C^{-1}.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "locspin/linalg.hpp"
#include "locspin/mps_tensor.hpp"
#include "locspin/transfer.hpp"
#include "locspin/uniform_mps.hpp"

namespace locspin {

struct WindowMps {
  UniformMps background;
  std::vector<MpsTensor> tensors;
  int offset = 0;  // position label of tensors[0]; positions are consecutive
  int center = -1;  // orthogonality centre inside the window, -1 if unknown

  int size() const { return static_cast<int>(tensors.size()); }
  int first() const { return offset; }
  int last() const { return offset + size() - 1; }
  const MpsTensor& at_position(int p) const { return tensors[static_cast<std::size_t>(p - offset)]; }
};

/// Energy bookkeeping for a window: the background cell-cell term (already
/// shifted so its uniform expectation vanishes), the matching boundary
/// environments and one bond term per cut. bonds[k] couples the site left of
/// tensors[k] (A_L for k = 0) to tensors[k]; bonds[n] couples tensors[n-1] to
/// the first A_R cell.
struct WindowHamiltonian {
  Matrix uniform;
  BoundaryEnvironments env;
  std::vector<Matrix> bonds;
};

/// Shifted background data shared by every window over one uniform state.
struct Background {
  UniformMps state;
  Matrix bond;           // unshifted cell-cell term
  Matrix shifted_bond;   // bond - e * 1
  BoundaryEnvironments env;
};

inline Background make_background(const UniformMps& u, const Matrix& bond, double tol = 1e-11) {
  Background b;
  b.state = u;
  b.bond = bond;
  b.env = boundary_environments(u, bond, tol);
  b.shifted_bond = bond - b.env.energy_origin_shift * Matrix::Identity(bond.rows(), bond.cols());
  return b;
}

class WindowError : public LinalgError {
 public:
  using LinalgError::LinalgError;
};

// ---------------------------------------------------------------------------
// Environments through the window

struct SegmentEnvironments {
  std::vector<Matrix> ln, le;  // index k: everything left of tensors[k]; k = 0..n
  std::vector<Matrix> rn, re;  // index k: everything right of tensors[k-1]; k = 0..n
  Matrix identity;
};

namespace detail {

inline const MpsTensor& site_or_background(const WindowMps& w, int k) {
  if (k < 0) return w.background.al;
  if (k >= w.size()) return w.background.ar;
  return w.tensors[static_cast<std::size_t>(k)];
}

}  // namespace detail

inline void check_window(const WindowMps& w, const WindowHamiltonian* h) {
  if (w.tensors.empty()) throw WindowError("window: no tensors");
  const Eigen::Index dim = w.background.bond();
  for (std::size_t k = 0; k < w.tensors.size(); ++k) {
    check_tensor(w.tensors[k], "window");
    const Eigen::Index dl = k == 0 ? dim : right_dim(w.tensors[k - 1]);
    if (left_dim(w.tensors[k]) != dl) throw WindowError("window: bond dimension mismatch");
  }
  if (right_dim(w.tensors.back()) != dim) throw WindowError("window: bond dimension mismatch at right edge");
  if (h) {
    if (h->bonds.size() != w.tensors.size() + 1) throw WindowError("window: need one bond term per cut");
    for (int k = 0; k <= w.size(); ++k) {
      const int d1 = phys_dim(detail::site_or_background(w, k - 1));
      const int d2 = phys_dim(detail::site_or_background(w, k));
      if (h->bonds[static_cast<std::size_t>(k)].rows() != d1 * d2)
        throw WindowError("window: bond term dimension mismatch at cut " + std::to_string(k));
    }
  }
}

inline SegmentEnvironments segment_environments(const WindowMps& w, const WindowHamiltonian& h) {
  check_window(w, &h);
  const int n = w.size();
  SegmentEnvironments e;
  e.identity = Matrix::Identity(w.background.bond(), w.background.bond());
  e.ln.resize(static_cast<std::size_t>(n + 1));
  e.le.resize(static_cast<std::size_t>(n + 1));
  e.rn.resize(static_cast<std::size_t>(n + 1));
  e.re.resize(static_cast<std::size_t>(n + 1));
  e.ln[0] = e.identity;
  e.le[0] = h.env.libc;
  for (int k = 0; k < n; ++k) {
    const MpsTensor& wk = w.tensors[static_cast<std::size_t>(k)];
    const MpsTensor& wp = detail::site_or_background(w, k - 1);
    const Matrix& lnp = k == 0 ? e.identity : e.ln[static_cast<std::size_t>(k - 1)];
    e.ln[k + 1] = transfer_left(wk, wk, e.ln[k]);
    e.le[k + 1] = transfer_left(wk, wk, e.le[k]) + operator_transfer_left(h.bonds[k], wp, wk, wp, wk, lnp);
  }
  e.rn[n] = e.identity;
  e.re[n] = h.env.ribc;
  for (int k = n - 1; k >= 0; --k) {
    const MpsTensor& wk = w.tensors[static_cast<std::size_t>(k)];
    const MpsTensor& wn = detail::site_or_background(w, k + 1);
    const Matrix& rnn = k + 2 <= n ? e.rn[static_cast<std::size_t>(k + 2)] : e.identity;
    e.rn[k] = transfer_right(wk, wk, e.rn[k + 1]);
    e.re[k] = transfer_right(wk, wk, e.re[k + 1]) + operator_transfer_right(h.bonds[k + 1], wk, wn, wk, wn, rnn);
  }
  return e;
}

inline double window_norm(const WindowMps& w) {
  Matrix l = Matrix::Identity(w.background.bond(), w.background.bond());
  for (const MpsTensor& t : w.tensors) l = transfer_left(t, t, l);
  return l.trace().real();
}

/// <psi|H|psi>/<psi|psi> with the shifted Hamiltonian, by direct contraction.
inline double window_energy(const WindowMps& w, const WindowHamiltonian& h, const SegmentEnvironments& e) {
  const int n = w.size();
  const double nrm = e.ln[n].trace().real();
  const double val = pairing(e.le[n], e.identity).real() + pairing(e.ln[n], e.re[n]).real() +
                     operator_transfer_left(h.bonds[n], w.tensors.back(), w.background.ar, w.tensors.back(),
                                            w.background.ar, e.ln[n - 1])
                         .trace()
                         .real();
  return val / nrm;
}

inline double window_energy(const WindowMps& w, const WindowHamiltonian& h) {
  check_window(w, &h);
  const int n = w.size();
  const Matrix id = Matrix::Identity(w.background.bond(), w.background.bond());
  Matrix ln = id, le = h.env.libc, lnp = id;
  for (int k = 0; k < n; ++k) {
    const MpsTensor& wk = w.tensors[static_cast<std::size_t>(k)];
    const MpsTensor& wp = detail::site_or_background(w, k - 1);
    le = transfer_left(wk, wk, le) + operator_transfer_left(h.bonds[k], wp, wk, wp, wk, lnp);
    lnp = ln;
    ln = transfer_left(wk, wk, ln);
  }
  const double val = pairing(le, id).real() + pairing(ln, h.env.ribc).real() +
                     operator_transfer_left(h.bonds[n], w.tensors.back(), w.background.ar, w.tensors.back(),
                                            w.background.ar, lnp)
                         .trace()
                         .real();
  return val / ln.trace().real();
}

// ---------------------------------------------------------------------------
// Local effective problem at one window site

struct SiteProblem {
  int d = 0;
  Eigen::Index dl = 0, dr = 0;
  Matrix ln, le, rn, re;
  std::vector<Matrix> pl;  // pl[t'*d+t], acts from the left together with rn
  std::vector<Matrix> pr;  // pr[s'*d+s], acts from the right together with ln

  MpsTensor apply_h(const MpsTensor& x) const {
    MpsTensor out(static_cast<std::size_t>(d));
    for (int s = 0; s < d; ++s) out[s] = le * x[s] * rn + ln * x[s] * re;
    for (int tp = 0; tp < d; ++tp) {
      Matrix accl = Matrix::Zero(dl, dr);
      Matrix accr = Matrix::Zero(dl, dr);
      for (int t = 0; t < d; ++t) {
        accl.noalias() += pl[tp * d + t] * x[t];
        accr.noalias() += x[t] * pr[tp * d + t];
      }
      out[tp].noalias() += accl * rn + ln * accr;
    }
    return out;
  }

  MpsTensor apply_n(const MpsTensor& x) const {
    MpsTensor out(static_cast<std::size_t>(d));
    for (int s = 0; s < d; ++s) out[s] = ln * x[s] * rn;
    return out;
  }

  Matrix dense_h() const {
    const Eigen::Index n = d * dl * dr;
    Matrix m(n, n);
    for (Eigen::Index j = 0; j < n; ++j) m.col(j) = to_vector(apply_h(to_tensor(Vector::Unit(n, j), d, dl, dr)));
    return m;
  }

  Matrix dense_n() const {
    const Eigen::Index n = d * dl * dr;
    Matrix m(n, n);
    for (Eigen::Index j = 0; j < n; ++j) m.col(j) = to_vector(apply_n(to_tensor(Vector::Unit(n, j), d, dl, dr)));
    return m;
  }
};

inline SiteProblem site_problem(const WindowMps& w, const WindowHamiltonian& h, const SegmentEnvironments& e, int k) {
  const int n = w.size();
  if (k < 0 || k >= n) throw WindowError("site_problem: index outside window");
  const MpsTensor& wk = w.tensors[static_cast<std::size_t>(k)];
  const MpsTensor& wp = detail::site_or_background(w, k - 1);
  const MpsTensor& wn = detail::site_or_background(w, k + 1);
  SiteProblem p;
  p.d = phys_dim(wk);
  p.dl = left_dim(wk);
  p.dr = right_dim(wk);
  p.ln = e.ln[k];
  p.le = e.le[k];
  p.rn = e.rn[k + 1];
  p.re = e.re[k + 1];
  const Matrix& lnp = k == 0 ? e.identity : e.ln[static_cast<std::size_t>(k - 1)];
  const Matrix& rnn = k + 2 <= n ? e.rn[static_cast<std::size_t>(k + 2)] : e.identity;
  const int d = p.d, dp = phys_dim(wp), dn = phys_dim(wn);
  // left bond: h(s't', st) with s on wp and t on this site
  {
    const Matrix& hb = h.bonds[static_cast<std::size_t>(k)];
    std::vector<Matrix> q(static_cast<std::size_t>(dp * dp));
    for (int sp = 0; sp < dp; ++sp)
      for (int s = 0; s < dp; ++s) q[sp * dp + s] = wp[sp].adjoint() * lnp * wp[s];
    p.pl.assign(static_cast<std::size_t>(d * d), Matrix::Zero(p.dl, p.dl));
    for (int tp = 0; tp < d; ++tp)
      for (int t = 0; t < d; ++t)
        for (int sp = 0; sp < dp; ++sp)
          for (int s = 0; s < dp; ++s) {
            const cplx c = hb(sp * d + tp, s * d + t);
            if (c != cplx(0.0)) p.pl[tp * d + t] += c * q[sp * dp + s];
          }
  }
  // right bond: h(s't', st) with s on this site and t on wn
  {
    const Matrix& hb = h.bonds[static_cast<std::size_t>(k + 1)];
    std::vector<Matrix> q(static_cast<std::size_t>(dn * dn));
    for (int t = 0; t < dn; ++t)
      for (int tp = 0; tp < dn; ++tp) q[t * dn + tp] = wn[t] * rnn * wn[tp].adjoint();
    p.pr.assign(static_cast<std::size_t>(d * d), Matrix::Zero(p.dr, p.dr));
    for (int sp = 0; sp < d; ++sp)
      for (int s = 0; s < d; ++s)
        for (int tp = 0; tp < dn; ++tp)
          for (int t = 0; t < dn; ++t) {
            const cplx c = hb(sp * dn + tp, s * dn + t);
            if (c != cplx(0.0)) p.pr[sp * d + s] += c * q[t * dn + tp];
          }
  }
  return p;
}

/// H_eff and N_eff of the centre tensor of a single-tensor window.
inline SiteProblem effective_center_problem(const WindowMps& w, const WindowHamiltonian& h) {
  if (w.size() != 1) throw WindowError("effective_center_problem: window must hold exactly one tensor");
  return site_problem(w, h, segment_environments(w, h), 0);
}

struct SiteSolution {
  MpsTensor x;  // normalized so that <x|N_eff|x> = 1
  double value = 0.0;
  double residual = 0.0;
};

/// Lowest solution of lambda N_eff x = H_eff x via the symmetric reduction
/// x = ln^{-1/2} y rn^{-1/2}.
inline SiteSolution solve_site(const SiteProblem& p, const MpsTensor& guess, double tol = 1e-11) {
  const HermitianEig el = hermitian_eig(hermitian_part(p.ln));
  const HermitianEig er = hermitian_eig(hermitian_part(p.rn));
  const double fl = el.values.maxCoeff() * 1e-13, fr = er.values.maxCoeff() * 1e-13;
  if (el.values.minCoeff() < fl || er.values.minCoeff() < fr)
    throw WindowError("solve_site: N_eff not positive definite beyond floor");
  const Matrix li = inv_sqrt(hermitian_part(p.ln), fl);
  const Matrix ri = inv_sqrt(hermitian_part(p.rn), fr);
  const Matrix ls = sqrt_psd(hermitian_part(p.ln));
  const Matrix rs = sqrt_psd(hermitian_part(p.rn));
  const auto op = [&](const Vector& v) {
    MpsTensor y = to_tensor(v, p.d, p.dl, p.dr);
    for (auto& m : y) m = li * m * ri;
    MpsTensor hy = p.apply_h(y);
    for (auto& m : hy) m = li * m * ri;
    return to_vector(hy);
  };
  MpsTensor g = guess;
  for (auto& m : g) m = ls * m * rs;
  const LanczosResult r = lanczos_lowest(op, to_vector(g), tol, 60, 400);
  SiteSolution s;
  s.x = to_tensor(r.vector, p.d, p.dl, p.dr);
  for (auto& m : s.x) m = li * m * ri;
  const cplx nn = inner(s.x, p.apply_n(s.x));
  s.x = (1.0 / std::sqrt(nn.real())) * s.x;
  s.value = r.value;
  s.residual = r.residual;
  return s;
}

// ---------------------------------------------------------------------------
// Gauge fixing

/// Left-orthonormalizes tensors[0..c-1], right-orthonormalizes tensors[c+1..],
/// and normalizes the state on tensors[c].
inline void gauge_window(WindowMps& w, int c) {
  const int n = w.size();
  if (c < 0 || c >= n) throw WindowError("gauge_window: centre outside window");
  for (int k = 0; k < c; ++k) {
    MpsTensor& t = w.tensors[static_cast<std::size_t>(k)];
    const int d = phys_dim(t);
    Eigen::HouseholderQR<Matrix> qr(left_stack(t));
    const Eigen::Index cols = right_dim(t);
    const Eigen::Index rows = left_stack(t).rows();
    const Eigen::Index kk = std::min(rows, cols);
    Matrix q = qr.householderQ() * Matrix::Identity(rows, kk);
    Matrix r = qr.matrixQR().topRows(kk).triangularView<Eigen::Upper>();
    if (kk < cols) throw WindowError("gauge_window: bond exceeds local space");
    t = from_left_stack(q, d);
    w.tensors[static_cast<std::size_t>(k + 1)] = left_multiply(r, w.tensors[static_cast<std::size_t>(k + 1)]);
  }
  for (int k = n - 1; k > c; --k) {
    MpsTensor& t = w.tensors[static_cast<std::size_t>(k)];
    const int d = phys_dim(t);
    const Matrix m = right_stack(t).adjoint();
    Eigen::HouseholderQR<Matrix> qr(m);
    const Eigen::Index rows = m.rows(), cols = m.cols();
    if (rows < cols) throw WindowError("gauge_window: bond exceeds local space");
    Matrix q = qr.householderQ() * Matrix::Identity(rows, cols);
    Matrix r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
    t = from_right_stack(q.adjoint(), d);
    w.tensors[static_cast<std::size_t>(k - 1)] = right_multiply(w.tensors[static_cast<std::size_t>(k - 1)], r.adjoint());
  }
  MpsTensor& ct = w.tensors[static_cast<std::size_t>(c)];
  ct = (1.0 / norm(ct)) * ct;
  w.center = c;
}

// ---------------------------------------------------------------------------
// Tangent vectors and the imaginary-time TDVP step

struct TangentData {
  std::vector<MpsTensor> c;  // C_[k], the tangent direction per window site
  std::vector<double> weights;  // Tr(X X^dag) per site, ||C||^2_N at the centre
  double energy = 0.0;
  double norm = 0.0;  // sqrt(sum weights)
};

namespace detail {

inline Matrix pinv_sqrt(const Matrix& m) { return regularized_inv_sqrt(m, 1e-12); }

}  // namespace detail

/// Null-space basis V of the stacked matrix [sqrt(l) W^s]_s, so that
/// sum_s (sqrt(l) W^s)^dag V^s = 0 and V^dag V = 1.
inline Matrix left_tangent_basis(const MpsTensor& w, const Matrix& l) {
  const Matrix ls = sqrt_psd(hermitian_part(l));
  return null_complement(left_stack(left_multiply(ls, w)));
}

/// Maps X to C(X)^s = l^{-1/2} V^s X r^{-1/2}.
inline MpsTensor left_tangent(const Matrix& v, const Matrix& x, const Matrix& li, const Matrix& ri, int d) {
  MpsTensor c = from_left_stack(v * x, d);
  for (auto& m : c) m = li * m * ri;
  return c;
}

/// Per-site tangent directions of steepest descent for the current window
/// with centre c. Sites left of c use the left gauge condition, sites right
/// of c the right gauge condition, and the centre is unconstrained.
inline TangentData tangent_directions(const WindowMps& w, const WindowHamiltonian& h, const SegmentEnvironments& e,
                                      int c) {
  const int n = w.size();
  TangentData td;
  td.energy = window_energy(w, h, e);
  td.c.resize(static_cast<std::size_t>(n));
  td.weights.resize(static_cast<std::size_t>(n));
  double total = 0.0;
  for (int k = 0; k < n; ++k) {
    const MpsTensor& wk = w.tensors[static_cast<std::size_t>(k)];
    const SiteProblem p = site_problem(w, h, e, k);
    const MpsTensor g = p.apply_h(wk) - td.energy * p.apply_n(wk);
    const Matrix li = detail::pinv_sqrt(hermitian_part(p.ln));
    const Matrix ri = detail::pinv_sqrt(hermitian_part(p.rn));
    MpsTensor y = g;
    for (auto& m : y) m = li * m * ri;
    if (k < c) {
      const Matrix v = left_tangent_basis(wk, p.ln);
      const Matrix x = v.adjoint() * left_stack(y);
      td.c[k] = left_tangent(v, x, li, ri, p.d);
      td.weights[k] = x.squaredNorm();
    } else if (k > c) {
      const Matrix rs = sqrt_psd(hermitian_part(p.rn));
      const Matrix v = null_complement(right_stack(right_multiply(wk, rs)).adjoint()).adjoint();
      const Matrix x = right_stack(y) * v.adjoint();
      MpsTensor cc = from_right_stack(x * v, p.d);
      for (auto& m : cc) m = li * m * ri;
      td.c[k] = cc;
      td.weights[k] = x.squaredNorm();
    } else {
      MpsTensor cc = y;
      for (auto& m : cc) m = li * m * ri;
      td.c[k] = cc;
      td.weights[k] = squared_norm(y);
    }
    total += td.weights[k];
  }
  td.norm = std::sqrt(total);
  return td;
}

struct TdvpStepResult {
  WindowMps state;
  double energy_before = 0.0;
  double energy_after = 0.0;
  double dtau = 0.0;
  double step_norm = 0.0;  // dtau * ||C||
  std::vector<double> weights;
};

/// One imaginary-time step W_k <- W_k - dtau C_k, with backtracking on the
/// step size until the energy does not increase.
inline TdvpStepResult tdvp_imaginary_step(const WindowMps& w_in, const WindowHamiltonian& h, double dtau,
                                          double dtau_floor = 1e-3) {
  if (!(dtau > 0)) throw WindowError("tdvp_imaginary_step: dtau must be positive");
  WindowMps w = w_in;
  const int c = w.center >= 0 ? w.center : w.size() / 2;
  if (w.center < 0) gauge_window(w, c);
  const SegmentEnvironments e = segment_environments(w, h);
  const TangentData td = tangent_directions(w, h, e, c);
  TdvpStepResult res;
  res.energy_before = td.energy;
  res.weights = td.weights;
  const double slack = 1e-13 * std::max(1.0, std::abs(td.energy));
  for (double step = dtau;; step *= 0.5) {
    WindowMps trial = w;
    for (int k = 0; k < w.size(); ++k)
      trial.tensors[static_cast<std::size_t>(k)] = trial.tensors[static_cast<std::size_t>(k)] - step * td.c[k];
    gauge_window(trial, c);
    const double en = window_energy(trial, h);
    if (en <= td.energy + slack) {
      res.state = std::move(trial);
      res.energy_after = en;
      res.dtau = step;
      res.step_norm = step * td.norm;
      return res;
    }
    if (step * 0.5 < dtau_floor) {
      if (td.norm < 1e-10) {  // stationary up to rounding: keep the state
        res.state = w;
        res.energy_after = td.energy;
        res.dtau = step;
        res.step_norm = 0.0;
        return res;
      }
      throw WindowError("tdvp_imaginary_step: energy increases at the step-size floor");
    }
  }
}

struct TdvpOptions {
  double dtau = 0.1;
  double dtau_floor = 1e-3;
  double tol = 1e-9;  // on the fidelity distance 1 - |<psi_n|psi_n+1>| of successive states
  int max_steps = 20000;
  std::function<void(int, double, double, double)> observer;  // step, energy, dtau, distance
};

struct TdvpResult {
  WindowMps state;
  double energy = 0.0;
  int steps = 0;
  double last_step_norm = 0.0;
  double last_distance = 0.0;
  bool converged = false;
};

inline double window_fidelity(const WindowMps& w1, const WindowMps& w2);

inline TdvpResult tdvp_optimize(const WindowMps& init, const WindowHamiltonian& h, const TdvpOptions& opt = {}) {
  TdvpResult res;
  WindowMps w = init;
  if (w.center < 0) gauge_window(w, w.size() / 2);
  double dtau = opt.dtau;
  for (int step = 1; step <= opt.max_steps; ++step) {
    TdvpStepResult s = tdvp_imaginary_step(w, h, dtau, opt.dtau_floor);
    dtau = std::max(s.dtau, opt.dtau_floor);
    const double dist = 1.0 - window_fidelity(w, s.state);
    w = std::move(s.state);
    res.steps = step;
    res.energy = s.energy_after;
    res.last_step_norm = s.step_norm;
    res.last_distance = dist;
    if (opt.observer) opt.observer(step, s.energy_after, s.dtau, dist);
    if (dist < opt.tol) {
      res.converged = true;
      break;
    }
  }
  res.state = std::move(w);
  return res;
}

// ---------------------------------------------------------------------------
// Overlaps and expectation values

/// Pads a window with background tensors so that it covers [first, last].
inline WindowMps pad_window(const WindowMps& w, int first, int last) {
  if (first > w.first() || last < w.last()) throw WindowError("pad_window: range must contain the window");
  WindowMps out;
  out.background = w.background;
  out.offset = first;
  for (int p = first; p < w.first(); ++p) out.tensors.push_back(w.background.al);
  for (const auto& t : w.tensors) out.tensors.push_back(t);
  for (int p = w.last() + 1; p <= last; ++p) out.tensors.push_back(w.background.ar);
  out.center = w.center >= 0 ? w.center + (w.first() - first) : -1;
  return out;
}

inline bool same_background(const UniformMps& a, const UniformMps& b) {
  if (a.d() != b.d() || a.bond() != b.bond()) return false;
  for (int s = 0; s < a.d(); ++s)
    if (a.al[s] != b.al[s] || a.ar[s] != b.ar[s]) return false;
  return true;
}

/// <w1|w2>, both normalized, contracted through the union of the windows.
inline cplx window_overlap(const WindowMps& w1, const WindowMps& w2) {
  if (!same_background(w1.background, w2.background)) throw WindowError("window_overlap: different backgrounds");
  const int first = std::min(w1.first(), w2.first());
  const int last = std::max(w1.last(), w2.last());
  const WindowMps a = pad_window(w1, first, last);
  const WindowMps b = pad_window(w2, first, last);
  Matrix l = Matrix::Identity(a.background.bond(), a.background.bond());
  for (int k = 0; k < a.size(); ++k) {
    if (phys_dim(a.tensors[k]) != phys_dim(b.tensors[k])) throw WindowError("window_overlap: physical dimensions differ");
    l = transfer_left(b.tensors[k], a.tensors[k], l);
  }
  return l.trace() / std::sqrt(window_norm(w1) * window_norm(w2));
}

inline double window_fidelity(const WindowMps& w1, const WindowMps& w2) { return std::abs(window_overlap(w1, w2)); }

/// Expectation values of one-site operators. ops(p) lists the operators for
/// every physical site of the tensor at position p (several for blocked cells).
inline std::vector<double> expectation_profile(const WindowMps& w, int first, int last,
                                               const std::function<std::vector<Matrix>(int)>& ops) {
  const WindowMps x = pad_window(w, std::min(first, w.first()), std::max(last, w.last()));
  const int n = x.size();
  std::vector<Matrix> ln(static_cast<std::size_t>(n + 1)), rn(static_cast<std::size_t>(n + 1));
  ln[0] = Matrix::Identity(x.background.bond(), x.background.bond());
  for (int k = 0; k < n; ++k) ln[k + 1] = transfer_left(x.tensors[k], x.tensors[k], ln[k]);
  rn[n] = Matrix::Identity(x.background.bond(), x.background.bond());
  for (int k = n - 1; k >= 0; --k) rn[k] = transfer_right(x.tensors[k], x.tensors[k], rn[k + 1]);
  const double nrm = ln[n].trace().real();
  std::vector<double> out;
  for (int p = first; p <= last; ++p) {
    const int k = p - x.offset;
    for (const Matrix& o : ops(p))
      out.push_back(pairing(ln[k], site_transfer_right(o, x.tensors[k], x.tensors[k], rn[k + 1])).real() / nrm);
  }
  return out;
}

}  // namespace locspin
