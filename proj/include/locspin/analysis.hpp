#pragma once

// Sweeps over window length and defect separation, decay-length fits, the
// man-made two-spin state and its energy, and the spectral-sum expansion of
// that energy.

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "locspin/defect.hpp"
#include "locspin/transfer.hpp"
#include "locspin/window.hpp"

namespace locspin {

class AnalysisError : public LinalgError {
 public:
  using LinalgError::LinalgError;
};

// ---------------------------------------------------------------------------
// Fits

struct DecayFit {
  double slope = 0.0;
  double intercept = 0.0;
  double decay_length = 0.0;  // -1/slope
  double r2 = 0.0;
  double x_first = 0.0, x_last = 0.0;
  int points = 0;
};

/// Least-squares line through ln|y| against x, using only x >= x_min and
/// |y| > floor.
inline DecayFit fit_decay(const std::vector<double>& x, const std::vector<double>& y, double x_min = -1e300,
                          double floor = 1e-12) {
  if (x.size() != y.size()) throw AnalysisError("fit_decay: size mismatch");
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] >= x_min && std::abs(y[i]) > floor && std::isfinite(y[i])) {
      xs.push_back(x[i]);
      ys.push_back(std::log(std::abs(y[i])));
    }
  if (xs.size() < 3) throw AnalysisError("fit_decay: fewer than 3 usable points");
  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  DecayFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.decay_length = -1.0 / f.slope;
  double ss_res = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (f.intercept + f.slope * xs[i]);
    ss_res += r * r;
  }
  f.r2 = syy > 0 ? 1.0 - ss_res / syy : 1.0;
  f.x_first = xs.front();
  f.x_last = xs.back();
  f.points = static_cast<int>(xs.size());
  return f;
}

struct SweepResult {
  std::string x_name;
  std::vector<double> x;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> values;  // values[c][i] for columns[c]
  std::string fit_column;
  bool has_fit = false;
  DecayFit fit;
  double amplitude_at_origin = 0.0;
  std::map<std::string, std::string> metadata;
  std::vector<std::string> warnings;

  const std::vector<double>& column(const std::string& name) const {
    for (std::size_t c = 0; c < columns.size(); ++c)
      if (columns[c] == name) return values[c];
    throw AnalysisError("SweepResult: no column " + name);
  }
};

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Defect magnetization

struct SiteProfile {
  std::vector<int> sites;
  std::vector<double> values;
  double sum() const {
    double s = 0;
    for (double v : values) s += v;
    return s;
  }
  double at(int site) const {
    for (std::size_t i = 0; i < sites.size(); ++i)
      if (sites[i] == site) return values[i];
    throw AnalysisError("SiteProfile: site not in range");
  }
};

/// <S^z> on every physical site with label in [-range, range] (site 0 is the
/// inserted spin at position defects.front()).
inline SiteProfile defect_profile(const WindowMps& w, int range, const std::vector<int>& defects = {0}) {
  if (range < 0) throw AnalysisError("defect_profile: range must be non-negative");
  const int origin = defects.front();
  const int first = origin - range / 2 - 1, last = defects.back() + range / 2 + 1;
  const auto vals = expectation_profile(w, first, last, [&](int p) { return blocked_sz_operators(p, defects); });
  const auto labels = blocked_site_labels(first, last, defects);
  const int top = blocked_site_labels(defects.back(), defects.back(), defects).front() + range;
  SiteProfile out;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= -range && labels[i] <= top) {
      out.sites.push_back(labels[i]);
      out.values.push_back(vals[i]);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Window length against fidelity

struct SweepOptions {
  TdvpOptions tdvp;
  std::uint64_t seed = 7;
  double xi = 0.0;  // bulk correlation length; fit excludes x < xi
};

/// sqrt(1 - |<Psi(N_max)|Psi(N)>|) for windows optimized independently at
/// every N, started from the padded N = 0 solution.
inline SweepResult window_sweep(const Background& bg, const DefectSpec& defect, const std::vector<int>& n_list,
                                int n_max, const SweepOptions& opt) {
  if (n_list.empty()) throw AnalysisError("window_sweep: empty N list");
  for (int n : n_list)
    if (n < 0 || n > n_max) throw AnalysisError("window_sweep: need 0 <= N <= N_max");
  const auto optimized = [&](int n) -> WindowMps {
    if (n == 0) return solve_center(bg, defect, opt.seed).state;
    return optimize_window(bg, defect, n, opt.tdvp, WindowInit::vacuum, opt.seed).state;
  };
  const WindowMps ref = optimized(n_max);
  SweepResult r;
  r.x_name = "N";
  r.columns = {"distance", "fidelity", "energy"};
  r.values.assign(3, {});
  for (int n : n_list) {
    const WindowMps w = n == n_max ? ref : optimized(n);
    const double f = window_fidelity(ref, w);
    const WindowHamiltonian h = defect_window_hamiltonian(bg, defect, w);
    r.x.push_back(n);
    r.values[0].push_back(std::sqrt(std::max(0.0, 1.0 - f)));
    r.values[1].push_back(f);
    r.values[2].push_back(window_energy(w, h));
  }
  r.fit_column = "distance";
  r.metadata["N_max"] = std::to_string(n_max);
  r.metadata["D"] = std::to_string(bg.state.bond());
  r.metadata["tdvp_tol"] = format_double(opt.tdvp.tol);
  r.metadata["seed"] = std::to_string(opt.seed);
  for (std::size_t i = 0; i < r.x.size(); ++i)
    if (r.x[i] == 0) r.amplitude_at_origin = r.values[0][i];
  try {
    r.fit = fit_decay(r.x, r.values[0], opt.xi);
    r.has_fit = true;
  } catch (const AnalysisError& e) {
    r.warnings.push_back(std::string("window_sweep: ") + e.what());
  }
  return r;
}

/// Tangent weights eps_m of the N = 0 solution for |m| <= m_max, fitted on
/// the right-hand side m >= xi.
inline SweepResult epsilon_sweep(const Background& bg, const DefectSpec& defect, const WindowMps& vacuum, int m_max,
                                 double xi) {
  const auto eps = tangent_energy_weights(bg, defect, vacuum, m_max);
  SweepResult r;
  r.x_name = "m";
  r.columns = {"eps_right", "eps_left"};
  r.values.assign(2, {});
  for (int m = 0; m <= m_max; ++m) {
    r.x.push_back(m);
    r.values[0].push_back(eps[static_cast<std::size_t>(m_max + m)]);
    r.values[1].push_back(eps[static_cast<std::size_t>(m_max - m)]);
  }
  r.fit_column = "eps_right";
  r.fit = fit_decay(r.x, r.values[0], xi, 1e-28);
  r.has_fit = true;
  r.metadata["D"] = std::to_string(bg.state.bond());
  return r;
}

// ---------------------------------------------------------------------------
// Man-made two-spin state

/// Two copies of the single-defect centre tensor with L background cells in
/// between. The window is [B C^{-1}, A_L x L, B] over the mixed background,
/// which equals ... A B C^{-1} A^L B C^{-1} A ... with A = A_L.
struct TwoSpinState {
  UniformMps background;
  MpsTensor center;
  int separation = 0;

  std::vector<int> defect_positions() const { return {0, separation + 1}; }

  WindowMps window() const {
    WindowMps w;
    w.background = background;
    w.offset = 0;
    const Matrix ci = background.c.inverse();
    w.tensors.push_back(right_multiply(center, ci));
    for (int i = 0; i < separation; ++i) w.tensors.push_back(background.al);
    w.tensors.push_back(center);
    w.center = -1;
    return w;
  }
};

inline TwoSpinState man_made_two_spin(const UniformMps& background, const MpsTensor& center, int separation) {
  if (separation < 1) throw AnalysisError("man_made_two_spin: L must be >= 1");
  if (left_dim(center) != background.bond() || right_dim(center) != background.bond())
    throw AnalysisError("man_made_two_spin: centre tensor does not fit the background");
  TwoSpinState ts;
  ts.background = background;
  ts.center = (1.0 / norm(center)) * center;
  ts.separation = separation;
  return ts;
}

/// Energy of the single-defect N = 0 state with unshifted defect bonds;
/// half of it is the shift per defect bond that makes the one-defect energy
/// vanish.
inline double single_defect_energy(const Background& bg, const DefectSpec& defect, const MpsTensor& center) {
  DefectSpec d0 = defect;
  d0.shift = 0.0;
  d0.location = 0;
  const WindowMps w = defect_window_with_center(bg.state, d0, 0, center);
  return window_energy(w, defect_window_hamiltonian(bg, d0, w));
}

inline DefectSpec shifted_defect(const Background& bg, const DefectSpec& defect, const MpsTensor& center) {
  DefectSpec d = defect;
  d.shift = 0.5 * single_defect_energy(bg, defect, center);
  return d;
}

struct TwoSpinEnergy {
  double energy = 0.0;     // E(L) = <H>/<Psi|Psi>
  double numerator = 0.0;  // <Psi|H|Psi>
  double norm = 0.0;       // <Psi|Psi>
};

/// E(L) by direct contraction; `defect` must carry the per-bond shift.
inline TwoSpinEnergy energy_expectation(const TwoSpinState& ts, const Background& bg, const DefectSpec& defect) {
  const WindowMps w = ts.window();
  const WindowHamiltonian h = defect_window_hamiltonian(bg, defect, ts.defect_positions(), w);
  TwoSpinEnergy e;
  e.norm = window_norm(w);
  e.energy = window_energy(w, h);
  e.numerator = e.energy * e.norm;
  return e;
}

// ---------------------------------------------------------------------------
// Spectral-sum expansion of the two-spin energy

struct SeriesTerms {
  double left_env = 0.0;      // (LIBC| T_B T^L T_B |r1)
  double right_env = 0.0;     // (l1| T_B T^L T_B |RIBC)
  double outer_left = 0.0;    // defect bond left of the first B
  double inner_left = 0.0;    // defect bond right of the first B
  double bulk = 0.0;          // the L-1 background bonds between the B's
  double inner_right = 0.0;   // defect bond left of the second B
  double outer_right = 0.0;   // defect bond right of the second B
  double stationarity = 0.0;  // single-defect bracket, zero after the shift

  double total() const { return left_env + right_env + outer_left + inner_left + bulk + inner_right + outer_right; }
};

/// The numerator <Psi|H|Psi> of the man-made state written as sums over the
/// eigenchannels of the dense background transfer matrix T = sum_k lambda_k
/// |r_k)(l_k| in the A_L gauge, with B_p = B C^{-1} and RIBC mapped to
/// C RIBC C^dag. Requires D^2 small enough for a dense decomposition.
inline SeriesTerms two_defect_series(const TwoSpinState& ts, const Background& bg, const DefectSpec& defect,
                                     std::size_t dense_limit = 4096) {
  const UniformMps& u = ts.background;
  const Eigen::Index dim = u.bond();
  if (static_cast<std::size_t>(dim * dim) > dense_limit)
    throw AnalysisError("two_defect_series: bond dimension too large for the dense spectral path");
  const int len = ts.separation;
  if (len < 2) throw AnalysisError("two_defect_series: L must be >= 2");
  const MpsTensor& a = u.al;
  const MpsTensor bp = right_multiply(ts.center, u.c.inverse());
  const Matrix l1 = Matrix::Identity(dim, dim);
  const Matrix r1 = u.c * u.c.adjoint();
  const Matrix libc = bg.env.libc;
  const Matrix ribc = u.c * bg.env.ribc * u.c.adjoint();
  const Matrix hab = defect.shifted_left();   // (A, B)
  const Matrix hba = defect.shifted_right();  // (B, A)
  const Matrix& haa = bg.shifted_bond;

  const DenseSpectrum sp = dense_spectrum(dense_matrix(transfer_operator(a, a)));
  const Eigen::Index n = sp.values.size();
  // (x| r_k) and (l_k| y) as coefficient vectors
  const auto bra_coeffs = [&](const Matrix& x) {
    Vector c(n);
    for (Eigen::Index k = 0; k < n; ++k) c(k) = pairing(x, unvec(sp.right.col(k), dim, dim));
    return c;
  };
  const auto ket_coeffs = [&](const Matrix& y) {
    Vector c(n);
    const Vector v = vec(y);
    for (Eigen::Index k = 0; k < n; ++k) c(k) = sp.left.col(k).transpose() * v;
    return c;
  };
  const auto powered = [&](const Vector& x, const Vector& y, int p) {
    cplx s = 0;
    for (Eigen::Index k = 0; k < n; ++k) s += x(k) * std::pow(sp.values(k), p) * y(k);
    return s.real();
  };

  const Matrix l1_b = transfer_left(bp, bp, l1);
  const Matrix b_r1 = transfer_right(bp, bp, r1);
  const Vector xl = bra_coeffs(l1_b), yr = ket_coeffs(b_r1);

  SeriesTerms t;
  t.left_env = powered(bra_coeffs(transfer_left(bp, bp, libc)), yr, len);
  t.right_env = powered(xl, ket_coeffs(transfer_right(bp, bp, ribc)), len);
  t.outer_left = powered(bra_coeffs(operator_transfer_left(hab, a, bp, a, bp, l1)), yr, len);
  t.inner_left = powered(bra_coeffs(operator_transfer_left(hba, bp, a, bp, a, l1)), yr, len - 1);
  t.inner_right = powered(xl, ket_coeffs(operator_transfer_right(hab, a, bp, a, bp, r1)), len - 1);
  t.outer_right = powered(xl, ket_coeffs(operator_transfer_right(hba, bp, a, bp, a, r1)), len);

  // (l_j| J^{AA} |r_k)
  Matrix jm(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Matrix jr = operator_transfer_right(haa, a, a, a, a, unvec(sp.right.col(k), dim, dim));
    jm.col(k) = ket_coeffs(jr);
  }
  cplx bulk = 0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index k = 0; k < n; ++k) {
      cplx geo = 0;
      for (int i = 0; i <= len - 2; ++i) geo += std::pow(sp.values(j), i) * std::pow(sp.values(k), len - 2 - i);
      bulk += xl(j) * geo * jm(j, k) * yr(k);
    }
  t.bulk = bulk.real();

  t.stationarity = pairing(libc, b_r1).real() + pairing(l1_b, ribc).real() +
                   pairing(operator_transfer_left(hab, a, bp, a, bp, l1), transfer_right(a, a, r1)).real() +
                   pairing(l1, operator_transfer_right(hba, bp, a, bp, a, r1)).real();
  return t;
}

// ---------------------------------------------------------------------------
// Effective exchange against separation

struct JeffOptions {
  bool optimize = false;  // TDVP re-optimization of the window between the defects
  double hz = 0.0;        // required when optimize is set
  double gap = 0.145;     // Delta E, upper bound for hz
  TdvpOptions tdvp;
  double xi = 0.0;
};

/// J_eff(L) = E(L) - E(L_max) with L_max = max(10 xi, 2 max L). With
/// opt.optimize the TDVP-optimized energies are reported as a second column.
/// bg and defect must carry the field used for the optimization; the centre
/// tensor comes from the N = 0 solution of the same problem.
inline SweepResult jeff_sweep(const Background& bg, const DefectSpec& defect, const MpsTensor& center,
                              const std::vector<int>& l_list, const JeffOptions& opt) {
  if (l_list.empty()) throw AnalysisError("jeff_sweep: empty L list");
  if (opt.optimize && !(opt.hz > 0.0 && opt.hz < opt.gap))
    throw AnalysisError("jeff_sweep: optimization needs 0 < h_z < Delta E");
  const int l_top = *std::max_element(l_list.begin(), l_list.end());
  const int l_max = std::max(static_cast<int>(std::ceil(10.0 * opt.xi)), 2 * l_top);
  const DefectSpec d = shifted_defect(bg, defect, center);
  const auto man_made = [&](int len) {
    return energy_expectation(man_made_two_spin(bg.state, center, len), bg, d).energy;
  };
  const auto optimized = [&](int len) {
    const TwoSpinState ts = man_made_two_spin(bg.state, center, len);
    WindowMps w = ts.window();
    gauge_window(w, w.size() / 2);
    const WindowHamiltonian h = defect_window_hamiltonian(bg, d, ts.defect_positions(), w);
    const TdvpResult r = tdvp_optimize(w, h, opt.tdvp);
    if (!r.converged) throw ConvergenceError("jeff_sweep: window optimization did not converge", r.last_distance);
    return r.energy;
  };
  const double e_inf = man_made(l_max);
  const double e_inf_opt = opt.optimize ? optimized(l_max) : 0.0;
  SweepResult r;
  r.x_name = "L";
  r.columns = {"J_eff", "E"};
  if (opt.optimize) {
    r.columns.push_back("J_eff_optimized");
    r.columns.push_back("E_optimized");
  }
  r.values.assign(r.columns.size(), {});
  for (int len : l_list) {
    if (len < 1) throw AnalysisError("jeff_sweep: L must be >= 1");
    const double e = man_made(len);
    r.x.push_back(len);
    r.values[0].push_back(e - e_inf);
    r.values[1].push_back(e);
    if (opt.optimize) {
      const double eo = optimized(len);
      r.values[2].push_back(eo - e_inf_opt);
      r.values[3].push_back(eo);
    }
  }
  r.fit_column = "J_eff";
  r.metadata["L_max"] = std::to_string(l_max);
  r.metadata["E_inf"] = format_double(e_inf);
  if (opt.optimize) {
    r.metadata["E_inf_optimized"] = format_double(e_inf_opt);
    r.metadata["hz"] = format_double(opt.hz);
  }
  r.metadata["D"] = std::to_string(bg.state.bond());
  if (std::all_of(l_list.begin(), l_list.end(), [&](int len) { return len < opt.xi; })) {
    r.warnings.push_back("all L below the correlation length; fit suppressed");
    return r;
  }
  try {
    r.fit = fit_decay(r.x, r.values[0], opt.xi);
    r.has_fit = true;
  } catch (const AnalysisError& e) {
    r.warnings.push_back(e.what());
  }
  return r;
}

}  // namespace locspin
