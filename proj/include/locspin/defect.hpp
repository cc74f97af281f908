#pragma once

// Point defects in a blocked background: an inserted single site coupled to
// the neighbouring cells, windows built around it, and their optimization.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "locspin/spin.hpp"
#include "locspin/vumps.hpp"
#include "locspin/window.hpp"

namespace locspin {

/// A single inserted site. left couples (cell, site), right couples
/// (site, cell). shift is subtracted from each of the two terms.
struct DefectSpec {
  Matrix left;
  Matrix right;
  int site_dim = 2;
  int location = 0;
  double shift = 0.0;

  Matrix shifted_left() const { return left - shift * Matrix::Identity(left.rows(), left.cols()); }
  Matrix shifted_right() const { return right - shift * Matrix::Identity(right.rows(), right.cols()); }
};

/// Weak-weak bond defect of the bond-alternating chain: one extra spin
/// between two cells, coupled to both with the weak coupling.
inline DefectSpec weak_weak_defect(const AbahcHamiltonian& h, int location = 0) {
  DefectSpec d;
  d.left = h.defect_left();
  d.right = h.defect_right();
  d.site_dim = 2;
  d.location = location;
  return d;
}

/// Bond terms for a window whose defect sites sit at the given positions.
inline WindowHamiltonian defect_window_hamiltonian(const Background& bg, const DefectSpec& defect,
                                                   const std::vector<int>& locations, const WindowMps& w) {
  WindowHamiltonian h;
  h.uniform = bg.shifted_bond;
  h.env = bg.env;
  const auto is_defect = [&](int p) { return std::find(locations.begin(), locations.end(), p) != locations.end(); };
  for (int p = w.first(); p <= w.last() + 1; ++p) {
    const bool left_is = is_defect(p - 1), right_is = is_defect(p);
    if (left_is && right_is) throw WindowError("defect_window_hamiltonian: adjacent defect sites are not supported");
    if (right_is)
      h.bonds.push_back(defect.shifted_left());
    else if (left_is)
      h.bonds.push_back(defect.shifted_right());
    else
      h.bonds.push_back(bg.shifted_bond);
  }
  check_window(w, &h);
  return h;
}

inline WindowHamiltonian defect_window_hamiltonian(const Background& bg, const DefectSpec& defect, const WindowMps& w) {
  return defect_window_hamiltonian(bg, defect, std::vector<int>{defect.location}, w);
}

/// Window of 2N+1 tensors on positions -N..N: background copies with the
/// defect site at defect.location holding a seeded random tensor.
inline WindowMps build_defect_window(const UniformMps& background, const DefectSpec& defect, int n,
                                     std::uint64_t seed = 7) {
  if (n < 0) throw WindowError("build_defect_window: N must be non-negative");
  if (defect.location < -n || defect.location > n) throw WindowError("build_defect_window: defect outside window");
  WindowMps w;
  w.background = background;
  w.offset = -n;
  const Eigen::Index dim = background.bond();
  for (int p = -n; p <= n; ++p) {
    if (p < defect.location)
      w.tensors.push_back(background.al);
    else if (p == defect.location)
      w.tensors.push_back(random_tensor(defect.site_dim, dim, dim, seed));
    else
      w.tensors.push_back(background.ar);
  }
  gauge_window(w, defect.location + n);
  return w;
}

/// Window around the defect with a given centre tensor, background elsewhere.
inline WindowMps defect_window_with_center(const UniformMps& background, const DefectSpec& defect, int n,
                                           const MpsTensor& center) {
  WindowMps w = build_defect_window(background, defect, n);
  w.tensors[static_cast<std::size_t>(defect.location + n)] = center;
  gauge_window(w, defect.location + n);
  return w;
}

struct CenterSolution {
  WindowMps state;  // single-tensor window
  double energy = 0.0;
  double residual = 0.0;
};

/// Minimizes the single-tensor window by the generalized eigenproblem
/// lambda N_eff x = H_eff x.
inline CenterSolution solve_center(const Background& bg, const DefectSpec& defect, std::uint64_t seed = 7) {
  DefectSpec d0 = defect;
  d0.location = 0;
  WindowMps w = build_defect_window(bg.state, d0, 0, seed);
  const WindowHamiltonian h = defect_window_hamiltonian(bg, d0, w);
  const SiteProblem p = effective_center_problem(w, h);
  const SiteSolution s = solve_site(p, w.tensors[0]);
  w.tensors[0] = s.x;
  gauge_window(w, 0);
  CenterSolution out;
  out.energy = window_energy(w, h);
  out.residual = s.residual;
  w.offset = defect.location;
  out.state = std::move(w);
  return out;
}

enum class WindowInit { vacuum, random };

struct WindowOptimization {
  WindowMps state;
  double energy = 0.0;
  int steps = 0;
  bool converged = false;
  double last_step_norm = 0.0;
};

/// Optimizes the 2N+1 window around the defect. With WindowInit::vacuum the
/// start is the N = 0 solution padded with background tensors.
inline WindowOptimization optimize_window(const Background& bg, const DefectSpec& defect, int n,
                                          const TdvpOptions& opt = {}, WindowInit init = WindowInit::vacuum,
                                          std::uint64_t seed = 7) {
  WindowMps w = build_defect_window(bg.state, defect, n, seed);
  if (init == WindowInit::vacuum) {
    const CenterSolution c = solve_center(bg, defect, seed);
    w.tensors[static_cast<std::size_t>(defect.location + n)] = c.state.tensors[0];
    gauge_window(w, defect.location + n);
  }
  const WindowHamiltonian h = defect_window_hamiltonian(bg, defect, w);
  const TdvpResult r = tdvp_optimize(w, h, opt);
  WindowOptimization out;
  out.state = r.state;
  out.energy = r.energy;
  out.steps = r.steps;
  out.converged = r.converged;
  out.last_step_norm = r.last_step_norm;
  if (!r.converged) throw ConvergenceError("optimize_window: no convergence within the step budget", r.last_step_norm);
  return out;
}

/// Tangent-space weights eps_m of the optimized single-tensor window, for
/// positions m = -M..M around the defect. eps_0 is ||C_0||^2 in the N_eff
/// metric, eps_m = Tr(X_m X_m^dag) otherwise.
inline std::vector<double> tangent_energy_weights(const Background& bg, const DefectSpec& defect,
                                                  const WindowMps& vacuum, int m) {
  if (vacuum.size() != 1) throw WindowError("tangent_energy_weights: expects the single-tensor window");
  WindowMps w = pad_window(vacuum, vacuum.first() - m, vacuum.last() + m);
  gauge_window(w, m);
  const WindowHamiltonian h = defect_window_hamiltonian(bg, defect, w);
  const SegmentEnvironments e = segment_environments(w, h);
  return tangent_directions(w, h, e, m).weights;
}

/// S^z for every physical site of the tensor at position p, for the blocked
/// chain with inserted single sites at the given positions.
inline std::vector<Matrix> blocked_sz_operators(int p, const std::vector<int>& defect_positions) {
  if (std::find(defect_positions.begin(), defect_positions.end(), p) != defect_positions.end())
    return {spin::sz(0.5)};
  const Matrix i2 = spin::identity(2);
  return {spin::kron(spin::sz(0.5), i2), spin::kron(i2, spin::sz(0.5))};
}

/// Site labels matching blocked_sz_operators, with site 0 on the first
/// defect and consecutive labels along the chain.
inline std::vector<int> blocked_site_labels(int first, int last, const std::vector<int>& defect_positions) {
  const int origin = defect_positions.empty() ? 0 : defect_positions.front();
  const auto width = [&](int p) {
    return std::find(defect_positions.begin(), defect_positions.end(), p) != defect_positions.end() ? 1 : 2;
  };
  int start = 0;  // label of the first site at position origin
  if (first <= origin) {
    for (int p = first; p < origin; ++p) start -= width(p);
  } else {
    for (int p = origin; p < first; ++p) start += width(p);
  }
  std::vector<int> labels;
  int s = start;
  for (int p = first; p <= last; ++p)
    for (int i = 0; i < width(p); ++i) labels.push_back(s++);
  return labels;
}

}  // namespace locspin
