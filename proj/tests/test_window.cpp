#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "locspin/analysis.hpp"
#include "locspin/io.hpp"

using namespace locspin;

namespace {

// Small background shared by the window tests. D = 8 keeps whole spin
// multiplets of the entanglement spectrum; D = 6 cuts through one, breaks
// S^z symmetry and the defect profile no longer sums to 1/2.
struct Shared {
  UniformMps state;
  double xi = 0.0;
  AbahcHamiltonian ham{0.1, 1e-3};
  Background bg;
  DefectSpec defect;
  CenterSolution center;

  Shared() {
    VumpsOptions o;
    o.tol = 1e-10;
    state = vumps_ground_state(AbahcHamiltonian{0.1, 0.0}.bond(), 4, 8, o).state;
    xi = spectral_data(state.al, state.al, 2).xi;
    bg = make_background(state, ham.bond());
    defect = weak_weak_defect(ham);
    center = solve_center(bg, defect);
  }
};

const Shared& shared() {
  static const Shared s;
  return s;
}

WindowMps background_window(const UniformMps& u, int n) {
  WindowMps w;
  w.background = u;
  w.offset = 0;
  for (int k = 0; k < n - 1; ++k) w.tensors.push_back(u.al);
  w.tensors.push_back(u.ac);
  return w;
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("locspin_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// Window states

TEST(Window, BackgroundWindowIsNormalizedWithZeroEnergy) {
  const Shared& s = shared();
  const WindowMps w = background_window(s.state, 4);
  EXPECT_NEAR(window_norm(w), 1.0, 1e-12);
  WindowHamiltonian h;
  h.uniform = s.bg.shifted_bond;
  h.env = s.bg.env;
  h.bonds.assign(5, s.bg.shifted_bond);
  EXPECT_NEAR(window_energy(w, h), 0.0, 1e-9);
}

TEST(Window, GaugePreservesState) {
  const Shared& s = shared();
  WindowMps w = build_defect_window(s.state, s.defect, 3, 11);
  const WindowMps ref = w;
  for (int c : {0, 3, 6}) {
    gauge_window(w, c);
    EXPECT_NEAR(window_fidelity(w, ref), 1.0, 1e-11) << c;
    EXPECT_NEAR(window_norm(w), 1.0, 1e-11);
  }
}

TEST(Window, PaddingPreservesState) {
  const Shared& s = shared();
  const WindowMps w = s.center.state;
  const WindowMps p = pad_window(w, w.first() - 3, w.last() + 2);
  EXPECT_EQ(p.size(), w.size() + 5);
  EXPECT_NEAR(window_fidelity(w, p), 1.0, 1e-11);
}

TEST(Window, ZeroWidthTdvpMatchesCenterSolve) {
  const Shared& s = shared();
  TdvpOptions o;
  o.tol = 1e-12;
  const WindowOptimization r = optimize_window(s.bg, s.defect, 0, o);
  EXPECT_NEAR(r.energy, s.center.energy, 1e-9);
}

TEST(Window, ImaginaryTimeEnergyIsMonotone) {
  const Shared& s = shared();
  std::vector<double> energies;
  TdvpOptions o;
  o.observer = [&](int, double e, double, double) { energies.push_back(e); };
  const WindowOptimization r = optimize_window(s.bg, s.defect, 2, o, WindowInit::random, 5);
  ASSERT_GT(energies.size(), 2u);
  for (std::size_t i = 1; i < energies.size(); ++i) EXPECT_LE(energies[i], energies[i - 1] + 1e-12);
  EXPECT_LE(r.energy, s.center.energy + 1e-9);
}

TEST(Window, WiderWindowsLowerTheEnergy) {
  const Shared& s = shared();
  double prev = s.center.energy;
  for (int n = 1; n <= 3; ++n) {
    const double e = optimize_window(s.bg, s.defect, n).energy;
    EXPECT_LE(e, prev + 1e-9) << n;
    prev = e;
  }
}

TEST(Window, SiteProblemMetricIsPositive) {
  const Shared& s = shared();
  WindowMps w = build_defect_window(s.state, s.defect, 2, 3);
  const WindowHamiltonian h = defect_window_hamiltonian(s.bg, s.defect, w);
  const SegmentEnvironments e = segment_environments(w, h);
  for (int k = 0; k < w.size(); ++k) {
    const SiteProblem p = site_problem(w, h, e, k);
    EXPECT_GT(hermitian_eig(p.ln).values(0), 0.0) << k;
    EXPECT_GT(hermitian_eig(p.rn).values(0), 0.0) << k;
  }
}

TEST(Window, RejectsBadInput) {
  const Shared& s = shared();
  EXPECT_THROW(build_defect_window(s.state, s.defect, -1), WindowError);
  WindowMps w = build_defect_window(s.state, s.defect, 1);
  EXPECT_THROW(tdvp_imaginary_step(w, defect_window_hamiltonian(s.bg, s.defect, w), -0.1), WindowError);
  w.tensors[1] = random_tensor(2, 3, 3, 1);
  EXPECT_THROW(check_window(w, nullptr), WindowError);
}

// ---------------------------------------------------------------------------
// Defect observables

TEST(Defect, ProfileSumsToOneHalf) {
  const Shared& s = shared();
  EXPECT_NEAR(defect_profile(s.center.state, 60).sum(), 0.5, 1e-3);
}

TEST(Defect, TangentWeightsDecay) {
  const Shared& s = shared();
  const auto eps = tangent_energy_weights(s.bg, s.defect, s.center.state, 8);
  ASSERT_EQ(eps.size(), 17u);
  for (double v : eps) EXPECT_GE(v, 0.0);
  EXPECT_LT(eps[16], eps[9]);
  EXPECT_LT(eps[0], eps[7]);
}

TEST(Defect, EpsilonSlopeFollowsSubleadingEigenvalue) {
  const Shared& s = shared();
  const SpectralData sd = spectral_data(s.state.al, s.state.al, 2);
  const SweepResult r = epsilon_sweep(s.bg, s.defect, s.center.state, 14, s.xi);
  EXPECT_NEAR(r.fit.slope / (2.0 * std::log(std::abs(sd.values[1]))), 1.0, 0.15);
}

// ---------------------------------------------------------------------------
// Fits

TEST(Fit, RecoversExactExponential) {
  std::vector<double> x, y;
  for (int i = 0; i < 12; ++i) {
    x.push_back(i);
    y.push_back(3.0 * std::exp(-i / 2.5));
  }
  const DecayFit f = fit_decay(x, y);
  EXPECT_NEAR(f.decay_length, 2.5, 1e-12);
  EXPECT_NEAR(std::exp(f.intercept), 3.0, 1e-12);
  EXPECT_NEAR(f.r2, 1.0, 1e-12);
}

TEST(Fit, RobustToDroppingFirstPoint) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-0.01, 0.01);
  std::vector<double> x, y;
  for (int i = 2; i < 20; ++i) {
    x.push_back(i);
    y.push_back(std::exp(-i / 4.0) * (1.0 + u(rng)));
  }
  const DecayFit full = fit_decay(x, y);
  const DecayFit dropped = fit_decay(std::vector<double>(x.begin() + 1, x.end()), std::vector<double>(y.begin() + 1, y.end()));
  EXPECT_NEAR(dropped.decay_length / full.decay_length, 1.0, 0.02);
}

TEST(Fit, NeedsThreePoints) {
  EXPECT_THROW(fit_decay({1.0, 2.0}, {1.0, 0.5}), AnalysisError);
  EXPECT_THROW(fit_decay({1.0, 2.0, 3.0}, {1.0, 0.0, 0.0}), AnalysisError);
}

// ---------------------------------------------------------------------------
// Sweeps

TEST(Sweep, WindowDistancesShrinkTowardsNmax) {
  const Shared& s = shared();
  SweepOptions o;
  o.xi = s.xi;
  const SweepResult r = window_sweep(s.bg, s.defect, {0, 1, 2, 3, 4}, 4, o);
  const auto& d = r.column("distance");
  EXPECT_NEAR(d.back(), 0.0, 1e-4);
  for (std::size_t i = 1; i < d.size(); ++i) EXPECT_LE(d[i], d[i - 1] + 1e-10);
}

TEST(Sweep, SeriesMatchesDirectContraction) {
  const Shared& s = shared();
  const MpsTensor& c = s.center.state.tensors[0];
  const DefectSpec d = shifted_defect(s.bg, s.defect, c);
  for (int len = 3; len <= 6; ++len) {
    const TwoSpinState ts = man_made_two_spin(s.state, c, len);
    const SeriesTerms t = two_defect_series(ts, s.bg, d);
    EXPECT_NEAR(t.total(), energy_expectation(ts, s.bg, d).numerator, 1e-10) << len;
    EXPECT_NEAR(t.stationarity, 0.0, 1e-9);
  }
}

TEST(Sweep, JeffIsBitReproducible) {
  const Shared& s = shared();
  JeffOptions o;
  o.xi = s.xi;
  const SweepResult a = jeff_sweep(s.bg, s.defect, s.center.state.tensors[0], {2, 3, 4, 5, 6}, o);
  const SweepResult b = jeff_sweep(s.bg, s.defect, s.center.state.tensors[0], {2, 3, 4, 5, 6}, o);
  EXPECT_EQ(io::to_csv(io::sweep_table(a)), io::to_csv(io::sweep_table(b)));
}

TEST(Sweep, JeffRejectsFieldAboveGap) {
  const Shared& s = shared();
  JeffOptions o;
  o.optimize = true;
  o.hz = 0.5;
  EXPECT_THROW(jeff_sweep(s.bg, s.defect, s.center.state.tensors[0], {2, 3}, o), AnalysisError);
}

// ---------------------------------------------------------------------------
// Checkpoints and tables

TEST(Io, UniformCheckpointRoundTripIsExact) {
  const Shared& s = shared();
  std::istringstream is(io::serialize_uniform(s.state, {{"delta", 0.1}}));
  const io::UniformCheckpoint c = io::deserialize_uniform(is);
  EXPECT_EQ(c.params.at("delta"), 0.1);
  EXPECT_EQ(c.state.energy_density, s.state.energy_density);
  for (int k = 0; k < 4; ++k) EXPECT_EQ(max_abs(c.state.al[k] - s.state.al[k]), 0.0);
  EXPECT_EQ(max_abs(c.state.c - s.state.c), 0.0);
}

TEST(Io, WindowCheckpointResolvesBackground) {
  const Shared& s = shared();
  const auto dir = scratch_dir("window");
  io::save_uniform(dir / "bg.ckpt", s.state);
  io::save_window(dir / "w.ckpt", s.center.state, "bg.ckpt");
  const io::WindowCheckpoint w = io::load_window(dir / "w.ckpt");
  EXPECT_EQ(w.background_ref, "bg.ckpt");
  EXPECT_NEAR(window_fidelity(w.window, s.center.state), 1.0, 1e-14);
  std::filesystem::remove_all(dir);
}

TEST(Io, CorruptCheckpointIsRejected) {
  std::istringstream bad("locspin-checkpoint 1\nkind uniform\nd 4\nD x\n");
  EXPECT_THROW(io::deserialize_uniform(bad), io::IoError);
  std::istringstream version("locspin-checkpoint 99\n");
  EXPECT_THROW(io::deserialize_uniform(version), io::IoError);
  EXPECT_THROW(io::load_uniform("/nonexistent/locspin.ckpt"), io::IoError);
}

TEST(Io, CsvIsDeterministicAndVersioned) {
  SweepResult r;
  r.x_name = "N";
  r.x = {0, 1, 2};
  r.columns = {"distance"};
  r.values = {{0.5, 0.25, 0.125}};
  r.fit_column = "distance";
  r.fit = fit_decay(r.x, r.values[0]);
  r.has_fit = true;
  const std::string csv = io::to_csv(io::sweep_table(r));
  EXPECT_EQ(csv, io::to_csv(io::sweep_table(r)));
  EXPECT_EQ(csv.rfind("# schema=1\n", 0), 0u);
  EXPECT_NE(csv.find("N,distance\n"), std::string::npos);
  EXPECT_NE(io::sweep_svg(r, "test").find("<svg"), std::string::npos);
}

TEST(Io, DirectoryLockIsExclusive) {
  const auto dir = scratch_dir("lock");
  {
    io::DirectoryLock lock(dir);
    EXPECT_THROW(io::DirectoryLock second(dir), io::IoError);
  }
  EXPECT_NO_THROW(io::DirectoryLock again(dir));
  std::filesystem::remove_all(dir);
}
