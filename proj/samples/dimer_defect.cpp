// Ground state of the bond-alternating chain at small bond dimension and the
// spin-1/2 bound to a weak-weak bond defect.
//
//   sample_dimer_defect [delta] [D]

#include <cstdio>
#include <cstdlib>

#include "locspin/defect.hpp"

using namespace locspin;

int main(int argc, char** argv) {
  const double delta = argc > 1 ? std::atof(argv[1]) : 0.1;
  const int dim = argc > 2 ? std::atoi(argv[2]) : 8;

  VumpsOptions o;
  o.tol = 1e-9;
  o.observer = [](int it, double e, double g) { std::printf("vumps %3d  e = %.12f  |grad| = %.2e\n", it, e, g); };
  const VumpsResult r = vumps_ground_state(AbahcHamiltonian{delta, 0.0}.bond(), 4, dim, o);
  const double xi = spectral_data(r.state.al, r.state.al, 2).xi;
  std::printf("energy per site %.12f, correlation length %.4f cells\n", r.state.energy_density / 2, xi);

  const AbahcHamiltonian h{delta, 1e-3};
  const Background bg = make_background(r.state, h.bond());
  const DefectSpec defect = weak_weak_defect(h);
  const WindowOptimization w = optimize_window(bg, defect, 3);
  std::printf("window N = 3: energy %.10f after %d steps\n", w.energy, w.steps);

  const int first = w.state.first() - 8, last = w.state.last() + 8;
  const auto mz = expectation_profile(w.state, first, last,
                                      [&](int p) { return blocked_sz_operators(p, {defect.location}); });
  const auto labels = blocked_site_labels(first, last, {defect.location});
  double sum = 0;
  for (std::size_t i = 0; i < mz.size(); ++i) {
    std::printf("site %4d  <Sz> = %+.6f\n", labels[i], mz[i]);
    sum += mz[i];
  }
  std::printf("total %.6f\n", sum);
}
