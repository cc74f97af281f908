// Magnetization around a spin-1/2 impurity in the AKLT chain, closed form
// against direct contraction, and the Gram matrix of two impurities.

#include <cstdio>

#include "locspin/aklt.hpp"

using namespace locspin;

int main() {
  const WindowMps w = aklt::impurity_state({0}, {aklt::Loc::up});
  std::printf("%4s %14s %14s\n", "i", "closed form", "contraction");
  double sum = 0;
  for (int i = -6; i <= 6; ++i) {
    const double f = aklt::single_impurity_profile(i);
    sum += f;
    std::printf("%4d %14.10f %14.10f\n", i, f, aklt::profile_via_contraction(w, i));
  }
  std::printf("sum over |i| <= 6: %.10f\n\n", sum);

  const int sep = 3;
  const Matrix g = aklt::gram_matrix_contraction(sep);
  std::printf("Gram matrix, L = %d (real part)\n", sep);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) std::printf(" %10.6f", g(r, c).real());
    std::printf("\n");
  }
}
