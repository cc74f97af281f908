#include <gtest/gtest.h>

#include <random>

#include "locspin/aklt.hpp"
#include "locspin/transfer.hpp"
#include "locspin/uniform_mps.hpp"
#include "locspin/vumps.hpp"
#include "oracles.hpp"

using namespace locspin;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = cplx(g(rng), g(rng));
  return m;
}

Matrix random_hermitian(Eigen::Index n, std::uint64_t seed) {
  const Matrix m = random_matrix(n, n, seed);
  return 0.5 * (m + m.adjoint());
}

}  // namespace

// ---------------------------------------------------------------------------
// Dense and Krylov linear algebra

TEST(Linalg, HermitianEigRejectsNonHermitian) {
  EXPECT_THROW(hermitian_eig(random_matrix(4, 4, 1)), LinalgError);
  const Matrix h = random_hermitian(6, 2);
  const HermitianEig e = hermitian_eig(h);
  EXPECT_LT(max_abs(h * e.vectors - e.vectors * e.values.cast<cplx>().asDiagonal()), 1e-12);
}

TEST(Linalg, GeneralizedEigenproblem) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Matrix h = random_hermitian(6, seed);
    const Matrix x = random_matrix(6, 6, seed + 100);
    const Matrix g = x * x.adjoint() + 0.1 * Matrix::Identity(6, 6);
    const GeneralizedEig ge = generalized_eig(h, g);
    EXPECT_EQ(ge.retained_rank, 6);
    EXPECT_LT(max_abs(h * ge.vectors - g * ge.vectors * ge.values.cast<cplx>().asDiagonal()), 1e-9);
    EXPECT_LT(max_abs(ge.vectors.adjoint() * g * ge.vectors - Matrix::Identity(6, 6)), 1e-10);
  }
  Matrix indefinite = Matrix::Identity(3, 3);
  indefinite(2, 2) = -1.0;
  EXPECT_THROW(generalized_eig(random_hermitian(3, 9), indefinite), LinalgError);
}

TEST(Linalg, GeneralizedEigenproblemDropsNullSpace) {
  const Matrix x = random_matrix(5, 3, 4);
  const Matrix g = x * x.adjoint();
  const GeneralizedEig ge = generalized_eig(random_hermitian(5, 5), g);
  EXPECT_EQ(ge.retained_rank, 3);
}

TEST(Linalg, InverseSquareRoot) {
  const Matrix x = random_matrix(5, 5, 6);
  const Matrix g = x * x.adjoint() + Matrix::Identity(5, 5);
  const Matrix s = inv_sqrt(g, 1e-12);
  EXPECT_LT(max_abs(s * g * s - Matrix::Identity(5, 5)), 1e-10);
  Matrix singular = Matrix::Identity(2, 2);
  singular(1, 1) = 0.0;
  EXPECT_THROW(inv_sqrt(singular, 1e-12), LinalgError);
}

TEST(Linalg, LanczosMatchesDense) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const Matrix h = random_hermitian(80, seed);
    const LanczosResult r = lanczos_lowest([&](const Vector& v) { return Vector(h * v); }, Vector::Ones(80), 1e-11);
    EXPECT_NEAR(r.value, hermitian_eig(h).values(0), 1e-9);
    EXPECT_LT((h * r.vector - r.value * r.vector).norm(), 1e-8);
  }
}

TEST(Linalg, GmresSolves) {
  const Matrix a = Matrix::Identity(60, 60) * 4.0 + random_matrix(60, 60, 3) * 0.2;
  const Vector b = random_matrix(60, 1, 4).col(0);
  const GmresResult r = gmres([&](const Vector& v) { return Vector(a * v); }, b, Vector::Zero(60), 1e-12);
  EXPECT_LT((a * r.x - b).norm() / b.norm(), 1e-10);
}

TEST(Linalg, ArnoldiLargestMagnitude) {
  const Matrix a = random_matrix(50, 50, 8);
  const ArnoldiResult r = arnoldi_largest([&](const Vector& v) { return Vector(a * v); }, Vector::Ones(50), 3, 1e-11, 30);
  Eigen::ComplexEigenSolver<Matrix> es(a);
  std::vector<double> mags;
  for (Eigen::Index i = 0; i < 50; ++i) mags.push_back(std::abs(es.eigenvalues()(i)));
  std::sort(mags.rbegin(), mags.rend());
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(std::abs(r.values[static_cast<std::size_t>(i)]), mags[static_cast<std::size_t>(i)], 1e-8);
}

// ---------------------------------------------------------------------------
// Spin operators

TEST(Spin, CommutationRelations) {
  for (double s : {0.5, 1.0, 1.5, 2.0}) {
    const Matrix x = spin::sx(s), y = spin::sy(s), z = spin::sz(s);
    EXPECT_LT(max_abs(x * y - y * x - cplx(0, 1) * z), 1e-13) << s;
    const Matrix casimir = x * x + y * y + z * z;
    EXPECT_LT(max_abs(casimir - s * (s + 1) * spin::identity(spin::dimension(s))), 1e-13) << s;
  }
}

// ---------------------------------------------------------------------------
// Transfer operators

TEST(Transfer, DenseMatrixMatchesKroneckerOracle) {
  const MpsTensor x = random_tensor(3, 4, 4, 1), y = random_tensor(3, 4, 4, 2);
  EXPECT_LT(max_abs(dense_matrix(transfer_operator(x, y)) - oracle::kron_transfer(x, y)), 1e-12);
}

TEST(Transfer, OperatorTransferWithIdentityIsTwoTransfers) {
  const MpsTensor x = random_tensor(2, 3, 3, 3), y = random_tensor(2, 3, 3, 4);
  const Matrix m = random_matrix(3, 3, 5);
  const Matrix id = Matrix::Identity(4, 4);
  EXPECT_LT(max_abs(operator_transfer_right(id, x, y, x, y, m) - transfer_right(x, x, transfer_right(y, y, m))), 1e-12);
  EXPECT_LT(max_abs(operator_transfer_left(id, x, y, x, y, m) - transfer_left(y, y, transfer_left(x, x, m))), 1e-12);
}

TEST(Transfer, OperatorTransferLeftRightAdjoint) {
  // (l| J_h |r) is the same number from either side.
  const MpsTensor x = random_tensor(2, 3, 3, 6), y = random_tensor(2, 3, 3, 7);
  const Matrix h = random_hermitian(4, 8);
  const Matrix l = random_matrix(3, 3, 9), r = random_matrix(3, 3, 10);
  EXPECT_NEAR(std::abs(pairing(l, operator_transfer_right(h, x, y, x, y, r)) -
                       pairing(operator_transfer_left(h, x, y, x, y, l), r)),
              0.0, 1e-11);
}

TEST(Transfer, SpectralDataBiorthonormal) {
  UniformMps u = canonicalize(random_tensor(2, 4, 4, 11));
  const SpectralData sd = spectral_data(u.al, u.al, 5);
  EXPECT_NEAR(std::abs(sd.values[0]), 1.0, 1e-10);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      EXPECT_NEAR(std::abs(pairing(sd.left[i], sd.right[j]) - (i == j ? 1.0 : 0.0)), 0.0, 1e-8);
  // iterative path agrees with the dense one
  const SpectralData it = spectral_data(u.al, u.al, 3, true, 0);
  EXPECT_NEAR(it.xi, sd.xi, 1e-7);
}

TEST(Transfer, UnnormalizedStateRejected) {
  MpsTensor a = aklt::bulk_tensor();
  for (auto& m : a) m *= 2.0;
  EXPECT_THROW(spectral_data(a, a, 2), LinalgError);
}

TEST(Transfer, ProductStateCorrelationLengthSentinel) {
  MpsTensor a(2, Matrix::Zero(1, 1));
  a[0](0, 0) = 1.0;
  EXPECT_EQ(spectral_data(a, a, 2).xi, 0.0);
}

TEST(Transfer, BoundaryEnvironmentsNeedGap) {
  MpsTensor ghz(2, Matrix::Zero(2, 2));
  ghz[0](0, 0) = 1.0;
  ghz[1](1, 1) = 1.0;
  const Matrix h = Matrix::Identity(4, 4);
  EXPECT_THROW(boundary_environments(ghz, Matrix::Identity(2, 2), 0.5 * Matrix::Identity(2, 2), h), LinalgError);
}

TEST(Transfer, AkltEnvironmentsVanish) {
  const MpsTensor a = aklt::bulk_tensor();
  const BoundaryEnvironments e = boundary_environments(a, aklt::l1(), aklt::r1(), aklt::bond_hamiltonian());
  EXPECT_NEAR(e.energy_origin_shift, 0.0, 1e-13);
  EXPECT_LT(max_abs(e.libc), 1e-12);
  EXPECT_LT(max_abs(e.ribc), 1e-12);
}

TEST(Transfer, DeflatedSolveSatisfiesProjectedEquation) {
  UniformMps u = canonicalize(random_tensor(2, 4, 4, 12));
  const Matrix h = random_hermitian(4, 13);
  const BoundaryEnvironments e = boundary_environments(u, h);
  const Matrix r = u.right_fixed_point();
  // LIBC - T_left(LIBC) + (LIBC|r) 1 = hl - e 1
  const Matrix hl = operator_transfer_left(h, u.al, u.al, u.al, u.al, Matrix::Identity(4, 4));
  const Matrix lhs = e.libc - transfer_left(u.al, u.al, e.libc) + pairing(e.libc, r) * Matrix::Identity(4, 4);
  EXPECT_LT(max_abs(lhs - (hl - e.energy_origin_shift * Matrix::Identity(4, 4))), 1e-8);
}

// ---------------------------------------------------------------------------
// Canonical forms

TEST(UniformMps, CanonicalizeRandomTensors) {
  for (std::uint64_t seed = 20; seed < 24; ++seed) {
    const UniformMps u = canonicalize(random_tensor(3, 5, 5, seed));
    EXPECT_LT(max_isometry_defect(u), 1e-12);
    EXPECT_LT(gauge_defect(u), 1e-10);
    EXPECT_NEAR(u.c.squaredNorm(), 1.0, 1e-12);
  }
}

TEST(UniformMps, EnergyDensityBothRoutes) {
  const UniformMps u = canonicalize(random_tensor(4, 4, 4, 30));
  const Matrix h = AbahcHamiltonian{0.2, 0.0}.bond();
  EXPECT_NEAR(energy_density(u, h), energy_density_left_route(u, h), 1e-10);
}

// ---------------------------------------------------------------------------
// VUMPS

TEST(Vumps, DecoupledDimerLimit) {
  VumpsOptions o;
  o.tol = 1e-10;
  const VumpsResult r = vumps_ground_state(AbahcHamiltonian{1.0, 0.0}.bond(), 4, 4, o);
  EXPECT_NEAR(r.state.energy_density / 2.0, -0.75, 1e-10);
}

TEST(Vumps, UniformHeisenbergNearBetheAnsatz) {
  VumpsOptions o;
  o.tol = 1e-8;
  const VumpsResult r = vumps_ground_state(AbahcHamiltonian{0.0, 0.0}.bond(), 4, 12, o);
  const double bethe = 0.25 - std::log(2.0);
  EXPECT_GT(r.state.energy_density / 2.0, bethe);
  EXPECT_NEAR(r.state.energy_density / 2.0, bethe, 2e-3);
}

TEST(Vumps, EnergyIsVariationalAgainstSmallRingDiagonalization) {
  // A D = 8 uniform state is variational for the infinite chain, whose
  // energy lies between the 16- and 20-site ring values for this gapped case.
  VumpsOptions o;
  o.tol = 1e-9;
  const VumpsResult r = vumps_ground_state(AbahcHamiltonian{0.3, 0.0}.bond(), 4, 8, o);
  const double e16 = oracle::ring_ground_energy(16, 0.3) / 16.0;
  EXPECT_NEAR(r.state.energy_density / 2.0, e16, 2e-3);
}

TEST(Vumps, GradientAndGaugeAtConvergence) {
  VumpsOptions o;
  o.tol = 1e-9;
  const VumpsResult r = vumps_ground_state(AbahcHamiltonian{0.03, 0.0}.bond(), 4, 8, o);
  EXPECT_LT(r.state.gradient, 1e-9);
  EXPECT_LT(max_isometry_defect(r.state), 1e-12);
  EXPECT_LT(gauge_defect(r.state), 1e-7);
  for (std::size_t i = 1; i < r.energy_history.size(); ++i)
    EXPECT_LT(r.energy_history[i], r.energy_history[i - 1] + 1e-6);
}

TEST(Vumps, SeedConsistency) {
  VumpsOptions o;
  o.tol = 1e-9;
  const SeedConsistencyReport rep = multi_seed_consistency(AbahcHamiltonian{0.1, 0.0}.bond(), 4, 6, o, 3);
  EXPECT_TRUE(rep.pass);
}
