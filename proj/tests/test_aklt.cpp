#include <gtest/gtest.h>

#include <random>

#include "locspin/aklt.hpp"
#include "oracles.hpp"

using namespace locspin;
using namespace locspin::aklt;

namespace {

Matrix dense_t(const MpsTensor& x, const MpsTensor& y) { return oracle::kron_transfer(x, y); }

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = cplx(g(rng), g(rng));
  return m;
}

double oracle_profile(int i) {
  // (l1| T^{..} J_Sz T^{..} T_B T^{..} |r1) by explicit matrix powers.
  const MpsTensor a = bulk_tensor(), b = impurity_tensor(Loc::up);
  const Matrix ta = dense_t(a, a), tb = dense_t(b, b);
  if (i == 0) return oracle::sandwich(l1(), oracle::kron_site_transfer(spin::sz(1.5), b, b), r1()).real();
  const Matrix j = oracle::kron_site_transfer(spin::sz(1.0), a, a);
  Matrix chain = Matrix::Identity(4, 4);
  const int n = std::abs(i) - 1;
  for (int k = 0; k < n; ++k) chain = chain * ta;
  const Matrix full = i > 0 ? Matrix(tb * chain * j) : Matrix(j * chain * tb);
  return oracle::sandwich(l1(), full, r1()).real();
}

Matrix apply_bond(const Matrix& h, const MpsTensor& x, const MpsTensor& y, int s, int t) {
  Matrix out = Matrix::Zero(x[0].rows(), y[0].cols());
  const int dy = phys_dim(y);
  for (int a = 0; a < phys_dim(x); ++a)
    for (int b = 0; b < dy; ++b) out += h(s * dy + t, a * dy + b) * x[a] * y[b];
  return out;
}

}  // namespace

TEST(AkltTensors, BulkAndImpurityAreFrustrationFree) {
  const MpsTensor a = bulk_tensor();
  const Matrix h = bond_hamiltonian();
  const HermitianEig e = hermitian_eig(h);
  EXPECT_NEAR(e.values.minCoeff(), 0.0, 1e-12);
  for (int s = 0; s < 3; ++s)
    for (int t = 0; t < 3; ++t) EXPECT_LT(max_abs(apply_bond(h, a, a, s, t)), 1e-13);
  for (Loc l : {Loc::up, Loc::down}) {
    const MpsTensor b = impurity_tensor(l);
    const Matrix hl = impurity_bond_hamiltonian(false), hr = impurity_bond_hamiltonian(true);
    EXPECT_NEAR(hermitian_eig(hl).values.minCoeff(), 0.0, 1e-12);
    for (int s = 0; s < 3; ++s)
      for (int t = 0; t < 4; ++t) {
        EXPECT_LT(max_abs(apply_bond(hl, a, b, s, t)), 1e-13);
        EXPECT_LT(max_abs(apply_bond(hr, b, a, t, s)), 1e-13);
      }
  }
}

TEST(AkltTensors, CanonicalFixedPoints) {
  const MpsTensor a = bulk_tensor();
  EXPECT_LT(max_abs(transfer_left(a, a, l1()) - l1()), 1e-14);
  EXPECT_LT(max_abs(transfer_right(a, a, r1()) - r1()), 1e-14);
  EXPECT_NEAR(pairing(l1(), r1()).real(), 1.0, 1e-15);
  EXPECT_NEAR(pairing(l2(), r2()).real(), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(pairing(l1(), r2())), 0.0, 1e-15);
}

TEST(AkltTransfer, SpectrumAndCorrelationLength) {
  const SpectralData sd = spectral_data(bulk_tensor(), bulk_tensor(), 4);
  EXPECT_NEAR(std::abs(sd.values[0] - 1.0), 0.0, 1e-12);
  for (int k = 1; k < 4; ++k) EXPECT_NEAR(std::abs(sd.values[k] + 1.0 / 3.0), 0.0, 1e-12);
  EXPECT_NEAR(sd.xi, 1.0 / std::log(3.0), 1e-12);
}

TEST(AkltTransfer, ImpurityDecomposition) {
  const MpsTensor a = bulk_tensor(), bu = impurity_tensor(Loc::up), bd = impurity_tensor(Loc::down);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix m = random_matrix(2, 2, rng);
    const Matrix diff = transfer_right(bu, bu, m) - transfer_right(a, a, m);
    const Matrix expect = (std::sqrt(2.0) / 6.0) * (r2() * pairing(l1(), m) - 2.0 * r1() * pairing(l2(), m));
    EXPECT_LT(max_abs(diff - expect), 1e-14);
    EXPECT_LT(max_abs(transfer_right(bu, bu, m) + transfer_right(bd, bd, m) - 2.0 * transfer_right(a, a, m)), 1e-14);
    const Matrix j = site_transfer_right(spin::sz(1.0), a, a, m);
    const Matrix jexp = 2.0 * expect;
    EXPECT_LT(max_abs(j - jexp), 1e-14);
  }
}

TEST(AkltProfile, ClosedFormAgainstContraction) {
  EXPECT_DOUBLE_EQ(single_impurity_profile(0), 5.0 / 6.0);
  const WindowMps w = impurity_state({0}, {Loc::up});
  for (int i = -20; i <= 20; ++i) {
    EXPECT_NEAR(profile_via_contraction(w, i), single_impurity_profile(i), 1e-12) << i;
    EXPECT_NEAR(oracle_profile(i), single_impurity_profile(i), 1e-12) << i;
  }
  double sum = 0;
  for (int i = -40; i <= 40; ++i) sum += single_impurity_profile(i);
  EXPECT_NEAR(sum, 0.5, 1e-12);
}

TEST(AkltProfile, EdgeProfile) {
  double sum = 0;
  for (int i = 1; i <= 60; ++i) {
    EXPECT_NEAR(edge_profile_via_contraction(i), edge_profile(i), 1e-12);
    sum += edge_profile(i);
  }
  EXPECT_NEAR(sum, 0.5, 1e-12);
  EXPECT_THROW(edge_profile(0), std::invalid_argument);
}

TEST(AkltProfile, TwoImpurityProfileIsSumOfG) {
  for (int sep : {2, 3, 6}) {
    const WindowMps w = impurity_state({0, sep}, {Loc::up, Loc::up});
    const double norm = gram_matrix(sep)(0, 0).real();
    for (int i = -8; i <= sep + 8; ++i)
      EXPECT_NEAR(profile_via_contraction(w, i) * norm, g1(i, sep) + g2(i, sep), 1e-12) << sep << " " << i;
  }
}

TEST(AkltGram, FormulaAgainstContractionAndOracle) {
  for (int sep : {2, 3, 5, 9}) {
    const Matrix f = gram_matrix(sep);
    EXPECT_LT(max_abs(f - gram_matrix_contraction(sep)), 1e-12) << sep;
    // oracle: explicit 4x4 matrix chain for <up up|up up>
    const MpsTensor a = bulk_tensor(), b = impurity_tensor(Loc::up);
    Matrix chain = dense_t(b, b);
    for (int k = 1; k < sep; ++k) chain = chain * dense_t(a, a);
    chain = chain * dense_t(b, b);
    EXPECT_NEAR(oracle::sandwich(l1(), chain, r1()).real(), f(0, 0).real(), 1e-12);
  }
  EXPECT_THROW(gram_matrix(1), std::invalid_argument);
}

TEST(AkltGram, QubitBasisOrthonormalizes) {
  for (int sep : {2, 3, 5, 8}) {
    const QubitBasis q = qubit_basis(sep);
    const Matrix g = gram_matrix_contraction(sep);
    EXPECT_LT(max_abs(q.transform.adjoint() * g * q.transform - Matrix::Identity(4, 4)), 1e-10);
    EXPECT_LT(max_abs(q.transform - regularized_inv_sqrt(g, 1e-14)), 1e-10);
  }
}

TEST(AkltField, UniformFieldOnOneImpurity) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::Vector3d h(u(rng), u(rng), u(rng));
    Field f;
    for (int i = -40; i <= 40; ++i) f[i] = h;
    const Matrix closed = effective_field_matrix(f, {0});
    EXPECT_LT(max_abs(closed - spin_half_field(h)), 1e-12);
    EXPECT_LT(max_abs(field_matrix_contraction({0}, f) - closed), 1e-12);
  }
}

TEST(AkltField, RandomFieldsOneAndTwoImpurities) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 3; ++trial) {
    Field f;
    for (int i = -6; i <= 12; ++i) f[i] = Eigen::Vector3d(u(rng), u(rng), u(rng));
    EXPECT_LT(max_abs(field_matrix_contraction({0}, f) - effective_field_matrix(f, {0})), 1e-12);
    for (int sep : {2, 3, 5})
      EXPECT_LT(max_abs(field_matrix_contraction({0, sep}, f) - effective_field_matrix(f, {0, sep})), 1e-12) << sep;
  }
}

TEST(AkltField, RedefinedFieldsInQubitBasis) {
  // In the orthonormal basis a z field stays diagonal and of the form
  // a1 (x) 1 + 1 (x) a2.
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1, 1);
  Field f;
  for (int i = -5; i <= 9; ++i) f[i] = Eigen::Vector3d(0, 0, u(rng));
  const int sep = 3;
  const QubitBasis q = qubit_basis(sep);
  const Matrix ht = q.transform.adjoint() * field_matrix_contraction({0, sep}, f) * q.transform;
  EXPECT_LT(max_abs(ht - ht.diagonal().asDiagonal().toDenseMatrix()), 1e-12);
  EXPECT_NEAR((ht(0, 0) + ht(3, 3) - ht(1, 1) - ht(2, 2)).real(), 0.0, 1e-12);
}

TEST(AkltNoGo, ThreeSpinsDependOnFields) {
  const NoGoReport r = three_spin_no_go_test(10, 1, 1, 1, 3);
  EXPECT_TRUE(r.dependent);
  EXPECT_GT(r.min_config_angle, 1e-3);
  // the dependence fades with the separations
  EXPECT_LT(three_spin_no_go_test(10, 2, 3, 1, 3).max_subspace_angle, r.max_subspace_angle);
}

TEST(AkltNoGo, TwoSpinControlIsIndependent) {
  const NoGoReport r = three_spin_no_go_test(10, 1, 1, 1, 2);
  EXPECT_FALSE(r.dependent);
  EXPECT_LT(r.max_subspace_angle, 1e-8);
}

TEST(AkltNoGo, UniformFieldsCoincide) {
  const NoGoReport r = three_spin_no_go_test(6, 1, 1, 4, 3, true);
  EXPECT_LT(r.max_subspace_angle, 1e-8);
}

TEST(AkltScattering, ContractionAgainstOracleAndPathForm) {
  const MpsTensor a = bulk_tensor(), b = impurity_tensor(Loc::up);
  const Matrix ta = dense_t(a, a), tb = dense_t(b, b);
  const Matrix j = oracle::kron_site_transfer(spin::sz(1.0), a, a);
  for (int la = 0; la <= 5; ++la)
    for (int lc = 0; lc <= 5; ++lc) {
      const int lb = 2;
      const ScatteringAmplitude s = scattering_amplitude(la, lb, lc);
      Matrix chain = tb;
      for (int k = 0; k < la; ++k) chain = chain * ta;
      chain = chain * tb;
      for (int k = 0; k < lb; ++k) chain = chain * ta;
      chain = chain * tb;
      for (int k = 0; k < lc; ++k) chain = chain * ta;
      chain = chain * j;
      EXPECT_NEAR(s.contraction, oracle::sandwich(l1(), chain, r1()).real(), 1e-14);
      EXPECT_NEAR(s.triple_path, s.path_closed_form, 1e-14);
      EXPECT_NEAR(s.triple_path, -s.stated_closed_form / 3.0, 1e-14);
    }
}
