#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace fellgeom;
using namespace fellgeom::testing;

namespace {

const Complex I{0.0, 1.0};

TEST(MatrixCore, AdjointExamples) {
  const Complex m{0.3, -1.7};
  const ComplexMatrix core = mat4({{0.0, std::conj(m)}, {m, 0.0}});
  EXPECT_EQ(adjoint(core), core);
  EXPECT_EQ(adjoint(ComplexMatrix::Identity(3, 3)), ComplexMatrix::Identity(3, 3));
  ComplexMatrix one(1, 1);
  one(0, 0) = I;
  EXPECT_EQ(adjoint(one)(0, 0), -I);
}

TEST(MatrixCore, CommutatorExamples) {
  const ComplexMatrix chi = mat4({{1, 0, 0, 0}, {0, -1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, -1}});
  const ComplexMatrix a = mat4({{2, 0, 0, 0}, {0, I, 0, 0}, {0, 0, -3, 0}, {0, 0, 0, 0.5}});
  EXPECT_EQ(max_abs(commutator(chi, a)), 0.0);

  std::mt19937_64 rng(7);
  const ComplexMatrix r = random_matrix(rng, 5, 5);
  EXPECT_EQ(max_abs(commutator(r, ComplexMatrix::Identity(5, 5))), 0.0);

  // [D, rho(a)] with a = (1,0,0,0): compare against schoolbook products.
  const Complex m{1.5, -0.5};
  const ComplexMatrix d = swap_family(m);
  const ComplexMatrix ra = mat4({{1, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}});
  const ComplexMatrix expected = naive_product(d, ra) - naive_product(ra, d);
  const ComplexMatrix got = commutator(d, ra);
  EXPECT_LT(max_abs(got - expected), 1e-15);
  EXPECT_EQ(got(1, 0), m);                // row R, column L
  EXPECT_EQ(got(0, 1), -std::conj(m));    // row L, column R
  EXPECT_EQ(max_abs(got.bottomRightCorner(2, 2)), 0.0);

  EXPECT_THROW(commutator(ComplexMatrix::Zero(2, 2), ComplexMatrix::Zero(3, 3)), DimensionError);
  EXPECT_THROW(commutator(ComplexMatrix::Zero(2, 3), ComplexMatrix::Zero(2, 3)), DimensionError);
}

TEST(MatrixCore, AnticommutatorExamples) {
  const ComplexMatrix chi = mat4({{1, 0, 0, 0}, {0, -1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, -1}});
  EXPECT_EQ(max_abs(anticommutator(swap_family({2.0, 1.0}), chi)), 0.0);

  std::mt19937_64 rng(3);
  const ComplexMatrix a = random_matrix(rng, 4, 4);
  EXPECT_LT(max_abs(anticommutator(ComplexMatrix::Identity(4, 4), a) - 2.0 * a), 1e-15);

  const ComplexMatrix gh = gh_family({1.0, 2.0}, {0.5, 0.0});
  const ComplexMatrix ac = anticommutator(gh, chi);
  // (L, Lbar) entry: g * (chi_L + chi_Lbar) = 2g
  EXPECT_EQ(ac(kL, kLbar), Complex(2.0, 4.0));
  EXPECT_GT(max_abs(ac), 0.0);
}

TEST(MatrixCore, HermitianSpectrumExamples) {
  // Two 2x2 blocks [[0, conj m],[m, 0]] have eigenvalues +-|m|.
  const auto ev = hermitian_spectrum(swap_family({1.2, 1.6}));
  ASSERT_EQ(ev.size(), 4u);
  EXPECT_NEAR(ev[0], -2.0, 1e-12);
  EXPECT_NEAR(ev[1], -2.0, 1e-12);
  EXPECT_NEAR(ev[2], 2.0, 1e-12);
  EXPECT_NEAR(ev[3], 2.0, 1e-12);

  for (double v : hermitian_spectrum(ComplexMatrix::Zero(3, 3))) EXPECT_EQ(v, 0.0);

  const auto dg = hermitian_spectrum(diagonal_family(3.0, -1.0));
  EXPECT_EQ(dg, (std::vector<double>{-1.0, -1.0, 3.0, 3.0}));

  EXPECT_THROW(hermitian_spectrum(mat4({{0, 1}, {0, 0}})), NotHermitianError);
}

TEST(MatrixCore, RealNullspaceExamples) {
  RealLinearSystem sys;
  sys.coefficients = RealMatrix(1, 2);
  sys.coefficients << 1.0, -1.0;
  sys.unknowns = {{0, 0, 0, Part::re}, {0, 0, 1, Part::re}};
  const RealMatrix k = real_nullspace(sys);
  ASSERT_EQ(k.cols(), 1);
  EXPECT_NEAR(k(0, 0), 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(k(1, 0), 1.0 / std::sqrt(2.0), 1e-12);

  RealLinearSystem full;
  full.coefficients = RealMatrix(2, 2);
  full.coefficients << 2.0, 1.0, 1.0, 3.0;
  full.unknowns = sys.unknowns;
  EXPECT_EQ(real_nullspace(full).cols(), 0);

  RealLinearSystem empty_rows;
  empty_rows.coefficients = RealMatrix(0, 2);
  empty_rows.unknowns = sys.unknowns;
  EXPECT_EQ(real_nullspace(empty_rows).cols(), 2);
}

TEST(MatrixCore, RealNullspaceIsDeterministicUnderRowShuffle) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n;
  RealLinearSystem sys;
  sys.coefficients = RealMatrix(3, 7);
  for (Eigen::Index k = 0; k < sys.coefficients.size(); ++k) sys.coefficients.data()[k] = n(rng);
  for (std::size_t c = 0; c < 7; ++c) sys.unknowns.push_back({0, 0, c, Part::re});
  RealLinearSystem shuffled = sys;
  shuffled.coefficients.row(0).swap(shuffled.coefficients.row(2));
  shuffled.coefficients.row(1) *= -3.0;
  const RealMatrix a = real_nullspace(sys), b = real_nullspace(shuffled);
  ASSERT_EQ(a.cols(), 4);
  ASSERT_EQ(b.cols(), 4);
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(MatrixCore, OperatorNormExamples) {
  EXPECT_EQ(operator_norm(ComplexMatrix::Zero(4, 4)), 0.0);
  EXPECT_NEAR(operator_norm(ComplexMatrix::Identity(4, 4)), 1.0, 1e-15);
  // [D, rho(a)] with |m| = 1 has two entries of modulus 1 in transposed positions: norm 1.
  const ComplexMatrix ra = mat4({{1, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}});
  EXPECT_NEAR(operator_norm(commutator(swap_family({0.6, 0.8}), ra)), 1.0, 1e-12);
}

TEST(MatrixCore, TensorRankOneExamples) {
  ComplexMatrix one(1, 1);
  one(0, 0) = Complex(2.0, -1.0);
  EXPECT_TRUE(tensor_rank_one(one, {1, 1, 1, 1}));

  std::mt19937_64 rng(5);
  const ComplexMatrix e = random_matrix(rng, 2, 3), f = random_matrix(rng, 2, 1);
  const ComplexMatrix kron = Eigen::kroneckerProduct(e, f).eval();
  EXPECT_TRUE(tensor_rank_one(kron, {2, 3, 2, 1}));

  const ComplexMatrix e2 = random_matrix(rng, 2, 2), f2 = random_matrix(rng, 2, 2);
  const ComplexMatrix e3 = random_matrix(rng, 2, 2), f3 = random_matrix(rng, 2, 2);
  const ComplexMatrix sum = (Eigen::kroneckerProduct(e2, f2) + Eigen::kroneckerProduct(e3, f3)).eval();
  EXPECT_FALSE(tensor_rank_one(sum, {2, 2, 2, 2}));

  EXPECT_THROW(tensor_rank_one(sum, {2, 2, 1, 2}), DimensionError);
}

// ---------------------------------------------------------------------------
// Properties
// ---------------------------------------------------------------------------

TEST(MatrixCoreProperty, AdjointInvolutionAndProductRule) {
  std::mt19937_64 rng(101);
  for (int t = 0; t < 200; ++t) {
    const Eigen::Index n = 1 + t % 6;
    const ComplexMatrix a = random_matrix(rng, n, n), b = random_matrix(rng, n, n);
    EXPECT_EQ(adjoint(adjoint(a)), a);
    EXPECT_LT(max_abs(adjoint(a * b) - adjoint(b) * adjoint(a)), 1e-12);
  }
}

TEST(MatrixCoreProperty, JacobiIdentity) {
  std::mt19937_64 rng(102);
  for (int t = 0; t < 200; ++t) {
    const Eigen::Index n = 1 + t % 5;
    const ComplexMatrix a = random_matrix(rng, n, n), b = random_matrix(rng, n, n), c = random_matrix(rng, n, n);
    const ComplexMatrix j = commutator(a, commutator(b, c)) + commutator(b, commutator(c, a)) + commutator(c, commutator(a, b));
    EXPECT_LT(max_abs(j), 1e-9);
    EXPECT_LT(max_abs(commutator(a, b) + commutator(b, a)), 1e-12);
  }
}

TEST(MatrixCoreProperty, SpectrumUnitaryInvariance) {
  std::mt19937_64 rng(103);
  for (int t = 0; t < 100; ++t) {
    const Eigen::Index n = 1 + t % 6;
    const ComplexMatrix h = random_hermitian(rng, n), u = random_unitary(rng, n);
    const auto a = hermitian_spectrum(h);
    const auto b = hermitian_spectrum(u * h * u.adjoint(), 1e-8);
    ASSERT_EQ(a.size(), b.size());
    double trace = 0.0, sum = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      EXPECT_NEAR(a[k], b[k], 1e-8);
      sum += a[k];
    }
    trace = h.trace().real();
    EXPECT_NEAR(trace, sum, 1e-9);
    EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  }
}

TEST(MatrixCoreProperty, NullspaceVectorsSatisfyTheSystem) {
  std::mt19937_64 rng(104);
  std::normal_distribution<double> n;
  for (int t = 0; t < 100; ++t) {
    const Eigen::Index cols = 2 + t % 9;
    const Eigen::Index rank = t % cols;
    // Low-rank system: product of random factors.
    RealMatrix left(cols + 2, std::max<Eigen::Index>(rank, 1)), right(std::max<Eigen::Index>(rank, 1), cols);
    for (Eigen::Index k = 0; k < left.size(); ++k) left.data()[k] = n(rng);
    for (Eigen::Index k = 0; k < right.size(); ++k) right.data()[k] = n(rng);
    RealLinearSystem sys;
    sys.coefficients = rank == 0 ? RealMatrix(RealMatrix::Zero(cols + 2, cols)) : RealMatrix(left * right);
    for (Eigen::Index c = 0; c < cols; ++c) sys.unknowns.push_back({0, 0, static_cast<std::size_t>(c), Part::re});
    const RealMatrix k = real_nullspace(sys);
    EXPECT_EQ(k.cols(), cols - rank);
    if (k.cols() == 0) continue;
    EXPECT_LT((sys.coefficients * k).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((k.transpose() * k - RealMatrix::Identity(k.cols(), k.cols())).cwiseAbs().maxCoeff(), 1e-10);
  }
}

}  // namespace
