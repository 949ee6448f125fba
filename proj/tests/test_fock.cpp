#include "cvdd/fock.hpp"
#include "cvdd/gaussian_ops.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using cvdd::Complex;
using cvdd::ComplexMatrix;
using cvdd::ComplexVector;
using cvdd::DensityMatrix;
using cvdd::FockSpace;

namespace {

double max_abs(const ComplexMatrix& m) { return m.cwiseAbs().maxCoeff(); }

ComplexMatrix identity(int d) { return ComplexMatrix::Identity(d, d); }

DensityMatrix random_state(const FockSpace& space, int rank, int support, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> g;
  ComplexMatrix m = ComplexMatrix::Zero(space.dim(), space.dim());
  for (int r = 0; r < rank; ++r) {
    ComplexVector v = ComplexVector::Zero(space.dim());
    for (int k = 0; k < support; ++k) v(k) = Complex(g(gen), g(gen));
    m += v * v.adjoint();
  }
  return DensityMatrix::from_matrix(space, m / m.trace().real());
}

}  // namespace

// ---------------------------------------------------------------------------
// FockSpace

TEST(FockSpace, ValidatesAndComputesGuardBand) {
  EXPECT_THROW(FockSpace(3), std::invalid_argument);
  EXPECT_THROW(FockSpace(10, 0.0), std::invalid_argument);
  EXPECT_THROW(FockSpace(10, 1.0), std::invalid_argument);
  const FockSpace s(60);
  EXPECT_EQ(s.guard_size(), 6);
  EXPECT_EQ(s.guard_start(), 54);
  EXPECT_EQ(FockSpace(4).guard_size(), 1);
}

// ---------------------------------------------------------------------------
// Ladder operators

TEST(Annihilation, Dim3Entries) {
  const ComplexMatrix a = cvdd::annihilation(FockSpace(4));
  EXPECT_EQ(a(0, 1), Complex(1.0));
  EXPECT_EQ(a(1, 2), Complex(std::sqrt(2.0)));
  EXPECT_EQ(a(2, 3), Complex(std::sqrt(3.0)));
  EXPECT_EQ(a.cwiseAbs().sum(), 1.0 + std::sqrt(2.0) + std::sqrt(3.0));
}

TEST(Annihilation, CommutatorIsIdentityBelowTheEdge) {
  const int d = 30;
  const ComplexMatrix a = cvdd::annihilation(FockSpace(d));
  const ComplexMatrix c = a * a.adjoint() - a.adjoint() * a;
  EXPECT_LT(max_abs(c.topLeftCorner(d - 1, d - 1) - identity(d - 1)), 1e-13);
  EXPECT_NEAR(c(d - 1, d - 1).real(), -(d - 1.0), 1e-12);
}

TEST(Annihilation, KillsVacuum) {
  const FockSpace s(20);
  ComplexVector vac = ComplexVector::Zero(20);
  vac(0) = 1.0;
  EXPECT_EQ((cvdd::annihilation(s) * vac).norm(), 0.0);
}

// ---------------------------------------------------------------------------
// Displacement

TEST(Displacement, ZeroIsIdentity) {
  EXPECT_LT(max_abs(cvdd::displacement(FockSpace(60), 0.0) - identity(60)), 1e-15);
}

TEST(Displacement, CoherentAmplitudesMatchClosedForm) {
  const FockSpace s(60);
  const Complex alpha(0.3, 0.2);
  const ComplexVector col = cvdd::displacement(s, alpha).col(0);
  EXPECT_LT((col - oracle::coherent(alpha, 60)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Displacement, ParityInvertsDisplacement) {
  const FockSpace s(60);
  const ComplexMatrix pi = cvdd::parity(s);
  for (Complex alpha : {Complex(0.3, 0.2), Complex(-1.0, 0.0), Complex(0.5, -0.6)}) {
    EXPECT_LT(max_abs(pi * cvdd::displacement(s, alpha) * pi - cvdd::displacement(s, -alpha)), 1e-9);
  }
}

TEST(Displacement, CompositionUpToGlobalPhase) {
  const FockSpace s(60);
  const DensityMatrix vac = DensityMatrix::vacuum(s);
  const Complex a(0.4, -0.1), b(-0.2, 0.5);
  const auto two_steps = cvdd::conjugate(vac, cvdd::displacement(s, a) * cvdd::displacement(s, b));
  const auto one_step = cvdd::conjugate(vac, cvdd::displacement(s, a + b));
  EXPECT_LT(max_abs(two_steps.mat() - one_step.mat()), 1e-7);
  const DensityMatrix rho = random_state(s, 3, 6, 3u);
  const auto r2 = cvdd::conjugate(cvdd::conjugate(rho, cvdd::displacement(s, b)), cvdd::displacement(s, a));
  const auto r1 = cvdd::conjugate(rho, cvdd::displacement(s, a + b));
  EXPECT_LT(max_abs(r2.mat() - r1.mat()), 1e-7);
}

TEST(Displacement, LeakGuardNamesRequiredDimension) {
  const FockSpace s(60);
  try {
    (void)cvdd::displacement(s, 6.0);
    FAIL() << "expected TruncationError";
  } catch (const cvdd::TruncationError& e) {
    EXPECT_GT(e.required_dim(), 60);
    EXPECT_NE(std::string(e.what()).find("requires dim"), std::string::npos);
    // the suggested dimension actually passes the guard
    EXPECT_NO_THROW((void)cvdd::displacement(FockSpace(e.required_dim()), 6.0));
  }
}

// ---------------------------------------------------------------------------
// Squeeze

TEST(Squeeze, ZeroIsIdentity) {
  EXPECT_LT(max_abs(cvdd::squeeze(FockSpace(60), 0.0) - identity(60)), 1e-15);
}

TEST(Squeeze, PositionVarianceShrinks) {
  const FockSpace s(60);
  const double gamma = 0.2;
  const ComplexVector v = cvdd::squeeze(s, gamma).col(0);
  const auto rho = DensityMatrix::pure(s, v);
  const double x2 = rho.expectation(cvdd::position(s) * cvdd::position(s)).real();
  const double x1 = rho.expectation(cvdd::position(s)).real();
  EXPECT_NEAR(x2 - x1 * x1, std::exp(-2 * gamma) / 2, 1e-6);
  // cross-check with the wave function
  const auto mom = oracle::position_moments(v);
  EXPECT_NEAR(mom.variance, std::exp(-2 * gamma) / 2, 1e-6);
}

TEST(Squeeze, QuarterTurnReversesSqueeze) {
  const FockSpace s(60);
  const ComplexMatrix r = cvdd::rotation(s, std::numbers::pi / 2);
  for (Complex z : {Complex(0.1, 0.05), Complex(0.3, 0.0), Complex(-0.1, 0.2)}) {
    EXPECT_LT(max_abs(r.adjoint() * cvdd::squeeze(s, z) * r - cvdd::squeeze(s, -z)), 1e-9);
  }
}

TEST(Squeeze, RealParametersAdd) {
  const FockSpace s(60);
  const DensityMatrix rho = random_state(s, 2, 5, 9u);
  for (auto [g1, g2] : {std::pair{0.1, 0.2}, std::pair{0.3, -0.25}, std::pair{0.3, 0.3}}) {
    const auto two = cvdd::conjugate(rho, cvdd::squeeze(s, g1) * cvdd::squeeze(s, g2));
    const auto one = cvdd::conjugate(rho, cvdd::squeeze(s, g1 + g2));
    EXPECT_LT(max_abs(two.mat() - one.mat()), 1e-7);
  }
}

TEST(Squeeze, TruncatedVacuumOverlapTracksSech) {
  // |<0|S(Γ)|0>|² = sech Γ in infinite dimension; at dim 60 the truncated
  // unitary stays accurate well past the default leak guard.
  const FockSpace s(60, 0.5);
  const cvdd::GaussianGenerators gens(s);
  for (double g : {0.5, 1.0, 1.5, 2.0, 2.5}) {
    const ComplexMatrix u = gens.squeeze(g);
    EXPECT_NEAR(std::norm(u(0, 0)), 1.0 / std::cosh(g), 1e-4) << "gamma " << g;
  }
}

// ---------------------------------------------------------------------------
// Rotation and parity

TEST(Rotation, ZeroIsIdentity) { EXPECT_EQ(max_abs(cvdd::rotation(FockSpace(20), 0.0) - identity(20)), 0.0); }

TEST(Rotation, ConjugatesLadderOperatorByPhase) {
  for (int d : {4, 17, 60}) {
    const FockSpace s(d);
    const ComplexMatrix a = cvdd::annihilation(s);
    for (double theta : {0.3, std::numbers::pi / 2, -2.0}) {
      const ComplexMatrix r = cvdd::rotation(s, theta);
      EXPECT_LT(max_abs(r.adjoint() * a * r - std::polar(1.0, -theta) * a), 1e-13);
      EXPECT_LT(max_abs(r * a * r.adjoint() - std::polar(1.0, theta) * a), 1e-13);
    }
  }
}

TEST(Rotation, HalfTurnActsAsParity) {
  const FockSpace s(40);
  const DensityMatrix rho = random_state(s, 3, 40, 21u);
  const ComplexMatrix r = cvdd::rotation(s, std::numbers::pi);
  const ComplexMatrix p = cvdd::parity(s);
  EXPECT_LT(max_abs(r * rho.mat() * r.adjoint() - p * rho.mat() * p), 1e-12);
}

TEST(Parity, SquaresToIdentityAndFixesVacuum) {
  const FockSpace s(25);
  const ComplexMatrix p = cvdd::parity(s);
  EXPECT_EQ(max_abs(p * p - identity(25)), 0.0);
  EXPECT_EQ(max_abs(p * DensityMatrix::vacuum(s).mat() * p - DensityMatrix::vacuum(s).mat()), 0.0);
}

TEST(Parity, AveragesQuadraturesToZero) {
  const FockSpace s(30);
  const ComplexMatrix p = cvdd::parity(s);
  const ComplexMatrix x = cvdd::position(s), q = cvdd::momentum(s);
  EXPECT_EQ(max_abs(0.5 * (x + p * x * p)), 0.0);
  EXPECT_EQ(max_abs(p * x * p + x), 0.0);
  EXPECT_EQ(max_abs(p * q * p + q), 0.0);
}

TEST(Unitarity, AllGeneratedOperators) {
  const FockSpace s(60);
  EXPECT_TRUE(cvdd::is_unitary(cvdd::displacement(s, Complex(1.0, -0.5)), 1e-8));
  EXPECT_TRUE(cvdd::is_unitary(cvdd::squeeze(s, Complex(0.3, 0.2)), 1e-8));
  EXPECT_TRUE(cvdd::is_unitary(cvdd::rotation(s, 1.234), 1e-12));
  EXPECT_TRUE(cvdd::is_unitary(cvdd::parity(s), 0.0));
  EXPECT_FALSE(cvdd::is_unitary(2.0 * identity(5)));
}

// ---------------------------------------------------------------------------
// Fast Gaussian unitaries against the matrix exponential

TEST(GaussianGenerators, MatchExpmRoute) {
  const FockSpace s(60);
  const cvdd::GaussianGenerators gens(s);
  for (Complex alpha : {Complex(0.3, 0.2), Complex(-1.0, 0.4), Complex(0.0, -0.8)}) {
    EXPECT_LT(max_abs(gens.displacement(alpha) - cvdd::displacement(s, alpha)), 1e-11);
  }
  for (Complex z : {Complex(0.2, 0.0), Complex(-0.1, 0.25), Complex(0.0, 0.3)}) {
    EXPECT_LT(max_abs(gens.squeeze(z) - cvdd::squeeze(s, z)), 1e-11);
  }
}

TEST(GaussianGenerators, PolynomialOfDegreeOneIsDisplacement) {
  const FockSpace s(40);
  const Complex b(0.2, -0.3);
  EXPECT_LT(max_abs(cvdd::polynomial_unitary(s, std::span(&b, 1)) - cvdd::displacement(s, b)), 1e-12);
}

// ---------------------------------------------------------------------------
// Density matrices

TEST(DensityMatrix, RejectsInvalidMatrices) {
  const FockSpace s(6);
  ComplexMatrix m = ComplexMatrix::Zero(6, 6);
  m(0, 0) = 1.0;
  EXPECT_NO_THROW(DensityMatrix::from_matrix(s, m));
  ComplexMatrix nh = m;
  nh(0, 1) = 0.1;
  EXPECT_THROW(DensityMatrix::from_matrix(s, nh), std::invalid_argument);
  EXPECT_THROW(DensityMatrix::from_matrix(s, 0.5 * m), std::invalid_argument);
  ComplexMatrix neg = ComplexMatrix::Zero(6, 6);
  neg(0, 0) = 1.5;
  neg(1, 1) = -0.5;
  EXPECT_THROW(DensityMatrix::from_matrix(s, neg), std::invalid_argument);
  EXPECT_THROW(DensityMatrix::from_matrix(s, ComplexMatrix::Identity(5, 5) / 5.0), std::invalid_argument);
}

TEST(Conjugate, IdentityLeavesStateUnchanged) {
  const FockSpace s(30);
  const DensityMatrix rho = random_state(s, 2, 10, 4u);
  EXPECT_LT(max_abs(cvdd::conjugate(rho, identity(30)).mat() - rho.mat()), 1e-15);
}

TEST(Conjugate, CoherentMeanAndTrace) {
  const FockSpace s(60);
  const Complex alpha(0.0, 0.5);
  const auto rho = cvdd::conjugate(DensityMatrix::vacuum(s), cvdd::displacement(s, alpha));
  EXPECT_LT(std::abs(rho.expectation(cvdd::annihilation(s)) - alpha), 1e-8);
  EXPECT_NEAR(rho.trace(), 1.0, 1e-10);
}

TEST(Conjugate, InvariantsHoldAfterEveryCall) {
  const FockSpace s(60);
  DensityMatrix rho = random_state(s, 3, 8, 12u);
  std::mt19937 gen(99);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (int step = 0; step < 12; ++step) {
    const ComplexMatrix op = step % 2 == 0 ? cvdd::displacement(s, Complex(u(gen), u(gen)))
                                           : cvdd::squeeze(s, Complex(u(gen), u(gen)));
    rho = cvdd::conjugate(rho, op);
    EXPECT_NEAR(rho.trace(), 1.0, 1e-10);
    EXPECT_LT(max_abs(rho.mat() - rho.mat().adjoint()), 1e-12);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(rho.mat());
    EXPECT_GT(es.eigenvalues().minCoeff(), -1e-8);
  }
}

TEST(Conjugate, RejectsNonUnitaryAndLeaks) {
  const FockSpace s(20);
  EXPECT_THROW(cvdd::conjugate(DensityMatrix::vacuum(s), 2.0 * identity(20)), std::invalid_argument);
  // a permutation moving the vacuum into the top level is unitary but leaks
  ComplexMatrix perm = ComplexMatrix::Zero(20, 20);
  for (int k = 0; k < 20; ++k) perm((k + 19) % 20, k) = 1.0;
  EXPECT_THROW(cvdd::conjugate(DensityMatrix::vacuum(s), perm), cvdd::TruncationError);
}

// ---------------------------------------------------------------------------
// Fidelity

TEST(Fidelity, SelfOverlapAndSymmetry) {
  const FockSpace s(30);
  const DensityMatrix a = random_state(s, 3, 8, 1u), b = random_state(s, 2, 8, 2u);
  EXPECT_NEAR(cvdd::fidelity(a, a), 1.0, 1e-8);
  EXPECT_NEAR(cvdd::fidelity(a, b), cvdd::fidelity(b, a), 1e-9);
  EXPECT_GE(cvdd::fidelity(a, b), 0.0);
  EXPECT_LE(cvdd::fidelity(a, b), 1.0);
}

TEST(Fidelity, VacuumVersusCoherentState) {
  const FockSpace s(60);
  const auto coh = DensityMatrix::pure(s, oracle::coherent(0.8, 60));
  EXPECT_NEAR(cvdd::fidelity(DensityMatrix::vacuum(s), coh), std::exp(-0.64), 1e-7);
}

TEST(Fidelity, PureStateReducesToOverlap) {
  const FockSpace s(30);
  const DensityMatrix rho = random_state(s, 3, 10, 8u);
  const ComplexVector psi = oracle::coherent(Complex(0.4, 0.3), 30);
  const double overlap = (psi.adjoint() * rho.mat() * psi)(0, 0).real() / psi.squaredNorm();
  EXPECT_NEAR(cvdd::fidelity(DensityMatrix::pure(s, psi), rho), overlap, 1e-9);
}

TEST(Fidelity, DimensionMismatchThrows) {
  EXPECT_THROW(cvdd::fidelity(DensityMatrix::vacuum(FockSpace(10)), DensityMatrix::vacuum(FockSpace(12))),
               std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Gaussian mixtures

TEST(GaussianMixture, SingleVacuumComponent) {
  const FockSpace s(60);
  const auto rho = cvdd::gaussian_mixture_state(cvdd::GaussianMixtureSpec::vacuum(), s);
  EXPECT_LT(max_abs(rho.mat() - DensityMatrix::vacuum(s).mat()), 1e-14);
}

TEST(GaussianMixture, TwoComponentsAreMixedWithLinearMean) {
  const FockSpace s(60);
  cvdd::GaussianMixtureSpec spec{{{0.5, Complex(1.0, 0.0), 1 / std::numbers::sqrt2},
                                  {0.5, Complex(-1.0, 0.0), 1 / std::numbers::sqrt2}}};
  const auto rho = cvdd::gaussian_mixture_state(spec, s);
  EXPECT_NEAR(rho.trace(), 1.0, 1e-12);
  // purity of an equal mixture of |β> and |−β>: (1 + e^{−4|β|²})/2
  EXPECT_NEAR(rho.purity(), 0.5 * (1 + std::exp(-4.0)), 1e-9);
  EXPECT_LT(rho.purity(), 1.0);

  cvdd::GaussianMixtureSpec skew{{{0.3, Complex(0.8, -0.2), 0.6}, {0.7, Complex(-0.1, 0.5), 0.8}}};
  const auto r2 = cvdd::gaussian_mixture_state(skew, s);
  const Complex expect = 0.3 * Complex(0.8, -0.2) + 0.7 * Complex(-0.1, 0.5);
  EXPECT_LT(std::abs(r2.expectation(cvdd::annihilation(s)) - expect), 1e-7);
}

TEST(GaussianMixture, SpreadMapsToSqueezedVacuum) {
  const FockSpace s(60);
  const double spread = 0.5;
  cvdd::GaussianMixtureSpec spec{{{1.0, Complex(0.0, 0.0), spread}}};
  const auto mix = cvdd::gaussian_mixture_components(spec, s);
  const auto mom = oracle::position_moments(mix.columns.col(0));
  EXPECT_NEAR(mom.variance, spread * spread, 1e-6);
}

TEST(GaussianMixture, ValidatesWeights) {
  const FockSpace s(20);
  EXPECT_THROW(cvdd::gaussian_mixture_state({{{0.6, 0.0, 0.7}, {0.6, 0.0, 0.7}}}, s), std::invalid_argument);
  EXPECT_THROW(cvdd::gaussian_mixture_state({{{1.0, 0.0, -1.0}}}, s), std::invalid_argument);
  EXPECT_THROW(cvdd::gaussian_mixture_state({}, s), std::invalid_argument);
  EXPECT_THROW(cvdd::gaussian_mixture_state({{{1.0, Complex(5.0, 0.0), 0.7}}}, s), cvdd::TruncationError);
}
