#include "cvdd/expm.hpp"
#include "cvdd/fock.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

using cvdd::Complex;
using cvdd::ComplexMatrix;

namespace {

ComplexMatrix random_matrix(int n, double scale, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> g;
  ComplexMatrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = Complex(g(gen), g(gen));
  return m * (scale / m.cwiseAbs().rowwise().sum().maxCoeff());
}

double rel_error(const ComplexMatrix& a, const ComplexMatrix& b) {
  return (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff();
}

}  // namespace

TEST(Expm, ZeroIsIdentity) {
  const ComplexMatrix z = ComplexMatrix::Zero(7, 7);
  EXPECT_LT((cvdd::expm(z) - ComplexMatrix::Identity(7, 7)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Expm, DiagonalPhases) {
  const int n = 12;
  ComplexMatrix d = ComplexMatrix::Zero(n, n);
  for (int k = 0; k < n; ++k) d(k, k) = Complex(0, 0.37 * k - 1.1);
  const ComplexMatrix e = cvdd::expm(d);
  for (int k = 0; k < n; ++k) {
    EXPECT_NEAR(std::abs(e(k, k) - std::polar(1.0, 0.37 * k - 1.1)), 0.0, 1e-14);
  }
  EXPECT_NEAR((e - ComplexMatrix(e.diagonal().asDiagonal())).cwiseAbs().maxCoeff(), 0.0, 1e-15);
}

TEST(Expm, NilpotentIsExact) {
  ComplexMatrix m = ComplexMatrix::Zero(3, 3);
  m(0, 1) = 2.0;
  m(1, 2) = 3.0;
  const ComplexMatrix e = cvdd::expm(m);
  ComplexMatrix expect = ComplexMatrix::Identity(3, 3) + m + 0.5 * m * m;
  EXPECT_LT((e - expect).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Expm, MatchesTaylorOracleAcrossNorms) {
  for (double scale : {0.01, 0.5, 2.0, 6.0, 10.0}) {
    const ComplexMatrix m = random_matrix(10, scale, 17u + static_cast<unsigned>(scale * 10));
    EXPECT_LT(rel_error(cvdd::expm(m), oracle::taylor_expm(m)), 1e-10) << "norm " << scale;
  }
}

TEST(Expm, InverseAndGroupProperty) {
  const ComplexMatrix m = random_matrix(8, 3.0, 5u);
  const ComplexMatrix prod = cvdd::expm(m) * cvdd::expm(-m);
  EXPECT_LT((prod - ComplexMatrix::Identity(8, 8)).cwiseAbs().maxCoeff(), 1e-11);
  const ComplexMatrix half = cvdd::expm(0.5 * m);
  EXPECT_LT(rel_error(half * half, cvdd::expm(m)), 1e-11);
}

TEST(Expm, DisplacementGeneratorIsUnitaryAtDim60) {
  const cvdd::FockSpace space(60);
  const ComplexMatrix a = cvdd::annihilation(space);
  const Complex alpha = std::polar(1.0, 0.7);
  const ComplexMatrix u = cvdd::expm(alpha * a.adjoint() - std::conj(alpha) * a);
  EXPECT_LT((u.adjoint() * u - ComplexMatrix::Identity(60, 60)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Expm, RejectsBadInput) {
  EXPECT_THROW(cvdd::expm(ComplexMatrix::Zero(2, 3)), std::invalid_argument);
  ComplexMatrix m = ComplexMatrix::Zero(3, 3);
  m(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(cvdd::expm(m), std::invalid_argument);
  m(1, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(cvdd::expm(m), std::invalid_argument);
}
