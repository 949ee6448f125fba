#include "cvdd/engine.hpp"
#include "cvdd/protocol.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using cvdd::Complex;
using cvdd::ComplexMatrix;
using cvdd::ControlGroup;
using cvdd::DensityMatrix;
using cvdd::FockSpace;
using cvdd::InterventionSchedule;

namespace {

double max_abs(const ComplexMatrix& m) { return m.cwiseAbs().maxCoeff(); }

/// Independent product of the full controlled channel with expm-built noise
/// unitaries: Close · A_n U_n ··· A_1 U_1 A_0.
ComplexMatrix channel_product(const FockSpace& s, const InterventionSchedule& sch,
                              const std::vector<ComplexMatrix>& noise) {
  ComplexMatrix u = sch.ops[0].matrix(s);
  for (int k = 1; k <= sch.segments(); ++k) u = sch.ops[k].matrix(s) * noise[k - 1] * u;
  if (sch.closing) u = sch.closing->matrix(s) * u;
  return u;
}

double vacuum_fidelity(const ComplexMatrix& u) {
  return std::norm(u(0, 0));
}

/// Distance up to a global phase, on the low-lying columns only: products of
/// truncated matrices differ from the truncated product near the Fock edge.
double phase_distance(const ComplexMatrix& a, const ComplexMatrix& b, int columns = 20) {
  const ComplexMatrix ac = a.leftCols(columns), bc = b.leftCols(columns);
  const Complex t = (ac.adjoint() * bc).trace();
  const Complex ph = t / std::abs(t);
  return max_abs(ac * ph - bc);
}

}  // namespace

TEST(ControlGroups, Elements) {
  EXPECT_EQ(ControlGroup::parity_group().elements.size(), 2u);
  EXPECT_EQ(ControlGroup::squeeze_set().elements.size(), 2u);
  const auto g = ControlGroup::gaussian_group();
  ASSERT_EQ(g.elements.size(), 4u);
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(cvdd::wrap_angle(g.elements[j].effective_angle()), j * std::numbers::pi / 2, 1e-15);
  EXPECT_EQ(ControlGroup::cyclic(3).elements.size(), 6u);
  EXPECT_THROW(ControlGroup::cyclic(0), std::invalid_argument);
}

TEST(GroupAverage, DesignedGeneratorsVanish) {
  const FockSpace s(40);
  for (const auto& g : {ControlGroup::parity_group(), ControlGroup::squeeze_set(), ControlGroup::gaussian_group(),
                        ControlGroup::cyclic(1), ControlGroup::cyclic(2), ControlGroup::cyclic(3), ControlGroup::cyclic(5)}) {
    for (const auto& [name, x] : cvdd::designed_generators(g, s)) {
      EXPECT_LE(cvdd::group_average_residual(g, x), 1e-15 * max_abs(x)) << g.name() << " " << name;
    }
  }
}

TEST(GroupAverage, SpecificPairs) {
  const FockSpace s(40);
  const ComplexMatrix a = cvdd::annihilation(s);
  EXPECT_EQ(cvdd::group_average_residual(ControlGroup::parity_group(), cvdd::position(s)), 0.0);
  EXPECT_LE(cvdd::group_average_residual(ControlGroup::squeeze_set(), a * a), 1e-14);
  EXPECT_LE(cvdd::group_average_residual(ControlGroup::gaussian_group(), a.adjoint()), 1e-14);
  EXPECT_LE(cvdd::group_average_residual(ControlGroup::cyclic(3), a * a * a), 1e-13);
}

TEST(GroupAverage, OutOfDesignGenerators) {
  const FockSpace s(40);
  const ComplexMatrix a = cvdd::annihilation(s);
  // rotations by multiples of π/m average a^p to zero unless p is a multiple of 2m
  EXPECT_LE(cvdd::group_average_residual(ControlGroup::cyclic(2), a * a * a), 1e-13);
  EXPECT_GT(cvdd::group_average_residual(ControlGroup::cyclic(2), cvdd::matrix_power(a, 4)), 1.0);
  EXPECT_GT(cvdd::group_average_residual(ControlGroup::parity_group(), a * a), 1.0);
  // the number operator commutes with every rotation
  EXPECT_NEAR(cvdd::group_average_residual(ControlGroup::cyclic(3), cvdd::number_operator(s)), 39.0, 1e-12);
}

TEST(Schedules, ShapesAndClosing) {
  for (int n = 1; n <= 9; ++n) {
    for (const auto& sch : {cvdd::schedule_displacement(n), cvdd::schedule_squeezing(n), cvdd::schedule_combined(n),
                            cvdd::schedule_cyclic(3, n), cvdd::schedule_none(n)}) {
      EXPECT_EQ(sch.segments(), n);
      EXPECT_EQ(sch.total_angle(), 0.0);
    }
    EXPECT_EQ(cvdd::schedule_displacement(n).closing.has_value(), n % 2 == 0);
  }
  const auto c1 = cvdd::schedule_combined(1);
  EXPECT_EQ(c1.ops[0].kind, cvdd::Intervention::Kind::identity);
  EXPECT_NEAR(c1.ops[1].effective_angle(), std::numbers::pi / 2, 1e-15);
  ASSERT_TRUE(c1.closing);
  EXPECT_NEAR(c1.closing->effective_angle(), 3 * std::numbers::pi / 2, 1e-12);  // R_{−π/2}
  EXPECT_THROW(cvdd::schedule_displacement(0), std::invalid_argument);
  EXPECT_THROW(cvdd::schedule_cyclic(0, 3), std::invalid_argument);
}

TEST(Schedules, ProductOfControlsIsIdentity) {
  const FockSpace s(30);
  for (int n = 1; n <= 7; ++n) {
    for (const auto& sch : {cvdd::schedule_displacement(n), cvdd::schedule_squeezing(n), cvdd::schedule_combined(n),
                            cvdd::schedule_cyclic(3, n)}) {
      const std::vector<ComplexMatrix> id(n, ComplexMatrix::Identity(30, 30));
      EXPECT_LT(phase_distance(channel_product(s, sch, id), ComplexMatrix::Identity(30, 30)), 1e-12);
    }
  }
}

TEST(Schedules, CumulativeControlStaysInGroup) {
  const auto sq = cvdd::schedule_squeezing(6);
  for (int k = 0; k <= 6; ++k) {
    const double c = sq.cumulative_angle(k);
    EXPECT_TRUE(c == 0.0 || std::abs(c - std::numbers::pi / 2) < 1e-12) << k;
  }
  const auto cy = cvdd::schedule_cyclic(3, 10);
  for (int k = 0; k <= 10; ++k) {
    EXPECT_NEAR(cy.cumulative_angle(k), cvdd::wrap_angle(k * std::numbers::pi / 3), 1e-12);
  }
}

TEST(Schedules, CyclicOneMatchesParity) {
  const FockSpace s(40);
  const auto par = cvdd::schedule_displacement(4);
  const auto cyc = cvdd::schedule_cyclic(1, 4);
  const ComplexMatrix d = cvdd::displacement(s, Complex(0.3, -0.2));
  const std::vector<ComplexMatrix> noise(4, d);
  const ComplexMatrix up = channel_product(s, par, noise), uc = channel_product(s, cyc, noise);
  ComplexMatrix rho = ComplexMatrix::Zero(40, 40);
  for (int k = 0; k < 6; ++k) rho(k, k) = 1.0 / 6;
  rho(0, 2) = rho(2, 0) = 0.05;
  EXPECT_LT(max_abs(up * rho * up.adjoint() - uc * rho * uc.adjoint()), 1e-12);
  // cyclic(2) is the combined schedule
  const auto c2 = cvdd::schedule_cyclic(2, 5), cb = cvdd::schedule_combined(5);
  for (int k = 0; k <= 5; ++k) EXPECT_EQ(c2.ops[k].effective_angle(), cb.ops[k].effective_angle());
}

TEST(Schedules, StaticDisplacementCancels) {
  const FockSpace s(60);
  for (Complex alpha : {Complex(0.3, 0.0), Complex(0.5, 0.0), Complex(-0.2, 0.45)}) {
    const ComplexMatrix d = cvdd::displacement(s, alpha);
    const ComplexMatrix u2 = channel_product(s, cvdd::schedule_displacement(2), {d, d});
    EXPECT_NEAR(vacuum_fidelity(u2), 1.0, 1e-8);
    EXPECT_LT(phase_distance(u2, ComplexMatrix::Identity(60, 60)), 1e-8);
  }
  // n = 1: Π D(α) Π D(α) is a global phase
  const ComplexMatrix d = cvdd::displacement(s, 0.4);
  const ComplexMatrix pi = cvdd::parity(s);
  EXPECT_NEAR(vacuum_fidelity(pi * d * pi * d), 1.0, 1e-9);
}

TEST(Schedules, AlternatingSignsSumDisplacements) {
  const FockSpace s(60);
  const std::vector<Complex> alphas = {Complex(0.1, 0.05), Complex(-0.2, 0.1), Complex(0.15, -0.1), Complex(0.05, 0.2)};
  std::vector<ComplexMatrix> noise;
  Complex eff = 0.0;
  for (int k = 0; k < 4; ++k) {
    noise.push_back(cvdd::displacement(s, alphas[k]));
    eff += ((k + 1) % 2 == 0 ? 1.0 : -1.0) * alphas[k];
  }
  const ComplexMatrix u = channel_product(s, cvdd::schedule_displacement(4), noise);
  EXPECT_LT(phase_distance(u, cvdd::displacement(s, eff)), 1e-10);
}

TEST(Schedules, StaticSqueezeCancels) {
  const FockSpace s(60);
  const ComplexMatrix sq = cvdd::squeeze(s, 0.2);
  EXPECT_LT(phase_distance(channel_product(s, cvdd::schedule_squeezing(2), {sq, sq}), ComplexMatrix::Identity(60, 60)), 1e-8);
  EXPECT_LT(max_abs(cvdd::squeeze(s, -0.2) * sq - ComplexMatrix::Identity(60, 60)), 1e-12);
  const std::vector<ComplexMatrix> three = {cvdd::squeeze(s, 0.1), cvdd::squeeze(s, 0.2), cvdd::squeeze(s, 0.1)};
  EXPECT_LT(phase_distance(channel_product(s, cvdd::schedule_squeezing(3), three), ComplexMatrix::Identity(60, 60)), 1e-7);
}

TEST(Schedules, StaticCombinedCancelsOverFourSegments) {
  const FockSpace s(60);
  const ComplexMatrix seg = cvdd::displacement(s, 0.2) * cvdd::squeeze(s, 0.1);
  const ComplexMatrix u = channel_product(s, cvdd::schedule_combined(4), {seg, seg, seg, seg});
  EXPECT_LT(phase_distance(u, ComplexMatrix::Identity(60, 60)), 1e-6);
}

TEST(Schedules, StaticCompletenessOnTestStates) {
  // static noise, n a multiple of the cycle length: every test state returns
  const FockSpace s(60);
  const auto coh = cvdd::displacement(s, Complex(0.3, 0.4)).col(0);
  const auto rho = DensityMatrix::pure(s, coh);
  struct Case {
    InterventionSchedule sch;
    ComplexMatrix seg;
  };
  const std::vector<Case> cases = {
      {cvdd::schedule_displacement(4), cvdd::displacement(s, Complex(0.25, -0.1))},
      {cvdd::schedule_squeezing(6), cvdd::squeeze(s, 0.15)},
      {cvdd::schedule_combined(8), cvdd::displacement(s, 0.1) * cvdd::squeeze(s, 0.05)},
  };
  for (const auto& c : cases) {
    const std::vector<ComplexMatrix> noise(c.sch.segments(), c.seg);
    const ComplexMatrix u = channel_product(s, c.sch, noise);
    const auto out = DensityMatrix::from_trusted(s, u * rho.mat() * u.adjoint());
    EXPECT_GE(cvdd::fidelity(rho, out), 1 - 1e-6);
  }
}

TEST(Schedules, CsvDump) {
  std::ostringstream os;
  cvdd::write_schedule_csv(os, cvdd::schedule_displacement(2));
  EXPECT_EQ(os.str(),
            "k,op,angle\n0,parity,3.1415926535897931\n1,parity,3.1415926535897931\n2,parity,3.1415926535897931\n"
            "3,closing_parity,3.1415926535897931\n");
}
