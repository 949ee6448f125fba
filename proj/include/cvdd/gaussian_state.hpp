#pragma once

#include "cvdd/fock.hpp"
#include "cvdd/wigner.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cvdd {

/// Single-mode Gaussian state in the (x, p) quadratures, with vacuum
/// covariance I/2. Gaussian unitaries act exactly, without any Fock cutoff.
struct GaussianState {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov = 0.5 * Eigen::Matrix2d::Identity();

  static GaussianState vacuum() { return {}; }

  /// S(γ)|0⟩ displaced by the component center, as in the Fock construction.
  static GaussianState from_component(const GaussianComponent& c) {
    GaussianState g;
    const double s2 = c.spread * c.spread;
    g.cov << s2, 0.0, 0.0, 0.25 / s2;
    g.mean << std::numbers::sqrt2 * c.center.real(), std::numbers::sqrt2 * c.center.imag();
    return g;
  }

  void apply(const Eigen::Matrix2d& symplectic) {
    mean = symplectic * mean;
    cov = symplectic * cov * symplectic.transpose();
  }

  void displace(Complex alpha) {
    mean += std::numbers::sqrt2 * Eigen::Vector2d(alpha.real(), alpha.imag());
  }

  /// 4 det V; equals 1 exactly for pure states.
  double purity_det() const { return 4.0 * cov.determinant(); }

  double wigner(double x, double p) const {
    const Eigen::Vector2d d(x - mean(0), p - mean(1));
    const double q = d.dot(cov.inverse() * d);
    return std::exp(-0.5 * q) / (2.0 * std::numbers::pi * std::sqrt(cov.determinant()));
  }
};

/// Quadrature map of ρ → S(z) ρ S(z)† with S(z) = exp((z* a² − z a†²)/2).
inline Eigen::Matrix2d squeeze_symplectic(Complex z) {
  const double r = std::abs(z);
  const double phi = std::arg(z);
  const double c = std::cosh(r);
  const double s = std::sinh(r);
  Eigen::Matrix2d m;
  m << c - s * std::cos(phi), -s * std::sin(phi), -s * std::sin(phi), c + s * std::cos(phi);
  return m;
}

/// Quadrature map of ρ → R_θ ρ R_θ† with R_θ = exp(−iθ a†a).
inline Eigen::Matrix2d rotation_symplectic(double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Eigen::Matrix2d m;
  m << c, s, -s, c;
  return m;
}

/// Uhlmann fidelity of two single-mode Gaussian states.
inline double gaussian_fidelity(const GaussianState& a, const GaussianState& b) {
  const Eigen::Matrix2d sum = a.cov + b.cov;
  const Eigen::Vector2d d = a.mean - b.mean;
  const double delta = sum.determinant();
  const double lambda = std::max(0.0, (a.purity_det() - 1.0) * (b.purity_det() - 1.0) / 4.0);
  const double pre = 1.0 / (std::sqrt(delta + lambda) - std::sqrt(lambda));
  return std::clamp(pre * std::exp(-0.5 * d.dot(sum.inverse() * d)), 0.0, 1.0);
}

}  // namespace cvdd
