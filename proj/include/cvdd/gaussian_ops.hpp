#pragma once

#include "cvdd/fock.hpp"

#include <span>

namespace cvdd {

/// Cached spectral decompositions of the real displacement generator a† − a and
/// the real squeeze generator (a² − a†²)/2. Complex parameters are reached by
/// conjugating with diagonal rotations, so every application is O(d²).
class GaussianGenerators {
 public:
  explicit GaussianGenerators(const FockSpace& space) : space_(space) {
    const ComplexMatrix a = annihilation(space);
    // Hermitian forms: a† − a = iH_d, (a² − a†²)/2 = iH_s.
    const ComplexMatrix hd = Complex(0, -1) * (a.adjoint() - a);
    const ComplexMatrix a2 = a * a;
    const ComplexMatrix hs = Complex(0, -1) * 0.5 * (a2 - a2.adjoint());
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> ed(hd);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> esq(hs);
    disp_vecs_ = ed.eigenvectors();
    disp_vals_ = ed.eigenvalues();
    sq_vecs_ = esq.eigenvectors();
    sq_vals_ = esq.eigenvalues();
  }

  const FockSpace& space() const noexcept { return space_; }

  /// columns ← D(α) columns
  void apply_displacement(Complex alpha, ComplexMatrix& columns) const {
    if (alpha == Complex(0.0)) return;
    const double phi = std::arg(alpha);
    apply_real(disp_vecs_, disp_vals_, std::abs(alpha), -phi, columns);
  }

  /// columns ← S(z) columns
  void apply_squeeze(Complex z, ComplexMatrix& columns) const {
    if (z == Complex(0.0)) return;
    const double theta = std::arg(z);
    apply_real(sq_vecs_, sq_vals_, std::abs(z), -0.5 * theta, columns);
  }

  ComplexMatrix displacement(Complex alpha) const {
    ComplexMatrix m = ComplexMatrix::Identity(space_.dim(), space_.dim());
    apply_displacement(alpha, m);
    return m;
  }

  ComplexMatrix squeeze(Complex z) const {
    ComplexMatrix m = ComplexMatrix::Identity(space_.dim(), space_.dim());
    apply_squeeze(z, m);
    return m;
  }

 private:
  // R_ψ · exp(i t H) · R_ψ† applied to the columns, R_ψ = diag(e^{−iψn}).
  static void apply_real(const ComplexMatrix& vecs, const Eigen::VectorXd& vals, double t,
                         double psi, ComplexMatrix& columns) {
    const Eigen::Index d = columns.rows();
    Eigen::VectorXcd phase_out(d);
    for (Eigen::Index n = 0; n < d; ++n) phase_out(n) = std::polar(1.0, -psi * static_cast<double>(n));
    Eigen::VectorXcd spectral(vals.size());
    for (Eigen::Index k = 0; k < vals.size(); ++k) spectral(k) = std::polar(1.0, t * vals(k));

    ComplexMatrix tmp = phase_out.conjugate().asDiagonal() * columns;
    tmp = vecs.adjoint() * tmp;
    tmp = spectral.asDiagonal() * tmp;
    tmp = vecs * tmp;
    columns = phase_out.asDiagonal() * tmp;
  }

  FockSpace space_;
  ComplexMatrix disp_vecs_;
  Eigen::VectorXd disp_vals_;
  ComplexMatrix sq_vecs_;
  Eigen::VectorXd sq_vals_;
};

/// exp(Σ_k b_k a†^k − b_k* a^k) for coefficients b_1..b_m.
inline ComplexMatrix polynomial_unitary(const FockSpace& space, std::span<const Complex> coeffs) {
  const ComplexMatrix a = annihilation(space);
  ComplexMatrix power = ComplexMatrix::Identity(space.dim(), space.dim());
  ComplexMatrix gen = ComplexMatrix::Zero(space.dim(), space.dim());
  for (const Complex& b : coeffs) {
    power = power * a;
    gen += b * power.adjoint() - std::conj(b) * power;
  }
  return expm(gen);
}

}  // namespace cvdd
