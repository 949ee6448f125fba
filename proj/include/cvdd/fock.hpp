#pragma once

#include "cvdd/expm.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace cvdd {

namespace detail {

inline void warn(const std::string& msg) {
  static std::atomic<int> emitted{0};
  if (emitted.fetch_add(1) < 16) std::cerr << "[cvdd] warning: " << msg << '\n';
}

inline double max_abs(const ComplexMatrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace detail

/// Raised when probability mass reaches the guard band of the truncated space.
class TruncationError : public std::runtime_error {
 public:
  TruncationError(const std::string& what, int required_dim)
      : std::runtime_error(what), required_dim_(required_dim) {}
  int required_dim() const noexcept { return required_dim_; }

 private:
  int required_dim_;
};

/// Number basis truncated to `dim` levels. The top 10% of levels form a guard
/// band; population there above `leak_threshold` counts as truncation failure.
class FockSpace {
 public:
  static constexpr int kDefaultDim = 60;
  static constexpr double kDefaultLeakThreshold = 1e-6;

  explicit FockSpace(int dim = kDefaultDim, double leak_threshold = kDefaultLeakThreshold)
      : dim_(dim), leak_threshold_(leak_threshold) {
    if (dim < 4) throw std::invalid_argument("FockSpace: dim must be >= 4");
    if (!(leak_threshold > 0.0 && leak_threshold < 1.0)) {
      throw std::invalid_argument("FockSpace: leak_threshold must lie in (0,1)");
    }
  }

  int dim() const noexcept { return dim_; }
  double leak_threshold() const noexcept { return leak_threshold_; }
  int guard_size() const noexcept { return std::max(1, (dim_ + 9) / 10); }
  int guard_start() const noexcept { return dim_ - guard_size(); }

  friend bool operator==(const FockSpace&, const FockSpace&) = default;

 private:
  int dim_;
  double leak_threshold_;
};

/// Guard-band population of a state vector (or of each column, summed with weights).
inline double band_population(const FockSpace& space, const ComplexVector& psi) {
  return psi.tail(space.guard_size()).squaredNorm();
}

inline double band_population(const FockSpace& space, const ComplexMatrix& rho) {
  const int g = space.guard_size();
  return rho.diagonal().tail(g).real().sum();
}

// ---------------------------------------------------------------------------
// Ladder and quadrature operators

inline ComplexMatrix annihilation(const FockSpace& space) {
  const int d = space.dim();
  ComplexMatrix a = ComplexMatrix::Zero(d, d);
  for (int n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

inline ComplexMatrix creation(const FockSpace& space) { return annihilation(space).adjoint(); }

inline ComplexMatrix number_operator(const FockSpace& space) {
  const int d = space.dim();
  ComplexMatrix n = ComplexMatrix::Zero(d, d);
  for (int k = 0; k < d; ++k) n(k, k) = static_cast<double>(k);
  return n;
}

/// x = (a + a†)/√2
inline ComplexMatrix position(const FockSpace& space) {
  const ComplexMatrix a = annihilation(space);
  return (a + a.adjoint()) / std::numbers::sqrt2;
}

/// p = (a − a†)/(i√2)
inline ComplexMatrix momentum(const FockSpace& space) {
  const ComplexMatrix a = annihilation(space);
  return (a - a.adjoint()) / Complex(0.0, std::numbers::sqrt2);
}

inline ComplexMatrix parity(const FockSpace& space) {
  const int d = space.dim();
  ComplexMatrix p = ComplexMatrix::Zero(d, d);
  for (int n = 0; n < d; ++n) p(n, n) = (n % 2 == 0) ? 1.0 : -1.0;
  return p;
}

namespace detail {

/// e^{−iθn}. When θ is kπ/q for a small denominator q the exponent is reduced
/// modulo 2π in integer arithmetic, so the phases of a finite rotation group
/// are exact up to one rounding and their sums cancel to machine precision.
inline Complex rotation_phase(double theta, int n) {
  for (long q = 1; q <= 64; ++q) {
    const double k = std::round(theta * q / std::numbers::pi);
    if (std::abs(theta - k * std::numbers::pi / q) > 1e-13 * std::max(1.0, std::abs(theta))) continue;
    const long period = 2 * q;
    const long r = ((static_cast<long>(k) * n) % period + period) % period;
    if ((2 * r) % q == 0) {
      static constexpr double re[] = {1.0, 0.0, -1.0, 0.0};
      static constexpr double im[] = {0.0, -1.0, 0.0, 1.0};
      const long quarter = 2 * r / q;
      return {re[quarter], im[quarter]};
    }
    return std::polar(1.0, -std::numbers::pi * static_cast<double>(r) / static_cast<double>(q));
  }
  return std::polar(1.0, -theta * n);
}

}  // namespace detail

/// R_θ = exp(−iθ a†a). Differs from exp(−iθ a a†) by the global phase e^{−iθ},
/// which drops out of every conjugation ρ ↦ RρR†.
inline ComplexMatrix rotation(const FockSpace& space, double theta) {
  const int d = space.dim();
  ComplexMatrix r = ComplexMatrix::Zero(d, d);
  for (int n = 0; n < d; ++n) r(n, n) = detail::rotation_phase(theta, n);
  return r;
}

// ---------------------------------------------------------------------------
// Expected truncation leak of D(α)|0⟩ and S(z)|0⟩ (closed-form Fock statistics)

/// Population of a coherent state |α⟩ at levels >= `from_level`.
inline double coherent_tail(double abs_alpha_sq, int from_level) {
  if (abs_alpha_sq <= 0.0) return from_level > 0 ? 0.0 : 1.0;
  double below = 0.0;
  for (int n = 0; n < from_level; ++n) {
    below += std::exp(-abs_alpha_sq + n * std::log(abs_alpha_sq) - std::lgamma(n + 1.0));
  }
  // Upper tail summed directly when it is small, to avoid cancellation.
  double above = 0.0;
  for (int n = from_level; n < from_level + 4000; ++n) {
    const double term =
        std::exp(-abs_alpha_sq + n * std::log(abs_alpha_sq) - std::lgamma(n + 1.0));
    above += term;
    if (n > abs_alpha_sq && term < 1e-300) break;
  }
  return std::min(above, std::max(0.0, 1.0 - below));
}

/// Population of a squeezed vacuum S(r)|0⟩ at levels >= `from_level`.
inline double squeezed_vacuum_tail(double r, int from_level) {
  r = std::abs(r);
  if (r == 0.0) return from_level > 0 ? 0.0 : 1.0;
  const double log_t2 = 2.0 * std::log(std::tanh(r));
  const double log_c = -std::log(std::cosh(r));
  auto log_p = [&](int m) {
    return std::lgamma(2.0 * m + 1.0) - m * std::log(4.0) - 2.0 * std::lgamma(m + 1.0) +
           m * log_t2 + log_c;
  };
  double above = 0.0;
  const int m0 = (from_level + 1) / 2;
  for (int m = m0; m < m0 + 200000; ++m) {
    const double term = std::exp(log_p(m));
    above += term;
    if (term < 1e-18 * std::max(above, 1e-300) || term < 1e-300) break;
  }
  return std::min(1.0, above);
}

namespace detail {

template <class LeakAt>
int required_dim(const FockSpace& space, LeakAt&& leak_at) {
  for (int d = space.dim() + 1; d <= 20000; d += std::max(1, d / 20)) {
    const FockSpace probe(d, space.leak_threshold());
    if (leak_at(probe) <= space.leak_threshold()) return d;
  }
  return -1;
}

inline std::string leak_message(const std::string& what, double leak, const FockSpace& space,
                                 int required) {
  std::string msg = what + ": guard-band population " + std::to_string(leak) +
                    " exceeds leak threshold " + std::to_string(space.leak_threshold()) +
                    " at dim " + std::to_string(space.dim());
  if (required > 0) msg += "; requires dim >= " + std::to_string(required);
  return msg;
}

}  // namespace detail

inline double displacement_expected_leak(const FockSpace& space, Complex alpha) {
  return coherent_tail(std::norm(alpha), space.guard_start());
}

inline double squeeze_expected_leak(const FockSpace& space, Complex z) {
  return squeezed_vacuum_tail(std::abs(z), space.guard_start());
}

/// D(α) = exp(α a† − α* a)
inline ComplexMatrix displacement(const FockSpace& space, Complex alpha) {
  const double leak = displacement_expected_leak(space, alpha);
  if (leak > space.leak_threshold()) {
    const int req = detail::required_dim(
        space, [&](const FockSpace& s) { return displacement_expected_leak(s, alpha); });
    throw TruncationError(detail::leak_message("displacement", leak, space, req), req);
  }
  const ComplexMatrix a = annihilation(space);
  return expm(alpha * a.adjoint() - std::conj(alpha) * a);
}

/// S(z) = exp((z* a² − z a†²)/2)
inline ComplexMatrix squeeze(const FockSpace& space, Complex z) {
  const double leak = squeeze_expected_leak(space, z);
  if (leak > space.leak_threshold()) {
    const int req = detail::required_dim(
        space, [&](const FockSpace& s) { return squeeze_expected_leak(s, z); });
    throw TruncationError(detail::leak_message("squeeze", leak, space, req), req);
  }
  const ComplexMatrix a = annihilation(space);
  const ComplexMatrix a2 = a * a;
  return expm(0.5 * (std::conj(z) * a2 - z * a2.adjoint()));
}

// ---------------------------------------------------------------------------
// Density matrices

class DensityMatrix {
 public:
  static constexpr double kHermitianTol = 1e-10;
  static constexpr double kTraceTol = 1e-8;
  static constexpr double kEigenTol = -1e-8;

  /// Validates Hermiticity, unit trace and positivity.
  static DensityMatrix from_matrix(const FockSpace& space, ComplexMatrix mat) {
    if (mat.rows() != space.dim() || mat.cols() != space.dim()) {
      throw std::invalid_argument("DensityMatrix: shape does not match Fock space");
    }
    if (!mat.allFinite()) throw std::invalid_argument("DensityMatrix: non-finite entries");
    if (detail::max_abs(mat - mat.adjoint()) > kHermitianTol) {
      throw std::invalid_argument("DensityMatrix: not Hermitian");
    }
    if (std::abs(mat.trace() - Complex(1.0)) > kTraceTol) {
      throw std::invalid_argument("DensityMatrix: trace differs from 1");
    }
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(mat, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < kEigenTol) {
      throw std::invalid_argument("DensityMatrix: not positive semidefinite");
    }
    return DensityMatrix(space, std::move(mat));
  }

  /// |ψ⟩⟨ψ| after normalizing ψ.
  static DensityMatrix pure(const FockSpace& space, const ComplexVector& psi) {
    if (psi.size() != space.dim()) {
      throw std::invalid_argument("DensityMatrix::pure: vector length does not match space");
    }
    const double nrm = psi.norm();
    if (!(nrm > 0.0) || !std::isfinite(nrm)) {
      throw std::invalid_argument("DensityMatrix::pure: zero or non-finite vector");
    }
    const ComplexVector v = psi / nrm;
    return DensityMatrix(space, v * v.adjoint());
  }

  static DensityMatrix vacuum(const FockSpace& space) {
    ComplexVector v = ComplexVector::Zero(space.dim());
    v(0) = 1.0;
    return pure(space, v);
  }

  /// Hermitizes and renormalizes without the eigenvalue check; for matrices
  /// produced by trace-preserving maps of valid states.
  static DensityMatrix from_trusted(const FockSpace& space, ComplexMatrix mat) {
    ComplexMatrix h = 0.5 * (mat + mat.adjoint());
    const double tr = h.trace().real();
    if (!(tr > 0.0) || !std::isfinite(tr)) {
      throw std::invalid_argument("DensityMatrix: non-positive trace");
    }
    if (std::abs(tr - 1.0) > 1e-6) {
      detail::warn("trace renormalization factor deviates from 1 by " +
                   std::to_string(std::abs(tr - 1.0)));
    }
    h /= tr;
    return DensityMatrix(space, std::move(h));
  }

  const ComplexMatrix& mat() const noexcept { return mat_; }
  const FockSpace& space() const noexcept { return space_; }
  int dim() const noexcept { return space_.dim(); }

  double trace() const { return mat_.trace().real(); }
  double purity() const { return (mat_ * mat_).trace().real(); }
  Complex expectation(const ComplexMatrix& op) const { return (op * mat_).trace(); }
  double band_population() const { return cvdd::band_population(space_, mat_); }

 private:
  DensityMatrix(const FockSpace& space, ComplexMatrix mat) : space_(space), mat_(std::move(mat)) {}

  FockSpace space_;
  ComplexMatrix mat_;
};

inline bool is_unitary(const ComplexMatrix& u, double tol = 1e-8) {
  if (u.rows() != u.cols()) return false;
  const auto id = ComplexMatrix::Identity(u.rows(), u.cols());
  return detail::max_abs(u.adjoint() * u - id) <= tol;
}

/// UρU†, re-Hermitized and trace-renormalized, with the guard band checked.
inline DensityMatrix conjugate(const DensityMatrix& rho, const ComplexMatrix& u) {
  if (u.rows() != rho.dim() || u.cols() != rho.dim()) {
    throw std::invalid_argument("conjugate: operator dimension mismatch");
  }
  if (!is_unitary(u)) throw std::invalid_argument("conjugate: operator is not unitary");
  DensityMatrix out = DensityMatrix::from_trusted(rho.space(), u * rho.mat() * u.adjoint());
  const double leak = out.band_population();
  if (leak > rho.space().leak_threshold()) {
    throw TruncationError(detail::leak_message("conjugate", leak, rho.space(), -1), -1);
  }
  return out;
}

namespace detail {

/// Square roots of PSD eigenvalues. Values below the rounding floor of the
/// decomposition are set to zero: their square roots (about 1e-8 each) would
/// otherwise add up to a visible bias for rank-deficient states.
inline Eigen::VectorXd psd_eigen_roots(const Eigen::VectorXd& eigenvalues) {
  const double top = std::max(eigenvalues.cwiseAbs().maxCoeff(), 0.0);
  const double floor = 64 * std::numeric_limits<double>::epsilon() * top * static_cast<double>(eigenvalues.size());
  return eigenvalues.unaryExpr([floor](double v) { return v > floor ? std::sqrt(v) : 0.0; });
}

/// Hermitian square root of a positive semidefinite matrix.
inline ComplexMatrix psd_sqrt(const ComplexMatrix& h) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h);
  const Eigen::VectorXd s = psd_eigen_roots(es.eigenvalues());
  return es.eigenvectors() * s.asDiagonal() * es.eigenvectors().adjoint();
}

inline double fidelity_from_sqrt(const ComplexMatrix& sqrt_rho, const ComplexMatrix& sigma) {
  ComplexMatrix m = sqrt_rho * sigma * sqrt_rho;
  m = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(m, Eigen::EigenvaluesOnly);
  const double root_sum = psd_eigen_roots(es.eigenvalues()).sum();
  return std::clamp(root_sum * root_sum, 0.0, 1.0);
}

}  // namespace detail

/// Uhlmann fidelity (Tr √(√ρ σ √ρ))², clamped to [0,1].
inline double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (rho.dim() != sigma.dim()) throw std::invalid_argument("fidelity: dimension mismatch");
  return detail::fidelity_from_sqrt(detail::psd_sqrt(rho.mat()), sigma.mat());
}

// ---------------------------------------------------------------------------
// Weighted pure-state ensembles

/// ρ = Σ_j w_j |ψ_j⟩⟨ψ_j| with the ψ_j stored as columns.
struct PureMixture {
  std::vector<double> weights;
  ComplexMatrix columns;

  int rank() const { return static_cast<int>(weights.size()); }

  ComplexMatrix to_matrix() const {
    ComplexMatrix scaled = columns;
    for (int j = 0; j < rank(); ++j) scaled.col(j) *= std::sqrt(weights[j]);
    return scaled * scaled.adjoint();
  }

  double band_population(const FockSpace& space) const {
    double leak = 0.0;
    for (int j = 0; j < rank(); ++j) {
      leak += weights[j] * columns.col(j).tail(space.guard_size()).squaredNorm();
    }
    return leak;
  }
};

// ---------------------------------------------------------------------------
// Gaussian mixtures

struct GaussianComponent {
  double weight = 1.0;
  Complex center{0.0, 0.0};
  double spread = 1.0 / std::numbers::sqrt2;  ///< x-quadrature std; 1/√2 is the vacuum
};

/// Mixture of displaced squeezed vacua. A component with spread σ is the
/// squeezed vacuum S(γ)|0⟩ with γ = −ln(σ√2), then displaced by its center.
struct GaussianMixtureSpec {
  std::vector<GaussianComponent> components;

  static GaussianMixtureSpec vacuum() { return {{GaussianComponent{}}}; }

  void validate() const {
    if (components.empty()) throw std::invalid_argument("GaussianMixtureSpec: no components");
    double total = 0.0;
    for (const auto& c : components) {
      if (!(c.weight > 0.0)) throw std::invalid_argument("GaussianMixtureSpec: weight must be > 0");
      if (!(c.spread > 0.0)) throw std::invalid_argument("GaussianMixtureSpec: spread must be > 0");
      total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw std::invalid_argument("GaussianMixtureSpec: weights do not sum to 1");
    }
  }
};

inline double squeeze_for_spread(double spread) { return -std::log(spread * std::numbers::sqrt2); }

/// Column vectors D(β_r) S(γ_r)|0⟩ with their weights.
inline PureMixture gaussian_mixture_components(const GaussianMixtureSpec& spec,
                                               const FockSpace& space) {
  spec.validate();
  const int d = space.dim();
  PureMixture mix;
  mix.columns.resize(d, static_cast<Eigen::Index>(spec.components.size()));
  ComplexVector vac = ComplexVector::Zero(d);
  vac(0) = 1.0;
  for (std::size_t r = 0; r < spec.components.size(); ++r) {
    const auto& c = spec.components[r];
    const double gamma = squeeze_for_spread(c.spread);
    ComplexVector v = vac;
    if (gamma != 0.0) v = squeeze(space, gamma) * v;
    if (c.center != Complex(0.0)) v = displacement(space, c.center) * v;
    const double leak = band_population(space, v);
    if (leak > space.leak_threshold()) {
      const int req = detail::required_dim(space, [&](const FockSpace& s) {
        ComplexVector w = ComplexVector::Zero(s.dim());
        w(0) = 1.0;
        if (gamma != 0.0) w = squeeze(FockSpace(s.dim(), 0.999), gamma) * w;
        if (c.center != Complex(0.0)) w = displacement(FockSpace(s.dim(), 0.999), c.center) * w;
        return band_population(s, w);
      });
      throw TruncationError(
          detail::leak_message("gaussian mixture component " + std::to_string(r), leak, space, req),
          req);
    }
    mix.weights.push_back(c.weight);
    mix.columns.col(static_cast<Eigen::Index>(r)) = v / v.norm();
  }
  return mix;
}

inline DensityMatrix gaussian_mixture_state(const GaussianMixtureSpec& spec,
                                            const FockSpace& space) {
  return DensityMatrix::from_trusted(space, gaussian_mixture_components(spec, space).to_matrix());
}

}  // namespace cvdd
