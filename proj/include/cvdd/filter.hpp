#pragma once

#include "cvdd/noise.hpp"
#include "cvdd/wigner.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace cvdd {

/// Piecewise ±1 sign pattern along the path.
struct SwitchingFunction {
  std::vector<double> boundaries;  ///< ℓ_0 = 0 < ℓ_1 < ... < ℓ_n
  std::vector<int> signs;          ///< s_1..s_n

  /// n equal segments over [0, total_length], s_k = (−1)^k.
  static SwitchingFunction uniform(int n, double total_length) {
    if (n < 1) throw std::invalid_argument("SwitchingFunction: n must be >= 1");
    if (!(total_length > 0)) throw std::invalid_argument("SwitchingFunction: length must be > 0");
    SwitchingFunction f;
    for (int k = 0; k <= n; ++k) f.boundaries.push_back(total_length * k / n);
    for (int k = 1; k <= n; ++k) f.signs.push_back(k % 2 == 0 ? 1 : -1);
    return f;
  }

  int segments() const { return static_cast<int>(signs.size()); }
  double length() const { return boundaries.back(); }

  void validate() const {
    if (signs.empty() || boundaries.size() != signs.size() + 1) {
      throw std::invalid_argument("SwitchingFunction: need n signs and n+1 boundaries");
    }
    if (boundaries.front() != 0.0) throw std::invalid_argument("SwitchingFunction: l_0 must be 0");
    for (std::size_t k = 1; k < boundaries.size(); ++k) {
      if (!(boundaries[k] > boundaries[k - 1])) {
        throw std::invalid_argument("SwitchingFunction: boundaries must increase");
      }
    }
    for (int s : signs) {
      if (s != 1 && s != -1) throw std::invalid_argument("SwitchingFunction: signs must be +-1");
    }
  }

  double value(double ell) const {
    for (int k = 0; k < segments(); ++k) {
      if (ell < boundaries[static_cast<std::size_t>(k) + 1]) return signs[static_cast<std::size_t>(k)];
    }
    return signs.back();
  }
};

/// Symmetric 2×2 covariance [[A, C], [C, B]] in units of the displacement
/// parameter α (Re α, Im α).
struct CovarianceSpec {
  double A = 0.0;
  double B = 0.0;
  double C = 0.0;
  bool positive_definite = false;

  static CovarianceSpec make(double a, double b, double c) {
    CovarianceSpec s{a, b, c, false};
    s.positive_definite = a > 0 && s.det() > 1e-12;
    return s;
  }

  double det() const { return A * B - C * C; }
};

/// Covariance of the (x, p) shift produced by a displacement α with the given
/// α-covariance: x = √2 Re α, p = √2 Im α.
inline CovarianceSpec to_phase_space(const CovarianceSpec& alpha_units) {
  return CovarianceSpec::make(2 * alpha_units.A, 2 * alpha_units.B, 2 * alpha_units.C);
}

/// Continuum noise covariance: returns {E[x x'], E[p p'], E[x p']} at (ℓ, ℓ').
using AnalyticKernel = std::function<std::array<double, 3>(double, double)>;

namespace detail {

struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Nodes and weights on [−1, 1] by Newton iteration on P_q.
inline GaussLegendre gauss_legendre(int q) {
  GaussLegendre g{std::vector<double>(static_cast<std::size_t>(q)),
                  std::vector<double>(static_cast<std::size_t>(q))};
  for (int i = 0; i < q; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (q + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= q; ++k) {
        const double pk = ((2.0 * k - 1) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = q * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    g.nodes[static_cast<std::size_t>(i)] = x;
    g.weights[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return g;
}

}  // namespace detail

/// Σ_n from a continuum kernel by Gauss-Legendre quadrature on each pair of
/// segments; exact for kernels that are polynomial of degree < 2q per cell.
inline CovarianceSpec sigma_matrix(const SwitchingFunction& f, const AnalyticKernel& kernel,
                                   int quadrature_order = 8) {
  f.validate();
  if (quadrature_order < 1) throw std::invalid_argument("sigma_matrix: quadrature order >= 1");
  const auto gl = detail::gauss_legendre(quadrature_order);
  const int n = f.segments();
  double a = 0, b = 0, c = 0;
  for (int k = 0; k < n; ++k) {
    const double lo_k = f.boundaries[static_cast<std::size_t>(k)];
    const double h_k = 0.5 * (f.boundaries[static_cast<std::size_t>(k) + 1] - lo_k);
    for (int kk = 0; kk < n; ++kk) {
      const double lo_kk = f.boundaries[static_cast<std::size_t>(kk)];
      const double h_kk = 0.5 * (f.boundaries[static_cast<std::size_t>(kk) + 1] - lo_kk);
      const double sign = f.signs[static_cast<std::size_t>(k)] * f.signs[static_cast<std::size_t>(kk)];
      double ca = 0, cb = 0, cc = 0;
      for (int i = 0; i < quadrature_order; ++i) {
        const double l = lo_k + h_k * (gl.nodes[static_cast<std::size_t>(i)] + 1.0);
        for (int j = 0; j < quadrature_order; ++j) {
          const double l2 = lo_kk + h_kk * (gl.nodes[static_cast<std::size_t>(j)] + 1.0);
          const double w = gl.weights[static_cast<std::size_t>(i)] * gl.weights[static_cast<std::size_t>(j)];
          const auto e = kernel(l, l2);
          const auto e_swapped = kernel(l2, l);
          ca += w * e[0];
          cb += w * e[1];
          cc += w * 0.5 * (e[2] + e_swapped[2]);
        }
      }
      const double jac = sign * h_k * h_kk;
      a += jac * ca;
      b += jac * cb;
      c += jac * cc;
    }
  }
  return CovarianceSpec::make(a, b, c);
}

/// Σ_n from a segment-aligned kernel table. Each segment contributes a kick
/// of step_length × value, so the sum is exact.
inline CovarianceSpec sigma_matrix(const SwitchingFunction& f, const CovarianceKernel& table) {
  f.validate();
  if (table.segments != f.segments() || table.xx.rows() != table.segments) {
    throw std::invalid_argument("sigma_matrix: kernel has " + std::to_string(table.segments) +
                                " segments, switching function has " +
                                std::to_string(f.segments()));
  }
  const int n = f.segments();
  double a = 0, b = 0, c = 0;
  for (int k = 0; k < n; ++k) {
    const double wk = f.signs[static_cast<std::size_t>(k)] *
                      (f.boundaries[static_cast<std::size_t>(k) + 1] - f.boundaries[static_cast<std::size_t>(k)]);
    for (int kk = 0; kk < n; ++kk) {
      const double wkk = f.signs[static_cast<std::size_t>(kk)] *
                         (f.boundaries[static_cast<std::size_t>(kk) + 1] - f.boundaries[static_cast<std::size_t>(kk)]);
      a += wk * wkk * table.xx(k, kk);
      b += wk * wkk * table.pp(k, kk);
      c += wk * wkk * 0.5 * (table.xp(k, kk) + table.xp(kk, k));
    }
  }
  return CovarianceSpec::make(a, b, c);
}

/// Kernel of a compound-Poisson process with jumps only at segment boundaries:
/// E[x_ℓ x_ℓ'] = σ² (1 − p)^{|k − k'|} with k, k' the segment indices and p the
/// per-boundary jump probability. Piecewise constant, so quadrature is exact.
inline AnalyticKernel cpp_segment_kernel(double sigma, double jump_probability, double step_length) {
  return [=](double l, double l2) -> std::array<double, 3> {
    const auto k = static_cast<long>(std::floor(l / step_length));
    const auto k2 = static_cast<long>(std::floor(l2 / step_length));
    const double v = sigma * sigma * std::pow(1.0 - jump_probability, std::abs(k - k2));
    return {v, v, 0.0};
  };
}

/// Raised when Σ_n is not positive definite, so the filter has no Gaussian form.
class NonPositiveDefiniteError : public std::domain_error {
 public:
  explicit NonPositiveDefiniteError(const CovarianceSpec& s)
      : std::domain_error("covariance matrix is not positive definite (A=" + std::to_string(s.A) +
                          ", B=" + std::to_string(s.B) + ", C=" + std::to_string(s.C) +
                          "); the averaged channel does not reduce to a Gaussian filter") {}
};

/// Normalized bivariate Gaussian with covariance `spec`, sampled on the grid
/// coordinates (x, p). Pass to_phase_space(...) for α-unit covariances.
inline PhaseSpaceField gaussian_filter(const CovarianceSpec& spec, const PhaseSpaceGrid& grid) {
  const double det = spec.det();
  if (!(spec.A > 0) || !(det > 1e-12)) throw NonPositiveDefiniteError(spec);
  const double ia = spec.B / det, ib = spec.A / det, ic = -spec.C / det;
  const double norm = 1.0 / (2 * std::numbers::pi * std::sqrt(det));
  return PhaseSpaceField::sample(grid, [&](double x, double p) {
    return norm * std::exp(-0.5 * (ia * x * x + ib * p * p + 2 * ic * x * p));
  });
}

/// Marks a delta filter: convolution is the identity.
struct IdentityFilter {};

using FilterField = std::variant<IdentityFilter, PhaseSpaceField>;

inline bool is_identity(const FilterField& f) { return std::holds_alternative<IdentityFilter>(f); }

/// Static compound-Poisson displacement: the alternating signs cancel for even
/// n and leave one kick δℓ·α for odd n, whose α-variance is (δℓ σ)² per axis.
inline FilterField cpp_static_filter(int n, double step_length, double sigma_jump,
                                     const PhaseSpaceGrid& grid) {
  if (n < 1) throw std::invalid_argument("cpp_static_filter: n must be >= 1");
  const double s = step_length * sigma_jump;
  if (n % 2 == 0 || s == 0.0) return IdentityFilter{};
  return gaussian_filter(to_phase_space(CovarianceSpec::make(s * s, s * s, 0.0)), grid);
}

/// Discrete convolution (f ∗ W)(x, p) = ∬ f(x − x', p − p') W(x', p') dx' dp'
/// with zero padding. The grid must place a node at the origin so that the
/// filter can be indexed by offsets.
inline PhaseSpaceField convolve(const FilterField& filter, const PhaseSpaceField& w) {
  if (is_identity(filter)) return w;
  const auto& f = std::get<PhaseSpaceField>(filter);
  detail::require_same_grid(f.grid, w.grid, "convolve");
  const auto& g = w.grid;
  const double cx_real = -g.x_min / g.dx();
  const double cp_real = -g.p_min / g.dp();
  const int cx = static_cast<int>(std::lround(cx_real));
  const int cp = static_cast<int>(std::lround(cp_real));
  if (std::abs(cx_real - cx) > 1e-9 || std::abs(cp_real - cp) > 1e-9 || cx < 0 || cx >= g.nx ||
      cp < 0 || cp >= g.np) {
    throw std::invalid_argument("convolve: grid must contain the origin as a node");
  }
  PhaseSpaceField out = PhaseSpaceField::zeros(g);
  const double cell = g.dx() * g.dp();
  for (int i = 0; i < g.nx; ++i) {
    for (int j = 0; j < g.np; ++j) {
      double acc = 0.0;
      // filter index (i − i' + cx) must stay inside the grid
      const int i0 = std::max(0, i + cx - (g.nx - 1)), i1 = std::min(g.nx - 1, i + cx);
      const int j0 = std::max(0, j + cp - (g.np - 1)), j1 = std::min(g.np - 1, j + cp);
      for (int ii = i0; ii <= i1; ++ii) {
        for (int jj = j0; jj <= j1; ++jj) acc += f.values(i - ii + cx, j - jj + cp) * w.values(ii, jj);
      }
      out.values(i, j) = acc * cell;
    }
  }
  return out;
}

inline constexpr int kMinSqueezeSamples = 100;

/// Monte-Carlo average of scale(W, Γ) over draws of the accumulated squeeze Γ.
inline PhaseSpaceField squeeze_average(const PhaseSpaceField& w, std::span<const double> gamma_samples) {
  if (static_cast<int>(gamma_samples.size()) < kMinSqueezeSamples) {
    throw std::invalid_argument("squeeze_average: need at least " +
                                std::to_string(kMinSqueezeSamples) + " samples");
  }
  PhaseSpaceField out = PhaseSpaceField::zeros(w.grid);
  for (double gamma : gamma_samples) out.values += scale(w, gamma).values;
  out.values /= static_cast<double>(gamma_samples.size());
  return out;
}

}  // namespace cvdd
