#pragma once

#include "cvdd/fock.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cvdd {

/// Uniform rectangular grid over the (x, p) plane, endpoints included.
struct PhaseSpaceGrid {
  double x_min = -5.0;
  double x_max = 5.0;
  double p_min = -5.0;
  double p_max = 5.0;
  int nx = 101;
  int np = 101;

  void validate() const {
    if (!std::isfinite(x_min) || !std::isfinite(x_max) || !std::isfinite(p_min) ||
        !std::isfinite(p_max)) {
      throw std::invalid_argument("PhaseSpaceGrid: non-finite bounds");
    }
    if (!(x_max > x_min) || !(p_max > p_min)) {
      throw std::invalid_argument("PhaseSpaceGrid: empty extent");
    }
    if (nx < 8 || np < 8) {
      throw std::invalid_argument("PhaseSpaceGrid: need at least 8 points per axis");
    }
  }

  double dx() const { return (x_max - x_min) / (nx - 1); }
  double dp() const { return (p_max - p_min) / (np - 1); }
  double x(int i) const { return x_min + i * dx(); }
  double p(int j) const { return p_min + j * dp(); }

  friend bool operator==(const PhaseSpaceGrid&, const PhaseSpaceGrid&) = default;
};

/// Real values on a PhaseSpaceGrid; values(i, j) sits at (x(i), p(j)).
struct PhaseSpaceField {
  PhaseSpaceGrid grid;
  Eigen::MatrixXd values;

  static PhaseSpaceField zeros(const PhaseSpaceGrid& g) {
    g.validate();
    return {g, Eigen::MatrixXd::Zero(g.nx, g.np)};
  }

  template <class F>
  static PhaseSpaceField sample(const PhaseSpaceGrid& g, F&& f) {
    PhaseSpaceField out = zeros(g);
    for (int i = 0; i < g.nx; ++i) {
      for (int j = 0; j < g.np; ++j) out.values(i, j) = f(g.x(i), g.p(j));
    }
    return out;
  }
};

namespace detail {

inline Eigen::VectorXd trapezoid_weights(int n, double h) {
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, h);
  w(0) *= 0.5;
  w(n - 1) *= 0.5;
  return w;
}

inline void require_same_grid(const PhaseSpaceGrid& a, const PhaseSpaceGrid& b,
                              const char* where) {
  if (!(a == b)) throw std::invalid_argument(std::string(where) + ": grid mismatch");
}

}  // namespace detail

/// ∬ f dx dp by the 2D trapezoid rule.
inline double integrate(const PhaseSpaceGrid& g, const Eigen::MatrixXd& values) {
  const auto wx = detail::trapezoid_weights(g.nx, g.dx());
  const auto wp = detail::trapezoid_weights(g.np, g.dp());
  return wx.dot(values * wp);
}

inline double integrate(const PhaseSpaceField& f) { return integrate(f.grid, f.values); }

/// ∬ |a − b| dx dp
inline double l1_distance(const PhaseSpaceField& a, const PhaseSpaceField& b) {
  detail::require_same_grid(a.grid, b.grid, "l1_distance");
  return integrate(a.grid, (a.values - b.values).cwiseAbs());
}

inline double sup_distance(const PhaseSpaceField& a, const PhaseSpaceField& b) {
  detail::require_same_grid(a.grid, b.grid, "sup_distance");
  return (a.values - b.values).cwiseAbs().maxCoeff();
}

/// Mass, means and (co)variances of a field treated as a density.
struct FieldMoments {
  double mass = 0, mean_x = 0, mean_p = 0, var_x = 0, var_p = 0, cov_xp = 0;
};

inline FieldMoments moments(const PhaseSpaceField& f) {
  const auto& g = f.grid;
  FieldMoments m;
  m.mass = integrate(f);
  auto weighted = [&](auto&& fn) {
    Eigen::MatrixXd v(g.nx, g.np);
    for (int i = 0; i < g.nx; ++i)
      for (int j = 0; j < g.np; ++j) v(i, j) = fn(g.x(i), g.p(j)) * f.values(i, j);
    return integrate(g, v) / m.mass;
  };
  m.mean_x = weighted([](double x, double) { return x; });
  m.mean_p = weighted([](double, double p) { return p; });
  m.var_x = weighted([&](double x, double) { return (x - m.mean_x) * (x - m.mean_x); });
  m.var_p = weighted([&](double, double p) { return (p - m.mean_p) * (p - m.mean_p); });
  m.cov_xp = weighted([&](double x, double p) { return (x - m.mean_x) * (p - m.mean_p); });
  return m;
}

// ---------------------------------------------------------------------------
// Wigner functions

/// W(x,p) = (1/π) Tr[ρ D(α) Π D†(α)] with α = (x + ip)/√2, evaluated from the
/// matrix elements of the displaced parity, which obey a two-term ladder
/// recursion in the Fock indices. Normalized so that ∬ W dx dp = 1.
inline double wigner_at(const ComplexMatrix& rho, double x, double p) {
  const Eigen::Index d = rho.rows();
  const Complex alpha = Complex(x, p) / std::numbers::sqrt2;
  const Complex two_alpha = 2.0 * alpha;
  const Complex two_alpha_c = std::conj(two_alpha);

  std::vector<Complex> w(static_cast<std::size_t>(d));
  w[0] = std::exp(-2.0 * std::norm(alpha)) / std::numbers::pi;
  double acc = rho(0, 0).real() * w[0].real();
  for (Eigen::Index n = 1; n < d; ++n) {
    w[n] = two_alpha * w[n - 1] / std::sqrt(static_cast<double>(n));
    acc += 2.0 * (rho(0, n) * w[n]).real();
  }
  for (Eigen::Index m = 1; m < d; ++m) {
    const double sm = std::sqrt(static_cast<double>(m));
    Complex temp = w[m];
    w[m] = (two_alpha_c * temp - sm * w[m - 1]) / sm;
    acc += (rho(m, m) * w[m]).real();
    for (Eigen::Index n = m + 1; n < d; ++n) {
      const Complex next = (two_alpha * w[n - 1] - sm * temp) / std::sqrt(static_cast<double>(n));
      temp = w[n];
      w[n] = next;
      acc += 2.0 * (rho(m, n) * w[n]).real();
    }
  }
  return acc;
}

/// Wigner function of ρ sampled on the grid. The grid must stay inside the
/// region reachable by coherent states representable at this truncation.
inline PhaseSpaceField wigner_of_state(const DensityMatrix& rho, const PhaseSpaceGrid& grid) {
  grid.validate();
  const auto& space = rho.space();
  const double leak = rho.band_population();
  if (leak > space.leak_threshold()) {
    throw TruncationError(detail::leak_message("wigner_of_state", leak, space, -1), -1);
  }
  const double xr = std::max(std::abs(grid.x_min), std::abs(grid.x_max));
  const double pr = std::max(std::abs(grid.p_min), std::abs(grid.p_max));
  const double reach = 0.5 * (xr * xr + pr * pr);  // max |α|² on the grid
  if (reach > space.guard_start()) {
    const int req = static_cast<int>(std::ceil(reach / 0.9)) + 1;
    throw TruncationError("wigner_of_state: grid extent reaches |alpha|^2 = " +
                              std::to_string(reach) + " beyond the representable range at dim " +
                              std::to_string(space.dim()) + "; requires dim >= " +
                              std::to_string(req),
                          req);
  }
  return PhaseSpaceField::sample(grid, [&](double x, double p) { return wigner_at(rho.mat(), x, p); });
}

/// Σ_r p_r (1/π) exp(−(x−x_r)²/(2σ_r²)) exp(−2σ_r²(p−p_r)²), (x_r,p_r) = √2 β_r.
inline PhaseSpaceField wigner_of_mixture(const GaussianMixtureSpec& spec,
                                         const PhaseSpaceGrid& grid) {
  spec.validate();
  return PhaseSpaceField::sample(grid, [&](double x, double p) {
    double w = 0.0;
    for (const auto& c : spec.components) {
      const double xr = std::numbers::sqrt2 * c.center.real();
      const double pr = std::numbers::sqrt2 * c.center.imag();
      const double s2 = c.spread * c.spread;
      w += c.weight / std::numbers::pi * std::exp(-(x - xr) * (x - xr) / (2.0 * s2)) *
           std::exp(-2.0 * s2 * (p - pr) * (p - pr));
    }
    return w;
  });
}

// ---------------------------------------------------------------------------
// Phase-space resampling

inline constexpr double kBoundaryMassTolerance = 1e-4;

namespace detail {

/// Bilinear interpolation; zero outside the grid.
inline double bilinear(const PhaseSpaceField& f, double x, double p) {
  const auto& g = f.grid;
  const double u = (x - g.x_min) / g.dx();
  const double v = (p - g.p_min) / g.dp();
  constexpr double eps = 1e-9;
  if (u < -eps || v < -eps || u > g.nx - 1 + eps || v > g.np - 1 + eps) return 0.0;
  const double uc = std::clamp(u, 0.0, static_cast<double>(g.nx - 1));
  const double vc = std::clamp(v, 0.0, static_cast<double>(g.np - 1));
  const int i0 = std::min(static_cast<int>(std::floor(uc)), g.nx - 2);
  const int j0 = std::min(static_cast<int>(std::floor(vc)), g.np - 2);
  const double fu = uc - i0;
  const double fv = vc - j0;
  return (1 - fu) * (1 - fv) * f.values(i0, j0) + fu * (1 - fv) * f.values(i0 + 1, j0) +
         (1 - fu) * fv * f.values(i0, j0 + 1) + fu * fv * f.values(i0 + 1, j0 + 1);
}

/// |mass| of the source carried outside the grid by the inverse of `pull`.
template <class Forward>
double escaped_mass(const PhaseSpaceField& src, Forward&& forward) {
  const auto& g = src.grid;
  Eigen::MatrixXd lost = Eigen::MatrixXd::Zero(g.nx, g.np);
  const double tol_x = 1e-9 * g.dx();
  const double tol_p = 1e-9 * g.dp();
  for (int i = 0; i < g.nx; ++i) {
    for (int j = 0; j < g.np; ++j) {
      const auto [tx, tp] = forward(g.x(i), g.p(j));
      if (tx < g.x_min - tol_x || tx > g.x_max + tol_x || tp < g.p_min - tol_p ||
          tp > g.p_max + tol_p) {
        lost(i, j) = std::abs(src.values(i, j));
      }
    }
  }
  return integrate(g, lost);
}

}  // namespace detail

/// T[W](x, p) = W(x + x', p + p') with (x', p') = √2 (Re α', Im α').
/// Equals the Wigner function of D(−α')ρD(−α')†.
inline PhaseSpaceField translate(const PhaseSpaceField& field, Complex shift) {
  const double sx = std::numbers::sqrt2 * shift.real();
  const double sp = std::numbers::sqrt2 * shift.imag();
  const double lost = detail::escaped_mass(field, [&](double x, double p) {
    return std::pair{x - sx, p - sp};
  });
  if (lost > kBoundaryMassTolerance) {
    throw std::out_of_range("translate: shifted support leaves the grid (escaped mass " +
                            std::to_string(lost) + ")");
  }
  return PhaseSpaceField::sample(field.grid, [&](double x, double p) {
    return detail::bilinear(field, x + sx, p + sp);
  });
}

/// T[W](x, p) = W(e^{−γ} x, e^{γ} p); area preserving.
/// Equals the Wigner function of S(−γ)ρS(−γ)†.
inline PhaseSpaceField scale(const PhaseSpaceField& field, double gamma) {
  const double ex = std::exp(-gamma);
  const double ep = std::exp(gamma);
  const double lost = detail::escaped_mass(field, [&](double x, double p) {
    return std::pair{x / ex, p / ep};
  });
  if (lost > kBoundaryMassTolerance) {
    throw std::out_of_range("scale: rescaled support leaves the grid (escaped mass " +
                            std::to_string(lost) + ")");
  }
  return PhaseSpaceField::sample(field.grid, [&](double x, double p) {
    return detail::bilinear(field, ex * x, ep * p);
  });
}

// ---------------------------------------------------------------------------
// Expectation values

/// Tr(Gρ) = ∬ W^G(x,p) W_ρ(x,p) dx dp, where W^G is the dual (operator) Wigner
/// function. The measure is dx dp; the identity's dual field is the constant 1.
inline double expectation(const PhaseSpaceField& w_state, const PhaseSpaceField& w_operator) {
  detail::require_same_grid(w_state.grid, w_operator.grid, "expectation");
  return integrate(w_state.grid, w_state.values.cwiseProduct(w_operator.values));
}

inline PhaseSpaceField dual_identity(const PhaseSpaceGrid& g) {
  return PhaseSpaceField::sample(g, [](double, double) { return 1.0; });
}

inline PhaseSpaceField dual_position(const PhaseSpaceGrid& g) {
  return PhaseSpaceField::sample(g, [](double x, double) { return x; });
}

inline PhaseSpaceField dual_momentum(const PhaseSpaceGrid& g) {
  return PhaseSpaceField::sample(g, [](double, double p) { return p; });
}

// ---------------------------------------------------------------------------
// CSV: header `x,p,w`, rows ordered by x then p.

inline void write_field_csv(std::ostream& os, const PhaseSpaceField& f) {
  os << "x,p,w\n";
  os << std::setprecision(17);
  for (int i = 0; i < f.grid.nx; ++i) {
    for (int j = 0; j < f.grid.np; ++j) {
      os << f.grid.x(i) << ',' << f.grid.p(j) << ',' << f.values(i, j) << '\n';
    }
  }
}

inline PhaseSpaceField read_field_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("x,p,w", 0) != 0) {
    throw std::runtime_error("read_field_csv: missing x,p,w header");
  }
  std::vector<double> xs, ps, ws;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string a, b, c;
    if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || !std::getline(row, c)) {
      throw std::runtime_error("read_field_csv: malformed row '" + line + "'");
    }
    xs.push_back(std::stod(a));
    ps.push_back(std::stod(b));
    ws.push_back(std::stod(c));
  }
  const std::set<double> ux(xs.begin(), xs.end());
  const std::set<double> up(ps.begin(), ps.end());
  PhaseSpaceGrid g{*ux.begin(), *ux.rbegin(), *up.begin(), *up.rbegin(),
                   static_cast<int>(ux.size()), static_cast<int>(up.size())};
  if (ws.size() != ux.size() * up.size()) {
    throw std::runtime_error("read_field_csv: row count does not form a grid");
  }
  PhaseSpaceField f = PhaseSpaceField::zeros(g);
  for (std::size_t k = 0; k < ws.size(); ++k) {
    f.values(static_cast<Eigen::Index>(k / g.np), static_cast<Eigen::Index>(k % g.np)) = ws[k];
  }
  return f;
}

}  // namespace cvdd
