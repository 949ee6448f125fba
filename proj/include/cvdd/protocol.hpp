#pragma once

#include "cvdd/fock.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cvdd {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Reduce an angle to [0, 2π), snapping values within 1e-12 of 2π to 0.
inline double wrap_angle(double theta) {
  double r = std::fmod(theta, kTwoPi);
  if (r < 0) r += kTwoPi;
  if (kTwoPi - r < 1e-12 || r < 1e-12) r = 0.0;
  return r;
}

/// One control operation. Parity is diag((−1)^n), which coincides with R_π.
struct Intervention {
  enum class Kind { identity, parity, rotation };
  Kind kind = Kind::identity;
  double angle = 0.0;  ///< rotation angle θ of R_θ = exp(−iθ a†a)

  static Intervention identity() { return {}; }
  static Intervention parity() { return {Kind::parity, std::numbers::pi}; }
  static Intervention rotation(double theta) { return {Kind::rotation, theta}; }

  /// Angle of the equivalent rotation.
  double effective_angle() const {
    switch (kind) {
      case Kind::identity: return 0.0;
      case Kind::parity: return std::numbers::pi;
      case Kind::rotation: return angle;
    }
    return 0.0;
  }

  bool is_identity() const { return wrap_angle(effective_angle()) == 0.0; }

  ComplexMatrix matrix(const FockSpace& space) const {
    switch (kind) {
      case Kind::identity: return ComplexMatrix::Identity(space.dim(), space.dim());
      case Kind::parity: return cvdd::parity(space);
      case Kind::rotation: return cvdd::rotation(space, angle);
    }
    return {};
  }

  /// Diagonal phases applied to Fock amplitudes.
  Eigen::VectorXcd phases(int dim) const {
    Eigen::VectorXcd ph(dim);
    for (int n = 0; n < dim; ++n) {
      switch (kind) {
        case Kind::identity: ph(n) = 1.0; break;
        case Kind::parity: ph(n) = (n % 2 == 0) ? 1.0 : -1.0; break;
        case Kind::rotation: ph(n) = detail::rotation_phase(angle, n); break;
      }
    }
    return ph;
  }

  std::string name() const {
    switch (kind) {
      case Kind::identity: return "identity";
      case Kind::parity: return "parity";
      case Kind::rotation: return "rotation";
    }
    return "?";
  }
};

// ---------------------------------------------------------------------------
// Control groups

struct ControlGroup {
  enum class Label { parity_group, squeeze_set, gaussian_group, cyclic };
  Label label = Label::parity_group;
  int m = 1;  ///< order parameter of cyclic(m)
  std::vector<Intervention> elements;

  static ControlGroup parity_group() {
    return {Label::parity_group, 1, {Intervention::identity(), Intervention::parity()}};
  }
  /// {I, R_{π/2}}; not closed under products, but squeezes are two-fold symmetric.
  static ControlGroup squeeze_set() {
    return {Label::squeeze_set, 2,
            {Intervention::identity(), Intervention::rotation(std::numbers::pi / 2)}};
  }
  static ControlGroup gaussian_group() {
    ControlGroup g = cyclic(2);
    g.label = Label::gaussian_group;
    return g;
  }
  /// {R_{jπ/m}}, j = 0..2m−1
  static ControlGroup cyclic(int m) {
    if (m < 1) throw std::invalid_argument("cyclic group order m must be >= 1");
    ControlGroup g{Label::cyclic, m, {}};
    for (int j = 0; j < 2 * m; ++j) {
      g.elements.push_back(j == 0 ? Intervention::identity()
                                  : Intervention::rotation(j * std::numbers::pi / m));
    }
    return g;
  }

  std::string name() const {
    switch (label) {
      case Label::parity_group: return "parity_group";
      case Label::squeeze_set: return "squeeze_set";
      case Label::gaussian_group: return "gaussian_group";
      case Label::cyclic: return "cyclic(" + std::to_string(m) + ")";
    }
    return "?";
  }
};

/// ‖(1/|G|) Σ_j g_j† X g_j‖_max
inline double group_average_residual(const ControlGroup& group, const ComplexMatrix& generator) {
  if (group.elements.empty()) throw std::invalid_argument("group_average_residual: empty group");
  if (generator.rows() != generator.cols()) {
    throw std::invalid_argument("group_average_residual: generator must be square");
  }
  const int d = static_cast<int>(generator.rows());
  ComplexMatrix acc = ComplexMatrix::Zero(d, d);
  for (const auto& g : group.elements) {
    const Eigen::VectorXcd ph = g.phases(d);
    acc += ph.conjugate().asDiagonal() * generator * ph.asDiagonal();
  }
  acc /= static_cast<double>(group.elements.size());
  return detail::max_abs(acc);
}

inline ComplexMatrix matrix_power(const ComplexMatrix& m, int p) {
  ComplexMatrix out = ComplexMatrix::Identity(m.rows(), m.cols());
  for (int i = 0; i < p; ++i) out = out * m;
  return out;
}

/// Noise generators each group is built to average out.
inline std::vector<std::pair<std::string, ComplexMatrix>> designed_generators(
    const ControlGroup& group, const FockSpace& space) {
  const ComplexMatrix a = annihilation(space);
  std::vector<std::pair<std::string, ComplexMatrix>> out;
  auto add_powers = [&](int p) {
    const ComplexMatrix ap = matrix_power(a, p);
    const std::string suffix = p == 1 ? "" : "^" + std::to_string(p);
    out.emplace_back("a" + suffix, ap);
    out.emplace_back("adag" + suffix, ap.adjoint());
  };
  switch (group.label) {
    case ControlGroup::Label::parity_group:
      add_powers(1);
      out.emplace_back("x", position(space));
      out.emplace_back("p", momentum(space));
      break;
    case ControlGroup::Label::squeeze_set:
      add_powers(2);
      break;
    case ControlGroup::Label::gaussian_group:
      add_powers(1);
      add_powers(2);
      break;
    case ControlGroup::Label::cyclic:
      for (int p = 1; p <= group.m; ++p) add_powers(p);
      break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Intervention schedules

/// A_0 before the first segment, A_k after segment k, then an optional closing
/// correction so that the product of all controls is the identity.
struct InterventionSchedule {
  std::vector<Intervention> ops;
  std::optional<Intervention> closing;

  int segments() const { return static_cast<int>(ops.size()) - 1; }

  /// Angle of C_k = A_k ··· A_0, in [0, 2π).
  double cumulative_angle(int k) const {
    double theta = 0.0;
    for (int i = 0; i <= k; ++i) theta += ops[static_cast<std::size_t>(i)].effective_angle();
    return wrap_angle(theta);
  }

  double total_angle() const {
    double theta = cumulative_angle(segments());
    if (closing) theta += closing->effective_angle();
    return wrap_angle(theta);
  }
};

namespace detail {

inline void require_segments(int n) {
  if (n < 1) throw std::invalid_argument("schedule: n must be >= 1");
}

inline std::optional<Intervention> closing_for(double cumulative, bool as_parity) {
  const double theta = wrap_angle(cumulative);
  if (theta == 0.0) return std::nullopt;
  if (as_parity && std::abs(theta - std::numbers::pi) < 1e-12) return Intervention::parity();
  return Intervention::rotation(wrap_angle(-theta));
}

}  // namespace detail

inline InterventionSchedule schedule_none(int n) {
  detail::require_segments(n);
  return {std::vector<Intervention>(static_cast<std::size_t>(n + 1), Intervention::identity()),
          std::nullopt};
}

/// A_k = Π for k = 0..n; closing Π when n is even.
inline InterventionSchedule schedule_displacement(int n) {
  detail::require_segments(n);
  InterventionSchedule s{
      std::vector<Intervention>(static_cast<std::size_t>(n + 1), Intervention::parity()), {}};
  s.closing = detail::closing_for(s.cumulative_angle(n), true);
  return s;
}

/// A_0 = R_{π/2}; A_k = R_{π/2} for even k and R_{−π/2} for odd k; closing restores identity.
inline InterventionSchedule schedule_squeezing(int n) {
  detail::require_segments(n);
  const double half_pi = std::numbers::pi / 2;
  InterventionSchedule s;
  s.ops.push_back(Intervention::rotation(half_pi));
  for (int k = 1; k <= n; ++k) {
    s.ops.push_back(Intervention::rotation(k % 2 == 0 ? half_pi : -half_pi));
  }
  s.closing = detail::closing_for(s.cumulative_angle(n), false);
  return s;
}

/// A_0 = I, A_k = R_{π/m}: the cumulative control cycles through cyclic(m).
inline InterventionSchedule schedule_cyclic(int m, int n) {
  detail::require_segments(n);
  if (m < 1) throw std::invalid_argument("schedule_cyclic: m must be >= 1");
  InterventionSchedule s;
  s.ops.push_back(Intervention::identity());
  for (int k = 1; k <= n; ++k) s.ops.push_back(Intervention::rotation(std::numbers::pi / m));
  s.closing = detail::closing_for(s.cumulative_angle(n), false);
  return s;
}

/// Cycles the four-element rotation group; identical to schedule_cyclic(2, n).
inline InterventionSchedule schedule_combined(int n) { return schedule_cyclic(2, n); }

/// CSV `k,op,angle`; the closing correction is listed as k = n+1 with op prefixed `closing_`.
inline void write_schedule_csv(std::ostream& os, const InterventionSchedule& s) {
  os << "k,op,angle\n" << std::setprecision(17);
  for (int k = 0; k <= s.segments(); ++k) {
    const auto& op = s.ops[static_cast<std::size_t>(k)];
    os << k << ',' << op.name() << ',' << op.effective_angle() << '\n';
  }
  if (s.closing) {
    os << s.segments() + 1 << ",closing_" << s.closing->name() << ','
       << s.closing->effective_angle() << '\n';
  }
}

}  // namespace cvdd
