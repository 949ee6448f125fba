#pragma once

#include "cvdd/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cvdd {

enum class NoiseKind { displacement, squeezing, combined, polynomial };

inline std::string to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::displacement: return "displacement";
    case NoiseKind::squeezing: return "squeezing";
    case NoiseKind::combined: return "combined";
    case NoiseKind::polynomial: return "polynomial";
  }
  return "?";
}

/// Piecewise-constant compound-Poisson noise on a segmented path.
///
/// `eta` is the probability that the noise value jumps at a segment boundary
/// when segments have unit length. With `step_length` δℓ ≠ 1 the jump
/// probability becomes 1 − (1 − eta)^δℓ and the per-segment kick is δℓ times
/// the current value, so a fixed channel can be cut into any number of
/// segments. Jumps are drawn from zero-mean Gaussians: `sigma_disp` per real
/// component of the displacement (and of every polynomial coefficient),
/// `sigma_sqz` for the real squeeze parameter.
struct NoiseConfig {
  NoiseKind kind = NoiseKind::displacement;
  int degree = 1;  ///< polynomial degree m
  double eta = 0.2;
  double sigma_disp = 0.05;
  double sigma_sqz = 0.0;
  int segments = 50;
  double step_length = 1.0;
  std::uint64_t seed = 1;
  bool static_noise = false;

  void validate() const {
    if (segments < 1) throw std::invalid_argument("noise.segments must be >= 1");
    if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("noise.eta must lie in [0,1]");
    if (!(sigma_disp >= 0.0)) throw std::invalid_argument("noise.sigma_disp must be >= 0");
    if (!(sigma_sqz >= 0.0)) throw std::invalid_argument("noise.sigma_sqz must be >= 0");
    if (!(step_length > 0.0)) throw std::invalid_argument("noise.step_length must be > 0");
    if (kind == NoiseKind::polynomial && degree < 1) {
      throw std::invalid_argument("noise.degree must be >= 1");
    }
  }

  double jump_probability() const {
    if (static_noise) return 0.0;
    return 1.0 - std::pow(1.0 - eta, step_length);
  }
};

/// Noise value held on one segment. `coeffs` carries b_1..b_m for polynomial noise.
struct NoiseSegment {
  std::complex<double> alpha{0.0, 0.0};
  std::complex<double> z{0.0, 0.0};
  std::vector<std::complex<double>> coeffs;
};

struct NoiseTrajectory {
  NoiseKind kind = NoiseKind::displacement;
  double step_length = 1.0;
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  std::vector<NoiseSegment> segments;
  std::vector<int> jump_segments;  ///< indices k (0-based) where a fresh value starts, k ≥ 1

  int size() const { return static_cast<int>(segments.size()); }
  int jumps() const { return static_cast<int>(jump_segments.size()); }
};

namespace detail {

inline NoiseSegment draw_segment(const NoiseConfig& cfg, CounterRng& rng) {
  NoiseSegment s;
  switch (cfg.kind) {
    case NoiseKind::displacement:
      s.alpha = {rng.normal(0.0, cfg.sigma_disp), rng.normal(0.0, cfg.sigma_disp)};
      break;
    case NoiseKind::squeezing:
      s.z = {rng.normal(0.0, cfg.sigma_sqz), 0.0};
      break;
    case NoiseKind::combined:
      s.alpha = {rng.normal(0.0, cfg.sigma_disp), rng.normal(0.0, cfg.sigma_disp)};
      s.z = {rng.normal(0.0, cfg.sigma_sqz), 0.0};
      break;
    case NoiseKind::polynomial:
      s.coeffs.resize(static_cast<std::size_t>(cfg.degree));
      for (auto& b : s.coeffs) b = {rng.normal(0.0, cfg.sigma_disp), rng.normal(0.0, cfg.sigma_disp)};
      if (!s.coeffs.empty()) s.alpha = s.coeffs.front();
      break;
  }
  return s;
}

}  // namespace detail

/// Deterministic in (cfg.seed, stream_id).
inline NoiseTrajectory sample_trajectory(const NoiseConfig& cfg, std::uint64_t stream_id) {
  cfg.validate();
  CounterRng rng(cfg.seed, stream_id);
  NoiseTrajectory t;
  t.kind = cfg.kind;
  t.step_length = cfg.step_length;
  t.seed = cfg.seed;
  t.stream_id = stream_id;
  t.segments.reserve(static_cast<std::size_t>(cfg.segments));
  t.segments.push_back(detail::draw_segment(cfg, rng));
  const double p_jump = cfg.jump_probability();
  for (int k = 1; k < cfg.segments; ++k) {
    const double u = rng.uniform();
    if (u < p_jump) {
      t.segments.push_back(detail::draw_segment(cfg, rng));
      t.jump_segments.push_back(k);
    } else {
      t.segments.push_back(t.segments.back());
    }
  }
  return t;
}

/// Segment-aligned sample covariance (unbiased) of the displacement components
/// and of the real squeeze parameter.
struct CovarianceKernel {
  int segments = 0;
  int samples = 0;
  Eigen::MatrixXd xx;  ///< Cov(Re α_k, Re α_k')
  Eigen::MatrixXd pp;  ///< Cov(Im α_k, Im α_k')
  Eigen::MatrixXd xp;  ///< Cov(Re α_k, Im α_k')
  Eigen::MatrixXd zz;  ///< Cov(Re z_k, Re z_k')
};

inline constexpr int kMinCovarianceSamples = 100;

inline CovarianceKernel empirical_covariance(std::span<const NoiseTrajectory> trajectories) {
  if (static_cast<int>(trajectories.size()) < kMinCovarianceSamples) {
    throw std::invalid_argument("empirical_covariance: need at least " +
                                std::to_string(kMinCovarianceSamples) + " trajectories");
  }
  const int n = trajectories.front().size();
  const int m = static_cast<int>(trajectories.size());
  Eigen::MatrixXd X(m, n), P(m, n), Z(m, n);
  for (int t = 0; t < m; ++t) {
    if (trajectories[t].size() != n) {
      throw std::invalid_argument("empirical_covariance: trajectory length mismatch");
    }
    for (int k = 0; k < n; ++k) {
      const auto& s = trajectories[t].segments[static_cast<std::size_t>(k)];
      X(t, k) = s.alpha.real();
      P(t, k) = s.alpha.imag();
      Z(t, k) = s.z.real();
    }
  }
  auto centered = [](Eigen::MatrixXd a) {
    a.rowwise() -= a.colwise().mean();
    return a;
  };
  const Eigen::MatrixXd Xc = centered(X), Pc = centered(P), Zc = centered(Z);
  const double norm = 1.0 / (m - 1);
  return {n, m, norm * Xc.transpose() * Xc, norm * Pc.transpose() * Pc, norm * Xc.transpose() * Pc,
          norm * Zc.transpose() * Zc};
}

/// CSV: `traj_id,segment,alpha_re,alpha_im,z_re,z_im`, segments numbered from 1.
inline void write_trajectories_csv(std::ostream& os, std::span<const NoiseTrajectory> trajectories) {
  os << "traj_id,segment,alpha_re,alpha_im,z_re,z_im\n" << std::setprecision(17);
  for (const auto& t : trajectories) {
    for (int k = 0; k < t.size(); ++k) {
      const auto& s = t.segments[static_cast<std::size_t>(k)];
      os << t.stream_id << ',' << (k + 1) << ',' << s.alpha.real() << ',' << s.alpha.imag() << ','
         << s.z.real() << ',' << s.z.imag() << '\n';
    }
  }
}

}  // namespace cvdd
