#pragma once

#include "cvdd/fock.hpp"
#include "cvdd/gaussian_ops.hpp"
#include "cvdd/gaussian_state.hpp"
#include "cvdd/noise.hpp"
#include "cvdd/protocol.hpp"
#include "cvdd/rng.hpp"
#include "cvdd/wigner.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <iomanip>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace cvdd {

// ---------------------------------------------------------------------------
// Configuration

struct ProtocolSpec {
  enum class Kind { none, parity, squeezing, combined, cyclic };
  Kind kind = Kind::none;
  int m = 2;  ///< order of the cyclic group

  static ProtocolSpec none() { return {}; }
  static ProtocolSpec parity() { return {Kind::parity, 1}; }
  static ProtocolSpec squeezing() { return {Kind::squeezing, 2}; }
  static ProtocolSpec combined() { return {Kind::combined, 2}; }
  static ProtocolSpec cyclic(int m) { return {Kind::cyclic, m}; }

  /// Accepts none, parity, squeezing, combined, cyclic, cyclicM (e.g. cyclic3).
  static ProtocolSpec parse(const std::string& s) {
    if (s == "none") return none();
    if (s == "parity") return parity();
    if (s == "squeezing") return squeezing();
    if (s == "combined") return combined();
    if (s == "cyclic") return cyclic(2);
    if (s.rfind("cyclic", 0) == 0) {
      const std::string tail = s.substr(6);
      if (!tail.empty() && tail.find_first_not_of("0123456789") == std::string::npos) {
        return cyclic(std::stoi(tail));
      }
    }
    throw std::invalid_argument("unknown protocol '" + s + "'");
  }

  std::string name() const {
    switch (kind) {
      case Kind::none: return "none";
      case Kind::parity: return "parity";
      case Kind::squeezing: return "squeezing";
      case Kind::combined: return "combined";
      case Kind::cyclic: return "cyclic" + std::to_string(m);
    }
    return "?";
  }
};

inline InterventionSchedule make_schedule(const ProtocolSpec& spec, int n) {
  switch (spec.kind) {
    case ProtocolSpec::Kind::none: return schedule_none(n);
    case ProtocolSpec::Kind::parity: return schedule_displacement(n);
    case ProtocolSpec::Kind::squeezing: return schedule_squeezing(n);
    case ProtocolSpec::Kind::combined: return schedule_combined(n);
    case ProtocolSpec::Kind::cyclic: return schedule_cyclic(spec.m, n);
  }
  throw std::invalid_argument("make_schedule: bad protocol");
}

/// Thread count from CVDD_THREADS, else the hardware concurrency.
inline int default_thread_count() {
  if (const char* env = std::getenv("CVDD_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// fock: truncated Fock space, any noise and initial mixture.
/// gaussian: exact quadrature moments; needs a single Gaussian component and
/// displacement, squeezing or combined noise.
enum class Backend { fock, gaussian };

struct SimConfig {
  Backend backend = Backend::fock;
  NoiseConfig noise;
  ProtocolSpec protocol;
  GaussianMixtureSpec initial_state = GaussianMixtureSpec::vacuum();
  int trajectories = 200;
  int fock_dim = FockSpace::kDefaultDim;
  double leak_threshold = FockSpace::kDefaultLeakThreshold;
  PhaseSpaceGrid grid;
  std::uint64_t seed = 1;  ///< drives the noise; replaces noise.seed
  int threads = 0;         ///< 0 → default_thread_count()
  bool compute_wigner = true;
  int wigner_batches = 20;  ///< batch count for the Wigner standard error; 0 disables it

  void validate() const {
    noise.validate();
    if (trajectories < 1) throw std::invalid_argument("sim.trajectories must be >= 1");
    if (fock_dim < 4) throw std::invalid_argument("fock.dim must be >= 4");
    if (!(leak_threshold > 0.0 && leak_threshold < 1.0)) {
      throw std::invalid_argument("fock.leak_threshold must lie in (0,1)");
    }
    if (protocol.kind == ProtocolSpec::Kind::cyclic && protocol.m < 1) {
      throw std::invalid_argument("protocol.m must be >= 1");
    }
    if (wigner_batches < 0) throw std::invalid_argument("sim.wigner_batches must be >= 0");
    initial_state.validate();
    grid.validate();
    if (backend == Backend::gaussian) {
      if (noise.kind == NoiseKind::polynomial) {
        throw std::invalid_argument("sim.backend = gaussian cannot evolve polynomial noise");
      }
      if (initial_state.components.size() != 1) {
        throw std::invalid_argument("sim.backend = gaussian needs a single-component state.mixture");
      }
    }
  }
};

/// Warns when a protocol is not designed for the configured noise kind.
inline void warn_on_mismatch(const SimConfig& cfg) {
  using K = ProtocolSpec::Kind;
  const K p = cfg.protocol.kind;
  bool ok = true;
  switch (cfg.noise.kind) {
    case NoiseKind::displacement: ok = p == K::none || p == K::parity || p == K::combined || p == K::cyclic; break;
    case NoiseKind::squeezing: ok = p == K::none || p == K::squeezing || p == K::combined || (p == K::cyclic && cfg.protocol.m >= 2); break;
    case NoiseKind::combined: ok = p == K::none || p == K::combined || (p == K::cyclic && cfg.protocol.m >= 2); break;
    case NoiseKind::polynomial: ok = p == K::none || (p == K::cyclic && cfg.protocol.m >= cfg.noise.degree) || (p == K::combined && cfg.noise.degree <= 2) || (p == K::parity && cfg.noise.degree == 1); break;
  }
  if (!ok) {
    detail::warn("protocol '" + cfg.protocol.name() + "' is not designed for " +
                 to_string(cfg.noise.kind) + " noise");
  }
}

// ---------------------------------------------------------------------------
// Trajectory evolution

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

/// Noise unitaries for one segment, applied to state columns. Polynomial
/// unitaries are cached across segments that share the same value.
class SegmentPropagator {
 public:
  explicit SegmentPropagator(const GaussianGenerators& gens) : gens_(gens) {}

  void apply(const NoiseSegment& seg, NoiseKind kind, double step, ComplexMatrix& cols) {
    if (kind == NoiseKind::polynomial) {
      if (!cached_ || cached_coeffs_ != seg.coeffs) {
        std::vector<Complex> scaled(seg.coeffs);
        for (auto& b : scaled) b *= step;
        poly_ = polynomial_unitary(gens_.space(), scaled);
        cached_coeffs_ = seg.coeffs;
        cached_ = true;
      }
      cols = poly_ * cols;
      return;
    }
    if (kind != NoiseKind::displacement) gens_.apply_squeeze(step * seg.z, cols);
    if (kind != NoiseKind::squeezing) gens_.apply_displacement(step * seg.alpha, cols);
  }

 private:
  const GaussianGenerators& gens_;
  bool cached_ = false;
  std::vector<Complex> cached_coeffs_;
  ComplexMatrix poly_;
};

inline void apply_phases(const Eigen::VectorXcd& ph, ComplexMatrix& cols) {
  cols = ph.asDiagonal() * cols;
}

/// F(ρ0, C†ρC) for ρ = Ψ W Ψ† and diagonal C, via the small Gram matrix.
inline double mixture_fidelity(const ComplexMatrix& sqrt_rho0, const PureMixture& state,
                               const Eigen::VectorXcd& frame) {
  ComplexMatrix m = frame.conjugate().asDiagonal() * state.columns;
  for (int j = 0; j < state.rank(); ++j) m.col(j) *= std::sqrt(state.weights[static_cast<std::size_t>(j)]);
  m = sqrt_rho0 * m;
  const ComplexMatrix gram = m.adjoint() * m;
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(gram, Eigen::EigenvaluesOnly);
  const double s = detail::psd_eigen_roots(es.eigenvalues()).sum();
  return std::clamp(s * s, 0.0, 1.0);
}

/// Evolves the columns through the schedule. `on_step(k, state, frame)` sees
/// the state after A_k (after the closing correction for k = n) together with
/// the diagonal of the cumulative control.
template <class OnStep>
void evolve_columns(PureMixture& state, const NoiseTrajectory& traj,
                    const InterventionSchedule& schedule, const GaussianGenerators& gens,
                    OnStep&& on_step, double* max_leak = nullptr) {
  const FockSpace& space = gens.space();
  const int n = schedule.segments();
  if (traj.size() != n) {
    throw std::invalid_argument("evolve: trajectory has " + std::to_string(traj.size()) +
                                " segments, schedule has " + std::to_string(n));
  }
  const int d = space.dim();
  SegmentPropagator prop(gens);
  double cumulative = 0.0;
  auto frame_of = [&](double theta) { return Intervention::rotation(theta).phases(d); };

  apply_phases(schedule.ops[0].phases(d), state.columns);
  cumulative += schedule.ops[0].effective_angle();
  on_step(0, state, frame_of(cumulative));
  for (int k = 1; k <= n; ++k) {
    prop.apply(traj.segments[static_cast<std::size_t>(k) - 1], traj.kind, traj.step_length, state.columns);
    const double leak = state.band_population(space);
    if (max_leak) *max_leak = std::max(*max_leak, leak);
    if (leak > space.leak_threshold()) {
      throw TruncationError("segment " + std::to_string(k) + ": " +
                                leak_message("noise step", leak, space, -1),
                            -1);
    }
    apply_phases(schedule.ops[static_cast<std::size_t>(k)].phases(d), state.columns);
    cumulative += schedule.ops[static_cast<std::size_t>(k)].effective_angle();
    if (k == n && schedule.closing) {
      apply_phases(schedule.closing->phases(d), state.columns);
      cumulative += schedule.closing->effective_angle();
    }
    on_step(k, state, frame_of(cumulative));
  }
}

inline PureMixture mixture_from_density(const DensityMatrix& rho) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(rho.mat());
  PureMixture mix;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    if (es.eigenvalues()(i) > 1e-14) keep.push_back(i);
  }
  mix.columns.resize(rho.dim(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) {
    mix.weights.push_back(es.eigenvalues()(keep[j]));
    mix.columns.col(static_cast<Eigen::Index>(j)) = es.eigenvectors().col(keep[j]);
  }
  return mix;
}

}  // namespace detail

/// All n+1 states of one trajectory, each expressed in the frame of the
/// cumulative control so that the noise-free channel leaves ρ0 unchanged.
inline std::vector<DensityMatrix> evolve_trajectory(const DensityMatrix& rho0,
                                                    const NoiseTrajectory& traj,
                                                    const InterventionSchedule& schedule) {
  const GaussianGenerators gens(rho0.space());
  PureMixture state = detail::mixture_from_density(rho0);
  std::vector<DensityMatrix> out;
  detail::evolve_columns(state, traj, schedule, gens,
                         [&](int, const PureMixture& s, const Eigen::VectorXcd& frame) {
                           const ComplexMatrix c = frame.conjugate().asDiagonal() * s.columns;
                           PureMixture corrected{s.weights, c};
                           out.push_back(DensityMatrix::from_trusted(rho0.space(), corrected.to_matrix()));
                         });
  return out;
}

// ---------------------------------------------------------------------------
// Ensembles

struct SimResult {
  int segments = 0;
  Eigen::MatrixXd fidelity_curves;  ///< M × (n+1)
  Eigen::VectorXd mean_curve;
  std::vector<double> ell;  ///< path position of each boundary
  std::optional<DensityMatrix> averaged_state;
  std::optional<PhaseSpaceField> averaged_wigner;
  std::optional<PhaseSpaceField> wigner_stderr;  ///< batch-means standard error per grid point
  double final_mean = 0.0;
  double final_stderr = 0.0;
  double max_leak = 0.0;

  int trajectories() const { return static_cast<int>(fidelity_curves.rows()); }

  /// ∬ stderr dx dp: scale of the Monte-Carlo error of an L1 distance.
  double wigner_l1_stderr() const { return wigner_stderr ? integrate(*wigner_stderr) : 0.0; }
};

struct MeanStderr {
  double mean = 0.0;
  double std_err = 0.0;
};

/// Pairwise summation in index order, independent of any thread layout.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t h = v.size() / 2;
  return pairwise_sum(v.subspan(0, h)) + pairwise_sum(v.subspan(h));
}

inline MeanStderr mean_stderr(std::span<const double> v) {
  if (v.empty()) return {};
  const double n = static_cast<double>(v.size());
  const double mean = pairwise_sum(v) / n;
  if (v.size() < 2) return {mean, 0.0};
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - mean) * (v[i] - mean);
  return {mean, std::sqrt(pairwise_sum(sq) / (n - 1) / n)};
}

namespace detail {

/// Runs work(i) for i in [0, count) on `threads` workers. Rethrows the
/// failure with the lowest index so errors are reproducible.
template <class Work>
void parallel_for(int count, int threads, Work&& work) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        work(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  const int t = std::max(1, std::min(threads, count));
  if (t == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < t; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline ComplexMatrix pairwise_matrix_sum(std::span<const ComplexMatrix> v) {
  if (v.size() == 1) return v[0];
  const std::size_t h = v.size() / 2;
  return pairwise_matrix_sum(v.subspan(0, h)) + pairwise_matrix_sum(v.subspan(h));
}

}  // namespace detail

namespace detail {

inline void summarize_curves(SimResult& res) {
  const int n = res.segments;
  const int m = res.trajectories();
  res.mean_curve.resize(n + 1);
  for (int k = 0; k <= n; ++k) {
    std::vector<double> col(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) col[static_cast<std::size_t>(i)] = res.fidelity_curves(i, k);
    const auto ms = mean_stderr(col);
    res.mean_curve(k) = ms.mean;
    if (k == n) {
      res.final_mean = ms.mean;
      res.final_stderr = ms.std_err;
    }
  }
}

/// Bounds of batch b index ranges of m trajectories.
inline std::pair<int, int> batch_range(int b, int batches, int m) {
  return {static_cast<int>(static_cast<long>(b) * m / batches),
          static_cast<int>(static_cast<long>(b + 1) * m / batches)};
}

/// Standard error per grid point from equally weighted batch means.
inline PhaseSpaceField batch_stderr(const std::vector<PhaseSpaceField>& fields, const PhaseSpaceGrid& grid) {
  const int batches = static_cast<int>(fields.size());
  PhaseSpaceField se = PhaseSpaceField::zeros(grid);
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(grid.nx, grid.np);
  for (const auto& f : fields) mean += f.values;
  mean /= batches;
  for (const auto& f : fields) se.values += (f.values - mean).cwiseAbs2();
  se.values = (se.values / (batches - 1.0) / batches).cwiseSqrt();
  return se;
}

/// Exact ensemble for Gaussian states under Gaussian noise. The noise draws,
/// schedule and frame correction match the Fock path trajectory by trajectory.
inline SimResult run_gaussian_ensemble(const SimConfig& cfg) {
  const GaussianState initial = GaussianState::from_component(cfg.initial_state.components.front());
  NoiseConfig noise = cfg.noise;
  noise.seed = cfg.seed;
  const int n = noise.segments;
  const int m = cfg.trajectories;
  const InterventionSchedule schedule = make_schedule(cfg.protocol, n);

  SimResult res;
  res.segments = n;
  res.fidelity_curves.resize(m, n + 1);
  for (int k = 0; k <= n; ++k) res.ell.push_back(k * noise.step_length);
  std::vector<GaussianState> finals(static_cast<std::size_t>(m));
  const int threads = cfg.threads > 0 ? cfg.threads : default_thread_count();

  detail::parallel_for(m, threads, [&](int i) {
    const NoiseTrajectory traj = sample_trajectory(noise, static_cast<std::uint64_t>(i));
    GaussianState g = initial;
    double cumulative = 0.0;
    auto record = [&](int k) {
      GaussianState framed = g;
      framed.apply(rotation_symplectic(-cumulative));
      res.fidelity_curves(i, k) = gaussian_fidelity(initial, framed);
    };
    auto control = [&](const Intervention& op) {
      g.apply(rotation_symplectic(op.effective_angle()));
      cumulative += op.effective_angle();
    };
    control(schedule.ops[0]);
    record(0);
    for (int k = 1; k <= n; ++k) {
      const NoiseSegment& seg = traj.segments[static_cast<std::size_t>(k) - 1];
      if (traj.kind != NoiseKind::displacement) g.apply(squeeze_symplectic(traj.step_length * seg.z));
      if (traj.kind != NoiseKind::squeezing) g.displace(traj.step_length * seg.alpha);
      control(schedule.ops[static_cast<std::size_t>(k)]);
      if (k == n && schedule.closing) control(*schedule.closing);
      record(k);
    }
    finals[static_cast<std::size_t>(i)] = g;
  });
  summarize_curves(res);

  if (cfg.compute_wigner) {
    const int batches = std::max(1, std::min(cfg.wigner_batches > 0 ? cfg.wigner_batches : 1, m));
    std::vector<PhaseSpaceField> fields(static_cast<std::size_t>(batches));
    detail::parallel_for(batches, threads, [&](int b) {
      const auto [lo, hi] = batch_range(b, batches, m);
      fields[static_cast<std::size_t>(b)] = PhaseSpaceField::sample(cfg.grid, [&](double x, double p) {
        double w = 0.0;
        for (int i = lo; i < hi; ++i) w += finals[static_cast<std::size_t>(i)].wigner(x, p);
        return w / (hi - lo);
      });
    });
    PhaseSpaceField avg = PhaseSpaceField::zeros(cfg.grid);
    for (int b = 0; b < batches; ++b) {
      const auto [lo, hi] = batch_range(b, batches, m);
      avg.values += fields[static_cast<std::size_t>(b)].values * (static_cast<double>(hi - lo) / m);
    }
    res.averaged_wigner = std::move(avg);
    if (cfg.wigner_batches >= 2 && batches >= 2) res.wigner_stderr = batch_stderr(fields, cfg.grid);
  }
  return res;
}

}  // namespace detail

inline SimResult run_ensemble(const SimConfig& cfg) {
  cfg.validate();
  warn_on_mismatch(cfg);
  if (cfg.backend == Backend::gaussian) return detail::run_gaussian_ensemble(cfg);
  const FockSpace space(cfg.fock_dim, cfg.leak_threshold);
  const GaussianGenerators gens(space);
  const PureMixture initial = gaussian_mixture_components(cfg.initial_state, space);
  const DensityMatrix rho0 = DensityMatrix::from_trusted(space, initial.to_matrix());
  const ComplexMatrix sqrt_rho0 = detail::psd_sqrt(rho0.mat());
  NoiseConfig noise = cfg.noise;
  noise.seed = cfg.seed;
  const int n = noise.segments;
  const int m = cfg.trajectories;
  const InterventionSchedule schedule = make_schedule(cfg.protocol, n);

  SimResult res;
  res.segments = n;
  res.fidelity_curves.resize(m, n + 1);
  for (int k = 0; k <= n; ++k) res.ell.push_back(k * noise.step_length);
  std::vector<PureMixture> finals(static_cast<std::size_t>(m));
  std::vector<double> leaks(static_cast<std::size_t>(m), 0.0);

  const int threads = cfg.threads > 0 ? cfg.threads : default_thread_count();
  detail::parallel_for(m, threads, [&](int i) {
    try {
      const NoiseTrajectory traj = sample_trajectory(noise, static_cast<std::uint64_t>(i));
      PureMixture state = initial;
      double leak = 0.0;
      detail::evolve_columns(
          state, traj, schedule, gens,
          [&](int k, const PureMixture& s, const Eigen::VectorXcd& frame) {
            res.fidelity_curves(i, k) = detail::mixture_fidelity(sqrt_rho0, s, frame);
          },
          &leak);
      finals[static_cast<std::size_t>(i)] = std::move(state);
      leaks[static_cast<std::size_t>(i)] = leak;
    } catch (const std::exception& e) {
      throw SimulationError("trajectory " + std::to_string(i) + ": " + e.what());
    }
  });

  res.max_leak = *std::max_element(leaks.begin(), leaks.end());
  detail::summarize_curves(res);

  // Batch sums over contiguous index ranges, each accumulated in index order.
  const int batches = std::max(1, std::min(cfg.wigner_batches > 0 ? cfg.wigner_batches : 1, m));
  std::vector<ComplexMatrix> batch_sum(static_cast<std::size_t>(batches));
  std::vector<int> batch_size(static_cast<std::size_t>(batches));
  detail::parallel_for(batches, threads, [&](int b) {
    const auto [lo, hi] = detail::batch_range(b, batches, m);
    ComplexMatrix acc = ComplexMatrix::Zero(space.dim(), space.dim());
    for (int i = lo; i < hi; ++i) acc += finals[static_cast<std::size_t>(i)].to_matrix();
    batch_sum[static_cast<std::size_t>(b)] = std::move(acc);
    batch_size[static_cast<std::size_t>(b)] = hi - lo;
  });
  res.averaged_state =
      DensityMatrix::from_trusted(space, detail::pairwise_matrix_sum(batch_sum) / static_cast<double>(m));

  if (cfg.compute_wigner) {
    res.averaged_wigner = wigner_of_state(*res.averaged_state, cfg.grid);
    if (cfg.wigner_batches >= 2 && batches >= 2) {
      std::vector<PhaseSpaceField> fields(static_cast<std::size_t>(batches));
      detail::parallel_for(batches, threads, [&](int b) {
        const ComplexMatrix mean_b = batch_sum[static_cast<std::size_t>(b)] /
                                     static_cast<double>(batch_size[static_cast<std::size_t>(b)]);
        fields[static_cast<std::size_t>(b)] =
            PhaseSpaceField::sample(cfg.grid, [&](double x, double p) { return wigner_at(mean_b, x, p); });
      });
      res.wigner_stderr = detail::batch_stderr(fields, cfg.grid);
    }
  }
  return res;
}

/// Runs two protocols on identical noise and returns the statistics of the
/// per-trajectory final-fidelity difference (first minus second).
struct PairedComparison {
  MeanStderr first;
  MeanStderr second;
  MeanStderr difference;
};

inline PairedComparison compare_protocols(SimConfig cfg, const ProtocolSpec& first,
                                          const ProtocolSpec& second) {
  cfg.compute_wigner = false;
  cfg.protocol = first;
  const SimResult a = run_ensemble(cfg);
  cfg.protocol = second;
  const SimResult b = run_ensemble(cfg);
  const int n = a.segments;
  std::vector<double> fa, fb, diff;
  for (int i = 0; i < a.trajectories(); ++i) {
    fa.push_back(a.fidelity_curves(i, n));
    fb.push_back(b.fidelity_curves(i, n));
    diff.push_back(fa.back() - fb.back());
  }
  return {mean_stderr(fa), mean_stderr(fb), mean_stderr(diff)};
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepRow {
  int n = 0;
  double mean = 0.0;
  double std_err = 0.0;
  double max_leak = 0.0;
};

/// Seed used for sweep point n.
inline std::uint64_t sweep_seed(std::uint64_t base, int n) {
  return base ^ splitmix64(static_cast<std::uint64_t>(n));
}

/// For each n the channel is cut into n segments. With channel_length > 0 the
/// total path length is held fixed (step length = channel_length / n);
/// otherwise each segment keeps the configured step length.
inline std::vector<SweepRow> sweep_interventions(const SimConfig& base, std::span<const int> n_values,
                                                 int trajectories_per_point,
                                                 double channel_length = 0.0) {
  if (n_values.empty()) throw std::invalid_argument("sweep: n_values is empty");
  if (trajectories_per_point < 1) throw std::invalid_argument("sweep: trajectories must be >= 1");
  std::vector<SweepRow> rows;
  for (int n : n_values) {
    if (n < 1) throw std::invalid_argument("sweep: n values must be >= 1");
    SimConfig cfg = base;
    cfg.noise.segments = n;
    if (channel_length > 0) cfg.noise.step_length = channel_length / n;
    cfg.trajectories = trajectories_per_point;
    cfg.seed = sweep_seed(base.seed, n);
    cfg.compute_wigner = false;
    const SimResult r = run_ensemble(cfg);
    rows.push_back({n, r.final_mean, r.final_stderr, r.max_leak});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Logistic fit

struct LogisticFit {
  double L = 0.0;
  double k = 0.0;
  double n0 = 0.0;
  double rss = 0.0;
  int iterations = 0;
  bool converged = false;
  bool degenerate = false;
};

/// Least squares L / (1 + exp(−k (n − n0))) by Levenberg-Marquardt.
inline LogisticFit logistic_fit(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("logistic_fit: size mismatch");
  if (xs.size() < 4) throw std::invalid_argument("logistic_fit: need at least 4 points");
  const int n = static_cast<int>(xs.size());
  LogisticFit fit;
  const double ymean = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double yvar = 0.0;
  for (double y : ys) yvar += (y - ymean) * (y - ymean);
  const auto [xmin_it, xmax_it] = std::minmax_element(xs.begin(), xs.end());
  const double xspan = std::max(*xmax_it - *xmin_it, 1e-12);
  if (yvar / n < 1e-14) {
    fit.L = ymean;
    fit.k = 0.0;
    fit.n0 = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    fit.degenerate = true;
    fit.converged = true;
    return fit;
  }

  auto model = [](const Eigen::Vector3d& q, double x) { return q(0) / (1.0 + std::exp(-q(1) * (x - q(2)))); };
  auto residuals = [&](const Eigen::Vector3d& q) {
    Eigen::VectorXd r(n);
    for (int i = 0; i < n; ++i) r(i) = ys[static_cast<std::size_t>(i)] - model(q, xs[static_cast<std::size_t>(i)]);
    return r;
  };
  double cov = 0.0, xmean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  for (int i = 0; i < n; ++i) cov += (xs[static_cast<std::size_t>(i)] - xmean) * (ys[static_cast<std::size_t>(i)] - ymean);
  Eigen::Vector3d q(*std::max_element(ys.begin(), ys.end()), (cov >= 0 ? 1.0 : -1.0) * 4.0 / xspan, xmean);

  double lambda = 1e-3;
  Eigen::VectorXd r = residuals(q);
  double rss = r.squaredNorm();
  for (int it = 0; it < 500; ++it) {
    fit.iterations = it + 1;
    Eigen::MatrixXd J(n, 3);
    for (int i = 0; i < n; ++i) {
      const double x = xs[static_cast<std::size_t>(i)];
      const double e = std::exp(-q(1) * (x - q(2)));
      const double den = 1.0 + e;
      J(i, 0) = 1.0 / den;
      J(i, 1) = q(0) * (x - q(2)) * e / (den * den);
      J(i, 2) = -q(0) * q(1) * e / (den * den);
    }
    const Eigen::Matrix3d jtj = J.transpose() * J;
    const Eigen::Vector3d g = J.transpose() * r;
    bool improved = false;
    for (int inner = 0; inner < 30; ++inner) {
      Eigen::Matrix3d a = jtj;
      a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
      const Eigen::Vector3d step = a.ldlt().solve(g);
      const Eigen::Vector3d trial = q + step;
      const Eigen::VectorXd rt = residuals(trial);
      const double rss_t = rt.squaredNorm();
      if (std::isfinite(rss_t) && rss_t < rss) {
        const double rel = (rss - rss_t) / std::max(rss, 1e-300);
        q = trial;
        r = rt;
        rss = rss_t;
        lambda = std::max(lambda / 10, 1e-12);
        improved = true;
        if (rel < 1e-15 || step.norm() < 1e-12 * (1 + q.norm()) || rss < 1e-28) fit.converged = true;
        break;
      }
      lambda *= 10;
    }
    if (!improved) {
      fit.converged = g.norm() < 1e-10 || rss < 1e-20;
      break;
    }
    if (fit.converged) break;
  }
  fit.L = q(0);
  fit.k = q(1);
  fit.n0 = q(2);
  fit.rss = rss;
  fit.degenerate = std::abs(fit.k) * xspan < 1e-6;
  return fit;
}

// ---------------------------------------------------------------------------
// CSV

inline void write_fidelity_csv(std::ostream& os, const SimResult& r) {
  os << "traj_id,segment,ell,fidelity\n" << std::setprecision(17);
  for (int i = 0; i < r.trajectories(); ++i) {
    for (int k = 0; k <= r.segments; ++k) {
      os << i << ',' << k << ',' << r.ell[static_cast<std::size_t>(k)] << ',' << r.fidelity_curves(i, k) << '\n';
    }
  }
}

inline void write_summary_csv(std::ostream& os, std::span<const SweepRow> rows) {
  os << "n_interventions,mean_final_fidelity,stderr\n" << std::setprecision(17);
  for (const auto& row : rows) os << row.n << ',' << row.mean << ',' << row.std_err << '\n';
}

}  // namespace cvdd
