// Command-line front end: simulate, sweep, filter, wigner and check-group.

#include "cvdd/config.hpp"
#include "cvdd/engine.hpp"
#include "cvdd/filter.hpp"
#include "cvdd/protocol.hpp"
#include "cvdd/wigner.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitSimulation = 3;
constexpr int kExitIo = 4;

struct CommonOptions {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> protocol;
};

/// Written as soon as a run starts and rewritten when it ends, so an
/// interrupted run leaves a manifest with status "running".
class Manifest {
 public:
  Manifest(fs::path dir, std::string command) : path_(dir / "manifest.json") {
    doc_["command"] = std::move(command);
    doc_["tool_version"] = CVDD_VERSION;
    doc_["status"] = "running";
    doc_["outputs"] = json::array();
    start_ = std::chrono::steady_clock::now();
  }

  json& doc() { return doc_; }

  void add_output(const fs::path& p) { doc_["outputs"].push_back(p.filename().string()); }

  void write() const {
    std::ofstream os(path_);
    if (!os) throw std::ios_base::failure("cannot write " + path_.string());
    os << doc_.dump(2) << '\n';
  }

  void finish(const std::string& status, const std::string& message = {}) {
    doc_["status"] = status;
    if (!message.empty()) doc_["message"] = message;
    doc_["wall_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write();
  }

 private:
  fs::path path_;
  json doc_;
  std::chrono::steady_clock::time_point start_;
};

fs::path prepare_out_dir(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw std::ios_base::failure("cannot create output directory '" + out + "': " + ec.message());
  return fs::path(out);
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw std::ios_base::failure("cannot write " + p.string());
  return os;
}

void write_field(const fs::path& p, const cvdd::PhaseSpaceField& f, Manifest& m) {
  auto os = open_out(p);
  cvdd::write_field_csv(os, f);
  m.add_output(p);
}

cvdd::AppConfig load_with_overrides(const CommonOptions& opt) {
  cvdd::AppConfig app = cvdd::load_config(opt.config);
  if (opt.seed) app.sim.seed = *opt.seed;
  if (opt.threads) app.sim.threads = *opt.threads;
  if (opt.protocol) {
    try {
      app.sim.protocol = cvdd::ProtocolSpec::parse(*opt.protocol);
    } catch (const std::invalid_argument& e) {
      throw cvdd::ConfigError(std::string("--protocol: ") + e.what());
    }
  }
  return app;
}

json config_snapshot(const cvdd::AppConfig& app, const CommonOptions& opt) {
  json j;
  j["config_path"] = opt.config;
  j["entries"] = app.entries;
  j["seed"] = app.sim.seed;
  j["threads"] = app.sim.threads > 0 ? app.sim.threads : cvdd::default_thread_count();
  j["protocol"] = app.sim.protocol.name();
  return j;
}

/// Runs `body` with the standard error-to-exit-code mapping and manifest handling.
template <class Body>
int run_command(const std::string& name, const CommonOptions& opt, Body&& body) {
  std::optional<Manifest> manifest;
  auto fail = [&](int code, const std::string& msg) {
    std::cerr << "cvdd " << name << ": " << msg << '\n';
    if (manifest) {
      try {
        manifest->finish("failed", msg);
      } catch (...) {
      }
    }
    return code;
  };
  try {
    cvdd::AppConfig app;
    try {
      app = load_with_overrides(opt);
    } catch (const cvdd::ConfigError& e) {
      return fail(kExitConfig, e.what());
    }
    const fs::path dir = prepare_out_dir(opt.out);
    manifest.emplace(dir, name);
    manifest->doc()["config"] = config_snapshot(app, opt);
    manifest->write();
    const int code = body(app, dir, *manifest);
    manifest->finish(code == kExitOk ? "ok" : "failed");
    return code;
  } catch (const cvdd::ConfigError& e) {
    return fail(kExitConfig, e.what());
  } catch (const std::ios_base::failure& e) {
    return fail(kExitIo, e.what());
  } catch (const std::exception& e) {
    return fail(kExitSimulation, e.what());
  }
}

// ---------------------------------------------------------------------------

int cmd_simulate(const cvdd::AppConfig& app, const fs::path& dir, Manifest& m) {
  const cvdd::SimResult r = cvdd::run_ensemble(app.sim);
  {
    const auto p = dir / "fidelity.csv";
    auto os = open_out(p);
    cvdd::write_fidelity_csv(os, r);
    m.add_output(p);
  }
  {
    const auto p = dir / "summary.csv";
    auto os = open_out(p);
    const cvdd::SweepRow row{r.segments, r.final_mean, r.final_stderr, r.max_leak};
    cvdd::write_summary_csv(os, std::span(&row, 1));
    m.add_output(p);
  }
  {
    const auto p = dir / "schedule.csv";
    auto os = open_out(p);
    cvdd::write_schedule_csv(os, cvdd::make_schedule(app.sim.protocol, app.sim.noise.segments));
    m.add_output(p);
  }
  const cvdd::FockSpace space(app.sim.fock_dim, app.sim.leak_threshold);
  write_field(dir / "wigner_initial.csv",
              cvdd::wigner_of_state(cvdd::gaussian_mixture_state(app.sim.initial_state, space), app.sim.grid), m);
  if (r.averaged_wigner) write_field(dir / "wigner_final.csv", *r.averaged_wigner, m);
  m.doc()["result"] = {{"mean_final_fidelity", r.final_mean},
                       {"stderr", r.final_stderr},
                       {"max_leak", r.max_leak},
                       {"backend", app.sim.backend == cvdd::Backend::gaussian ? "gaussian" : "fock"}};
  std::cout << "mean final fidelity " << r.final_mean << " +- " << r.final_stderr << '\n';
  return kExitOk;
}

int cmd_sweep(const cvdd::AppConfig& app, const fs::path& dir, Manifest& m) {
  if (app.sweep.n_values.empty()) throw cvdd::ConfigError("key 'sweep.n_values' is required for sweep");
  const auto rows = cvdd::sweep_interventions(app.sim, app.sweep.n_values, app.sweep.trajectories,
                                              app.sweep.channel_length);
  {
    const auto p = dir / "summary.csv";
    auto os = open_out(p);
    cvdd::write_summary_csv(os, rows);
    m.add_output(p);
  }
  for (const auto& row : rows) std::cout << row.n << ' ' << row.mean << " +- " << row.std_err << '\n';
  if (app.sweep.fit && rows.size() >= 4) {
    std::vector<double> xs, ys;
    for (const auto& row : rows) {
      xs.push_back(row.n);
      ys.push_back(row.mean);
    }
    const auto fit = cvdd::logistic_fit(xs, ys);
    const auto p = dir / "fit.csv";
    auto os = open_out(p);
    os << "L,k,n0,rss,converged,degenerate\n" << std::setprecision(17) << fit.L << ',' << fit.k << ','
       << fit.n0 << ',' << fit.rss << ',' << fit.converged << ',' << fit.degenerate << '\n';
    m.add_output(p);
    if (!fit.converged) std::cerr << "cvdd sweep: logistic fit did not converge\n";
  }
  return kExitOk;
}

int cmd_filter(const cvdd::AppConfig& app, const fs::path& dir, Manifest& m) {
  const auto& sim = app.sim;
  const int n = sim.noise.segments;
  const double dl = sim.noise.step_length;
  const double s = sim.noise.sigma_disp;
  const auto sw = cvdd::SwitchingFunction::uniform(n, n * dl);

  cvdd::FilterField filter = cvdd::IdentityFilter{};
  std::optional<cvdd::CovarianceSpec> sigma;
  using K = cvdd::FilterSettings::Kernel;
  switch (app.filter.kernel) {
    case K::static_cpp:
      filter = cvdd::cpp_static_filter(n, dl, s, sim.grid);
      if (!cvdd::is_identity(filter)) sigma = cvdd::CovarianceSpec::make(dl * dl * s * s, dl * dl * s * s, 0);
      else sigma = cvdd::CovarianceSpec::make(0, 0, 0);
      break;
    case K::iid:
      sigma = cvdd::sigma_matrix(sw, cvdd::cpp_segment_kernel(s, 1.0, dl));
      break;
    case K::cpp:
      sigma = cvdd::sigma_matrix(sw, cvdd::cpp_segment_kernel(s, sim.noise.jump_probability(), dl));
      break;
    case K::empirical: {
      cvdd::NoiseConfig noise = sim.noise;
      noise.seed = sim.seed;
      std::vector<cvdd::NoiseTrajectory> trajs;
      for (int i = 0; i < app.filter.samples; ++i) trajs.push_back(cvdd::sample_trajectory(noise, i));
      sigma = cvdd::sigma_matrix(sw, cvdd::empirical_covariance(trajs));
      break;
    }
  }
  if (app.filter.kernel != K::static_cpp) filter = cvdd::gaussian_filter(cvdd::to_phase_space(*sigma), sim.grid);

  {
    const auto p = dir / "sigma.csv";
    auto os = open_out(p);
    os << "n,var_x,var_p,cov_xp,det,positive_definite,filter\n" << std::setprecision(17) << n << ','
       << sigma->A << ',' << sigma->B << ',' << sigma->C << ',' << sigma->det() << ','
       << sigma->positive_definite << ',' << (cvdd::is_identity(filter) ? "identity" : "gaussian") << '\n';
    m.add_output(p);
  }
  if (!cvdd::is_identity(filter)) write_field(dir / "filter.csv", std::get<cvdd::PhaseSpaceField>(filter), m);

  const cvdd::FockSpace space(sim.fock_dim, sim.leak_threshold);
  const auto w0 = cvdd::wigner_of_state(cvdd::gaussian_mixture_state(sim.initial_state, space), sim.grid);
  const auto prediction = cvdd::convolve(filter, w0);
  write_field(dir / "prediction.csv", prediction, m);

  if (app.filter.mc_reference) {
    const cvdd::SimResult r = cvdd::run_ensemble(sim);
    write_field(dir / "mc_wigner.csv", *r.averaged_wigner, m);
    const double l1 = cvdd::l1_distance(prediction, *r.averaged_wigner);
    const double se = r.wigner_l1_stderr();
    const double threshold = std::max(3 * se, 5e-3);
    const auto p = dir / "report.csv";
    auto os = open_out(p);
    os << "l1_distance,mc_l1_stderr,threshold,pass\n" << std::setprecision(17) << l1 << ',' << se << ','
       << threshold << ',' << (l1 <= threshold) << '\n';
    m.add_output(p);
    std::cout << "L1(prediction, MC) = " << l1 << " (threshold " << threshold << ")\n";
  }
  return kExitOk;
}

int cmd_wigner(const cvdd::AppConfig& app, const fs::path& dir, Manifest& m) {
  const cvdd::FockSpace space(app.sim.fock_dim, app.sim.leak_threshold);
  write_field(dir / "wigner.csv",
              cvdd::wigner_of_state(cvdd::gaussian_mixture_state(app.sim.initial_state, space), app.sim.grid), m);
  write_field(dir / "wigner_closed_form.csv", cvdd::wigner_of_mixture(app.sim.initial_state, app.sim.grid), m);
  return kExitOk;
}

int cmd_check_group(const std::string& label, int m, int fock_dim, int extra_power) {
  std::optional<cvdd::ControlGroup> group;
  if (label == "parity_group") group = cvdd::ControlGroup::parity_group();
  else if (label == "squeeze_set") group = cvdd::ControlGroup::squeeze_set();
  else if (label == "gaussian_group") group = cvdd::ControlGroup::gaussian_group();
  else if (label == "cyclic") {
    if (m < 1) {
      std::cerr << "cvdd check-group: --m must be >= 1\n";
      return kExitConfig;
    }
    group = cvdd::ControlGroup::cyclic(m);
  } else {
    std::cerr << "cvdd check-group: unknown group '" << label << "'\n";
    return kExitConfig;
  }
  if (fock_dim < 4) {
    std::cerr << "cvdd check-group: --fock-dim must be >= 4\n";
    return kExitConfig;
  }
  const cvdd::FockSpace space(fock_dim);
  auto gens = cvdd::designed_generators(*group, space);
  if (extra_power > 0) {
    const auto ap = cvdd::matrix_power(cvdd::annihilation(space), extra_power);
    gens.emplace_back("a^" + std::to_string(extra_power), ap);
    gens.emplace_back("adag^" + std::to_string(extra_power), ap.adjoint());
  }
  bool ok = true;
  std::cout << "group " << group->name() << " (dim " << fock_dim << ")\n";
  for (const auto& [name, x] : gens) {
    const double r = cvdd::group_average_residual(*group, x);
    ok = ok && r <= 1e-12;
    std::printf("%-8s residual %.3e\n", name.c_str(), r);
  }
  return ok ? kExitOk : kExitCheckFailed;
}

void add_common(CLI::App* sub, CommonOptions& opt, bool with_protocol) {
  sub->add_option("--config", opt.config, "configuration file")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", opt.out, "output directory");
  sub->add_option("--seed", opt.seed, "seed override");
  sub->add_option("--threads", opt.threads, "worker threads (default: CVDD_THREADS or all cores)");
  if (with_protocol) sub->add_option("--protocol", opt.protocol, "protocol override: none, parity, squeezing, combined, cyclicM");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noise decoupling for continuous-variable state transfer"};
  app.require_subcommand(1);
  app.set_version_flag("--version", CVDD_VERSION);

  CommonOptions opt;
  auto* simulate = app.add_subcommand("simulate", "run a Monte-Carlo ensemble");
  add_common(simulate, opt, true);
  auto* sweep = app.add_subcommand("sweep", "sweep the number of interventions");
  add_common(sweep, opt, true);
  auto* filter = app.add_subcommand("filter", "filter-function prediction of the averaged Wigner function");
  add_common(filter, opt, true);
  auto* wigner = app.add_subcommand("wigner", "Wigner function of the configured initial state");
  add_common(wigner, opt, false);

  std::string group_label;
  int group_m = 1;
  int fock_dim = 40;
  int extra_power = 0;
  auto* check = app.add_subcommand("check-group", "group-average residuals of the designed generators");
  check->add_option("--group", group_label, "parity_group, squeeze_set, gaussian_group or cyclic")->required();
  check->add_option("--m", group_m, "order parameter for cyclic");
  check->add_option("--fock-dim", fock_dim, "Fock truncation");
  check->add_option("--extra-power", extra_power, "also check a^P and its adjoint");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (*simulate) return run_command("simulate", opt, cmd_simulate);
  if (*sweep) return run_command("sweep", opt, cmd_sweep);
  if (*filter) return run_command("filter", opt, cmd_filter);
  if (*wigner) return run_command("wigner", opt, cmd_wigner);
  if (*check) return cmd_check_group(group_label, group_m, fock_dim, extra_power);
  return kExitConfig;
}
