#pragma once

#include "cvdd/engine.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cvdd {

/// Bad configuration; the message names the offending key.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SweepSettings {
  std::vector<int> n_values;
  int trajectories = 100;
  double channel_length = 0.0;  ///< 0 keeps noise.step_length for every n
  bool fit = false;
};

struct FilterSettings {
  enum class Kernel { iid, cpp, empirical, static_cpp };
  Kernel kernel = Kernel::iid;
  int samples = 2000;  ///< trajectories drawn for the empirical kernel
  bool mc_reference = false;
};

struct AppConfig {
  SimConfig sim;
  SweepSettings sweep;
  FilterSettings filter;
  std::map<std::string, std::string> entries;  ///< key/value snapshot as read
};

inline const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = {
      "noise.kind", "noise.degree", "noise.eta", "noise.sigma_disp", "noise.sigma_sqz",
      "noise.segments", "noise.step_length", "noise.static",
      "protocol.kind", "protocol.m",
      "state.mixture",
      "sim.backend", "sim.trajectories", "sim.seed", "sim.threads", "sim.wigner", "sim.wigner_batches",
      "fock.dim", "fock.leak_threshold",
      "grid.x_min", "grid.x_max", "grid.p_min", "grid.p_max", "grid.nx", "grid.np",
      "sweep.n_values", "sweep.trajectories", "sweep.channel_length", "sweep.fit",
      "filter.kernel", "filter.samples", "filter.mc_reference"};
  return keys;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ConfigError("key '" + key + "': cannot parse '" + text + "' as a number");
  }
  return value;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("key '" + key + "': expected true or false, got '" + text + "'");
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// "w re im spread; w re im spread; ..."
inline GaussianMixtureSpec parse_mixture(const std::string& key, const std::string& text) {
  if (text == "vacuum") return GaussianMixtureSpec::vacuum();
  GaussianMixtureSpec spec;
  for (const auto& comp : split(text, ';')) {
    std::istringstream is(comp);
    std::vector<std::string> f;
    for (std::string tok; is >> tok;) f.push_back(tok);
    if (f.size() != 4) {
      throw ConfigError("key '" + key + "': each component needs 'weight re im spread'");
    }
    spec.components.push_back({parse_number<double>(key, f[0]),
                               {parse_number<double>(key, f[1]), parse_number<double>(key, f[2])},
                               parse_number<double>(key, f[3])});
  }
  return spec;
}

inline NoiseKind parse_noise_kind(const std::string& key, const std::string& text) {
  if (text == "displacement") return NoiseKind::displacement;
  if (text == "squeezing") return NoiseKind::squeezing;
  if (text == "combined") return NoiseKind::combined;
  if (text == "polynomial") return NoiseKind::polynomial;
  throw ConfigError("key '" + key + "': unknown noise kind '" + text + "'");
}

}  // namespace detail

/// Flat `key = value` lines with `#` comments. Unknown keys are errors; the
/// final configuration is validated and errors name the key.
inline AppConfig parse_config(std::istream& in) {
  AppConfig app;
  const std::set<std::string> known(known_config_keys().begin(), known_config_keys().end());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (!known.count(key)) throw ConfigError("unknown key '" + key + "'");
    if (app.entries.count(key)) throw ConfigError("key '" + key + "' given twice");
    app.entries[key] = value;
  }

  SimConfig& sim = app.sim;
  auto num = [&]<class T>(const std::string& key, T& target) {
    if (auto it = app.entries.find(key); it != app.entries.end()) {
      target = detail::parse_number<T>(key, it->second);
    }
  };
  auto flag = [&](const std::string& key, bool& target) {
    if (auto it = app.entries.find(key); it != app.entries.end()) {
      target = detail::parse_bool(key, it->second);
    }
  };
  auto text = [&](const std::string& key) -> const std::string* {
    auto it = app.entries.find(key);
    return it == app.entries.end() ? nullptr : &it->second;
  };

  if (auto* s = text("noise.kind")) sim.noise.kind = detail::parse_noise_kind("noise.kind", *s);
  num("noise.degree", sim.noise.degree);
  num("noise.eta", sim.noise.eta);
  num("noise.sigma_disp", sim.noise.sigma_disp);
  num("noise.sigma_sqz", sim.noise.sigma_sqz);
  num("noise.segments", sim.noise.segments);
  num("noise.step_length", sim.noise.step_length);
  flag("noise.static", sim.noise.static_noise);
  if (auto* s = text("protocol.kind")) {
    try {
      sim.protocol = ProtocolSpec::parse(*s);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("key 'protocol.kind': ") + e.what());
    }
  }
  num("protocol.m", sim.protocol.m);
  if (auto* s = text("state.mixture")) sim.initial_state = detail::parse_mixture("state.mixture", *s);
  if (auto* s = text("sim.backend")) {
    if (*s == "fock") {
      sim.backend = Backend::fock;
    } else if (*s == "gaussian") {
      sim.backend = Backend::gaussian;
    } else {
      throw ConfigError("key 'sim.backend': expected fock or gaussian, got '" + *s + "'");
    }
  }
  num("sim.trajectories", sim.trajectories);
  num("sim.seed", sim.seed);
  num("sim.threads", sim.threads);
  flag("sim.wigner", sim.compute_wigner);
  num("sim.wigner_batches", sim.wigner_batches);
  num("fock.dim", sim.fock_dim);
  num("fock.leak_threshold", sim.leak_threshold);
  num("grid.x_min", sim.grid.x_min);
  num("grid.x_max", sim.grid.x_max);
  num("grid.p_min", sim.grid.p_min);
  num("grid.p_max", sim.grid.p_max);
  num("grid.nx", sim.grid.nx);
  num("grid.np", sim.grid.np);
  if (auto* s = text("sweep.n_values")) {
    for (const auto& tok : detail::split(*s, ',')) {
      app.sweep.n_values.push_back(detail::parse_number<int>("sweep.n_values", tok));
    }
    if (app.sweep.n_values.empty()) throw ConfigError("key 'sweep.n_values': list is empty");
  }
  num("sweep.trajectories", app.sweep.trajectories);
  num("sweep.channel_length", app.sweep.channel_length);
  flag("sweep.fit", app.sweep.fit);
  if (auto* s = text("filter.kernel")) {
    if (*s == "iid") app.filter.kernel = FilterSettings::Kernel::iid;
    else if (*s == "cpp") app.filter.kernel = FilterSettings::Kernel::cpp;
    else if (*s == "empirical") app.filter.kernel = FilterSettings::Kernel::empirical;
    else if (*s == "static") app.filter.kernel = FilterSettings::Kernel::static_cpp;
    else throw ConfigError("key 'filter.kernel': unknown kernel '" + *s + "'");
  }
  num("filter.samples", app.filter.samples);
  flag("filter.mc_reference", app.filter.mc_reference);

  try {
    sim.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  for (int n : app.sweep.n_values) {
    if (n < 1) throw ConfigError("key 'sweep.n_values': values must be >= 1");
  }
  if (app.sweep.trajectories < 1) throw ConfigError("key 'sweep.trajectories' must be >= 1");
  if (app.sweep.channel_length < 0) throw ConfigError("key 'sweep.channel_length' must be >= 0");
  if (app.filter.samples < kMinCovarianceSamples) {
    throw ConfigError("key 'filter.samples' must be >= " + std::to_string(kMinCovarianceSamples));
  }
  return app;
}

inline AppConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open config '" + path + "'");
  return parse_config(in);
}

}  // namespace cvdd
