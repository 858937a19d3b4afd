#pragma once

// Run configuration: a flat key = value text format, the figure presets and
// conversion to the library's scenario types. Physical inputs use laboratory
// units (MHz, MHz um^6, kHz, um, us); conversion to rad/us happens here.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

#include <json.hpp>

#include "rydjc/analysis.hpp"
#include "rydjc/ensemble.hpp"
#include "rydjc/errors.hpp"
#include "rydjc/open_system.hpp"
#include "rydjc/superatom.hpp"
#include "rydjc/units.hpp"

namespace rydjc::io {

struct RunConfig {
  std::string preset;                // empty for a free-standing configuration
  std::string scenario = "ensemble";  // ensemble | master | two_ensemble
  double omega_mhz = 1.0;
  double c6_mhz_um6 = 3.2e6;
  double nbar = 7.0;
  int nmax = 20;
  std::string atom_dist = "auto";  // auto | poisson | binomial | fixed
  int fixed_atoms = 1;
  std::string trap_kind = "gaussian";  // gaussian | lattice
  double trap_sigma_um = 2.0;
  int lattice_rows = 3;
  int lattice_cols = 3;
  double lattice_spacing_um = 3.0;
  double load_prob = 0.5;
  double t_max_us = 10.0;
  int n_time_points = 401;
  int max_excitations = 0;  // 0 picks the geometry default
  double energy_cutoff_factor = HamiltonianOptions{}.energy_cutoff_factor;
  int truncation_check_configs = -1;
  double gamma2_khz = 0.0;
  double gamma_khz = 0.0;
  double detection_t = 1.0;
  double pair_distance_um = 20.0;
  std::string pair_coupling = "point";  // point | sampled (clouds of width trap_sigma_um)
  std::vector<double> sweep_values;     // trap_sigma_um or pair_distance_um per grid row
  std::string window = "hann";
  int samples = 2000;
  std::uint64_t seed = 1;
  int workers = 0;
  int min_samples_per_n = 50;
};

namespace detail {

using Field = std::variant<std::string RunConfig::*, double RunConfig::*, int RunConfig::*, std::uint64_t RunConfig::*,
                           std::vector<double> RunConfig::*>;

struct Key {
  std::string_view name;
  Field field;
};

inline const std::vector<Key>& keys() {
  static const std::vector<Key> table{
      {"preset", &RunConfig::preset},
      {"scenario", &RunConfig::scenario},
      {"omega_mhz", &RunConfig::omega_mhz},
      {"c6_mhz_um6", &RunConfig::c6_mhz_um6},
      {"nbar", &RunConfig::nbar},
      {"nmax", &RunConfig::nmax},
      {"atom_dist", &RunConfig::atom_dist},
      {"fixed_atoms", &RunConfig::fixed_atoms},
      {"trap_kind", &RunConfig::trap_kind},
      {"trap_sigma_um", &RunConfig::trap_sigma_um},
      {"lattice_rows", &RunConfig::lattice_rows},
      {"lattice_cols", &RunConfig::lattice_cols},
      {"lattice_spacing_um", &RunConfig::lattice_spacing_um},
      {"load_prob", &RunConfig::load_prob},
      {"t_max_us", &RunConfig::t_max_us},
      {"n_time_points", &RunConfig::n_time_points},
      {"max_excitations", &RunConfig::max_excitations},
      {"energy_cutoff_factor", &RunConfig::energy_cutoff_factor},
      {"truncation_check_configs", &RunConfig::truncation_check_configs},
      {"gamma2_khz", &RunConfig::gamma2_khz},
      {"gamma_khz", &RunConfig::gamma_khz},
      {"detection_t", &RunConfig::detection_t},
      {"pair_distance_um", &RunConfig::pair_distance_um},
      {"pair_coupling", &RunConfig::pair_coupling},
      {"sweep_values", &RunConfig::sweep_values},
      {"window", &RunConfig::window},
      {"samples", &RunConfig::samples},
      {"seed", &RunConfig::seed},
      {"workers", &RunConfig::workers},
      {"min_samples_per_n", &RunConfig::min_samples_per_n},
  };
  return table;
}

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <class T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end || text.empty())
    throw ConfigError(std::string(key), "cannot parse '" + std::string(text) + "' as a number");
  if constexpr (std::is_floating_point_v<T>)
    if (!std::isfinite(value)) throw ConfigError(std::string(key), "value must be finite");
  return value;
}

inline std::vector<double> parse_list(std::string_view key, std::string_view text) {
  std::vector<double> out;
  if (trim(text).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    out.push_back(parse_number<double>(key, trim(text.substr(start, comma - start))));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline const Key& find_key(std::string_view name) {
  for (const Key& k : keys())
    if (k.name == name) return k;
  throw ConfigError(std::string(name), "unknown key");
}

}  // namespace detail

inline void set_value(RunConfig& cfg, std::string_view key, std::string_view text) {
  const auto& k = detail::find_key(key);
  std::visit(
      [&](auto member) {
        using T = std::remove_reference_t<decltype(cfg.*member)>;
        if constexpr (std::is_same_v<T, std::string>)
          cfg.*member = std::string(text);
        else if constexpr (std::is_same_v<T, std::vector<double>>)
          cfg.*member = detail::parse_list(key, text);
        else
          cfg.*member = detail::parse_number<T>(key, text);
      },
      k.field);
}

/// Every key with its current value, in table order.
inline nlohmann::ordered_json to_json(const RunConfig& cfg) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& k : detail::keys())
    std::visit([&](auto member) { j[std::string(k.name)] = cfg.*member; }, k.field);
  return j;
}

inline std::vector<std::string> key_names() {
  std::vector<std::string> names;
  for (const auto& k : detail::keys()) names.emplace_back(k.name);
  return names;
}

// ---------------------------------------------------------------- presets

struct Variant {
  std::string suffix;  // appended to the output stem
  std::function<void(RunConfig&)> adjust;
};

struct Preset {
  std::string name;
  std::string description;
  std::function<void(RunConfig&)> apply;
  std::vector<Variant> variants;
};

inline const std::vector<Preset>& presets() {
  auto cloud = [](double sigma, int m, int floor) {
    return [=](RunConfig& c) {
      c.scenario = "ensemble";
      c.trap_kind = "gaussian";
      c.trap_sigma_um = sigma;
      c.nbar = 7.0;
      c.nmax = 20;
      c.max_excitations = m;
      c.min_samples_per_n = floor;
    };
  };
  auto detected = [cloud](double t) {
    return [=](RunConfig& c) {
      cloud(2.0, 2, 50)(c);
      c.detection_t = t;
    };
  };
  auto master = [](double gamma_khz) {
    return [=](RunConfig& c) {
      c.scenario = "master";
      c.nbar = 7.0;
      c.nmax = 20;
      c.gamma2_khz = 0.8;
      c.gamma_khz = gamma_khz;
    };
  };
  auto lattice = [](int rows, int cols, double spacing) {
    return [=](RunConfig& c) {
      c.scenario = "ensemble";
      c.trap_kind = "lattice";
      c.lattice_rows = rows;
      c.lattice_cols = cols;
      c.lattice_spacing_um = spacing;
      c.load_prob = 0.5;
      c.max_excitations = rows * cols;
    };
  };
  auto pair = [](double d) {
    return [=](RunConfig& c) {
      c.scenario = "two_ensemble";
      c.nbar = 10.0;
      c.nmax = 30;
      c.pair_distance_um = d;
      c.samples = 500;
    };
  };
  static const std::vector<Preset> table{
      {"fig2a", "Gaussian trap r = 2 um, mean 7 atoms, m = 2", cloud(2.0, 2, 50), {}},
      {"fig2b", "Gaussian trap r = 3 um, mean 7 atoms, m = 3", cloud(3.0, 3, 50), {}},
      {"fig2c", "Gaussian trap r = 4 um, mean 7 atoms, m = 4", cloud(4.0, 4, 1), {}},
      {"fig2d", "Gaussian trap r = 5 um, mean 7 atoms, m = 4", cloud(5.0, 4, 1), {}},
      {"fig2e", "P_Ry over trap radius 1 to 5 um and time",
       [cloud](RunConfig& c) {
         cloud(2.0, 0, 1)(c);
         c.samples = 500;
         c.sweep_values = {1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0};
       },
       {}},
      {"fig3a", "fig2a seen by a detector with efficiency 0.1", detected(0.1), {}},
      {"fig3b", "fig2a seen by a detector with efficiency 0.5", detected(0.5), {}},
      {"fig3c", "blockaded ensemble with Rydberg lifetime 0.8 kHz", master(0.0), {}},
      {"fig3d", "lifetime 0.8 kHz with laser line width 10 kHz (variant: 100 kHz)", master(10.0),
       {{"gamma100", [](RunConfig& c) { c.gamma_khz = 100.0; }}}},
      {"fig4a", "3 x 3 lattice, spacing 3 um, loading 0.5 (variant: 5 um)", lattice(3, 3, 3.0),
       {{"d5", [](RunConfig& c) { c.lattice_spacing_um = 5.0; }}}},
      {"fig4b", "2 x 2 lattice, spacing 4 um, loading 0.5", lattice(2, 2, 4.0), {}},
      {"fig5a", "two ensembles of mean 10 atoms, 20 um apart", pair(20.0), {}},
      {"fig5b", "two ensembles of mean 10 atoms, 4 um apart", pair(4.0), {}},
      {"fig5c", "N_Ry over ensemble distance 2 to 20 um and time",
       [pair](RunConfig& c) {
         pair(20.0)(c);
         c.sweep_values.clear();
         for (int i = 0; i <= 36; ++i) c.sweep_values.push_back(2.0 + 0.5 * i);
       },
       {}},
      {"fig5d", "spectra of N_Ry at 4 um (variant: 20 um)", pair(4.0),
       {{"d20", [](RunConfig& c) { c.pair_distance_um = 20.0; }}}},
  };
  return table;
}

inline std::string preset_names() {
  std::string s;
  for (const auto& p : presets()) s += (s.empty() ? "" : ", ") + p.name;
  return s;
}

inline const Preset& find_preset(std::string_view name) {
  for (const auto& p : presets())
    if (p.name == name) return p;
  throw ConfigError("preset", "unknown preset '" + std::string(name) + "'; valid presets: " + preset_names());
}

// ------------------------------------------------------------- validation

inline void validate(const RunConfig& c) {
  auto require = [](bool ok, const char* key, const char* what) {
    if (!ok) throw ConfigError(key, what);
  };
  auto one_of = [](const std::string& v, std::initializer_list<const char*> options, const char* key) {
    for (const char* o : options)
      if (v == o) return;
    std::string list;
    for (const char* o : options) list += (list.empty() ? "" : ", ") + std::string(o);
    throw ConfigError(key, "'" + v + "' is not one of " + list);
  };
  if (!c.preset.empty()) find_preset(c.preset);
  one_of(c.scenario, {"ensemble", "master", "two_ensemble"}, "scenario");
  require(c.omega_mhz > 0.0, "omega_mhz", "must be positive");
  require(c.c6_mhz_um6 >= 0.0, "c6_mhz_um6", "must be >= 0");
  require(c.nbar > 0.0, "nbar", "must be positive");
  require(c.nmax >= 1 && c.nmax <= 200, "nmax", "must lie in [1, 200]");
  one_of(c.atom_dist, {"auto", "poisson", "binomial", "fixed"}, "atom_dist");
  require(c.fixed_atoms >= 0, "fixed_atoms", "must be >= 0");
  one_of(c.trap_kind, {"gaussian", "lattice"}, "trap_kind");
  require(c.trap_sigma_um > 0.0, "trap_sigma_um", "must be positive");
  require(c.lattice_rows >= 1, "lattice_rows", "must be >= 1");
  require(c.lattice_cols >= 1, "lattice_cols", "must be >= 1");
  require(c.lattice_rows * c.lattice_cols <= kMaxAtoms, "lattice_cols", "lattice holds more sites than supported");
  require(c.lattice_spacing_um > 0.0, "lattice_spacing_um", "must be positive");
  require(c.load_prob >= 0.0 && c.load_prob <= 1.0, "load_prob", "must lie in [0, 1]");
  require(c.t_max_us > 0.0, "t_max_us", "must be positive");
  require(c.n_time_points >= 2, "n_time_points", "must be >= 2");
  require(c.max_excitations >= 0, "max_excitations", "must be >= 0 (0 selects the default)");
  require(c.energy_cutoff_factor > 0.0, "energy_cutoff_factor", "must be positive");
  require(c.gamma2_khz >= 0.0, "gamma2_khz", "must be >= 0");
  require(c.gamma_khz >= 0.0, "gamma_khz", "must be >= 0");
  require(c.detection_t >= 0.0 && c.detection_t <= 1.0, "detection_t", "must lie in [0, 1]");
  require(c.pair_distance_um > 0.0, "pair_distance_um", "must be positive");
  one_of(c.pair_coupling, {"point", "sampled"}, "pair_coupling");
  for (std::size_t i = 0; i < c.sweep_values.size(); ++i) {
    require(c.sweep_values[i] > 0.0, "sweep_values", "entries must be positive");
    require(i == 0 || c.sweep_values[i] > c.sweep_values[i - 1], "sweep_values", "entries must be ascending");
  }
  one_of(c.window, {"hann", "rectangular"}, "window");
  require(c.samples >= 1, "samples", "must be >= 1");
  require(c.workers >= 0, "workers", "must be >= 0");
  require(c.min_samples_per_n >= 1, "min_samples_per_n", "must be >= 1");
  if (c.scenario == "master") require(c.sweep_values.empty(), "sweep_values", "not available for the master scenario");
  if (c.scenario == "ensemble" && c.trap_kind == "lattice")
    require(c.sweep_values.empty(), "sweep_values", "sweeps vary trap_sigma_um and need trap_kind = gaussian");
}

// ---------------------------------------------------------------- loading

/// Start from the defaults (the fig2a parameter set), apply `preset = ...` if
/// present, then every other assignment in file order.
inline RunConfig config_from_assignments(const std::vector<std::pair<std::string, std::string>>& assignments) {
  RunConfig cfg;
  std::map<std::string, int> seen;
  for (const auto& [key, value] : assignments) {
    detail::find_key(key);
    if (seen[key]++) throw ConfigError(key, "given more than once");
  }
  for (const auto& [key, value] : assignments)
    if (key == "preset" && !value.empty()) {
      find_preset(value).apply(cfg);
      cfg.preset = value;
    }
  for (const auto& [key, value] : assignments)
    if (key != "preset") set_value(cfg, key, value);
  validate(cfg);
  return cfg;
}

inline RunConfig parse_config_text(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> assignments;
  std::size_t line_no = 0, pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(std::string(line), "line " + std::to_string(line_no) + " is not of the form key = value");
    assignments.emplace_back(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  return config_from_assignments(assignments);
}

/// A written manifest: its "config" object holds every key.
inline RunConfig parse_manifest_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("manifest", std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("config") || !j["config"].is_object())
    throw ConfigError("config", "manifest has no config object");
  std::vector<std::pair<std::string, std::string>> assignments;
  for (const auto& [key, value] : j["config"].items()) {
    std::string text_value;
    if (value.is_string())
      text_value = value.get<std::string>();
    else if (value.is_array()) {
      for (const auto& v : value) text_value += (text_value.empty() ? "" : ",") + v.dump();
    } else if (value.is_number()) {
      text_value = value.dump();
    } else {
      throw ConfigError(key, "unsupported JSON value");
    }
    assignments.emplace_back(key, text_value);
  }
  return config_from_assignments(assignments);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') return parse_manifest_json(text);
  return parse_config_text(text);
}

inline RunConfig preset_config(std::string_view name) {
  return config_from_assignments({{"preset", std::string(name)}});
}

// ------------------------------------------------------------- conversion

inline PhysicalParams physical_params(const RunConfig& c) { return PhysicalParams::from_mhz(c.omega_mhz, c.c6_mhz_um6); }

inline std::vector<double> time_grid(const RunConfig& c) { return uniform_time_grid(c.t_max_us, c.n_time_points); }

inline AtomNumberDist atom_number_dist(const RunConfig& c) {
  std::string kind = c.atom_dist;
  if (kind == "auto") kind = c.trap_kind == "lattice" ? "binomial" : "poisson";
  if (kind == "fixed") return FixedCount{c.fixed_atoms};
  if (kind == "binomial") {
    if (c.trap_kind != "lattice") throw ConfigError("atom_dist", "binomial loading needs trap_kind = lattice");
    return BinomialDist{c.lattice_rows * c.lattice_cols, c.load_prob};
  }
  if (c.trap_kind == "lattice") throw ConfigError("atom_dist", "a lattice is loaded binomially or with a fixed count");
  return PoissonDist{c.nbar, c.nmax};
}

inline ScenarioSpec scenario_spec(const RunConfig& c) {
  ScenarioSpec s;
  if (c.trap_kind == "lattice")
    s.geometry = Lattice::square_grid(c.lattice_rows, c.lattice_cols, c.lattice_spacing_um);
  else
    s.geometry = GaussianCloud{c.trap_sigma_um};
  s.atom_dist = atom_number_dist(c);
  s.params = physical_params(c);
  s.time_grid = time_grid(c);
  s.max_excitations = c.max_excitations;
  s.samples = c.samples;
  s.seed = c.seed;
  s.min_samples_per_n = c.min_samples_per_n;
  s.energy_cutoff_factor = c.energy_cutoff_factor;
  s.workers = c.workers;
  s.truncation_check_configs = c.truncation_check_configs;
  return s;
}

inline DecayParams decay_params(const RunConfig& c) {
  return {units::angular_from_khz(c.gamma2_khz), units::angular_from_khz(c.gamma_khz)};
}

inline TwoEnsembleSpec two_ensemble_spec(const RunConfig& c) {
  TwoEnsembleSpec s;
  s.mean_atoms = c.nbar;
  s.n_max = c.nmax;
  s.distance = c.pair_distance_um;
  s.cloud_sigma = c.pair_coupling == "sampled" ? c.trap_sigma_um : 0.0;
  s.params = physical_params(c);
  s.time_grid = time_grid(c);
  s.samples = c.samples;
  s.seed = c.seed;
  s.workers = c.workers;
  return s;
}

inline Window window_of(const RunConfig& c) { return c.window == "rectangular" ? Window::rectangular : Window::hann; }

/// Mean atom number that sets the revival time of this configuration.
inline double mean_atoms(const RunConfig& c) {
  if (c.scenario == "ensemble") return std::max(mean_atom_number(atom_number_dist(c)), 1.0);
  return c.nbar;
}

}  // namespace rydjc::io
