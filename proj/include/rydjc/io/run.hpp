#pragma once

// Executes a RunConfig through the matching pipeline and assembles the
// output tables, the summary document and the reproduction manifest.

#include <chrono>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rydjc/analysis.hpp"
#include "rydjc/detection.hpp"
#include "rydjc/ensemble.hpp"
#include "rydjc/io/config.hpp"
#include "rydjc/io/output.hpp"
#include "rydjc/open_system.hpp"
#include "rydjc/superatom.hpp"

namespace rydjc::io {

inline constexpr const char* kToolName = "rydjc-sim";
inline constexpr const char* kToolVersion = "1.0.0";

using json = nlohmann::ordered_json;

struct OutputFile {
  std::string suffix;  // e.g. "timeseries", "d5_timeseries", "grid"
  Table table;
};

struct RunOutput {
  std::string stem;
  RunConfig config;
  std::vector<OutputFile> files;
  json summary;
  json runs;  // per-run metadata for the manifest
};

using Progress = std::function<void(const std::string& label, std::size_t done, std::size_t total)>;

namespace detail {

inline double max_of(const std::vector<double>& v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  return m;
}

inline json spectrum_summary(const std::vector<double>& t, const std::vector<double>& y, Window w) {
  const auto s = fourier_spectrum({t, y}, w);
  return json{{"peak_frequency_mhz", s.peak_frequency}, {"bin_width_mhz", s.frequencies.size() > 1 ? s.frequencies[1] : 0.0}};
}

inline json contrast_windows_json(const ContrastWindows& w) {
  return json{{"collapse_us", {w.collapse.begin, w.collapse.end}}, {"revival_us", {w.revival.begin, w.revival.end}}};
}

inline double contrast_or_nan(const std::vector<double>& t, const std::vector<double>& y, const ContrastWindows& w) {
  try {
    return revival_contrast({t, y}, w.collapse, w.revival);
  } catch (const ArgumentError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

inline json metadata_json(const RunMetadata& m) {
  json per_n = json::object(), weights = json::object();
  for (const auto& [n, c] : m.samples_per_n) per_n[std::to_string(n)] = c;
  for (const auto& [n, w] : m.weight_per_n) weights[std::to_string(n)] = w;
  json j{{"seed", m.seed},
         {"samples_requested", m.samples_requested},
         {"min_samples_per_n", m.min_samples_per_n},
         {"samples_per_n", per_n},
         {"weight_per_n", weights},
         {"configurations", m.configurations},
         {"failures", m.failures},
         {"tail_mass", m.tail_mass},
         {"max_excitations", m.max_excitations},
         {"energy_cutoff_factor", m.energy_cutoff_factor},
         {"pruned_states", m.pruned_states},
         {"geometry", m.geometry},
         {"atom_dist", m.atom_dist}};
  if (m.truncation_check)
    j["truncation_check"] = json{{"configs", m.truncation_check->configs},
                                 {"compared_max_excitations", m.truncation_check->compared_max_excitations},
                                 {"worst_difference", m.truncation_check->worst_difference}};
  return j;
}

struct Single {
  std::vector<OutputFile> files;
  json summary;
  json metadata;
};

inline std::string prefixed(const std::string& prefix, const std::string& name) {
  return prefix.empty() ? name : prefix + "_" + name;
}

inline Single run_ensemble(const RunConfig& cfg, const std::string& prefix, const Progress& progress) {
  const ScenarioSpec spec = scenario_spec(cfg);
  const auto result = run_scenario(spec, [&](std::size_t done, std::size_t total) {
    if (progress) progress(prefixed(prefix, "ensemble"), done, total);
  });
  const auto& t = result.histogram.time_grid;
  const bool detected = cfg.detection_t < 1.0;
  const ExcitationHistogram hist = detected ? detected_timeseries(result.histogram, {cfg.detection_t}) : result.histogram;
  const auto moments = excitation_expectations(hist);

  Table table;
  table.header.push_back("t_us");
  table.columns.push_back(t);
  for (std::size_t n = 0; n < hist.q.size(); ++n) {
    table.header.push_back((detected ? "s" : "q") + std::to_string(n));
    table.columns.push_back(hist.q[n]);
  }
  table.header.insert(table.header.end(), {"NRy", "PRy"});
  table.columns.push_back(moments.n_ry);
  table.columns.push_back(moments.p_ry);

  const auto windows = default_contrast_windows(mean_atoms(cfg), cfg.omega_mhz);
  json s{{"scenario", "ensemble"},
         {"mean_atoms", mean_atoms(cfg)},
         {"windows", contrast_windows_json(windows)},
         {"tail_mass", result.metadata.tail_mass},
         {"max_excitations", result.metadata.max_excitations}};
  const auto& q = result.histogram.q;
  if (q.size() > 1) s["revival_contrast_q1"] = contrast_or_nan(t, q[1], windows);
  if (q.size() > 2) s["max_q2"] = max_of(q[2]);
  s["revival_contrast_NRy"] = contrast_or_nan(t, result.n_ry, windows);
  s["revival_contrast_PRy"] = contrast_or_nan(t, result.p_ry, windows);
  s["max_PRy"] = max_of(result.p_ry);
  s["max_NRy_standard_error"] = max_of(result.n_ry_se);
  if (detected) {
    s["detection_t"] = cfg.detection_t;
    if (hist.q.size() > 1) s["revival_contrast_s1"] = contrast_or_nan(t, hist.q[1], windows);
  }
  if (t.size() >= kMinSeriesPoints) s["spectrum_NRy"] = spectrum_summary(t, result.n_ry, window_of(cfg));
  if (result.metadata.truncation_check) s["truncation_worst_difference"] = result.metadata.truncation_check->worst_difference;
  return {{{prefixed(prefix, "timeseries"), std::move(table)}}, std::move(s), metadata_json(result.metadata)};
}

inline Single run_master(const RunConfig& cfg, const std::string& prefix, const Progress& progress) {
  if (progress) progress(prefixed(prefix, "master"), 0, 1);
  const PoissonDist dist{cfg.nbar, cfg.nmax};
  const auto grid = time_grid(cfg);
  const auto r = averaged_master_scenario(dist, physical_params(cfg).rabi, decay_params(cfg), grid, cfg.workers);
  if (progress) progress(prefixed(prefix, "master"), 1, 1);
  Table table{{"t_us", "PRy"}, {grid, r.p_ry}};
  const auto windows = default_contrast_windows(cfg.nbar, cfg.omega_mhz);
  json s{{"scenario", "master"},
         {"mean_atoms", cfg.nbar},
         {"windows", contrast_windows_json(windows)},
         {"gamma2_khz", cfg.gamma2_khz},
         {"gamma_khz", cfg.gamma_khz},
         {"tail_mass", r.tail_mass},
         {"revival_contrast_PRy", contrast_or_nan(grid, r.p_ry, windows)},
         {"max_PRy", max_of(r.p_ry)},
         {"worst_trace_error", r.diagnostics.worst_trace_error},
         {"worst_hermiticity_error", r.diagnostics.worst_hermiticity_error},
         {"min_diagonal", r.diagnostics.min_diagonal}};
  if (grid.size() >= kMinSeriesPoints) s["spectrum_PRy"] = spectrum_summary(grid, r.p_ry, window_of(cfg));
  json meta{{"n_max", cfg.nmax}, {"tail_mass", r.tail_mass}, {"integrator", "dopri5 rel 1e-10 abs 1e-12"}};
  return {{{prefixed(prefix, "timeseries"), std::move(table)}}, std::move(s), std::move(meta)};
}

inline json two_ensemble_meta(const TwoEnsembleResult& r, std::uint64_t seed) {
  return json{{"seed", seed},           {"samples", r.samples},     {"empty_draws", r.empty_draws},
              {"tail_mass", r.tail_mass}, {"coupling_mode", r.coupling_mode}, {"point_coupling_rad_per_us", r.point_coupling}};
}

inline Single run_two_ensemble(const RunConfig& cfg, const std::string& prefix, const Progress& progress) {
  if (progress) progress(prefixed(prefix, "two_ensemble"), 0, 1);
  const auto r = two_ensemble_scenario(two_ensemble_spec(cfg));
  if (progress) progress(prefixed(prefix, "two_ensemble"), 1, 1);
  Table table{{"t_us", "NRy", "NRy_se"}, {r.time_grid, r.n_ry, r.n_ry_se}};
  const auto windows = default_contrast_windows(cfg.nbar, cfg.omega_mhz);
  json s{{"scenario", "two_ensemble"},
         {"mean_atoms", cfg.nbar},
         {"pair_distance_um", cfg.pair_distance_um},
         {"windows", contrast_windows_json(windows)},
         {"tail_mass", r.tail_mass},
         {"revival_contrast_NRy", contrast_or_nan(r.time_grid, r.n_ry, windows)},
         {"max_NRy", max_of(r.n_ry)}};
  std::vector<OutputFile> files{{prefixed(prefix, "timeseries"), std::move(table)}};
  if (r.time_grid.size() >= kMinSeriesPoints) {
    const auto spec = fourier_spectrum({r.time_grid, r.n_ry}, window_of(cfg));
    s["spectrum_NRy"] = json{{"peak_frequency_mhz", spec.peak_frequency}, {"bin_width_mhz", spec.frequencies[1]}};
    files.push_back({prefixed(prefix, "spectrum"), Table{{"f_mhz", "magnitude"}, {spec.frequencies, spec.magnitudes}}});
  }
  return {std::move(files), std::move(s), two_ensemble_meta(r, cfg.seed)};
}

inline Single run_sweep(const RunConfig& cfg, const Progress& progress) {
  const bool pair = cfg.scenario == "two_ensemble";
  const auto grid = time_grid(cfg);
  Table table{{pair ? "d_um" : "r_um", "t_us", "value"}, {{}, {}, {}}};
  json rows = json::array(), meta = json::array();
  auto add = [&](double x, const std::vector<double>& values, json row) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
      table.columns[0].push_back(x);
      table.columns[1].push_back(grid[i]);
      table.columns[2].push_back(values[i]);
    }
    const auto windows = default_contrast_windows(cfg.nbar, cfg.omega_mhz);
    row["revival_contrast"] = contrast_or_nan(grid, values, windows);
    if (grid.size() >= kMinSeriesPoints) row["peak_frequency_mhz"] = spectrum_summary(grid, values, window_of(cfg))["peak_frequency_mhz"];
    rows.push_back(std::move(row));
  };
  if (pair) {
    std::size_t done = 0;
    for (double d : cfg.sweep_values) {
      RunConfig c = cfg;
      c.pair_distance_um = d;
      const auto r = two_ensemble_scenario(two_ensemble_spec(c));
      add(d, r.n_ry, json{{"d_um", d}, {"max_NRy", max_of(r.n_ry)}});
      meta.push_back(two_ensemble_meta(r, c.seed));
      if (progress) progress("sweep", ++done, cfg.sweep_values.size());
    }
  } else {
    std::size_t done = 0;
    for (double sigma : cfg.sweep_values) {
      RunConfig c = cfg;
      c.trap_sigma_um = sigma;
      const auto r = run_scenario(scenario_spec(c), [&](std::size_t k, std::size_t total) {
        if (progress) progress("sweep r=" + std::to_string(sigma), k, total);
      });
      add(sigma, r.p_ry, json{{"r_um", sigma}, {"max_excitations", r.metadata.max_excitations}, {"tail_mass", r.metadata.tail_mass}});
      meta.push_back(metadata_json(r.metadata));
      if (progress) progress("sweep", ++done, cfg.sweep_values.size());
    }
  }
  json s{{"scenario", cfg.scenario}, {"sweep", pair ? "pair_distance_um" : "trap_sigma_um"}, {"value", pair ? "NRy" : "PRy"}, {"rows", rows}};
  return {{{"grid", std::move(table)}}, std::move(s), std::move(meta)};
}

inline Single run_one(const RunConfig& cfg, const std::string& prefix, const Progress& progress) {
  if (cfg.scenario == "master") return run_master(cfg, prefix, progress);
  if (cfg.scenario == "two_ensemble") return run_two_ensemble(cfg, prefix, progress);
  return run_ensemble(cfg, prefix, progress);
}

}  // namespace detail

/// Runs the configuration, its preset variants included.
inline RunOutput execute(const RunConfig& cfg, const Progress& progress = {}) {
  validate(cfg);
  RunOutput out;
  out.config = cfg;
  out.stem = cfg.preset.empty() ? "run" : cfg.preset;
  out.summary = json{{"name", out.stem}};
  out.runs = json::object();

  auto merge = [&](detail::Single&& s, const std::string& key) {
    for (auto& f : s.files) out.files.push_back(std::move(f));
    out.runs[key] = std::move(s.metadata);
    return std::move(s.summary);
  };

  if (!cfg.sweep_values.empty()) {
    out.summary["result"] = merge(detail::run_sweep(cfg, progress), "main");
    return out;
  }
  out.summary["result"] = merge(detail::run_one(cfg, "", progress), "main");
  if (!cfg.preset.empty()) {
    const auto& preset = find_preset(cfg.preset);
    if (!preset.variants.empty()) out.summary["variants"] = json::object();
    for (const auto& v : preset.variants) {
      RunConfig c = cfg;
      v.adjust(c);
      out.summary["variants"][v.suffix] = merge(detail::run_one(c, v.suffix, progress), v.suffix);
    }
  }
  return out;
}

inline json manifest_json(const RunOutput& out, double wall_time_s) {
  return json{{"tool", kToolName},
              {"version", kToolVersion},
              {"name", out.stem},
              {"config", to_json(out.config)},
              {"runs", out.runs},
              {"wall_time_s", wall_time_s}};
}

/// Writes <stem>_<suffix>.csv for every table, <stem>_summary.json and
/// <stem>_manifest.json. Returns the written paths.
inline std::vector<std::filesystem::path> write_outputs(const RunOutput& out, const std::filesystem::path& dir,
                                                        double wall_time_s) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  for (const auto& f : out.files) {
    written.push_back(dir / (out.stem + "_" + f.suffix + ".csv"));
    write_csv(f.table, written.back());
  }
  written.push_back(dir / (out.stem + "_summary.json"));
  write_json(out.summary, written.back());
  written.push_back(dir / (out.stem + "_manifest.json"));
  write_json(manifest_json(out, wall_time_s), written.back());
  return written;
}

}  // namespace rydjc::io
