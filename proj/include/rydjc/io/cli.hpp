#pragma once

// Command-line front end. Exit codes: 0 success, 1 usage or configuration
// error, 2 failure while running.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rydjc/io/config.hpp"
#include "rydjc/io/output.hpp"
#include "rydjc/io/run.hpp"

namespace rydjc::io {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitFailure = 2;

namespace detail {

struct RunFlags {
  std::string preset;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> samples;
  std::optional<int> workers;
  std::string out = ".";
  bool quiet = false;
};

inline void add_run_flags(CLI::App* cmd, RunFlags& f) {
  auto* preset = cmd->add_option("--preset", f.preset, "preset name (see list-presets)");
  auto* config = cmd->add_option("--config", f.config, "key = value config file or a written manifest");
  preset->excludes(config);
  config->excludes(preset);
  cmd->add_option("--seed", f.seed, "64-bit master seed");
  cmd->add_option("--samples", f.samples, "Monte Carlo samples");
  cmd->add_option("--workers", f.workers, "worker threads, 0 = all cores");
  cmd->add_option("--out", f.out, "output directory")->capture_default_str();
  cmd->add_flag("--quiet", f.quiet, "no progress output");
}

inline RunConfig resolve(const RunFlags& f) {
  if (f.preset.empty() && f.config.empty()) throw ConfigError("preset", "give --preset NAME or --config FILE");
  RunConfig cfg = f.preset.empty() ? load_config(f.config) : preset_config(f.preset);
  if (f.seed) cfg.seed = *f.seed;
  if (f.samples) cfg.samples = *f.samples;
  if (f.workers) cfg.workers = *f.workers;
  validate(cfg);
  return cfg;
}

inline int run_command(const RunFlags& f, bool require_sweep, std::ostream& out, std::ostream& err) {
  RunConfig cfg = resolve(f);
  if (require_sweep && cfg.sweep_values.empty())
    throw ConfigError("sweep_values", "sweep needs a preset or config with sweep_values (fig2e, fig5c)");
  Progress progress;
  if (!f.quiet)
    progress = [&err](const std::string& label, std::size_t done, std::size_t total) {
      err << "\r" << label << " " << done << "/" << total << (done == total ? "\n" : "") << std::flush;
    };
  const auto start = std::chrono::steady_clock::now();
  const RunOutput result = execute(cfg, progress);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (const auto& p : write_outputs(result, f.out, wall)) out << p.string() << "\n";
  return kExitOk;
}

inline int spectrum_command(const std::string& in, const std::string& column, const std::string& window,
                            const std::string& out_dir, std::ostream& out) {
  const Table t = read_csv(in);
  std::string name = column;
  if (name.empty()) {
    name = t.header.back();
    for (const auto& h : t.header)
      if (h == "NRy") name = h;
  }
  const TimeSeries series{t.column("t_us"), t.column(name)};
  const auto s = fourier_spectrum(series, window == "rectangular" ? Window::rectangular : Window::hann);
  const std::string stem = std::filesystem::path(in).stem().string();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir);
  const auto csv = std::filesystem::path(out_dir) / (stem + "_spectrum.csv");
  const auto summary = std::filesystem::path(out_dir) / (stem + "_spectrum_summary.json");
  write_csv(Table{{"f_mhz", "magnitude"}, {s.frequencies, s.magnitudes}}, csv);
  write_json(json{{"input", in},
                  {"column", name},
                  {"window", window},
                  {"peak_frequency_mhz", s.peak_frequency},
                  {"bin_width_mhz", s.frequencies.size() > 1 ? s.frequencies[1] : 0.0}},
             summary);
  out << csv.string() << "\n" << summary.string() << "\n";
  return kExitOk;
}

}  // namespace detail

inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Jaynes-Cummings collapse and revival in Rydberg-blockaded ensembles"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  detail::RunFlags run_flags, sweep_flags;
  auto* run = app.add_subcommand("run", "run a preset or a config file");
  detail::add_run_flags(run, run_flags);
  auto* sweep = app.add_subcommand("sweep", "run a radius or distance sweep and write a grid");
  detail::add_run_flags(sweep, sweep_flags);

  std::string spectrum_in, spectrum_column, spectrum_window = "hann", spectrum_out = ".";
  auto* spectrum = app.add_subcommand("spectrum", "Fourier spectrum of a time series CSV");
  spectrum->add_option("--in", spectrum_in, "CSV with a t_us column")->required();
  spectrum->add_option("--column", spectrum_column, "value column (default NRy, else the last column)");
  spectrum->add_option("--window", spectrum_window, "hann or rectangular")
      ->check(CLI::IsMember({"hann", "rectangular"}))
      ->capture_default_str();
  spectrum->add_option("--out", spectrum_out, "output directory")->capture_default_str();

  auto* list = app.add_subcommand("list-presets", "print the available presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*list) {
      for (const auto& p : presets()) out << p.name << "  " << p.description << "\n";
      return kExitOk;
    }
    if (*run) return detail::run_command(run_flags, false, out, err);
    if (*sweep) return detail::run_command(sweep_flags, true, out, err);
    if (*spectrum) return detail::spectrum_command(spectrum_in, spectrum_column, spectrum_window, spectrum_out, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace rydjc::io
