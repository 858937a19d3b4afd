#pragma once

// Post-processing of uniformly sampled time series: one-sided amplitude
// spectra and the revival contrast used to quantify collapse and revival.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <mutex>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "rydjc/errors.hpp"

namespace rydjc {

/// Values on a uniform grid; time in us, so frequencies come out in MHz.
struct TimeSeries {
  std::vector<double> time_grid;
  std::vector<double> values;
};

inline constexpr std::size_t kMinSeriesPoints = 16;

/// Grid spacing of a uniform series. Spacing may wander by 1e-9 of a step,
/// enough for grids read back from 12-digit text.
inline double uniform_spacing(const TimeSeries& s) {
  if (s.time_grid.size() != s.values.size()) throw ArgumentError("TimeSeries: time and value lengths differ");
  if (s.time_grid.size() < kMinSeriesPoints) throw ArgumentError("TimeSeries: at least 16 points required");
  const double dt = (s.time_grid.back() - s.time_grid.front()) / static_cast<double>(s.time_grid.size() - 1);
  if (!(dt > 0.0)) throw ArgumentError("TimeSeries: time must increase");
  for (std::size_t i = 0; i < s.time_grid.size(); ++i) {
    const double expect = s.time_grid.front() + dt * static_cast<double>(i);
    if (std::abs(s.time_grid[i] - expect) > 1e-9 * dt) throw ArgumentError("TimeSeries: grid is not uniform");
  }
  return dt;
}

enum class Window { hann, rectangular };

struct SpectrumResult {
  std::vector<double> frequencies;  // MHz, 0 .. 1/(2 dt)
  std::vector<double> magnitudes;
  double peak_frequency = 0.0;  // MHz, largest magnitude above DC
  std::size_t peak_index = 0;
};

/// Symmetric Hann window of length n.
inline std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (n < 2) return w;
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
  return w;
}

/// One-sided spectrum of the mean-subtracted, windowed series. Magnitudes
/// are scaled so that sum m_k^2 equals sum_i (w_i (y_i - mean))^2.
inline SpectrumResult fourier_spectrum(const TimeSeries& series, Window window = Window::hann) {
  const double dt = uniform_spacing(series);
  const std::size_t n = series.values.size();
  double mean = 0.0;
  for (double v : series.values) mean += v;
  mean /= static_cast<double>(n);
  const std::vector<double> w = window == Window::hann ? hann_window(n) : std::vector<double>(n, 1.0);

  std::vector<double> in(n);
  for (std::size_t i = 0; i < n; ++i) in[i] = w[i] * (series.values[i] - mean);
  const std::size_t bins = n / 2 + 1;
  std::vector<std::complex<double>> out(bins);
  {
    // planning is not thread-safe in FFTW
    static std::mutex planner;
    fftw_plan plan;
    {
      std::lock_guard lock(planner);
      plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                  FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    std::lock_guard lock(planner);
    fftw_destroy_plan(plan);
  }

  SpectrumResult r;
  r.frequencies.resize(bins);
  r.magnitudes.resize(bins);
  const double root_n = std::sqrt(static_cast<double>(n));
  for (std::size_t k = 0; k < bins; ++k) {
    r.frequencies[k] = static_cast<double>(k) / (static_cast<double>(n) * dt);
    const bool unpaired = k == 0 || (n % 2 == 0 && k == n / 2);
    r.magnitudes[k] = (unpaired ? 1.0 : std::sqrt(2.0)) * std::abs(out[k]) / root_n;
  }
  if (bins > 1) {
    const auto it = std::max_element(r.magnitudes.begin() + 1, r.magnitudes.end());
    r.peak_index = static_cast<std::size_t>(it - r.magnitudes.begin());
    r.peak_frequency = r.frequencies[r.peak_index];
  }
  return r;
}

/// Closed time interval [begin, end], us.
struct TimeWindow {
  double begin;
  double end;
};

/// max over the revival window minus mean over the collapse window.
inline double revival_contrast(const TimeSeries& series, TimeWindow collapse, TimeWindow revival) {
  if (series.time_grid.size() != series.values.size()) throw ArgumentError("revival_contrast: time and value lengths differ");
  for (const TimeWindow& w : {collapse, revival})
    if (!(w.end > w.begin)) throw ArgumentError("revival_contrast: window end must exceed its start");
  if (collapse.end > revival.begin && revival.end > collapse.begin)
    throw ArgumentError("revival_contrast: windows overlap");
  const double slack = 1e-9 * std::max(1.0, std::abs(series.time_grid.empty() ? 1.0 : series.time_grid.back()));
  double sum = 0.0, peak = -std::numeric_limits<double>::infinity();
  std::size_t in_collapse = 0, in_revival = 0;
  for (std::size_t i = 0; i < series.time_grid.size(); ++i) {
    const double t = series.time_grid[i];
    if (t >= collapse.begin - slack && t <= collapse.end + slack) {
      sum += series.values[i];
      ++in_collapse;
    }
    if (t >= revival.begin - slack && t <= revival.end + slack) {
      peak = std::max(peak, series.values[i]);
      ++in_revival;
    }
  }
  if (in_collapse == 0 || in_revival == 0) throw ArgumentError("revival_contrast: a window holds no grid points");
  return peak - sum / static_cast<double>(in_collapse);
}

struct ContrastWindows {
  TimeWindow collapse{2.0, 4.0};
  TimeWindow revival{4.5, 6.5};
};

/// Windows for mean atom number 7 at Omega/2pi = 1 MHz are collapse (2, 4) us
/// and revival (4.5, 6.5) us around the revival near 2 sqrt(7) us. Other mean
/// numbers and drive strengths rescale them with the revival time
/// 4 pi sqrt(mean) / Omega.
inline ContrastWindows default_contrast_windows(double mean_atoms, double rabi_mhz = 1.0) {
  if (!(mean_atoms > 0.0)) throw ArgumentError("default_contrast_windows: mean must be positive");
  if (!(rabi_mhz > 0.0)) throw ArgumentError("default_contrast_windows: rabi must be positive");
  const double scale = std::sqrt(mean_atoms / 7.0) / rabi_mhz;
  ContrastWindows w;
  w.collapse = {2.0 * scale, 4.0 * scale};
  w.revival = {4.5 * scale, 6.5 * scale};
  return w;
}

}  // namespace rydjc
