#pragma once

// Finite detection efficiency: each Rydberg atom is registered independently
// with probability T, so the detected count is a binomial thinning of the true
// count,
//
//   s(k) = sum_{i >= k} C(i, k) T^k (1 - T)^(i - k) q(i).

#include <cmath>
#include <span>
#include <vector>

#include "rydjc/dynamics.hpp"
#include "rydjc/errors.hpp"
#include "rydjc/jc_reference.hpp"

namespace rydjc {

struct DetectionModel {
  double efficiency = 1.0;  // T
};

inline void validate(const DetectionModel& m) {
  if (!(m.efficiency >= 0.0 && m.efficiency <= 1.0))
    throw ArgumentError("DetectionModel: efficiency must lie in [0, 1]");
}

inline std::vector<double> detection_transform(std::span<const double> q, const DetectionModel& model) {
  validate(model);
  double total = 0.0;
  for (double v : q) {
    if (!(v >= -1e-12 && v <= 1.0 + 1e-12)) throw ArgumentError("detection_transform: q entries must lie in [0, 1]");
    total += v;
  }
  if (total > 1.0 + 1e-9) throw ArgumentError("detection_transform: q sums to more than 1");

  const double t = model.efficiency;
  const std::size_t n = q.size();
  std::vector<double> s(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (q[i] == 0.0) continue;
    for (std::size_t k = 0; k <= i; ++k) {
      const int ii = static_cast<int>(i), kk = static_cast<int>(k);
      s[k] += binomial_coefficient(ii, kk) * std::pow(t, kk) * std::pow(1.0 - t, ii - kk) * q[i];
    }
  }
  return s;
}

/// Column-wise detection_transform over a histogram.
inline ExcitationHistogram detected_timeseries(const ExcitationHistogram& hist, const DetectionModel& model) {
  validate(model);
  ExcitationHistogram out;
  out.time_grid = hist.time_grid;
  out.q.assign(hist.q.size(), std::vector<double>(hist.time_points(), 0.0));
  std::vector<double> column(hist.q.size());
  for (std::size_t t = 0; t < hist.time_points(); ++t) {
    for (std::size_t k = 0; k < hist.q.size(); ++k) column[k] = hist.q[k][t];
    const auto s = detection_transform(column, model);
    for (std::size_t k = 0; k < s.size(); ++k) out.q[k][t] = s[k];
  }
  return out;
}

}  // namespace rydjc
