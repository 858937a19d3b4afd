#pragma once

// Adaptive Dormand-Prince 5(4) integrator for linear and nonlinear systems
// over complex state vectors. The step is clamped so every requested output
// time is hit exactly.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>

#include "rydjc/errors.hpp"

namespace rydjc {

struct OdeOptions {
  double rel_tol = 1e-9;
  double abs_tol = 1e-9;
  double initial_step = 0.0;  // 0 picks one from the first derivative
  double min_step = 1e-14;
  std::size_t max_steps = 20'000'000;
};

struct OdeStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  double worst_local_error = 0.0;  // largest accepted scaled error estimate
};

namespace detail {

struct DormandPrince {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                          b6 = 11.0 / 84;
  // error coefficients: b - b_hat
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;
};

}  // namespace detail

/// Integrates dy/dt = f(t, y) from grid.front() through every time in `grid`
/// (ascending), calling observe(index, t, y) at each. `f(t, y, dydt)` writes
/// the derivative. Throws IntegrationError if the step size collapses.
template <class Rhs, class Observer>
OdeStats integrate_adaptive(Rhs&& f, Eigen::VectorXcd& y, std::span<const double> grid, Observer&& observe,
                            const OdeOptions& opt = {}) {
  using detail::DormandPrince;
  OdeStats stats;
  if (grid.empty()) return stats;
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] >= grid[i - 1])) throw ArgumentError("integrate_adaptive: time grid must be ascending");

  const Eigen::Index n = y.size();
  Eigen::VectorXcd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), y_new(n), err(n);

  auto error_norm = [&](const Eigen::VectorXcd& a, const Eigen::VectorXcd& b, const Eigen::VectorXcd& e) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double scale = opt.abs_tol + opt.rel_tol * std::max(std::abs(a[i]), std::abs(b[i]));
      const double r = std::abs(e[i]) / scale;
      acc += r * r;
    }
    return n == 0 ? 0.0 : std::sqrt(acc / static_cast<double>(n));
  };

  double t = grid.front();
  observe(std::size_t{0}, t, std::as_const(y));
  f(t, y, k1);

  double h = opt.initial_step;
  if (h <= 0.0) {
    const double d0 = y.norm() / std::sqrt(static_cast<double>(std::max<Eigen::Index>(n, 1)));
    const double d1 = k1.norm() / std::sqrt(static_cast<double>(std::max<Eigen::Index>(n, 1)));
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    const double span = grid.back() - grid.front();
    if (span > 0.0) h = std::min(h, span);
  }

  using DP = DormandPrince;
  for (std::size_t out = 1; out < grid.size(); ++out) {
    const double target = grid[out];
    while (t < target) {
      if (stats.accepted + stats.rejected >= opt.max_steps)
        throw IntegrationError("integrate_adaptive: step budget exhausted", stats.worst_local_error);
      bool last = false;
      double step = h;
      if (t + step >= target) {
        step = target - t;
        last = true;
      }

      tmp = y + step * (DP::a21 * k1);
      f(t + DP::c2 * step, tmp, k2);
      tmp = y + step * (DP::a31 * k1 + DP::a32 * k2);
      f(t + DP::c3 * step, tmp, k3);
      tmp = y + step * (DP::a41 * k1 + DP::a42 * k2 + DP::a43 * k3);
      f(t + DP::c4 * step, tmp, k4);
      tmp = y + step * (DP::a51 * k1 + DP::a52 * k2 + DP::a53 * k3 + DP::a54 * k4);
      f(t + DP::c5 * step, tmp, k5);
      tmp = y + step * (DP::a61 * k1 + DP::a62 * k2 + DP::a63 * k3 + DP::a64 * k4 + DP::a65 * k5);
      f(t + step, tmp, k6);
      y_new = y + step * (DP::b1 * k1 + DP::b3 * k3 + DP::b4 * k4 + DP::b5 * k5 + DP::b6 * k6);
      f(t + step, y_new, k7);
      err = step * (DP::e1 * k1 + DP::e3 * k3 + DP::e4 * k4 + DP::e5 * k5 + DP::e6 * k6 + DP::e7 * k7);

      const double e = error_norm(y, y_new, err);
      if (!std::isfinite(e))
        throw IntegrationError("integrate_adaptive: non-finite error estimate", stats.worst_local_error);

      if (e <= 1.0) {
        t = last ? target : t + step;
        y.swap(y_new);
        k1.swap(k7);
        ++stats.accepted;
        stats.worst_local_error = std::max(stats.worst_local_error, e * opt.rel_tol);
        const double grow = e == 0.0 ? 5.0 : std::min(5.0, 0.9 * std::pow(e, -0.2));
        // a step shortened to land on the output time says nothing about the step size
        if (!last) h = step * grow;
        else h = std::max(h, step * grow);
      } else {
        ++stats.rejected;
        h = step * std::max(0.2, 0.9 * std::pow(e, -0.2));
        if (h < opt.min_step)
          throw IntegrationError("integrate_adaptive: step size underflow at t=" + std::to_string(t),
                                 e * opt.rel_tol);
      }
    }
    observe(out, t, std::as_const(y));
  }
  return stats;
}

}  // namespace rydjc
