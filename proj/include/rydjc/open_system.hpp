#pragma once

// Master equation for a perfectly blockaded ensemble in the basis
// {|G>, |r_1>, ..., |r_N>} (at most one excitation):
//
//   drho/dt = -i[H, rho]
//             + gamma2/2 sum_i (2 s_ge^i rho s_eg^i - s_ee^i rho - rho s_ee^i)
//             + gamma    sum_i (2 s_ee^i rho s_ee^i - s_ee^i rho - rho s_ee^i)
//
// with H = (Omega/2) sum_i (|G><r_i| + |r_i><G|). Entry-wise this is
//
//   d rho_ab = -i[H, rho]_ab - (gamma2/2 + gamma)(e_a + e_b) rho_ab
//              + [a = b >= 1] 2 gamma rho_aa + [a = b = 0] gamma2 sum_i rho_ii
//
// where e_a = 1 for the excited rows. A single G-r coherence decays at gamma.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <span>
#include <vector>

#include "rydjc/errors.hpp"
#include "rydjc/jc_reference.hpp"
#include "rydjc/ode.hpp"
#include "rydjc/parallel.hpp"

namespace rydjc {

struct DecayParams {
  double gamma2 = 0.0;  // population decay to |G>, rad/us
  double gamma = 0.0;   // pure dephasing, rad/us
};

inline void validate(const DecayParams& d) {
  if (!(d.gamma2 >= 0.0) || !std::isfinite(d.gamma2)) throw ArgumentError("DecayParams: gamma2 must be >= 0");
  if (!(d.gamma >= 0.0) || !std::isfinite(d.gamma)) throw ArgumentError("DecayParams: gamma must be >= 0");
}

struct MasterDiagnostics {
  double worst_trace_error = 0.0;
  double worst_hermiticity_error = 0.0;
  double min_diagonal = 1.0;
};

struct MasterResult {
  std::vector<double> time_grid;
  std::vector<double> excited;  // 1 - rho_GG
  MasterDiagnostics diagnostics;
  Eigen::MatrixXcd final_state;
};

struct MasterOptions {
  OdeOptions ode{.rel_tol = 1e-10, .abs_tol = 1e-12};
  double trace_tolerance = 1e-8;
  double hermiticity_tolerance = 1e-10;
  double positivity_tolerance = 1e-10;
};

/// Symmetric single excitation |R> = N^{-1/2} sum_i |r_i> as a density matrix.
inline Eigen::MatrixXcd symmetric_excited_state(int n_atoms) {
  Eigen::VectorXcd r = Eigen::VectorXcd::Zero(n_atoms + 1);
  r.tail(n_atoms).setConstant(1.0 / std::sqrt(static_cast<double>(n_atoms)));
  return r * r.adjoint();
}

inline MasterResult evolve_master(int n_atoms, double rabi, const DecayParams& decay, std::span<const double> time_grid,
                                  const std::optional<Eigen::MatrixXcd>& initial = std::nullopt,
                                  const MasterOptions& options = {}) {
  if (n_atoms < 1) throw ArgumentError("evolve_master: n_atoms must be >= 1");
  if (!(rabi >= 0.0) || !std::isfinite(rabi)) throw ArgumentError("evolve_master: rabi must be >= 0");
  validate(decay);
  if (!time_grid.empty() && time_grid.front() != 0.0) throw ArgumentError("evolve_master: time grid must start at 0");

  const Eigen::Index d = n_atoms + 1;
  Eigen::MatrixXcd rho0 = Eigen::MatrixXcd::Zero(d, d);
  rho0(0, 0) = 1.0;
  if (initial) {
    if (initial->rows() != d || initial->cols() != d)
      throw ArgumentError("evolve_master: initial state must be (N+1) x (N+1)");
    rho0 = *initial;
  }

  const double half = rabi / 2.0;
  const double relax = decay.gamma2 / 2.0 + decay.gamma;
  const std::complex<double> minus_i(0.0, -1.0);
  auto rhs = [&](double, const Eigen::VectorXcd& y, Eigen::VectorXcd& dy) {
    Eigen::Map<const Eigen::MatrixXcd> rho(y.data(), d, d);
    Eigen::Map<Eigen::MatrixXcd> out(dy.data(), d, d);
    // H rho - rho H with H nonzero only in row/column 0
    for (Eigen::Index b = 0; b < d; ++b) {
      std::complex<double> col_sum = 0.0;  // sum_{i>=1} rho_ib
      for (Eigen::Index i = 1; i < d; ++i) col_sum += rho(i, b);
      for (Eigen::Index a = 0; a < d; ++a) {
        std::complex<double> h_rho = a == 0 ? half * col_sum : half * rho(0, b);
        std::complex<double> rho_h;
        if (b == 0) {
          std::complex<double> row_sum = 0.0;
          for (Eigen::Index i = 1; i < d; ++i) row_sum += rho(a, i);
          rho_h = half * row_sum;
        } else {
          rho_h = half * rho(a, 0);
        }
        const double excited = (a > 0 ? 1.0 : 0.0) + (b > 0 ? 1.0 : 0.0);
        out(a, b) = minus_i * (h_rho - rho_h) - relax * excited * rho(a, b);
      }
    }
    std::complex<double> population = 0.0;
    for (Eigen::Index i = 1; i < d; ++i) {
      out(i, i) += 2.0 * decay.gamma * rho(i, i);
      population += rho(i, i);
    }
    out(0, 0) += decay.gamma2 * population;
  };

  MasterResult result;
  result.time_grid.assign(time_grid.begin(), time_grid.end());
  result.excited.resize(time_grid.size());
  auto& diag = result.diagnostics;
  diag.min_diagonal = std::numeric_limits<double>::infinity();
  Eigen::VectorXcd y = Eigen::Map<const Eigen::VectorXcd>(rho0.data(), d * d);
  integrate_adaptive(
      rhs, y, time_grid,
      [&](std::size_t i, double t, const Eigen::VectorXcd& state) {
        Eigen::Map<const Eigen::MatrixXcd> rho(state.data(), d, d);
        const double trace_error = std::abs(rho.trace() - 1.0);
        const double herm = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
        const double min_diag = rho.diagonal().real().minCoeff();
        diag.worst_trace_error = std::max(diag.worst_trace_error, trace_error);
        diag.worst_hermiticity_error = std::max(diag.worst_hermiticity_error, herm);
        diag.min_diagonal = std::min(diag.min_diagonal, min_diag);
        if (!(trace_error <= options.trace_tolerance))
          throw IntegrationError("evolve_master: trace drifted at t=" + std::to_string(t), trace_error);
        if (!(herm <= options.hermiticity_tolerance))
          throw IntegrationError("evolve_master: hermiticity lost at t=" + std::to_string(t), herm);
        if (!(min_diag >= -options.positivity_tolerance))
          throw IntegrationError("evolve_master: negative population at t=" + std::to_string(t), -min_diag);
        result.excited[i] = 1.0 - rho(0, 0).real();
      },
      options.ode);
  result.final_state = Eigen::Map<const Eigen::MatrixXcd>(y.data(), d, d);
  if (time_grid.empty()) diag.min_diagonal = rho0.diagonal().real().minCoeff();
  return result;
}

struct MasterScenarioResult {
  std::vector<double> time_grid;
  std::vector<double> p_ry;
  MasterDiagnostics diagnostics;  // worst case over all atom numbers
  double tail_mass = 0.0;
};

/// Poisson-weighted P_Ry(t) = sum_{N>=1} p(N) P_e^N(t); the empty ensemble adds nothing.
inline MasterScenarioResult averaged_master_scenario(const PoissonDist& atom_dist, double rabi, const DecayParams& decay,
                                                     std::span<const double> time_grid, int workers = 0,
                                                     const MasterOptions& options = {}) {
  validate(atom_dist);
  const int n_max = atom_dist.n_max;
  std::vector<MasterResult> runs(static_cast<std::size_t>(n_max));
  parallel_for(runs.size(), workers, [&](std::size_t i) {
    runs[i] = evolve_master(static_cast<int>(i) + 1, rabi, decay, time_grid, std::nullopt, options);
  });
  MasterScenarioResult out;
  out.time_grid.assign(time_grid.begin(), time_grid.end());
  out.p_ry.assign(time_grid.size(), 0.0);
  out.diagnostics.min_diagonal = std::numeric_limits<double>::infinity();
  out.tail_mass = poisson_tail_mass(atom_dist);
  for (int n = 1; n <= n_max; ++n) {
    const auto& r = runs[static_cast<std::size_t>(n) - 1];
    const double w = poisson_pmf(atom_dist, n);
    for (std::size_t t = 0; t < time_grid.size(); ++t) out.p_ry[t] += w * r.excited[t];
    out.diagnostics.worst_trace_error = std::max(out.diagnostics.worst_trace_error, r.diagnostics.worst_trace_error);
    out.diagnostics.worst_hermiticity_error =
        std::max(out.diagnostics.worst_hermiticity_error, r.diagnostics.worst_hermiticity_error);
    out.diagnostics.min_diagonal = std::min(out.diagnostics.min_diagonal, r.diagnostics.min_diagonal);
  }
  return out;
}

}  // namespace rydjc
