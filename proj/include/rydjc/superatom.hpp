#pragma once

// Two perfectly blockaded ensembles ("superatoms") coupled by their mean van
// der Waals interaction K. In the basis {GG, GR, RG, RR}, with the first
// letter for ensemble 1 and a_i = Omega sqrt(N_i) / 2,
//
//        | 0   a2  a1  0  |
//   H =  | a2  0   0   a1 |
//        | a1  0   0   a2 |
//        | 0   a1  a2  K  |
//
// and N_Ry = |c_GR|^2 + |c_RG|^2 + 2 |c_RR|^2.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "rydjc/dynamics.hpp"
#include "rydjc/ensemble.hpp"
#include "rydjc/errors.hpp"
#include "rydjc/jc_reference.hpp"
#include "rydjc/ode.hpp"
#include "rydjc/parallel.hpp"
#include "rydjc/random.hpp"

namespace rydjc {

/// (1 / (N1 N2)) sum_{p in 1, q in 2} C6 / R_pq^6.
inline double mean_coupling(const SpatialConfiguration& first, const SpatialConfiguration& second,
                            const PhysicalParams& params) {
  if (first.size() == 0 || second.size() == 0) throw ArgumentError("mean_coupling: both ensembles must be non-empty");
  double sum = 0.0;
  for (const Vec3& p : first.positions)
    for (const Vec3& q : second.positions) {
      const double r2 = distance_squared(p, q);
      if (!(r2 > 0.0)) throw SingularityError("mean_coupling: atoms of different ensembles coincide");
      sum += params.c6 / (r2 * r2 * r2);
    }
  return sum / (static_cast<double>(first.size()) * static_cast<double>(second.size()));
}

struct SuperatomPair {
  int n1 = 1;
  int n2 = 1;
  double k12 = 0.0;  // rad/us; +infinity freezes out RR
  double rabi = units::angular_from_mhz(1.0);
};

inline void validate(const SuperatomPair& p) {
  if (p.n1 < 0 || p.n2 < 0) throw ArgumentError("SuperatomPair: atom numbers must be >= 0");
  if (!(p.k12 >= 0.0)) throw ArgumentError("SuperatomPair: k12 must be >= 0");
  if (!(p.rabi >= 0.0) || !std::isfinite(p.rabi)) throw ArgumentError("SuperatomPair: rabi must be >= 0");
}

struct PairSeries {
  std::vector<double> time_grid;
  std::vector<double> p_gr, p_rg, p_rr, n_ry;
};

enum class PairPropagator { exact, runge_kutta };

inline PairSeries evolve_pair(const SuperatomPair& pair, std::span<const double> time_grid,
                              PairPropagator method = PairPropagator::exact, double norm_tolerance = 1e-8) {
  validate(pair);
  if (!time_grid.empty() && time_grid.front() != 0.0) throw ArgumentError("evolve_pair: time grid must start at 0");
  for (std::size_t i = 1; i < time_grid.size(); ++i)
    if (!(time_grid[i] >= time_grid[i - 1])) throw ArgumentError("evolve_pair: time grid must be ascending");
  const std::size_t nt = time_grid.size();
  PairSeries out;
  out.time_grid.assign(time_grid.begin(), time_grid.end());
  out.p_gr.assign(nt, 0.0);
  out.p_rg.assign(nt, 0.0);
  out.p_rr.assign(nt, 0.0);
  out.n_ry.assign(nt, 0.0);

  const double a1 = pair.rabi * std::sqrt(static_cast<double>(pair.n1)) / 2.0;
  const double a2 = pair.rabi * std::sqrt(static_cast<double>(pair.n2)) / 2.0;

  // An empty partner leaves a single two-level superatom.
  if (pair.n1 == 0 || pair.n2 == 0) {
    const double a = std::max(a1, a2);
    auto& target = pair.n1 == 0 ? out.p_gr : out.p_rg;
    for (std::size_t t = 0; t < nt; ++t) {
      const double s = std::sin(a * time_grid[t]);
      target[t] = s * s;
      out.n_ry[t] = target[t];
    }
    return out;
  }

  const bool frozen = std::isinf(pair.k12);
  const int dim = frozen ? 3 : 4;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  h(0, 1) = h(1, 0) = a2;
  h(0, 2) = h(2, 0) = a1;
  if (!frozen) {
    h(1, 3) = h(3, 1) = a1;
    h(2, 3) = h(3, 2) = a2;
    h(3, 3) = pair.k12;
  }

  auto record = [&](std::size_t i, double t, const Eigen::VectorXcd& c) {
    const double norm = c.squaredNorm();
    if (!(std::abs(norm - 1.0) <= norm_tolerance))
      throw IntegrationError("evolve_pair: norm drifted at t=" + std::to_string(t), std::abs(norm - 1.0));
    out.p_gr[i] = std::norm(c[1]);
    out.p_rg[i] = std::norm(c[2]);
    out.p_rr[i] = frozen ? 0.0 : std::norm(c[3]);
    out.n_ry[i] = out.p_gr[i] + out.p_rg[i] + 2.0 * out.p_rr[i];
  };

  if (method == PairPropagator::exact) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
    const Eigen::MatrixXd& v = eig.eigenvectors();
    const Eigen::VectorXd& e = eig.eigenvalues();
    Eigen::VectorXcd c(dim), phase(dim);
    for (std::size_t i = 0; i < nt; ++i) {
      for (int j = 0; j < dim; ++j) phase[j] = v(0, j) * std::exp(std::complex<double>(0.0, -e[j] * time_grid[i]));
      c = v * phase;
      record(i, time_grid[i], c);
    }
    return out;
  }

  Eigen::VectorXcd c = Eigen::VectorXcd::Zero(dim);
  c[0] = 1.0;
  auto rhs = [&](double, const Eigen::VectorXcd& y, Eigen::VectorXcd& dy) {
    dy = std::complex<double>(0.0, -1.0) * (h * y);
  };
  integrate_adaptive(rhs, c, time_grid, record, OdeOptions{.rel_tol = 1e-11, .abs_tol = 1e-12});
  return out;
}

struct TwoEnsembleSpec {
  double mean_atoms = 10.0;
  int n_max = 30;
  double distance = 20.0;  // um, between cloud centers
  /// 0 uses the point coupling C6/d^6; > 0 samples Gaussian clouds of this width
  double cloud_sigma = 0.0;
  PhysicalParams params{};
  std::vector<double> time_grid = uniform_time_grid(10.0, 401);
  int samples = 500;
  std::uint64_t seed = 1;
  int workers = 0;
};

struct TwoEnsembleResult {
  std::vector<double> time_grid;
  std::vector<double> n_ry;
  std::vector<double> n_ry_se;
  double point_coupling = 0.0;  // C6 / d^6, rad/us
  int samples = 0;
  int empty_draws = 0;          // draws with at least one empty ensemble
  double tail_mass = 0.0;       // per ensemble
  std::string coupling_mode;
};

inline void validate(const TwoEnsembleSpec& s) {
  validate(PoissonDist{s.mean_atoms, s.n_max});
  validate(s.params);
  if (!(s.distance > 0.0)) throw ArgumentError("two_ensemble_scenario: distance must be positive");
  if (!(s.cloud_sigma >= 0.0)) throw ArgumentError("two_ensemble_scenario: cloud_sigma must be >= 0");
  if (s.samples < 1) throw ArgumentError("two_ensemble_scenario: samples must be >= 1");
  if (!s.time_grid.empty() && s.time_grid.front() != 0.0)
    throw ArgumentError("two_ensemble_scenario: time grid must start at 0");
}

/// Average N_Ry(t) over independent Poisson draws of (N1, N2).
inline TwoEnsembleResult two_ensemble_scenario(const TwoEnsembleSpec& spec) {
  validate(spec);
  const PoissonDist dist{spec.mean_atoms, spec.n_max};
  const bool sampled = spec.cloud_sigma > 0.0;
  const std::size_t nt = spec.time_grid.size();
  const double point_k = spec.params.c6 / std::pow(spec.distance, 6);

  struct Draw {
    int n1, n2;
    double k;
  };
  std::vector<Draw> draws(static_cast<std::size_t>(spec.samples));
  for (int j = 0; j < spec.samples; ++j) {
    RandomStream rng = task_stream(spec.seed, static_cast<std::uint64_t>(j));
    Draw d{sample_atom_number(dist, rng), sample_atom_number(dist, rng), point_k};
    if (sampled && d.n1 > 0 && d.n2 > 0) {
      const GaussianCloud cloud{spec.cloud_sigma};
      auto c1 = sample_positions(cloud, d.n1, rng);
      auto c2 = sample_positions(cloud, d.n2, rng);
      for (Vec3& p : c2.positions) p.x += spec.distance;
      d.k = mean_coupling(c1, c2, spec.params);
    }
    draws[static_cast<std::size_t>(j)] = d;
  }

  // The point coupling depends only on (N1, N2); evaluate each pair once.
  std::vector<PairSeries> series(draws.size());
  std::map<std::pair<int, int>, std::size_t> first_of;
  std::vector<std::size_t> source(draws.size());
  for (std::size_t j = 0; j < draws.size(); ++j) {
    if (sampled) {
      source[j] = j;
      continue;
    }
    auto [it, inserted] = first_of.emplace(std::pair{draws[j].n1, draws[j].n2}, j);
    source[j] = it->second;
  }
  parallel_for(draws.size(), spec.workers, [&](std::size_t j) {
    if (source[j] != j) return;
    series[j] = evolve_pair({draws[j].n1, draws[j].n2, draws[j].k, spec.params.rabi}, spec.time_grid);
  });

  TwoEnsembleResult out;
  out.time_grid = spec.time_grid;
  out.n_ry.assign(nt, 0.0);
  out.n_ry_se.assign(nt, 0.0);
  out.point_coupling = point_k;
  out.samples = spec.samples;
  out.tail_mass = poisson_tail_mass(dist);
  out.coupling_mode = sampled ? "sampled" : "point";
  std::vector<double> m2(nt, 0.0);
  for (std::size_t j = 0; j < draws.size(); ++j) {
    if (draws[j].n1 == 0 || draws[j].n2 == 0) ++out.empty_draws;
    const auto& s = series[source[j]];
    const double count = static_cast<double>(j + 1);
    for (std::size_t t = 0; t < nt; ++t) {
      const double x = s.n_ry[t];
      const double d = x - out.n_ry[t];
      out.n_ry[t] += d / count;
      m2[t] += d * (x - out.n_ry[t]);
    }
  }
  const double n = static_cast<double>(draws.size());
  for (std::size_t t = 0; t < nt; ++t) out.n_ry_se[t] = n > 1.0 ? std::sqrt(m2[t] / (n - 1.0) / n) : 0.0;
  return out;
}

struct DistanceSweep {
  std::vector<double> distances;
  std::vector<TwoEnsembleResult> results;
};

inline DistanceSweep distance_sweep(const TwoEnsembleSpec& base, std::span<const double> distances) {
  if (distances.empty()) throw ArgumentError("distance_sweep: no distances given");
  for (std::size_t i = 0; i < distances.size(); ++i) {
    if (!(distances[i] > 0.0)) throw ArgumentError("distance_sweep: distances must be positive");
    if (i > 0 && !(distances[i] > distances[i - 1])) throw ArgumentError("distance_sweep: distances must be ascending");
  }
  DistanceSweep sweep;
  for (double d : distances) {
    TwoEnsembleSpec spec = base;
    spec.distance = d;
    sweep.distances.push_back(d);
    sweep.results.push_back(two_ensemble_scenario(spec));
  }
  return sweep;
}

}  // namespace rydjc
