#pragma once

// Random-loading Monte Carlo: draw atom numbers and positions, propagate each
// configuration, and combine the per-configuration excitation histograms with
// the atom-number weights.
//
// Gaussian clouds are stratified by atom number: each N with p(N) > 0 gets
// its own block of configurations and the block means are combined with
// weights p(N). The truncated Poisson weights are not renormalized, so the
// averaged columns sum to 1 - tail. Lattices are sampled by occupancy pattern
// and averaged uniformly.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rydjc/dynamics.hpp"
#include "rydjc/errors.hpp"
#include "rydjc/jc_reference.hpp"
#include "rydjc/parallel.hpp"
#include "rydjc/random.hpp"
#include "rydjc/statespace.hpp"

namespace rydjc {

struct GaussianCloud {
  double sigma = 2.0;  // um, per coordinate
};

struct Lattice {
  std::vector<Vec3> sites;

  /// rows x cols grid in the z = 0 plane with nearest-neighbor distance `spacing`, row-major.
  static Lattice square_grid(int rows, int cols, double spacing) {
    if (rows < 1 || cols < 1) throw ArgumentError("Lattice::square_grid: rows and cols must be >= 1");
    if (!(spacing > 0.0)) throw ArgumentError("Lattice::square_grid: spacing must be positive");
    Lattice l;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) l.sites.push_back({c * spacing, r * spacing, 0.0});
    return l;
  }

  double min_spacing() const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < sites.size(); ++i)
      for (std::size_t j = i + 1; j < sites.size(); ++j) best = std::min(best, distance_squared(sites[i], sites[j]));
    return std::sqrt(best);
  }
};

using TrapGeometry = std::variant<GaussianCloud, Lattice>;

inline void validate(const TrapGeometry& g) {
  if (const auto* c = std::get_if<GaussianCloud>(&g)) {
    if (!(c->sigma > 0.0) || !std::isfinite(c->sigma)) throw ArgumentError("GaussianCloud: sigma must be positive");
    return;
  }
  const auto& l = std::get<Lattice>(g);
  if (l.sites.empty()) throw ArgumentError("Lattice: at least one site required");
  for (const Vec3& p : l.sites)
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
      throw ArgumentError("Lattice: non-finite site coordinate");
  if (l.sites.size() > 1 && !(l.min_spacing() > 0.0)) throw ArgumentError("Lattice: sites must be pairwise distinct");
}

inline std::string describe(const TrapGeometry& g) {
  if (const auto* c = std::get_if<GaussianCloud>(&g)) return "gaussian_cloud(sigma=" + std::to_string(c->sigma) + " um)";
  const auto& l = std::get<Lattice>(g);
  return "lattice(" + std::to_string(l.sites.size()) + " sites, min spacing " + std::to_string(l.min_spacing()) + " um)";
}

/// Uniformly random `n` distinct site indices, in ascending order.
inline std::vector<int> sample_lattice_sites(const Lattice& lattice, int n, RandomStream& rng) {
  const int total = static_cast<int>(lattice.sites.size());
  if (n < 0) throw ArgumentError("sample_positions: n_atoms must be >= 0");
  if (n > total)
    throw ArgumentError("sample_positions: " + std::to_string(n) + " atoms exceed " + std::to_string(total) +
                        " lattice sites");
  std::vector<int> idx(total);
  std::iota(idx.begin(), idx.end(), 0);
  if (n == total) return idx;
  // partial Fisher-Yates with an engine-level draw for portability
  for (int i = 0; i < n; ++i) {
    const auto span = static_cast<std::uint64_t>(total - i);
    const std::uint64_t limit = RandomStream::max() - RandomStream::max() % span;
    std::uint64_t r;
    do r = rng(); while (r >= limit);
    std::swap(idx[i], idx[i + static_cast<int>(r % span)]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// Gaussian cloud: every coordinate N(0, sigma^2). Lattice: `n_atoms` occupied
/// sites drawn uniformly without replacement (all sites, in order, when full).
inline SpatialConfiguration sample_positions(const TrapGeometry& geometry, int n_atoms, RandomStream& rng) {
  validate(geometry);
  if (n_atoms < 0) throw ArgumentError("sample_positions: n_atoms must be >= 0");
  SpatialConfiguration config;
  if (const auto* c = std::get_if<GaussianCloud>(&geometry)) {
    std::normal_distribution<double> normal(0.0, c->sigma);
    config.positions.reserve(n_atoms);
    for (int i = 0; i < n_atoms; ++i) {
      const double x = normal(rng), y = normal(rng), z = normal(rng);
      config.positions.push_back({x, y, z});
    }
    return config;
  }
  const auto& lattice = std::get<Lattice>(geometry);
  for (int s : sample_lattice_sites(lattice, n_atoms, rng)) config.positions.push_back(lattice.sites[s]);
  return config;
}

/// One draw from the truncated, renormalized distribution.
inline int sample_atom_number(const AtomNumberDist& dist, RandomStream& rng) {
  validate(dist);
  if (const auto* f = std::get_if<FixedCount>(&dist)) return f->count;
  if (const auto* b = std::get_if<BinomialDist>(&dist)) {
    std::binomial_distribution<int> d(b->trials, b->success_prob);
    return d(rng);
  }
  const auto& p = std::get<PoissonDist>(dist);
  std::vector<double> w(static_cast<std::size_t>(p.n_max) + 1);
  for (int n = 0; n <= p.n_max; ++n) w[n] = poisson_pmf(p, n);
  std::discrete_distribution<int> d(w.begin(), w.end());
  return d(rng);
}

/// Excitation cap used when a scenario leaves it unset.
inline int default_max_excitations(double sigma_um) {
  if (sigma_um <= 2.0) return 2;
  if (sigma_um <= 3.0) return 3;
  return 4;
}

inline std::vector<double> uniform_time_grid(double t_max, int points) {
  if (points < 1) throw ArgumentError("uniform_time_grid: need at least one point");
  if (points == 1) return {0.0};
  if (!(t_max > 0.0)) throw ArgumentError("uniform_time_grid: t_max must be positive");
  std::vector<double> g(points);
  for (int i = 0; i < points; ++i) g[i] = t_max * i / (points - 1);
  return g;
}

struct ScenarioSpec {
  TrapGeometry geometry = GaussianCloud{2.0};
  AtomNumberDist atom_dist = PoissonDist{7.0, 20};
  PhysicalParams params{};
  std::vector<double> time_grid = uniform_time_grid(10.0, 401);
  /// <= 0 picks default_max_excitations(sigma) for clouds and the site count for lattices
  int max_excitations = 0;
  int samples = 2000;
  std::uint64_t seed = 1;
  int min_samples_per_n = 50;
  double energy_cutoff_factor = HamiltonianOptions{}.energy_cutoff_factor;
  int workers = 0;
  /// configurations re-run with one more excitation; < 0 means 100 for clouds with sigma >= 4 um
  int truncation_check_configs = -1;
  /// largest m+1 basis a truncation check may use
  std::size_t truncation_check_max_dimension = 2500;
  EvolveOptions evolve{};
};

struct TruncationCheck {
  int configs = 0;
  int compared_max_excitations = 0;
  double worst_difference = 0.0;  // max |q_m - q_{m+1}| over n < m and all times
};

struct RunMetadata {
  std::uint64_t seed = 0;
  int samples_requested = 0;
  int min_samples_per_n = 0;
  std::map<int, int> samples_per_n;   // successful configurations per atom number
  std::map<int, double> weight_per_n;  // p(N) used in the combination
  std::size_t configurations = 0;
  std::size_t failures = 0;
  double tail_mass = 0.0;
  int max_excitations = 0;
  double energy_cutoff_factor = 0.0;
  std::size_t pruned_states = 0;
  int workers = 0;
  std::string geometry;
  std::string atom_dist;
  std::optional<TruncationCheck> truncation_check;
};

struct AveragedResult {
  ExcitationHistogram histogram;
  std::vector<double> n_ry;
  std::vector<double> p_ry;
  /// Monte Carlo standard errors of the entries above
  std::vector<std::vector<double>> q_se;
  std::vector<double> n_ry_se;
  std::vector<double> p_ry_se;
  RunMetadata metadata;
};

using ProgressCallback = std::function<void(std::size_t done, std::size_t total)>;

namespace detail {

struct ConfigOutcome {
  std::vector<std::vector<double>> q;  // (m+1) x T
  std::size_t pruned = 0;
  bool failed = false;
};

struct SpaceCache {
  std::map<std::pair<int, int>, std::pair<StateSpace, std::vector<CoupledPair>>> entries;

  const std::pair<StateSpace, std::vector<CoupledPair>>& get(int n, int m) {
    auto it = entries.find({n, m});
    if (it == entries.end()) {
      StateSpace s(n, m);
      auto pairs = coupled_pairs(s);
      it = entries.emplace(std::pair{n, m}, std::pair{std::move(s), std::move(pairs)}).first;
    }
    return it->second;
  }
};

inline ConfigOutcome simulate_configuration(const ScenarioSpec& spec, const SpatialConfiguration& config, int m,
                                            const std::pair<StateSpace, std::vector<CoupledPair>>* space) {
  const std::size_t nt = spec.time_grid.size();
  ConfigOutcome out;
  out.q.assign(static_cast<std::size_t>(m) + 1, std::vector<double>(nt, 0.0));
  if (config.size() == 0) {
    std::fill(out.q[0].begin(), out.q[0].end(), 1.0);
    return out;
  }
  try {
    const auto h = build_hamiltonian(spec.params, config, space->first, space->second,
                                     {.energy_cutoff_factor = spec.energy_cutoff_factor});
    out.pruned = h.pruned_states();
    const auto hist = evolve(h, spec.time_grid, spec.evolve);
    for (std::size_t k = 0; k < hist.q.size(); ++k) out.q[k] = hist.q[k];
  } catch (const IntegrationError&) {
    out.failed = true;
  }
  return out;
}

struct Task {
  int n_atoms;
  std::uint64_t seed;
  int stratum;  // index into strata, or -1 for uniform lattice sampling
};

}  // namespace detail

inline void validate(const ScenarioSpec& spec) {
  validate(spec.geometry);
  validate(spec.atom_dist);
  validate(spec.params);
  if (spec.samples < 1) throw ArgumentError("ScenarioSpec: samples must be >= 1");
  if (spec.min_samples_per_n < 0) throw ArgumentError("ScenarioSpec: min_samples_per_n must be >= 0");
  if (!(spec.energy_cutoff_factor > 0.0)) throw ArgumentError("ScenarioSpec: energy_cutoff_factor must be positive");
  if (!spec.time_grid.empty() && spec.time_grid.front() != 0.0)
    throw ArgumentError("ScenarioSpec: time grid must start at 0");
  for (std::size_t i = 1; i < spec.time_grid.size(); ++i)
    if (!(spec.time_grid[i] > spec.time_grid[i - 1])) throw ArgumentError("ScenarioSpec: time grid must be ascending");
  if (support_max(spec.atom_dist) > kMaxAtoms)
    throw CapacityError("ScenarioSpec: atom number support exceeds " + std::to_string(kMaxAtoms));
  if (const auto* l = std::get_if<Lattice>(&spec.geometry)) {
    if (std::holds_alternative<PoissonDist>(spec.atom_dist))
      throw ArgumentError("ScenarioSpec: lattice geometry needs binomial site occupancy or a fixed count");
    if (const auto* b = std::get_if<BinomialDist>(&spec.atom_dist); b && b->trials != static_cast<int>(l->sites.size()))
      throw ArgumentError("ScenarioSpec: binomial trials must equal the number of lattice sites");
    if (support_max(spec.atom_dist) > static_cast<int>(l->sites.size()))
      throw ArgumentError("ScenarioSpec: more atoms than lattice sites");
  } else if (std::holds_alternative<BinomialDist>(spec.atom_dist)) {
    throw ArgumentError("ScenarioSpec: gaussian_cloud geometry needs a Poisson or fixed atom number");
  }
}

inline int resolved_max_excitations(const ScenarioSpec& spec) {
  if (spec.max_excitations > 0) return spec.max_excitations;
  if (const auto* c = std::get_if<GaussianCloud>(&spec.geometry)) return default_max_excitations(c->sigma);
  return static_cast<int>(std::get<Lattice>(spec.geometry).sites.size());
}

inline int resolved_truncation_checks(const ScenarioSpec& spec) {
  if (spec.truncation_check_configs >= 0) return spec.truncation_check_configs;
  const auto* c = std::get_if<GaussianCloud>(&spec.geometry);
  return c && c->sigma >= 4.0 ? 100 : 0;
}

inline AveragedResult run_scenario(const ScenarioSpec& spec, const ProgressCallback& progress = {}) {
  validate(spec);
  const int m = resolved_max_excitations(spec);
  const std::size_t nt = spec.time_grid.size();
  const bool lattice = std::holds_alternative<Lattice>(spec.geometry);

  // Strata: (N, weight, sample count). N = 0 is exact and needs no samples.
  struct Stratum {
    int n;
    double weight;
    int count;
  };
  std::vector<Stratum> strata;
  std::vector<detail::Task> tasks;
  double empty_weight = 0.0;
  if (lattice) {
    for (int j = 0; j < spec.samples; ++j)
      tasks.push_back({-1, derive_seed(spec.seed, static_cast<std::uint64_t>(j)), -1});
  } else {
    double retained = 0.0;
    for (int n = 1; n <= support_max(spec.atom_dist); ++n) retained += atom_number_pmf(spec.atom_dist, n);
    for (int n = 0; n <= support_max(spec.atom_dist); ++n) {
      const double p = atom_number_pmf(spec.atom_dist, n);
      if (!(p > 0.0)) continue;
      if (n == 0) {
        empty_weight = p;
        continue;
      }
      const int proportional = static_cast<int>(std::ceil(spec.samples * p / retained - 1e-9));
      const int count = std::max({spec.min_samples_per_n, proportional, 1});
      const int index = static_cast<int>(strata.size());
      strata.push_back({n, p, count});
      const std::uint64_t stratum_seed = derive_seed(spec.seed, static_cast<std::uint64_t>(n));
      for (int j = 0; j < count; ++j) tasks.push_back({n, derive_seed(stratum_seed, static_cast<std::uint64_t>(j)), index});
    }
  }

  // Lattice patterns: draw all occupancies first, then simulate each distinct one once.
  std::vector<std::vector<int>> patterns;
  std::vector<std::size_t> pattern_of_task;
  if (lattice) {
    const auto& l = std::get<Lattice>(spec.geometry);
    std::map<std::vector<int>, std::size_t> seen;
    for (auto& task : tasks) {
      RandomStream rng(task.seed);
      const int n = sample_atom_number(spec.atom_dist, rng);
      auto sites = sample_lattice_sites(l, n, rng);
      task.n_atoms = n;
      auto [it, inserted] = seen.emplace(sites, patterns.size());
      if (inserted) patterns.push_back(std::move(sites));
      pattern_of_task.push_back(it->second);
    }
  }

  detail::SpaceCache cache;
  auto m_for = [&](int n) { return std::min(m, n); };
  auto space_for = [&](int n) -> const std::pair<StateSpace, std::vector<CoupledPair>>* {
    return n == 0 ? nullptr : &cache.get(n, m_for(n));
  };
  // populate before going parallel; the cache is read-only afterwards
  if (lattice) {
    for (const auto& p : patterns) space_for(static_cast<int>(p.size()));
  } else {
    for (const auto& s : strata) space_for(s.n);
  }

  auto positions_for_task = [&](const detail::Task& task) {
    RandomStream rng(task.seed);
    return sample_positions(spec.geometry, task.n_atoms, rng);
  };

  const std::size_t jobs = lattice ? patterns.size() : tasks.size();
  std::vector<detail::ConfigOutcome> outcomes(jobs);
  std::mutex progress_mutex;
  std::size_t done = 0;
  parallel_for(jobs, spec.workers, [&](std::size_t i) {
    if (lattice) {
      const auto& l = std::get<Lattice>(spec.geometry);
      SpatialConfiguration config;
      for (int s : patterns[i]) config.positions.push_back(l.sites[s]);
      const int n = static_cast<int>(config.size());
      outcomes[i] = detail::simulate_configuration(spec, config, m, space_for(n));
    } else {
      const auto& task = tasks[i];
      outcomes[i] = detail::simulate_configuration(spec, positions_for_task(task), m, space_for(task.n_atoms));
    }
    if (progress) {
      std::lock_guard lock(progress_mutex);
      progress(++done, jobs);
    }
  });

  AveragedResult result;
  auto& meta = result.metadata;
  meta.seed = spec.seed;
  meta.samples_requested = spec.samples;
  meta.min_samples_per_n = spec.min_samples_per_n;
  meta.configurations = tasks.size();
  meta.tail_mass = tail_mass(spec.atom_dist);
  meta.max_excitations = m;
  meta.energy_cutoff_factor = spec.energy_cutoff_factor;
  meta.workers = static_cast<int>(resolve_workers(spec.workers));
  meta.geometry = describe(spec.geometry);
  meta.atom_dist = describe(spec.atom_dist);
  for (const auto& o : outcomes) meta.pruned_states += o.pruned;

  result.histogram.time_grid = spec.time_grid;
  result.histogram.q.assign(static_cast<std::size_t>(m) + 1, std::vector<double>(nt, 0.0));
  std::vector<std::vector<double>> q_var(static_cast<std::size_t>(m) + 1, std::vector<double>(nt, 0.0));
  std::vector<double> n_var(nt, 0.0), p_var(nt, 0.0);
  result.n_ry.assign(nt, 0.0);
  result.p_ry.assign(nt, 0.0);

  // Welford accumulation of one block of outcomes, folded into the totals with `weight`.
  auto fold_block = [&](const std::vector<const detail::ConfigOutcome*>& block, double weight) {
    const std::size_t rows = static_cast<std::size_t>(m) + 1;
    const double count = static_cast<double>(block.size());
    for (std::size_t t = 0; t < nt; ++t) {
      std::vector<double> mean(rows, 0.0), m2(rows, 0.0);
      double n_mean = 0.0, n_m2 = 0.0, p_mean = 0.0, p_m2 = 0.0;
      std::size_t seen = 0;
      for (const auto* o : block) {
        ++seen;
        double nry = 0.0, pry = 0.0;
        for (std::size_t k = 0; k < rows; ++k) {
          const double x = o->q[k][t];
          const double d = x - mean[k];
          mean[k] += d / seen;
          m2[k] += d * (x - mean[k]);
          nry += static_cast<double>(k) * x;
          if (k > 0) pry += x;
        }
        const double dn = nry - n_mean;
        n_mean += dn / seen;
        n_m2 += dn * (nry - n_mean);
        const double dp = pry - p_mean;
        p_mean += dp / seen;
        p_m2 += dp * (pry - p_mean);
      }
      const double scale = count > 1.0 ? weight * weight / (count * (count - 1.0)) : 0.0;
      for (std::size_t k = 0; k < rows; ++k) {
        result.histogram.q[k][t] += weight * mean[k];
        q_var[k][t] += scale * m2[k];
      }
      result.n_ry[t] += weight * n_mean;
      result.p_ry[t] += weight * p_mean;
      n_var[t] += scale * n_m2;
      p_var[t] += scale * p_m2;
    }
  };

  if (lattice) {
    std::vector<const detail::ConfigOutcome*> block;
    for (std::size_t j = 0; j < tasks.size(); ++j) {
      const auto& o = outcomes[pattern_of_task[j]];
      if (o.failed) {
        ++meta.failures;
        continue;
      }
      block.push_back(&o);
      ++meta.samples_per_n[tasks[j].n_atoms];
    }
    for (const auto& [n, c] : meta.samples_per_n) meta.weight_per_n[n] = atom_number_pmf(spec.atom_dist, n);
    if (block.empty()) throw RunFailure("run_scenario: every configuration failed");
    fold_block(block, 1.0);
  } else {
    if (empty_weight > 0.0) {
      for (std::size_t t = 0; t < nt; ++t) result.histogram.q[0][t] += empty_weight;
      meta.weight_per_n[0] = empty_weight;
      meta.samples_per_n[0] = 0;
    }
    std::size_t cursor = 0;
    for (const auto& s : strata) {
      std::vector<const detail::ConfigOutcome*> block;
      for (int j = 0; j < s.count; ++j, ++cursor) {
        if (outcomes[cursor].failed) {
          ++meta.failures;
          continue;
        }
        block.push_back(&outcomes[cursor]);
      }
      meta.samples_per_n[s.n] = static_cast<int>(block.size());
      meta.weight_per_n[s.n] = s.weight;
      if (block.empty())
        throw RunFailure("run_scenario: every configuration with N=" + std::to_string(s.n) + " failed");
      fold_block(block, s.weight);
    }
  }

  if (static_cast<double>(meta.failures) > 1e-3 * static_cast<double>(meta.configurations))
    throw RunFailure("run_scenario: " + std::to_string(meta.failures) + " of " +
                     std::to_string(meta.configurations) + " configurations failed to integrate");

  result.q_se = q_var;
  for (auto& row : result.q_se)
    for (double& v : row) v = std::sqrt(v);
  result.n_ry_se.resize(nt);
  result.p_ry_se.resize(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    result.n_ry_se[t] = std::sqrt(n_var[t]);
    result.p_ry_se[t] = std::sqrt(p_var[t]);
  }

  // Truncation check: evenly spaced configurations whose N exceeds m, re-run at m+1.
  const int checks = resolved_truncation_checks(spec);
  if (checks > 0 && !lattice) {
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      const int n = tasks[i].n_atoms;
      if (n <= m || outcomes[i].failed) continue;
      if (cache.get(n, m + 1).first.size() > spec.truncation_check_max_dimension) continue;
      eligible.push_back(i);
    }
    std::vector<std::size_t> chosen;
    const std::size_t want = std::min<std::size_t>(static_cast<std::size_t>(checks), eligible.size());
    for (std::size_t k = 0; k < want; ++k) chosen.push_back(eligible[k * eligible.size() / want]);
    std::vector<double> worst(chosen.size(), 0.0);
    parallel_for(chosen.size(), spec.workers, [&](std::size_t k) {
      const auto& task = tasks[chosen[k]];
      const auto bigger = detail::simulate_configuration(spec, positions_for_task(task), m + 1,
                                                         &cache.entries.at({task.n_atoms, m + 1}));
      if (bigger.failed) {
        worst[k] = std::numeric_limits<double>::infinity();
        return;
      }
      const auto& base = outcomes[chosen[k]];
      for (int n = 0; n < m; ++n)
        for (std::size_t t = 0; t < nt; ++t) worst[k] = std::max(worst[k], std::abs(base.q[n][t] - bigger.q[n][t]));
    });
    TruncationCheck tc;
    tc.configs = static_cast<int>(chosen.size());
    tc.compared_max_excitations = m + 1;
    for (double w : worst) tc.worst_difference = std::max(tc.worst_difference, w);
    meta.truncation_check = tc;
  }
  return result;
}

/// P_Ry(r, t) surface: one run_scenario per radius with the cloud width replaced.
struct RadiusSweep {
  std::vector<double> radii;
  std::vector<AveragedResult> results;
};

inline RadiusSweep radius_sweep(const ScenarioSpec& base, std::span<const double> radii,
                                const std::function<void(double radius)>& on_radius = {}) {
  if (!std::holds_alternative<GaussianCloud>(base.geometry))
    throw ArgumentError("radius_sweep: base scenario must use a gaussian cloud");
  if (radii.empty()) throw ArgumentError("radius_sweep: no radii given");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 0.0)) throw ArgumentError("radius_sweep: radii must be positive");
    if (i > 0 && !(radii[i] > radii[i - 1])) throw ArgumentError("radius_sweep: radii must be ascending");
  }
  RadiusSweep sweep;
  for (double r : radii) {
    if (on_radius) on_radius(r);
    ScenarioSpec spec = base;
    spec.geometry = GaussianCloud{r};
    sweep.radii.push_back(r);
    sweep.results.push_back(run_scenario(spec));
  }
  return sweep;
}

}  // namespace rydjc
