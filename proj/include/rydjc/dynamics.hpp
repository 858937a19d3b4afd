#pragma once

// Many-body Hamiltonian for N driven atoms with van der Waals pair shifts,
// restricted to a truncated basis, and its propagation from the all-ground
// state.
//
//   H = (Omega/2) sum_i (|g_i><r_i| + |r_i><g_i|) + sum_{i<j} C6/R_ij^6 |r_i r_j><r_i r_j|
//
// Basis states whose interaction energy exceeds the cutoff are removed before
// propagation. Three propagators are available: dense exact diagonalization,
// a Chebyshev expansion of exp(-iH dt), and adaptive Runge-Kutta. All three
// audit the norm at every output time.

#include <lapacke.h>

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rydjc/errors.hpp"
#include "rydjc/ode.hpp"
#include "rydjc/statespace.hpp"
#include "rydjc/units.hpp"

namespace rydjc {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double distance_squared(const Vec3& a, const Vec3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

/// Drive and interaction strengths, both angular (rad/us and rad um^6/us).
struct PhysicalParams {
  double rabi = units::angular_from_mhz(1.0);
  double c6 = units::angular_from_mhz(3.2e6);

  static PhysicalParams from_mhz(double rabi_mhz, double c6_mhz_um6) {
    return {units::angular_from_mhz(rabi_mhz), units::angular_from_mhz(c6_mhz_um6)};
  }
};

inline void validate(const PhysicalParams& p) {
  if (!(p.rabi >= 0.0) || !std::isfinite(p.rabi)) throw ArgumentError("PhysicalParams: rabi must be >= 0");
  if (!(p.c6 >= 0.0) || !std::isfinite(p.c6)) throw ArgumentError("PhysicalParams: c6 must be >= 0");
}

struct SpatialConfiguration {
  std::vector<Vec3> positions;

  std::size_t size() const noexcept { return positions.size(); }
};

/// C6 / R^6. Zero distance is a singularity the caller must avoid or prune.
inline double vdw_pair_energy(const PhysicalParams& params, double distance) {
  if (!(distance > 0.0)) throw SingularityError("vdw_pair_energy: distance must be positive");
  const double r2 = distance * distance;
  return params.c6 / (r2 * r2 * r2);
}

/// Distance at which C6/R^6 equals the collective Rabi frequency sqrt(N) Omega.
inline double blockade_radius(const PhysicalParams& params, int n_atoms) {
  if (n_atoms < 1) throw ArgumentError("blockade_radius: n_atoms must be >= 1");
  if (!(params.rabi > 0.0)) throw ArgumentError("blockade_radius: rabi must be positive");
  return std::pow(params.c6 / (params.rabi * std::sqrt(static_cast<double>(n_atoms))), 1.0 / 6.0);
}

struct HamiltonianOptions {
  /// States with interaction energy above factor * Omega are pruned.
  double energy_cutoff_factor = 1e6;
};

/// Real symmetric Hamiltonian on the retained basis rows. Every off-diagonal
/// entry equals `coupling` (Omega/2); the diagonal holds interaction energies.
class HamiltonianMatrix {
 public:
  struct Edge {
    std::uint32_t lower;
    std::uint32_t upper;
  };

  HamiltonianMatrix() = default;

  HamiltonianMatrix(std::vector<double> diagonal, double coupling, std::vector<Edge> edges,
                    std::vector<int> excitations, std::vector<Mask> masks, int max_excitations,
                    std::size_t pruned_states = 0,
                    double energy_cutoff = std::numeric_limits<double>::infinity())
      : diagonal_(std::move(diagonal)),
        coupling_(coupling),
        edges_(std::move(edges)),
        excitations_(std::move(excitations)),
        masks_(std::move(masks)),
        max_excitations_(max_excitations),
        pruned_(pruned_states),
        energy_cutoff_(energy_cutoff) {
    const std::size_t n = diagonal_.size();
    if (excitations_.size() != n || masks_.size() != n)
      throw ArgumentError("HamiltonianMatrix: per-row arrays must have equal length");
    for (int k : excitations_)
      if (k < 0 || k > max_excitations_) throw ArgumentError("HamiltonianMatrix: excitation count out of range");
    std::vector<std::uint32_t> degree(n, 0);
    for (const Edge& e : edges_) {
      if (e.lower >= n || e.upper >= n || e.lower == e.upper)
        throw ArgumentError("HamiltonianMatrix: edge index out of range");
      ++degree[e.lower];
      ++degree[e.upper];
    }
    row_start_.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) row_start_[i + 1] = row_start_[i] + degree[i];
    neighbors_.resize(row_start_[n]);
    std::vector<std::uint32_t> fill(row_start_.begin(), row_start_.end() - 1);
    for (const Edge& e : edges_) {
      neighbors_[fill[e.lower]++] = e.upper;
      neighbors_[fill[e.upper]++] = e.lower;
    }
  }

  std::size_t dimension() const noexcept { return diagonal_.size(); }
  std::span<const double> diagonal() const noexcept { return diagonal_; }
  double coupling() const noexcept { return coupling_; }
  std::span<const Edge> edges() const noexcept { return edges_; }
  std::span<const int> excitations() const noexcept { return excitations_; }
  std::span<const Mask> masks() const noexcept { return masks_; }
  int max_excitations() const noexcept { return max_excitations_; }
  std::size_t pruned_states() const noexcept { return pruned_; }
  double energy_cutoff() const noexcept { return energy_cutoff_; }

  std::span<const std::uint32_t> neighbors(std::size_t row) const {
    return {neighbors_.data() + row_start_[row], neighbors_.data() + row_start_[row + 1]};
  }

  /// y = H x
  void apply(const Eigen::VectorXcd& x, Eigen::VectorXcd& y) const {
    const std::size_t n = dimension();
    for (std::size_t r = 0; r < n; ++r) {
      std::complex<double> acc = 0.0;
      for (std::uint32_t k = row_start_[r]; k < row_start_[r + 1]; ++k) acc += x[neighbors_[k]];
      y[static_cast<Eigen::Index>(r)] = diagonal_[r] * x[static_cast<Eigen::Index>(r)] + coupling_ * acc;
    }
  }

  Eigen::MatrixXd dense() const {
    const auto n = static_cast<Eigen::Index>(dimension());
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) h(i, i) = diagonal_[static_cast<std::size_t>(i)];
    for (const Edge& e : edges_) h(e.lower, e.upper) = h(e.upper, e.lower) = coupling_;
    return h;
  }

  /// -H, for backward propagation.
  HamiltonianMatrix negated() const {
    HamiltonianMatrix h = *this;
    for (double& d : h.diagonal_) d = -d;
    h.coupling_ = -coupling_;
    return h;
  }

  /// Gershgorin bounds of the spectrum.
  std::pair<double, double> spectral_bounds() const {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t r = 0; r < dimension(); ++r) {
      const double radius = std::abs(coupling_) * (row_start_[r + 1] - row_start_[r]);
      lo = std::min(lo, diagonal_[r] - radius);
      hi = std::max(hi, diagonal_[r] + radius);
    }
    return {lo, hi};
  }

 private:
  std::vector<double> diagonal_;
  double coupling_ = 0.0;
  std::vector<Edge> edges_;
  std::vector<int> excitations_;
  std::vector<Mask> masks_;
  int max_excitations_ = 0;
  std::size_t pruned_ = 0;
  double energy_cutoff_ = std::numeric_limits<double>::infinity();
  std::vector<std::uint32_t> row_start_;
  std::vector<std::uint32_t> neighbors_;
};

/// Builds H for one configuration. `pairs` must be coupled_pairs(space); pass
/// it in when many configurations share one space.
inline HamiltonianMatrix build_hamiltonian(const PhysicalParams& params, const SpatialConfiguration& config,
                                           const StateSpace& space, std::span<const CoupledPair> pairs,
                                           const HamiltonianOptions& options = {}) {
  validate(params);
  const int n = space.n_atoms();
  if (config.size() != static_cast<std::size_t>(n))
    throw ArgumentError("build_hamiltonian: configuration has " + std::to_string(config.size()) +
                        " atoms, state space expects " + std::to_string(n));
  for (const Vec3& p : config.positions)
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
      throw ArgumentError("build_hamiltonian: non-finite atom coordinate");

  // Coincident atoms get an infinite pair energy and are pruned with the cutoff.
  std::vector<double> pair_energy(static_cast<std::size_t>(n * n), 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double r2 = distance_squared(config.positions[i], config.positions[j]);
      const double v = r2 > 0.0 ? params.c6 / (r2 * r2 * r2) : std::numeric_limits<double>::infinity();
      pair_energy[i * n + j] = pair_energy[j * n + i] = v;
    }

  const double cutoff = params.rabi > 0.0 ? options.energy_cutoff_factor * params.rabi
                                          : std::numeric_limits<double>::infinity();
  const std::size_t full = space.size();
  constexpr std::uint32_t kDropped = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> row_of(full, kDropped);
  std::vector<double> diagonal;
  std::vector<int> excitations;
  std::vector<Mask> masks;
  diagonal.reserve(full);
  excitations.reserve(full);
  masks.reserve(full);

  int bits[kMaxAtoms];
  for (std::size_t s = 0; s < full; ++s) {
    const Mask mask = space.state(s).mask;
    int k = 0;
    for (Mask m = mask; m != 0; m &= m - 1) bits[k++] = std::countr_zero(m);
    double energy = 0.0;
    for (int a = 0; a < k; ++a)
      for (int b = a + 1; b < k; ++b) energy += pair_energy[bits[a] * n + bits[b]];
    if (energy > cutoff) continue;
    row_of[s] = static_cast<std::uint32_t>(diagonal.size());
    diagonal.push_back(energy);
    excitations.push_back(k);
    masks.push_back(mask);
  }

  const double coupling = params.rabi / 2.0;
  std::vector<HamiltonianMatrix::Edge> edges;
  edges.reserve(pairs.size());
  for (const CoupledPair& p : pairs) {
    const std::uint32_t a = row_of[p.lower], b = row_of[p.upper];
    if (a != kDropped && b != kDropped) edges.push_back({a, b});
  }
  const std::size_t pruned = full - diagonal.size();
  return HamiltonianMatrix(std::move(diagonal), coupling, std::move(edges), std::move(excitations),
                           std::move(masks), space.max_excitations(), pruned, cutoff);
}

inline HamiltonianMatrix build_hamiltonian(const PhysicalParams& params, const SpatialConfiguration& config,
                                           const StateSpace& space, const HamiltonianOptions& options = {}) {
  const auto pairs = coupled_pairs(space);
  return build_hamiltonian(params, config, space, pairs, options);
}

/// q[n][t]: probability of exactly n Rydberg excitations at time_grid[t].
struct ExcitationHistogram {
  std::vector<double> time_grid;
  std::vector<std::vector<double>> q;

  int max_excitations() const noexcept { return static_cast<int>(q.size()) - 1; }
  std::size_t time_points() const noexcept { return time_grid.size(); }

  double column_sum(std::size_t t) const {
    double s = 0.0;
    for (const auto& row : q) s += row[t];
    return s;
  }
};

enum class Propagator { automatic, exact_diagonalization, chebyshev, runge_kutta };

inline const char* to_string(Propagator p) {
  switch (p) {
    case Propagator::automatic: return "automatic";
    case Propagator::exact_diagonalization: return "exact_diagonalization";
    case Propagator::chebyshev: return "chebyshev";
    case Propagator::runge_kutta: return "runge_kutta";
  }
  return "unknown";
}

struct EvolveOptions {
  Propagator method = Propagator::automatic;
  /// automatic: dense diagonalization up to this dimension, Chebyshev above
  std::size_t dense_limit = 8000;
  double norm_tolerance = 1e-8;
  OdeOptions rk{.rel_tol = 1e-10, .abs_tol = 1e-12};
};

inline Propagator resolve_propagator(const HamiltonianMatrix& h, const EvolveOptions& opt) {
  if (opt.method != Propagator::automatic) return opt.method;
  return h.dimension() <= opt.dense_limit ? Propagator::exact_diagonalization : Propagator::chebyshev;
}

/// Eigenpairs of the dense Hamiltonian, eigenvectors as columns.
struct SpectralDecomposition {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};

inline SpectralDecomposition diagonalize(const HamiltonianMatrix& h) {
  SpectralDecomposition sd;
  sd.vectors = h.dense();
  const auto n = static_cast<lapack_int>(h.dimension());
  sd.values.resize(n);
  if (n == 0) return sd;
  const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, sd.vectors.data(), n, sd.values.data());
  if (info != 0) throw IntegrationError("diagonalize: dsyevd failed with info " + std::to_string(info), 1.0);
  return sd;
}

/// J_0(z) .. J_K(z) for z >= 0, by Miller's backward recurrence normalized
/// with J_0 + 2 sum J_2k = 1. K is the first order past z where |J_k| < 1e-17.
inline std::vector<double> bessel_j_sequence(double z) {
  if (!(z >= 0.0) || !std::isfinite(z)) throw ArgumentError("bessel_j_sequence: z must be finite and >= 0");
  if (z == 0.0) return {1.0};
  int start = static_cast<int>(z + 30.0 + 12.0 * std::cbrt(z));
  start += start % 2;
  std::vector<double> j(static_cast<std::size_t>(start) + 1, 0.0);
  double above = 0.0, here = 1e-300, norm = 0.0;
  for (int k = start; k >= 0; --k) {
    j[k] = here;
    if (k % 2 == 0) norm += (k == 0 ? 1.0 : 2.0) * here;
    const double below = k > 0 ? 2.0 * k / z * here - above : 0.0;
    above = here;
    here = below;
    if (std::abs(here) > 1e250) {
      for (int i = k; i <= start; ++i) j[i] *= 1e-250;
      norm *= 1e-250;
      above *= 1e-250;
      here *= 1e-250;
    }
  }
  std::size_t keep = j.size();
  for (std::size_t k = j.size(); k-- > 0;) {
    j[k] /= norm;
    if (keep == k + 1 && k > z && std::abs(j[k]) < 1e-17) keep = k;
  }
  j.resize(std::max<std::size_t>(keep, 2));
  return j;
}

/// exp(-i H dt) by Chebyshev expansion on the Gershgorin interval. Expansion
/// coefficients are cached per distinct step length.
class ChebyshevPropagator {
 public:
  explicit ChebyshevPropagator(const HamiltonianMatrix& h) : h_(&h) {
    const auto [lo, hi] = h.spectral_bounds();
    half_width_ = std::max((hi - lo) / 2.0, 1e-12);
    center_ = (hi + lo) / 2.0;
    scaled_diag_.resize(h.dimension());
    for (std::size_t r = 0; r < h.dimension(); ++r) scaled_diag_[r] = (h.diagonal()[r] - center_) / half_width_;
    scaled_coupling_ = h.coupling() / half_width_;
  }

  void step(Eigen::VectorXcd& psi, double dt) {
    if (dt == 0.0) return;
    const std::vector<std::complex<double>>& c = coefficients(dt);
    const Eigen::Index n = psi.size();
    prev_ = psi;
    apply_scaled(prev_, cur_);
    result_ = c[0] * prev_ + c[1] * cur_;
    for (std::size_t k = 2; k < c.size(); ++k) {
      apply_scaled(cur_, next_);
      next_ = 2.0 * next_ - prev_;
      result_ += c[k] * next_;
      prev_.swap(cur_);
      cur_.swap(next_);
    }
    psi = std::exp(std::complex<double>(0.0, -center_ * dt)) * result_;
    (void)n;
  }

  std::size_t terms(double dt) { return coefficients(dt).size(); }

 private:
  void apply_scaled(const Eigen::VectorXcd& x, Eigen::VectorXcd& y) const {
    const std::size_t n = h_->dimension();
    y.resize(static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < n; ++r) {
      std::complex<double> acc = 0.0;
      for (std::uint32_t nb : h_->neighbors(r)) acc += x[nb];
      y[static_cast<Eigen::Index>(r)] = scaled_diag_[r] * x[static_cast<Eigen::Index>(r)] + scaled_coupling_ * acc;
    }
  }

  const std::vector<std::complex<double>>& coefficients(double dt) {
    auto it = cache_.find(dt);
    if (it != cache_.end()) return it->second;
    const double z = std::abs(half_width_ * dt);
    std::vector<std::complex<double>> c;
    // (-i)^k cycles 1, -i, -1, i; negative dt conjugates the series
    const std::complex<double> unit = dt > 0.0 ? std::complex<double>(0.0, -1.0) : std::complex<double>(0.0, 1.0);
    std::complex<double> phase = 1.0;
    const std::vector<double> j = bessel_j_sequence(z);
    c.reserve(j.size());
    for (std::size_t k = 0; k < j.size(); ++k) {
      c.push_back((k == 0 ? 1.0 : 2.0) * j[k] * phase);
      phase *= unit;
    }
    return cache_.emplace(dt, std::move(c)).first->second;
  }

  const HamiltonianMatrix* h_;
  double half_width_ = 1.0;
  double center_ = 0.0;
  std::vector<double> scaled_diag_;
  double scaled_coupling_ = 0.0;
  std::map<double, std::vector<std::complex<double>>> cache_;
  Eigen::VectorXcd prev_, cur_, next_, result_;
};

namespace detail {

inline void check_time_grid(std::span<const double> grid) {
  if (grid.empty()) return;
  if (!(grid.front() >= 0.0)) throw ArgumentError("time grid must start at t >= 0");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] >= grid[i - 1])) throw ArgumentError("time grid must be ascending");
}

inline void audit_norm(double norm2, double tolerance, double t, double& worst) {
  const double dev = std::abs(norm2 - 1.0);
  worst = std::max(worst, dev);
  if (!(dev <= tolerance))
    throw IntegrationError("norm drifted beyond tolerance at t=" + std::to_string(t), dev);
}

// Integrates -i H from psi, reporting the state at every grid time.
template <class Observer>
void propagate_grid(const HamiltonianMatrix& h, Eigen::VectorXcd psi, std::span<const double> grid,
                    const EvolveOptions& opt, Observer&& observe) {
  check_time_grid(grid);
  if (grid.empty()) return;
  const Propagator method = resolve_propagator(h, opt);
  const auto n = static_cast<Eigen::Index>(h.dimension());
  if (psi.size() != n) throw ArgumentError("propagate: state length does not match Hamiltonian dimension");

  switch (method) {
    case Propagator::exact_diagonalization: {
      const SpectralDecomposition sd = diagonalize(h);
      const Eigen::VectorXcd overlap = sd.vectors.transpose() * psi;
      Eigen::VectorXcd coeff(n);
      for (std::size_t i = 0; i < grid.size(); ++i) {
        for (Eigen::Index j = 0; j < n; ++j)
          coeff[j] = overlap[j] * std::exp(std::complex<double>(0.0, -sd.values[j] * grid[i]));
        const Eigen::VectorXcd state = sd.vectors * coeff;
        observe(i, grid[i], state);
      }
      return;
    }
    case Propagator::chebyshev: {
      ChebyshevPropagator cheb(h);
      double t = 0.0;
      for (std::size_t i = 0; i < grid.size(); ++i) {
        cheb.step(psi, grid[i] - t);
        t = grid[i];
        observe(i, t, std::as_const(psi));
      }
      return;
    }
    case Propagator::runge_kutta:
    case Propagator::automatic: {
      auto rhs = [&h](double, const Eigen::VectorXcd& y, Eigen::VectorXcd& dy) {
        h.apply(y, dy);
        dy *= std::complex<double>(0.0, -1.0);
      };
      std::vector<double> with_origin;
      std::span<const double> g = grid;
      const bool shifted = grid.front() != 0.0;
      if (shifted) {
        with_origin.reserve(grid.size() + 1);
        with_origin.push_back(0.0);
        with_origin.insert(with_origin.end(), grid.begin(), grid.end());
        g = with_origin;
      }
      integrate_adaptive(
          rhs, psi, g,
          [&](std::size_t i, double t, const Eigen::VectorXcd& y) {
            if (shifted && i == 0) return;
            observe(shifted ? i - 1 : i, t, y);
          },
          opt.rk);
      return;
    }
  }
}

}  // namespace detail

/// exp(-i H t) psi0.
inline Eigen::VectorXcd propagate(const HamiltonianMatrix& h, const Eigen::VectorXcd& psi0, double t,
                                  const EvolveOptions& options = {}) {
  if (t < 0.0) throw ArgumentError("propagate: t must be >= 0 (negate the Hamiltonian to run backwards)");
  Eigen::VectorXcd out;
  const double grid[] = {t};
  detail::propagate_grid(h, psi0, grid, options,
                         [&](std::size_t, double, const Eigen::VectorXcd& state) { out = state; });
  return out;
}

/// Evolves |G> (row 0) and records per-count Rydberg populations.
inline ExcitationHistogram evolve(const HamiltonianMatrix& h, std::span<const double> time_grid,
                                  const EvolveOptions& options = {}) {
  detail::check_time_grid(time_grid);
  ExcitationHistogram hist;
  hist.time_grid.assign(time_grid.begin(), time_grid.end());
  hist.q.assign(static_cast<std::size_t>(h.max_excitations()) + 1, std::vector<double>(time_grid.size(), 0.0));
  if (time_grid.empty()) return hist;
  if (h.dimension() == 0 || h.masks()[0] != 0) throw ArgumentError("evolve: row 0 must be the all-ground state");
  if (time_grid.front() != 0.0) throw ArgumentError("evolve: time grid must start at 0");

  const auto n = static_cast<Eigen::Index>(h.dimension());
  const auto exc = h.excitations();
  double worst = 0.0;
  const Propagator method = resolve_propagator(h, options);

  if (method == Propagator::exact_diagonalization) {
    // amplitudes a(t) = V (c .* exp(-i lambda t)) with c = first row of V,
    // evaluated as two real matrix products over blocks of output times
    const SpectralDecomposition sd = diagonalize(h);
    std::vector<Eigen::Index> active;
    for (Eigen::Index j = 0; j < n; ++j)
      if (std::abs(sd.vectors(0, j)) > 1e-15) active.push_back(j);
    const auto m = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd basis(n, m);
    Eigen::VectorXd weight(m), energy(m);
    for (Eigen::Index a = 0; a < m; ++a) {
      basis.col(a) = sd.vectors.col(active[static_cast<std::size_t>(a)]);
      weight[a] = sd.vectors(0, active[static_cast<std::size_t>(a)]);
      energy[a] = sd.values[active[static_cast<std::size_t>(a)]];
    }
    constexpr Eigen::Index kBlock = 64;
    const auto nt = static_cast<Eigen::Index>(time_grid.size());
    for (Eigen::Index t0 = 0; t0 < nt; t0 += kBlock) {
      const Eigen::Index bt = std::min(kBlock, nt - t0);
      Eigen::MatrixXd re(m, bt), im(m, bt);
      for (Eigen::Index c = 0; c < bt; ++c) {
        const double t = time_grid[static_cast<std::size_t>(t0 + c)];
        for (Eigen::Index a = 0; a < m; ++a) {
          const double phase = energy[a] * t;
          re(a, c) = weight[a] * std::cos(phase);
          im(a, c) = -weight[a] * std::sin(phase);
        }
      }
      const Eigen::MatrixXd amp_re = basis * re;
      const Eigen::MatrixXd amp_im = basis * im;
      for (Eigen::Index c = 0; c < bt; ++c) {
        const auto ti = static_cast<std::size_t>(t0 + c);
        double norm2 = 0.0;
        for (Eigen::Index s = 0; s < n; ++s) {
          const double p = amp_re(s, c) * amp_re(s, c) + amp_im(s, c) * amp_im(s, c);
          hist.q[static_cast<std::size_t>(exc[static_cast<std::size_t>(s)])][ti] += p;
          norm2 += p;
        }
        detail::audit_norm(norm2, options.norm_tolerance, time_grid[ti], worst);
      }
    }
    return hist;
  }

  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(n);
  psi[0] = 1.0;
  detail::propagate_grid(h, std::move(psi), time_grid, options,
                         [&](std::size_t i, double t, const Eigen::VectorXcd& state) {
                           double norm2 = 0.0;
                           for (Eigen::Index s = 0; s < n; ++s) {
                             const double p = std::norm(state[s]);
                             hist.q[static_cast<std::size_t>(exc[static_cast<std::size_t>(s)])][i] += p;
                             norm2 += p;
                           }
                           detail::audit_norm(norm2, options.norm_tolerance, t, worst);
                         });
  return hist;
}

/// Mean number of excitations N_Ry(t) and probability of at least one, P_Ry(t).
struct ExcitationExpectations {
  std::vector<double> n_ry;
  std::vector<double> p_ry;
};

inline ExcitationExpectations excitation_expectations(const ExcitationHistogram& hist) {
  const std::size_t nt = hist.time_points();
  ExcitationExpectations out{std::vector<double>(nt, 0.0), std::vector<double>(nt, 0.0)};
  for (std::size_t n = 1; n < hist.q.size(); ++n)
    for (std::size_t t = 0; t < nt; ++t) {
      out.n_ry[t] += static_cast<double>(n) * hist.q[n][t];
      out.p_ry[t] += hist.q[n][t];
    }
  return out;
}

}  // namespace rydjc
