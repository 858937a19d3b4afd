#pragma once

// Closed-form Jaynes-Cummings reference model: atom-number statistics, the
// photon-field excited-state probability and its blockaded-ensemble analog.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "rydjc/errors.hpp"

namespace rydjc {

/// Poisson law truncated at n_max; the mass above n_max is tracked, not renormalized away.
struct PoissonDist {
  double mean = 7.0;
  int n_max = 20;
};

struct BinomialDist {
  int trials = 9;
  double success_prob = 0.5;
};

/// Degenerate distribution: exactly `count` atoms.
struct FixedCount {
  int count = 1;
};

using AtomNumberDist = std::variant<FixedCount, PoissonDist, BinomialDist>;

/// Resonant drive. `rabi` is the single-atom Rabi frequency, `coupling` the
/// atom-photon coupling g of the cavity model. Both in rad/us.
struct DriveParams {
  double rabi = 0.0;
  double coupling = 0.0;
};

inline void validate(const PoissonDist& d) {
  if (!(d.mean > 0.0) || !std::isfinite(d.mean))
    throw ArgumentError("PoissonDist: mean must be positive and finite");
  if (d.n_max < 1) throw ArgumentError("PoissonDist: n_max must be >= 1");
}

inline void validate(const BinomialDist& d) {
  if (d.trials < 1) throw ArgumentError("BinomialDist: trials must be >= 1");
  if (!(d.success_prob >= 0.0 && d.success_prob <= 1.0))
    throw ArgumentError("BinomialDist: success_prob must lie in [0, 1]");
}

inline void validate(const FixedCount& d) {
  if (d.count < 0) throw ArgumentError("FixedCount: count must be >= 0");
}

inline void validate(const AtomNumberDist& d) {
  std::visit([](const auto& x) { validate(x); }, d);
}

inline double poisson_pmf(const PoissonDist& dist, int n) {
  validate(dist);
  if (n < 0) throw ArgumentError("poisson_pmf: n must be >= 0");
  const double log_p = n * std::log(dist.mean) - dist.mean - std::lgamma(n + 1.0);
  return std::exp(log_p);
}

/// Probability mass above n_max, summed directly over the tail (no 1 - sum cancellation).
inline double poisson_tail_mass(const PoissonDist& dist) {
  validate(dist);
  double sum = 0.0;
  const double n_stop = dist.mean + 40.0 * std::sqrt(dist.mean) + 60.0;
  for (int n = dist.n_max + 1;; ++n) {
    const double p = poisson_pmf(dist, n);
    sum += p;
    if (n > n_stop && p <= 1e-18 * sum) break;
    if (n > dist.mean && p == 0.0) break;
  }
  return sum;
}

/// C(n, k) by the multiplicative recurrence; exact in double for the sizes used here.
inline double binomial_coefficient(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double c = 1.0;
  // every partial product is the integer C(n - k + i, i)
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

inline double binomial_pmf(const BinomialDist& dist, int k) {
  validate(dist);
  if (k < 0 || k > dist.trials) throw ArgumentError("binomial_pmf: k out of range [0, trials]");
  const double q = dist.success_prob;
  return binomial_coefficient(dist.trials, k) * std::pow(q, k) * std::pow(1.0 - q, dist.trials - k);
}

/// Largest atom number with non-zero weight in the (truncated) distribution.
inline int support_max(const AtomNumberDist& dist) {
  return std::visit(
      [](const auto& d) -> int {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, FixedCount>) return d.count;
        else if constexpr (std::is_same_v<T, PoissonDist>) return d.n_max;
        else return d.trials;
      },
      dist);
}

/// Weight of `n` atoms; zero outside the truncated support.
inline double atom_number_pmf(const AtomNumberDist& dist, int n) {
  if (n < 0) throw ArgumentError("atom_number_pmf: n must be >= 0");
  return std::visit(
      [n](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, FixedCount>) return n == d.count ? 1.0 : 0.0;
        else if constexpr (std::is_same_v<T, PoissonDist>) return n <= d.n_max ? poisson_pmf(d, n) : 0.0;
        else return n <= d.trials ? binomial_pmf(d, n) : 0.0;
      },
      dist);
}

inline double tail_mass(const AtomNumberDist& dist) {
  if (const auto* p = std::get_if<PoissonDist>(&dist)) return poisson_tail_mass(*p);
  return 0.0;
}

inline double mean_atom_number(const AtomNumberDist& dist) {
  return std::visit(
      [](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, FixedCount>) return d.count;
        else if constexpr (std::is_same_v<T, PoissonDist>) return d.mean;
        else return d.trials * d.success_prob;
      },
      dist);
}

inline std::string describe(const AtomNumberDist& dist) {
  return std::visit(
      [](const auto& d) -> std::string {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, FixedCount>) return "fixed(" + std::to_string(d.count) + ")";
        else if constexpr (std::is_same_v<T, PoissonDist>)
          return "poisson(mean=" + std::to_string(d.mean) + ", n_max=" + std::to_string(d.n_max) + ")";
        else
          return "binomial(trials=" + std::to_string(d.trials) + ", p=" + std::to_string(d.success_prob) + ")";
      },
      dist);
}

/// Excited-state probability of one atom in a photon field whose photon
/// number follows `photons`: sum_{n>=1} p(n) sin^2(g t sqrt(n)).
inline double jc_excited_probability(const DriveParams& drive, const AtomNumberDist& photons, double t) {
  validate(photons);
  if (t < 0.0) throw ArgumentError("jc_excited_probability: t must be >= 0");
  double sum = 0.0;
  for (int n = 1; n <= support_max(photons); ++n) {
    const double w = atom_number_pmf(photons, n);
    if (w == 0.0) continue;
    const double s = std::sin(drive.coupling * t * std::sqrt(static_cast<double>(n)));
    sum += w * s * s;
  }
  return sum;
}

/// Single-excitation probability of a perfectly blockaded ensemble with a
/// random atom number: sum_N p(N) sin^2(sqrt(N) Omega t / 2). N = 0 contributes nothing.
inline double collective_p1(const DriveParams& drive, const AtomNumberDist& dist, double t) {
  validate(dist);
  if (t < 0.0) throw ArgumentError("collective_p1: t must be >= 0");
  double sum = 0.0;
  for (int n = 1; n <= support_max(dist); ++n) {
    const double w = atom_number_pmf(dist, n);
    if (w == 0.0) continue;
    const double s = std::sin(std::sqrt(static_cast<double>(n)) * drive.rabi * t / 2.0);
    sum += w * s * s;
  }
  return sum;
}

/// Rephasing time of adjacent-N collective Rabi components, 4 pi sqrt(mean) / Omega.
inline double revival_time_estimate(const DriveParams& drive, double mean_n) {
  if (mean_n < 1.0) throw ArgumentError("revival_time_estimate: mean_n must be >= 1");
  if (!(drive.rabi > 0.0)) throw ArgumentError("revival_time_estimate: rabi must be positive");
  return 4.0 * std::numbers::pi * std::sqrt(mean_n) / drive.rabi;
}

}  // namespace rydjc
