#pragma once

// N-atom basis truncated to at most m Rydberg excitations. Bit i of a mask is
// set when atom i is in |r>. States are ordered by excitation count, then by
// mask, so the basis for m - 1 is a prefix of the basis for m.

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rydjc/errors.hpp"

namespace rydjc {

using Mask = std::uint32_t;

inline constexpr int kMaxAtoms = 24;

struct BasisState {
  Mask mask = 0;

  friend bool operator==(const BasisState&, const BasisState&) = default;
};

inline int excitation_count(BasisState state) { return std::popcount(state.mask); }

class StateSpace {
 public:
  StateSpace(int n_atoms, int max_excitations) : n_atoms_(n_atoms), max_excitations_(max_excitations) {
    if (n_atoms < 1 || n_atoms > kMaxAtoms)
      throw CapacityError("StateSpace: n_atoms must be in [1, " + std::to_string(kMaxAtoms) + "], got " +
                          std::to_string(n_atoms));
    if (max_excitations < 0 || max_excitations > n_atoms)
      throw ArgumentError("StateSpace: max_excitations must be in [0, n_atoms]");

    for (int n = 0; n <= kMaxAtoms; ++n) {
      choose_[n][0] = 1;
      for (int k = 1; k <= kMaxAtoms; ++k) choose_[n][k] = n == 0 ? 0 : choose_[n - 1][k - 1] + choose_[n - 1][k];
    }

    std::size_t total = 0;
    for (int k = 0; k <= max_excitations; ++k) {
      sector_offset_[k] = total;
      total += choose_[n_atoms][k];
    }
    sector_offset_[max_excitations + 1] = total;
    states_.reserve(total);

    const Mask limit = n_atoms == 32 ? 0 : (Mask{1} << n_atoms);
    for (int k = 0; k <= max_excitations; ++k) {
      if (k == 0) {
        states_.push_back({0});
        continue;
      }
      // Gosper's hack walks all k-bit masks in ascending order.
      Mask v = (Mask{1} << k) - 1;
      while (v < limit) {
        states_.push_back({v});
        const Mask t = v | (v - 1);
        v = (t + 1) | (((~t & -~t) - 1) >> (std::countr_zero(v) + 1));
      }
    }
  }

  int n_atoms() const noexcept { return n_atoms_; }
  int max_excitations() const noexcept { return max_excitations_; }
  std::size_t size() const noexcept { return states_.size(); }
  std::span<const BasisState> states() const noexcept { return states_; }
  BasisState state(std::size_t i) const { return states_.at(i); }

  std::size_t sector_offset(int k) const { return sector_offset_.at(k); }
  std::size_t sector_size(int k) const { return sector_offset_.at(k + 1) - sector_offset_.at(k); }

  /// Ordinal of `mask`, or nothing if the mask is outside this space.
  /// Within a sector the colex rank equals the ascending-mask position.
  std::optional<std::size_t> index_of(Mask mask) const noexcept {
    if (n_atoms_ < 32 && (mask >> n_atoms_) != 0) return std::nullopt;
    const int k = std::popcount(mask);
    if (k > max_excitations_) return std::nullopt;
    std::size_t rank = 0;
    int i = 1;
    for (Mask m = mask; m != 0; m &= m - 1, ++i) rank += choose_[std::countr_zero(m)][i];
    return sector_offset_[k] + rank;
  }

  friend bool operator==(const StateSpace& a, const StateSpace& b) {
    return a.n_atoms_ == b.n_atoms_ && a.max_excitations_ == b.max_excitations_ && a.states_ == b.states_;
  }

 private:
  int n_atoms_;
  int max_excitations_;
  std::vector<BasisState> states_;
  std::array<std::size_t, kMaxAtoms + 2> sector_offset_{};
  std::array<std::array<std::size_t, kMaxAtoms + 1>, kMaxAtoms + 1> choose_{};
};

inline StateSpace enumerate_basis(int n_atoms, int max_excitations) { return StateSpace(n_atoms, max_excitations); }

/// Single-atom flip g <-> r between two basis states; `lower` has one excitation fewer.
struct CoupledPair {
  std::size_t lower;
  std::size_t upper;
  int atom;

  friend bool operator==(const CoupledPair&, const CoupledPair&) = default;
};

/// All edges of the truncated hypercube, ordered by lower index then atom.
inline std::vector<CoupledPair> coupled_pairs(const StateSpace& space) {
  std::vector<CoupledPair> pairs;
  const std::size_t below_top = space.sector_offset(space.max_excitations());
  for (std::size_t a = 0; a < below_top; ++a) {
    const Mask mask = space.state(a).mask;
    for (int i = 0; i < space.n_atoms(); ++i) {
      const Mask bit = Mask{1} << i;
      if (mask & bit) continue;
      pairs.push_back({a, *space.index_of(mask | bit), i});
    }
  }
  return pairs;
}

}  // namespace rydjc
