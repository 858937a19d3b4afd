#pragma once

// Counter-based seed derivation. Every task gets its own engine seeded from
// (run seed, task index), so draws do not depend on which worker ran the task
// or in what order.

#include <cstdint>
#include <random>

namespace rydjc {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0xD1B54A32D192ED03ull));
}

using RandomStream = std::mt19937_64;

inline RandomStream task_stream(std::uint64_t seed, std::uint64_t index) {
  return RandomStream(derive_seed(seed, index));
}

}  // namespace rydjc
