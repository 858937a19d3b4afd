#pragma once

#include <numbers>

// Internal frequencies are angular, in rad/us. Lengths are in um, times in us.
namespace rydjc::units {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Ordinary frequency nu in MHz -> angular frequency 2*pi*nu in rad/us.
constexpr double angular_from_mhz(double mhz) { return two_pi * mhz; }
constexpr double angular_from_khz(double khz) { return two_pi * khz * 1e-3; }
constexpr double mhz_from_angular(double rad_per_us) { return rad_per_us / two_pi; }
constexpr double khz_from_angular(double rad_per_us) { return rad_per_us / two_pi * 1e3; }

}  // namespace rydjc::units
