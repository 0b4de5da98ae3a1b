#pragma once

#include <numbers>

#include "rloc/types.hpp"

namespace rloc {

inline constexpr double kPi = std::numbers::pi;

constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Wraps an angle to the half-open interval (-pi, pi].
double wrap_angle(double angle);

/// Shortest signed angular difference a - b, in (-pi, pi].
double angle_difference(double a, double b);

/// x - reference with periodic dimensions replaced by their shortest angular
/// difference.
State state_error(const State& x, const State& reference, const PeriodicMask& periodic);

}  // namespace rloc
