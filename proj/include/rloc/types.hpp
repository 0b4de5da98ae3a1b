#pragma once

#include <array>
#include <cstdint>

#include <Eigen/Dense>

namespace rloc {

/// Both benchmark plants carry a four dimensional actuator state.
inline constexpr int kStateDim = 4;
inline constexpr int kMaxControlDim = 2;

using State = Eigen::Matrix<double, kStateDim, 1>;
using Control = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxControlDim, 1>;
using Gain = Eigen::Matrix<double, Eigen::Dynamic, kStateDim, 0, kMaxControlDim, kStateDim>;

/// Marks state dimensions that live on the circle (wrapped to (-pi, pi]).
using PeriodicMask = std::array<bool, kStateDim>;

}  // namespace rloc
