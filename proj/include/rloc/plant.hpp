#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rloc/random.hpp"
#include "rloc/types.hpp"

namespace rloc {

/// Thrown when an integration step produces a non-finite state.
class IntegrationDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Planar two-link arm. Inertias i1, i2 are taken about the shoulder and
/// elbow joints respectively; c1, c2 locate the link centres of mass.
struct ArmPhysics {
  double l1 = 0.3;
  double l2 = 0.33;
  double m1 = 1.4;
  double m2 = 2.5;
  double c1 = 0.11;
  double c2 = 0.165;
  double i1 = 0.025;
  double i2 = 0.072;
  Eigen::Matrix2d joint_friction = (Eigen::Matrix2d() << 0.5, 0.1, 0.1, 0.5).finished();
};

/// Cart with a point-mass pendulum; theta = 0 is upright.
struct CartPolePhysics {
  double length = 0.6;
  double pole_mass = 0.5;
  double cart_mass = 0.5;
  double gravity = 9.80665;
  double pole_friction = 0.0;
  double cart_friction = 0.1;
};

enum class PlantKind { kArm, kCartPole };

std::string_view to_string(PlantKind kind);
PlantKind plant_kind_from_string(std::string_view name);

/// One discretised axis of the actuator state (used for symbolic states,
/// start grids, centre placement and nearest-centre distances).
struct Axis {
  int dim = 0;
  double lo = 0.0;
  double hi = 0.0;
  bool periodic = false;
};

struct PlantParams {
  PlantKind kind = PlantKind::kCartPole;
  std::variant<ArmPhysics, CartPolePhysics> physics = CartPolePhysics{};
  double u_min = -20.0;
  double u_max = 20.0;
  double dt = 0.01;
  int n_steps = 300;
  State target = State::Zero();
  /// Per-dimension std of additive state noise applied after each step.
  double noise_std = 0.0;

  static PlantParams arm();
  static PlantParams cart_pole();

  int control_dim() const { return kind == PlantKind::kArm ? 2 : 1; }
  PeriodicMask periodic() const;

  /// The two discretised dimensions: arm (theta1, theta2) over [0, pi]^2;
  /// cart-pole theta over (-pi, pi] and theta_dot over +-250 deg/s.
  std::array<Axis, 2> discretised_axes() const;
  /// Dimensions holding joint angles / joint angular velocities.
  std::vector<int> angle_dims() const;
  std::vector<int> angular_velocity_dims() const;
  /// Dimensions that receive random values when placing linearisation
  /// centres; everything else is zero.
  std::vector<int> centre_dims() const;

  /// Throws std::invalid_argument on non-physical values.
  void validate() const;
};

struct Trajectory {
  std::vector<State> states;
  std::vector<Control> controls;
  double dt = 0.0;
};

using Derivative = std::function<State(const State&, const Control&)>;
using ControlSource = std::function<Control(const State&)>;

State arm_derivative(const State& x, const Control& u, const ArmPhysics& p);
State cartpole_derivative(const State& x, const Control& u, const CartPolePhysics& p);

/// Arm inertia matrix and Coriolis/centripetal vector, exposed for tests.
Eigen::Matrix2d arm_inertia(const State& x, const ArmPhysics& p);
Eigen::Vector2d arm_coriolis(const State& x, const ArmPhysics& p);

/// Total mechanical energy of the cart-pole (kinetic + pole potential).
double cartpole_energy(const State& x, const CartPolePhysics& p);

/// Classic four-stage Runge-Kutta step with u held over the step. Throws
/// IntegrationDiverged if the result is not finite.
template <typename F>
State rk4_step(F&& f, const State& x, const Control& u, double dt) {
  const State k1 = dt * f(x, u);
  const State k2 = dt * f(State(x + 0.5 * k1), u);
  const State k3 = dt * f(State(x + 0.5 * k2), u);
  const State k4 = dt * f(State(x + k3), u);
  State next = x + (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
  if (!next.allFinite()) throw IntegrationDiverged("rk4_step: non-finite state");
  return next;
}

Control saturate(const Control& u, const PlantParams& p);

/// Plant dynamics dispatch.
State plant_derivative(const State& x, const Control& u, const PlantParams& p);

/// Wraps cart-pole theta; clamps arm angles to [0, pi], zeroing the
/// velocity of a joint that hits its limit.
State normalise_state(const State& x, const PlantParams& p);

/// One noise-free plant step: saturate, RK4, normalise.
State plant_step(const State& x, const Control& u, const PlantParams& p);

/// Rolls out n_steps states (n_steps - 1 controls) from x0. Gaussian noise of
/// std noise_std is added to the state after every step; the generator is
/// only drawn from when noise_std > 0.
Trajectory simulate(const PlantParams& p, const State& x0, const ControlSource& policy,
                    int n_steps, double noise_std, Rng& rng);

/// CSV with one row per step: k,t,state...,control... (final row has no control).
void write_trajectory_csv(const Trajectory& traj, const std::string& path);

}  // namespace rloc
