#include "rloc/plant.hpp"

#include <cmath>

#include <fmt/format.h>

#include "rloc/angles.hpp"
#include "rloc/serialization.hpp"

namespace rloc {

std::string_view to_string(PlantKind kind) {
  return kind == PlantKind::kArm ? "arm" : "cartpole";
}

PlantKind plant_kind_from_string(std::string_view name) {
  if (name == "arm") return PlantKind::kArm;
  if (name == "cartpole") return PlantKind::kCartPole;
  throw std::invalid_argument(fmt::format("unknown plant '{}' (expected arm|cartpole)", name));
}

PlantParams PlantParams::arm() {
  PlantParams p;
  p.kind = PlantKind::kArm;
  p.physics = ArmPhysics{};
  p.u_min = -10.0;
  p.u_max = 10.0;
  p.dt = 0.01;
  p.n_steps = 300;
  p.target << deg2rad(90.0), deg2rad(90.0), 0.0, 0.0;
  return p;
}

PlantParams PlantParams::cart_pole() {
  PlantParams p;
  p.kind = PlantKind::kCartPole;
  p.physics = CartPolePhysics{};
  p.u_min = -20.0;
  p.u_max = 20.0;
  p.dt = 0.01;
  p.n_steps = 300;
  p.target = State::Zero();
  return p;
}

PeriodicMask PlantParams::periodic() const {
  if (kind == PlantKind::kCartPole) return {false, false, true, false};
  return {false, false, false, false};
}

std::array<Axis, 2> PlantParams::discretised_axes() const {
  if (kind == PlantKind::kArm) {
    return {Axis{0, 0.0, kPi, false}, Axis{1, 0.0, kPi, false}};
  }
  return {Axis{2, -kPi, kPi, true}, Axis{3, deg2rad(-250.0), deg2rad(250.0), false}};
}

std::vector<int> PlantParams::angle_dims() const {
  if (kind == PlantKind::kArm) return {0, 1};
  return {2};
}

std::vector<int> PlantParams::angular_velocity_dims() const {
  if (kind == PlantKind::kArm) return {2, 3};
  return {3};
}

std::vector<int> PlantParams::centre_dims() const { return angle_dims(); }

void PlantParams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(fmt::format("invalid plant parameters: {}", what));
  };
  require(dt > 0.0, "dt must be positive");
  require(u_min < u_max, "u_min must be below u_max");
  require(n_steps >= 2, "n_K must be at least 2");
  require(noise_std >= 0.0, "noise_std must be non-negative");
  require(target.allFinite(), "target must be finite");
  if (kind == PlantKind::kArm) {
    const auto* a = std::get_if<ArmPhysics>(&physics);
    require(a != nullptr, "arm plant needs arm physics");
    require(a->l1 > 0 && a->l2 > 0, "link lengths must be positive");
    require(a->m1 > 0 && a->m2 > 0, "link masses must be positive");
    require(a->i1 > 0 && a->i2 > 0, "inertias must be positive");
    require(a->c1 > 0 && a->c2 > 0, "centre-of-mass offsets must be positive");
  } else {
    const auto* c = std::get_if<CartPolePhysics>(&physics);
    require(c != nullptr, "cart-pole plant needs cart-pole physics");
    require(c->length > 0, "pendulum length must be positive");
    require(c->pole_mass > 0 && c->cart_mass > 0, "masses must be positive");
    require(c->gravity >= 0, "gravity must be non-negative");
  }
}

Eigen::Matrix2d arm_inertia(const State& x, const ArmPhysics& p) {
  const double coupling = p.m2 * p.l1 * p.c2 * std::cos(x[1]);
  Eigen::Matrix2d m;
  m(0, 0) = p.i1 + p.i2 + p.m2 * p.l1 * p.l1 + 2.0 * coupling;
  m(0, 1) = p.i2 + coupling;
  m(1, 0) = m(0, 1);
  m(1, 1) = p.i2;
  return m;
}

Eigen::Vector2d arm_coriolis(const State& x, const ArmPhysics& p) {
  const double a = p.m2 * p.l1 * p.c2 * std::sin(x[1]);
  return Eigen::Vector2d(-x[3] * (2.0 * x[2] + x[3]) * a, x[2] * x[2] * a);
}

State arm_derivative(const State& x, const Control& u, const ArmPhysics& p) {
  const Eigen::Matrix2d m = arm_inertia(x, p);
  const Eigen::Vector2d qd = x.tail<2>();
  const Eigen::Vector2d rhs = Eigen::Vector2d(u[0], u[1]) - arm_coriolis(x, p) - p.joint_friction * qd;
  const double det = m.determinant();
  if (!(std::abs(det) > 1e-12)) {
    throw std::invalid_argument("arm_derivative: singular inertia matrix");
  }
  const Eigen::Vector2d qdd = m.inverse() * rhs;
  State dx;
  dx << qd, qdd;
  return dx;
}

State cartpole_derivative(const State& x, const Control& u, const CartPolePhysics& p) {
  const double zd = x[1];
  const double th = x[2];
  const double thd = x[3];
  const double s = std::sin(th);
  const double c = std::cos(th);
  const double ml = p.pole_mass * p.length;

  // M(q) qdd = tau - C(q, qd) qd - G(q) - B (sgn(zd), thd)
  const double m11 = p.pole_mass + p.cart_mass;
  const double m12 = ml * c;
  const double m22 = ml * p.length;
  // Speeds below 1e-9 m/s count as rest so round-off cannot switch on Coulomb friction.
  constexpr double kRestSpeed = 1e-9;
  const double sgn = (zd > kRestSpeed) - (zd < -kRestSpeed);
  const double r1 = u[0] + ml * thd * thd * s - p.cart_friction * sgn;
  const double r2 = ml * p.gravity * s - p.pole_friction * thd;
  const double det = m11 * m22 - m12 * m12;

  State dx;
  dx[0] = zd;
  dx[1] = (m22 * r1 - m12 * r2) / det;
  dx[2] = thd;
  dx[3] = (m11 * r2 - m12 * r1) / det;
  return dx;
}

double cartpole_energy(const State& x, const CartPolePhysics& p) {
  const double zd = x[1];
  const double thd = x[3];
  const double c = std::cos(x[2]);
  const double kinetic = 0.5 * (p.cart_mass + p.pole_mass) * zd * zd +
                         p.pole_mass * p.length * c * zd * thd +
                         0.5 * p.pole_mass * p.length * p.length * thd * thd;
  return kinetic + p.pole_mass * p.gravity * p.length * c;
}

Control saturate(const Control& u, const PlantParams& p) {
  return u.cwiseMax(p.u_min).cwiseMin(p.u_max);
}

State plant_derivative(const State& x, const Control& u, const PlantParams& p) {
  if (p.kind == PlantKind::kArm) return arm_derivative(x, u, std::get<ArmPhysics>(p.physics));
  return cartpole_derivative(x, u, std::get<CartPolePhysics>(p.physics));
}

State normalise_state(const State& x, const PlantParams& p) {
  State out = x;
  if (p.kind == PlantKind::kCartPole) {
    out[2] = wrap_angle(out[2]);
    return out;
  }
  for (int j = 0; j < 2; ++j) {
    if (out[j] < 0.0) {
      out[j] = 0.0;
      if (out[j + 2] < 0.0) out[j + 2] = 0.0;
    } else if (out[j] > kPi) {
      out[j] = kPi;
      if (out[j + 2] > 0.0) out[j + 2] = 0.0;
    }
  }
  return out;
}

State plant_step(const State& x, const Control& u, const PlantParams& p) {
  const Control applied = saturate(u, p);
  State next;
  if (p.kind == PlantKind::kArm) {
    const auto& arm = std::get<ArmPhysics>(p.physics);
    next = rk4_step([&arm](const State& s, const Control& c) { return arm_derivative(s, c, arm); },
                    x, applied, p.dt);
  } else {
    const auto& cp = std::get<CartPolePhysics>(p.physics);
    next = rk4_step(
        [&cp](const State& s, const Control& c) { return cartpole_derivative(s, c, cp); }, x,
        applied, p.dt);
  }
  return normalise_state(next, p);
}

Trajectory simulate(const PlantParams& p, const State& x0, const ControlSource& policy,
                    int n_steps, double noise_std, Rng& rng) {
  if (n_steps < 2) throw std::invalid_argument("simulate: n_steps must be at least 2");
  Trajectory traj;
  traj.dt = p.dt;
  traj.states.reserve(n_steps);
  traj.controls.reserve(n_steps - 1);
  traj.states.push_back(normalise_state(x0, p));
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int k = 0; k + 1 < n_steps; ++k) {
    const State& x = traj.states.back();
    const Control u = saturate(policy(x), p);
    State next = plant_step(x, u, p);
    if (noise_std > 0.0) {
      for (int i = 0; i < kStateDim; ++i) next[i] += noise_std * noise(rng);
      next = normalise_state(next, p);
      if (!next.allFinite()) throw IntegrationDiverged("simulate: non-finite state");
    }
    traj.controls.push_back(u);
    traj.states.push_back(next);
  }
  return traj;
}

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  const int m = traj.controls.empty() ? 0 : static_cast<int>(traj.controls.front().size());
  std::string out = "k,t";
  for (int i = 0; i < kStateDim; ++i) out += fmt::format(",x{}", i);
  for (int j = 0; j < m; ++j) out += fmt::format(",u{}", j);
  out += '\n';
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    out += fmt::format("{},{}", k, format_double(static_cast<double>(k) * traj.dt));
    for (int i = 0; i < kStateDim; ++i) out += "," + format_double(traj.states[k][i]);
    for (int j = 0; j < m; ++j) {
      out += ",";
      if (k < traj.controls.size()) out += format_double(traj.controls[k][j]);
    }
    out += '\n';
  }
  write_file_atomic(path, out);
}

}  // namespace rloc
