#pragma once

// Shared test fixtures.

#include <variant>

#include "rloc/angles.hpp"
#include "rloc/lqr.hpp"
#include "rloc/plant.hpp"

namespace fixture {

using namespace rloc;

// Finite-difference linearisation of the discrete plant step at x*. Coulomb
// cart friction is switched off since it is discontinuous at rest.
inline Controller target_controller(const PlantParams& plant, const CostWeights& w) {
  PlantParams p = plant;
  if (auto* cp = std::get_if<CartPolePhysics>(&p.physics)) cp->cart_friction = 0.0;
  const int m = p.control_dim();
  const Control u0 = Control::Zero(m);
  Eigen::MatrixXd a(4, 4), b(4, m);
  const double h = 1e-6;
  for (int i = 0; i < 4; ++i) {
    State xp = p.target, xm = p.target;
    xp[i] += h;
    xm[i] -= h;
    a.col(i) = state_error(plant_step(xp, u0, p), plant_step(xm, u0, p), p.periodic()) / (2 * h);
  }
  for (int j = 0; j < m; ++j) {
    Control up = u0, um = u0;
    up[j] += h;
    um[j] -= h;
    b.col(j) = state_error(plant_step(p.target, up, p), plant_step(p.target, um, p), p.periodic()) /
               (2 * h);
  }
  Controller c = riccati_gain(a, b, w);
  c.target = p.target;
  c.centre = p.target;
  c.periodic = p.periodic();
  return c;
}

inline Controller fixed_gain(const PlantParams& p, const Gain& g) {
  Controller c;
  c.gain = g;
  c.target = p.target;
  c.centre = p.target;
  c.periodic = p.periodic();
  return c;
}

}  // namespace fixture
