#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "rloc/angles.hpp"
#include "rloc/evaluation.hpp"

using namespace rloc;

namespace {

State cart_theta(double deg) {
  State x = State::Zero();
  x[2] = deg2rad(deg);
  return x;
}

// Brute-force nearest centre with the atan2 wrapped distance.
int nearest_oracle(const std::vector<State>& centres, const State& x, const PlantParams& p) {
  const auto axes = p.discretised_axes();
  int best = 0;
  double best_d = 1e300;
  for (std::size_t i = 0; i < centres.size(); ++i) {
    double d = 0.0;
    for (const Axis& a : axes) {
      const double diff = a.periodic ? oracle::wrapped_distance(x[a.dim], centres[i][a.dim])
                                     : x[a.dim] - centres[i][a.dim];
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

}  // namespace

TEST(Nnoc, SingleCentreAndExactMatch) {
  const PlantParams p = PlantParams::cart_pole();
  EXPECT_EQ(nnoc_index({cart_theta(40)}, cart_theta(-120), p), 0);
  std::vector<State> c;
  for (int i = 0; i < 6; ++i) c.push_back(cart_theta(-150 + 50 * i));
  EXPECT_EQ(nnoc_index(c, c[3], p), 3);
}

TEST(Nnoc, WrappedDistance) {
  const PlantParams p = PlantParams::cart_pole();
  EXPECT_EQ(nnoc_index({cart_theta(0), cart_theta(-175)}, cart_theta(170), p), 1);
}

TEST(Nnoc, MatchesBruteForceAndIsPermutationEquivariant) {
  for (const PlantParams& p : {PlantParams::cart_pole(), PlantParams::arm()}) {
    Rng rng(21);
    std::uniform_real_distribution<double> ang(-4.0, 4.0), vel(-6.0, 6.0);
    std::uniform_real_distribution<double> inside(0.01, kPi - 0.01);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<State> centres;  // distinct, so no ties
      for (int i = 0; i < 7; ++i) {
        State c;
        c << inside(rng), inside(rng), vel(rng), vel(rng);
        centres.push_back(c);
      }
      State x;
      x << ang(rng), ang(rng), vel(rng), vel(rng);
      const int got = nnoc_index(centres, x, p);
      EXPECT_EQ(got, nearest_oracle(centres, x, p));

      std::vector<int> perm(centres.size());
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      std::vector<State> shuffled;
      for (int i : perm) shuffled.push_back(centres[i]);
      EXPECT_EQ(perm[nnoc_index(shuffled, x, p)], got);
    }
  }
}

TEST(StartGrid, TenByTenCellCentres) {
  const PlantParams p = PlantParams::cart_pole();
  const auto g = evaluation_start_grid(p, 100);
  ASSERT_EQ(g.size(), 100u);
  std::set<double> th, rate;
  for (const State& x : g) {
    th.insert(x[2]);
    rate.insert(x[3]);
    EXPECT_EQ(x[0], 0.0);
    EXPECT_EQ(x[1], 0.0);
  }
  EXPECT_EQ(th.size(), 10u);
  EXPECT_EQ(rate.size(), 10u);
  EXPECT_NEAR(*rate.begin(), -deg2rad(250) + deg2rad(25), 1e-12);

  const auto one = evaluation_start_grid(PlantParams::arm(), 1);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_NEAR(one[0][0], kPi / 2, 1e-12);
  EXPECT_NEAR(one[0][1], kPi / 2, 1e-12);

  EXPECT_THROW(evaluation_start_grid(p, 99), std::invalid_argument);
  EXPECT_THROW(evaluation_start_grid(p, 0), std::invalid_argument);
}

TEST(Tolerance, BoxIsMonotoneInWidth) {
  const PlantParams p = PlantParams::cart_pole();
  Rng rng(6);
  std::uniform_real_distribution<double> d(-0.3, 0.3);
  TargetTolerance tight, loose;
  loose.angle *= 2;
  loose.angular_velocity *= 2;
  loose.position *= 2;
  for (int i = 0; i < 500; ++i) {
    State x;
    x << d(rng), d(rng), d(rng), d(rng);
    if (within_tolerance(x, p, tight)) EXPECT_TRUE(within_tolerance(x, p, loose));
  }
  EXPECT_TRUE(within_tolerance(p.target, p, tight));
  State moving = p.target;
  moving[1] = 5.0;  // cart speed is unconstrained
  EXPECT_TRUE(within_tolerance(moving, p, tight));
}

TEST(Rollout, TargetStartIsFreeAndSuccessful) {
  for (const PlantParams& p : {PlantParams::cart_pole(), PlantParams::arm()}) {
    const CostWeights w = p.kind == PlantKind::kArm ? CostWeights::arm() : CostWeights::cart_pole();
    const Controller c = fixture::target_controller(p, w);
    const Rollout r = rollout(p, w, [&](const State& x) { return lqr_control(c, x); }, p.target,
                              10.0, TargetTolerance{});
    EXPECT_NEAR(r.cost, 0.0, 1e-12);
    EXPECT_TRUE(r.success);
    EXPECT_FALSE(r.diverged);
  }
}

TEST(Rollout, CostIsSumOfStageCosts) {
  const PlantParams p = PlantParams::arm();
  const CostWeights w = CostWeights::arm();
  const Controller c = fixture::target_controller(p, w);
  State x0 = p.target;
  x0[0] += 0.3;
  const ControlSource pol = [&](const State& x) { return lqr_control(c, x); };
  const Rollout r = rollout(p, w, pol, x0, 2.0, TargetTolerance{}, true);
  ASSERT_EQ(r.trajectory.controls.size(), 200u);
  double sum = 0.0;
  for (std::size_t k = 0; k < r.trajectory.controls.size(); ++k) {
    sum += stage_cost(r.trajectory.states[k], r.trajectory.controls[k], w, p.target, p.periodic()) * p.dt;
  }
  EXPECT_NEAR(r.cost, sum, 1e-9 * sum);
  EXPECT_GT(r.cost, 0.0);
}

TEST(Rollout, HangingStartFailsUnderTargetLqr) {
  const PlantParams p = PlantParams::cart_pole();
  const CostWeights w = CostWeights::cart_pole();
  const Controller c = fixture::target_controller(p, w);
  const Rollout r = rollout(p, w, [&](const State& x) { return lqr_control(c, x); }, cart_theta(180),
                            10.0, TargetTolerance{});
  EXPECT_FALSE(r.success);
}

TEST(Report, MeanAndSemRecomputable) {
  const auto [m, s] = mean_and_sem({1.0, 2.0, 3.0, 6.0});
  EXPECT_DOUBLE_EQ(m, 3.0);
  EXPECT_NEAR(s, std::sqrt(14.0 / 3.0) / 2.0, 1e-15);
  EXPECT_EQ(mean_and_sem({4.0}).second, 0.0);

  const PlantParams p = PlantParams::arm();
  const CostWeights w = CostWeights::arm();
  const Controller c = fixture::target_controller(p, w);
  const auto starts = evaluation_start_grid(p, 9);
  EvaluationOptions opt;
  opt.duration = 1.0;
  const auto rep = evaluate_policy(p, w, [&](const State& x) { return lqr_control(c, x); }, starts, opt);
  ASSERT_EQ(rep.costs.size(), 9u);
  const auto [mean, sem] = mean_and_sem(rep.costs);
  EXPECT_EQ(rep.mean, mean);
  EXPECT_EQ(rep.sem, sem);
  for (double cost : rep.costs) EXPECT_GE(cost, 0.0);
  const double frac =
      static_cast<double>(std::count(rep.success.begin(), rep.success.end(), true)) / 9.0;
  EXPECT_DOUBLE_EQ(rep.success_fraction(), frac);
}

TEST(Report, RepeatedRunsAreBitIdentical) {
  const PlantParams p = PlantParams::cart_pole();
  const CostWeights w = CostWeights::cart_pole();
  const Controller c = fixture::target_controller(p, w);
  const ControlSource pol = [&](const State& x) { return lqr_control(c, x); };
  EvaluationOptions opt;
  opt.duration = 2.0;
  const auto starts = evaluation_start_grid(p, 16);
  const auto a = evaluate_policy(p, w, pol, starts, opt);
  const auto b = evaluate_policy(p, w, pol, starts, opt);
  EXPECT_EQ(a.costs, b.costs);
  EXPECT_EQ(a.success, b.success);

  const std::vector<ControlSource> per_start(starts.size(), pol);
  const auto c2 = evaluate_per_start(p, w, per_start, starts, opt);
  EXPECT_EQ(c2.costs, a.costs);
}

TEST(ValueGrid, ShapeDeterminismAndMinimumAtTarget) {
  const PlantParams p = PlantParams::arm();
  const CostWeights w = CostWeights::arm();
  const Controller c = fixture::target_controller(p, w);
  const ControlSource pol = [&](const State& x) { return lqr_control(c, x); };
  const ValueGrid a = value_function_grid(p, w, pol, {9, 9}, 1.0);
  const ValueGrid b = value_function_grid(p, w, pol, {9, 9}, 1.0);
  EXPECT_EQ(a.cost, b.cost);
  EXPECT_EQ(a.cost.rows(), 9);
  EXPECT_EQ(a.cost.cols(), 9);
  Eigen::Index i, j;
  a.cost.minCoeff(&i, &j);
  EXPECT_EQ(i, 4);
  EXPECT_EQ(j, 4);
  EXPECT_NEAR(a.axis_value(0, 4), kPi / 2, 1e-12);
  EXPECT_THROW(value_function_grid(p, w, pol, {1, 9}, 1.0), std::invalid_argument);
}

TEST(ActionSequences, StableAtTargetIsSingleEntry) {
  const PlantParams p = PlantParams::arm();
  const CostWeights w = CostWeights::arm();
  const FeatureMap f = FeatureMap::for_plant(p);
  const SwitchedPolicy pol = full_control_policy(std::vector<int>(36, 0),
                                                 {fixture::target_controller(p, w)}, f);
  const auto seqs = action_sequences(p, pol, f, {p.target}, 5.0);
  ASSERT_EQ(seqs.size(), 1u);
  ASSERT_EQ(seqs[0].size(), 1u);
  EXPECT_EQ(seqs[0][0].step, 0);
  EXPECT_EQ(seqs[0][0].action, 0);

  State off = p.target;
  off[0] = 0.2;
  const auto moved = action_sequences(p, pol, f, {off}, 5.0);
  ASSERT_GE(moved[0].size(), 2u);
  for (std::size_t k = 1; k < moved[0].size(); ++k) {
    EXPECT_EQ(moved[0][k].switch_index, static_cast<int>(k));
    EXPECT_GT(moved[0][k].step, moved[0][k - 1].step);
  }
}
