#include <cmath>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "rloc/angles.hpp"
#include "rloc/symbolic_rl.hpp"

using namespace rloc;

namespace {

EpochTrace trace_of(std::initializer_list<Triplet> t) {
  EpochTrace e;
  e.triplets = t;
  for (const auto& x : e.triplets) e.total_reward += x.reward;
  return e;
}

LearningProblem small_cartpole(int bins) {
  const PlantParams p = PlantParams::cart_pole();
  const CostWeights w = CostWeights::cart_pole();
  std::vector<Controller> bank{fixture::target_controller(p, w)};
  Gain g = Gain::Zero(1, 4);
  bank.push_back(fixture::fixed_gain(p, g));
  g(0, 2) = -30.0;
  bank.push_back(fixture::fixed_gain(p, g));
  return LearningProblem{p, w, bank, FeatureMap::for_plant(p, {bins, bins})};
}

}  // namespace

TEST(FeatureMap, UprightIsCentreCell) {
  const PlantParams p = PlantParams::cart_pole();
  const FeatureMap f = FeatureMap::for_plant(p);
  EXPECT_EQ(f.num_cells(), 49);
  EXPECT_EQ(f.cell(State::Zero()), 24);
  State x = State::Zero();
  x[0] = 3.0;
  x[1] = -2.0;
  EXPECT_EQ(f.cell(x), 24);  // cart dims do not enter
}

TEST(FeatureMap, ThetaWrapsAndRateClamps) {
  const PlantParams p = PlantParams::cart_pole();
  const FeatureMap f = FeatureMap::for_plant(p);
  State a = State::Zero(), b = State::Zero();
  a[2] = kPi - 1e-3;
  b[2] = kPi - 1e-3 - 2 * kPi;
  EXPECT_EQ(f.cell(a), f.cell(b));
  State fast = State::Zero();
  fast[3] = deg2rad(1000);
  EXPECT_EQ(f.cell(fast) % 7, 6);
  fast[3] = -deg2rad(1000);
  EXPECT_EQ(f.cell(fast) % 7, 0);

  const PlantParams arm = PlantParams::arm();
  const FeatureMap g = FeatureMap::for_plant(arm);
  State over = arm.target;
  over[0] = 5.0;
  EXPECT_EQ(g.cell(over) / 6, 5);
}

TEST(FeatureMap, CellCentresRoundTrip) {
  for (const PlantParams& p : {PlantParams::cart_pole(), PlantParams::arm()}) {
    for (int bins : {1, 3, 6, 7}) {
      const FeatureMap f = FeatureMap::for_plant(p, {bins, bins});
      for (int c = 0; c < f.num_cells(); ++c) EXPECT_EQ(f.cell(f.cell_centre(c)), c);
    }
  }
}

TEST(FeatureMap, DirectBinningOracle) {
  const PlantParams p = PlantParams::cart_pole();
  const FeatureMap f = FeatureMap::for_plant(p);
  const double wr = 2 * kPi / 7, wv = 2 * deg2rad(250) / 7;
  Rng rng(12);
  std::uniform_real_distribution<double> th(-kPi, kPi), rate(-deg2rad(249), deg2rad(249));
  for (int i = 0; i < 1000; ++i) {
    State x = State::Zero();
    x[2] = th(rng);
    x[3] = rate(rng);
    const int bi = static_cast<int>((x[2] + kPi) / wr);
    const int bj = static_cast<int>((x[3] + deg2rad(250)) / wv);
    EXPECT_EQ(f.cell(x), std::min(bi, 6) * 7 + bj);
  }
}

TEST(ActionSelection, GreedyAndSingleAction) {
  QTable q(3, 4);
  q.values.row(1) << -3, -1, -2, -5;
  Rng rng(1);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(select_action(q, 1, 0.0, rng), 1);
  QTable one(3, 1);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(select_action(one, 0, 0.9, rng), 0);
}

// Binomial oracle: non-greedy count ~ Bin(1e5, 0.1), sigma ~ 95.
TEST(ActionSelection, ExplorationFrequency) {
  QTable q(1, 8);
  q.values(0, 5) = 1.0;
  Rng rng(42);
  const int n = 100000;
  std::vector<int> counts(8, 0);
  for (int i = 0; i < n; ++i) ++counts[select_action(q, 0, 0.1, rng)];
  const double sigma = std::sqrt(n * 0.1 * 0.9);
  EXPECT_LT(std::abs((n - counts[5]) - 0.1 * n), 3 * sigma);
  for (int a = 0; a < 8; ++a) {
    if (a == 5) continue;
    const double expect = n * 0.1 / 7;
    EXPECT_LT(std::abs(counts[a] - expect), 4 * std::sqrt(expect));
  }
}

TEST(ActionSelection, TiesSplitEvenlyButPolicyTakesLowest) {
  QTable q(1, 4);
  q.values.row(0) << -1, 0, 0, -2;
  Rng rng(3);
  int ones = 0;
  for (int i = 0; i < 20000; ++i) {
    const int a = select_action(q, 0, 0.0, rng);
    ASSERT_TRUE(a == 1 || a == 2);
    ones += a == 1;
  }
  EXPECT_NEAR(ones / 20000.0, 0.5, 0.02);
  EXPECT_EQ(greedy_policy(q)[0], 1);
}

TEST(LearnParams, EpsilonScheduleAndValidation) {
  LearnParams p;
  EXPECT_DOUBLE_EQ(p.epsilon_at(1), 0.1);
  EXPECT_NEAR(p.epsilon_at(1000), 0.1 * std::pow(1000.0, -0.1), 1e-15);
  EXPECT_NO_THROW(p.validate());
  p.epsilon = 1.5;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Returns, SuffixSumsMatchBruteForce) {
  const EpochTrace t = trace_of({{-1.0, 0, 0}, {-2.5, 1, 1}, {-0.5, 2, 0}});
  for (double gamma : {1.0, 0.9}) {
    const auto r = discounted_returns(t, gamma);
    for (std::size_t i = 0; i < 3; ++i) {
      double brute = 0.0;
      for (std::size_t j = i; j < 3; ++j) brute += std::pow(gamma, j - i) * t.triplets[j].reward;
      EXPECT_NEAR(r[i], brute, 1e-15);
    }
  }
  EXPECT_DOUBLE_EQ(discounted_returns(t, 1.0)[0], -4.0);
}

TEST(UpdateQ, FirstVisitOverwritesThenAverages) {
  LearnParams lp;
  QTable q(2, 2);
  q.values(0, 1) = 7.0;
  update_q(q, trace_of({{-5.0, 0, 1}}), lp);
  EXPECT_DOUBLE_EQ(q.values(0, 1), -5.0);
  EXPECT_EQ(q.visits(0, 1), 1);
  update_q(q, trace_of({{-1.0, 0, 1}}), lp);
  EXPECT_DOUBLE_EQ(q.values(0, 1), -5.0 + (1.0 / std::sqrt(2.0)) * (-1.0 + 5.0));
  EXPECT_EQ(q.visits(0, 1), 2);
  EXPECT_EQ(q.visits(1, 0), 0);
}

TEST(UpdateQ, EveryVisitUsesEachReturn) {
  LearnParams lp;
  lp.alpha_decay = 1.0;  // plain running mean
  QTable q(1, 1);
  update_q(q, trace_of({{-1.0, 0, 0}, {-2.0, 0, 0}, {-3.0, 0, 0}}), lp);
  EXPECT_EQ(q.visits(0, 0), 3);
  EXPECT_NEAR(q.values(0, 0), (-6.0 - 5.0 - 3.0) / 3.0, 1e-12);
}

TEST(RunEpoch, SingleCellGivesOneTripletAndTargetLqrBeatsPoorGain) {
  LearningProblem prob = small_cartpole(1);
  const int n_a = static_cast<int>(prob.bank.size());
  std::vector<double> totals;
  for (int a = 0; a < n_a; ++a) {
    QTable q(1, n_a);
    q.values(0, a) = 1.0;
    Rng rng(0);
    const EpochTrace t = run_epoch(prob, q, 0.0, 0.0, rng);
    ASSERT_EQ(t.steps(), 1);
    EXPECT_EQ(t.triplets[0].action, a);
    EXPECT_LE(t.total_reward, 0.0);
    totals.push_back(t.total_reward);
  }
  // From the upright cell centre the target controller stays put at zero cost.
  EXPECT_NEAR(totals[0], 0.0, 1e-12);
  Rng rng(5);
  std::normal_distribution<double> n01(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Gain g(1, 4);
    g << n01(rng), n01(rng), 10 * n01(rng), n01(rng);
    prob.bank = {fixture::target_controller(prob.plant, prob.weights), fixture::fixed_gain(prob.plant, g)};
    QTable q0(1, 2), q1(1, 2);
    q0.values(0, 0) = 1.0;
    q1.values(0, 1) = 1.0;
    Rng r0(trial), r1(trial);
    const double lqr = run_epoch(prob, q0, 0.0, 1e-3, r0).total_reward;
    const double rnd = run_epoch(prob, q1, 0.0, 1e-3, r1).total_reward;
    EXPECT_GT(lqr, rnd);
  }
}

TEST(RunEpoch, RewardsNonPositiveAndCellsChange) {
  const LearningProblem prob = small_cartpole(7);
  QTable q(49, 3);
  Rng rng(11);
  for (int e = 0; e < 20; ++e) {
    const EpochTrace t = run_epoch(prob, q, 0.3, 1e-3, rng);
    ASSERT_GE(t.steps(), 1);
    double sum = 0.0;
    for (std::size_t i = 0; i < t.triplets.size(); ++i) {
      EXPECT_LE(t.triplets[i].reward, 0.0);
      EXPECT_GE(t.triplets[i].action, 0);
      EXPECT_LT(t.triplets[i].action, 3);
      if (i > 0 && !t.diverged) EXPECT_NE(t.triplets[i].state, t.triplets[i - 1].state);
      sum += t.triplets[i].reward;
    }
    EXPECT_NEAR(sum, t.total_reward, 1e-9 * std::max(1.0, std::abs(sum)));
  }
}

TEST(Learn, ZeroEpochsGivesUniformQAndLowestIndexPolicy) {
  const LearningProblem prob = small_cartpole(7);
  LearnParams lp;
  lp.n_epochs = 0;
  Rng rng(0);
  const LearnResult r = learn(prob, lp, rng);
  EXPECT_EQ(r.q.values.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(r.policy, std::vector<int>(49, 0));
  EXPECT_TRUE(r.curve.empty());
}

TEST(Learn, DeterministicAndCurveSampling) {
  const LearningProblem prob = small_cartpole(7);
  LearnParams lp;
  lp.n_epochs = 40;
  Rng a(9), b(9);
  const LearnResult ra = learn(prob, lp, a);
  const LearnResult rb = learn(prob, lp, b);
  EXPECT_EQ(ra.q.values, rb.q.values);
  EXPECT_EQ(ra.q.visits, rb.q.visits);
  EXPECT_EQ(ra.policy, rb.policy);
  ASSERT_EQ(ra.curve.size(), 7u);  // epochs 1, 7, ..., 37
  for (std::size_t i = 0; i < ra.curve.size(); ++i) {
    EXPECT_EQ(ra.curve[i].epoch, static_cast<int>(1 + 6 * i));
    EXPECT_EQ(ra.curve[i].reward, rb.curve[i].reward);
  }
  // 2000 epochs sampled every 6 gives 334 points.
  int points = 0;
  for (int e = 1; e <= 2000; ++e) points += (e - 1) % 6 == 0;
  EXPECT_EQ(points, 334);
}

TEST(SwitchedPolicy, SingleControllerIsPlainLqr) {
  const LearningProblem prob = small_cartpole(7);
  const SwitchedPolicy pol = full_control_policy(std::vector<int>(49, 0), {prob.bank[0]}, prob.features);
  Rng rng(2);
  std::uniform_real_distribution<double> d(-2, 2);
  for (int i = 0; i < 50; ++i) {
    State x;
    x << d(rng), d(rng), d(rng), d(rng);
    EXPECT_EQ(pol.control(x), lqr_control(prob.bank[0], x));
  }
  EXPECT_NEAR(pol.control(prob.plant.target).norm(), 0.0, 1e-12);
  EXPECT_THROW(full_control_policy(std::vector<int>(48, 0), {prob.bank[0]}, prob.features),
               std::invalid_argument);
  EXPECT_THROW(full_control_policy(std::vector<int>(49, 1), {prob.bank[0]}, prob.features),
               std::invalid_argument);
}
