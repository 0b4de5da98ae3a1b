#pragma once

#include <vector>

#include <Eigen/Dense>

#include "rloc/lqr.hpp"
#include "rloc/plant.hpp"
#include "rloc/random.hpp"

namespace rloc {

/// Regular grid over two state dimensions. Cells are numbered row-major,
/// first axis outermost. Out-of-range values on non-periodic axes clamp to
/// the edge bins; periodic axes wrap.
class FeatureMap {
 public:
  FeatureMap(const std::array<Axis, 2>& axes, const std::array<int, 2>& bins);

  /// Plant default: arm 6x6 over (theta1, theta2); cart-pole 7x7 over
  /// (theta, theta_dot).
  static FeatureMap for_plant(const PlantParams& p);
  static FeatureMap for_plant(const PlantParams& p, const std::array<int, 2>& bins);

  int cell(const State& x) const;
  int num_cells() const { return bins_[0] * bins_[1]; }
  /// Centre of a cell; dimensions outside the grid are zero.
  State cell_centre(int cell) const;
  const std::array<Axis, 2>& axes() const { return axes_; }
  const std::array<int, 2>& bins() const { return bins_; }

 private:
  int bin(int axis, double value) const;

  std::array<Axis, 2> axes_;
  std::array<int, 2> bins_;
};

struct QTable {
  Eigen::MatrixXd values;      // n_s x n_a
  Eigen::MatrixXi visits;      // n_s x n_a

  QTable() = default;
  QTable(int n_states, int n_actions)
      : values(Eigen::MatrixXd::Zero(n_states, n_actions)),
        visits(Eigen::MatrixXi::Zero(n_states, n_actions)) {}
  int num_states() const { return static_cast<int>(values.rows()); }
  int num_actions() const { return static_cast<int>(values.cols()); }
};

struct Triplet {
  double reward = 0.0;  // r_{t+1}, never positive
  int state = 0;        // s_t
  int action = 0;       // a_t
};

struct EpochTrace {
  std::vector<Triplet> triplets;
  double total_reward = 0.0;
  bool diverged = false;
  int steps() const { return static_cast<int>(triplets.size()); }
};

struct LearnParams {
  double epsilon = 0.1;
  double epsilon_decay = 0.1;  // nu: epsilon_j = epsilon * j^-nu
  double gamma = 1.0;
  double alpha = 1.0;          // alpha~
  double alpha_decay = 0.5;    // mu: alpha_i = alpha~ / i^mu
  int n_epochs = 2000;
  int curve_interval = 6;
  /// Std of additive state noise during learning roll-outs.
  double noise_std = 1e-3;

  void validate() const;
  double epsilon_at(int epoch) const;
};

/// epsilon-greedy: the greedy action (ties broken uniformly) with
/// probability 1 - eps, each other action with eps / (n_a - 1).
int select_action(const QTable& q, int state, double epsilon, Rng& rng);

/// Lowest-index argmax of each row.
std::vector<int> greedy_policy(const QTable& q);

/// Everything the high-level learner needs to roll out an epoch.
struct LearningProblem {
  PlantParams plant;
  CostWeights weights;
  std::vector<Controller> bank;
  FeatureMap features;
};

/// One Monte-Carlo roll-out of plant.n_steps actuator steps from a random
/// cell centre. Stage cost times dt accumulates while the symbolic state is
/// unchanged; each cell change closes a triplet with r = -(accumulated cost),
/// and the final partial occupancy closes the last triplet.
EpochTrace run_epoch(const LearningProblem& problem, const QTable& q, double epsilon,
                     double noise_std, Rng& rng);

/// Every-visit Monte-Carlo update in trace order with alpha_i = alpha~/i^mu.
void update_q(QTable& q, const EpochTrace& trace, const LearnParams& params);

/// Discounted returns of each triplet to the end of the trace.
std::vector<double> discounted_returns(const EpochTrace& trace, double gamma);

struct CurvePoint {
  int epoch = 0;  // 1-based
  double reward = 0.0;
};

struct LearnResult {
  QTable q;
  std::vector<int> policy;
  std::vector<CurvePoint> curve;
};

LearnResult learn(const LearningProblem& problem, const LearnParams& params, Rng& rng);

/// Stateless switched-LQR policy: a selector maps the state to a controller
/// index, and that controller's feedback law produces the control.
class SwitchedPolicy {
 public:
  using Selector = std::function<int(const State&)>;

  SwitchedPolicy(std::vector<Controller> bank, Selector selector);

  int action(const State& x) const { return selector_(x); }
  Control control(const State& x) const { return lqr_control(bank_[action(x)], x); }
  ControlSource as_control_source() const;
  const std::vector<Controller>& bank() const { return bank_; }

 private:
  std::vector<Controller> bank_;
  Selector selector_;
};

/// Full control policy x -> L_{pi(phi(x))} feedback.
SwitchedPolicy full_control_policy(const std::vector<int>& policy, std::vector<Controller> bank,
                                   const FeatureMap& features);

}  // namespace rloc
