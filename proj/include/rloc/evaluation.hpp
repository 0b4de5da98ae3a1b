#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rloc/angles.hpp"
#include "rloc/lqr.hpp"
#include "rloc/plant.hpp"
#include "rloc/symbolic_rl.hpp"

namespace rloc {

/// Success box around the target. Angles and angular velocities use the
/// plant's angle / angular-velocity dims; position applies to the cart only.
/// Cart velocity is unconstrained.
struct TargetTolerance {
  double angle = 3.0 * kPi / 180.0;
  double angular_velocity = 10.0 * kPi / 180.0;
  double position = 0.1;
};

bool within_tolerance(const State& x, const PlantParams& p, const TargetTolerance& tol);

/// Index of the Euclidean-nearest centre over the discretised dims, periodic
/// dims compared by shortest angle; ties go to the lowest index.
int nnoc_index(const std::vector<State>& centres, const State& x, const PlantParams& p);

/// Switches to the controller whose centre is nearest to the current state.
SwitchedPolicy nnoc_policy(std::vector<Controller> bank, const PlantParams& p);

/// sqrt(n) x sqrt(n) cell-centre grid over the discretised dims, other dims
/// zero. Throws std::invalid_argument for non-square n.
std::vector<State> evaluation_start_grid(const PlantParams& p, int n);

struct Rollout {
  double cost = 0.0;  // sum of stage cost * dt
  State final_state = State::Zero();
  bool success = false;
  bool diverged = false;
  Trajectory trajectory;  // filled only when requested
};

/// Noise-free roll-out of duration / dt control steps.
Rollout rollout(const PlantParams& p, const CostWeights& w, const ControlSource& policy,
                const State& x0, double duration, const TargetTolerance& tol,
                bool keep_trajectory = false);

struct SwitchEvent {
  int switch_index = 0;
  int step = 0;
  int action = 0;
};
using ActionSequence = std::vector<SwitchEvent>;

struct EvaluationReport {
  std::string policy_id;
  std::vector<State> starts;
  std::vector<double> costs;
  std::vector<bool> success;
  std::vector<bool> diverged;
  double mean = 0.0;
  double sem = 0.0;
  double duration = 0.0;
  std::vector<Trajectory> trajectories;
  std::vector<ActionSequence> action_sequences;

  double success_fraction() const;
};

/// Arithmetic mean and standard error (sample std / sqrt(n); zero for n < 2).
std::pair<double, double> mean_and_sem(const std::vector<double>& values);

struct EvaluationOptions {
  double duration = 10.0;
  TargetTolerance tolerance;
  bool keep_trajectories = false;
};

/// Evaluates one policy from every start.
EvaluationReport evaluate_policy(const PlantParams& p, const CostWeights& w,
                                 const ControlSource& policy, const std::vector<State>& starts,
                                 const EvaluationOptions& options, std::string policy_id = "");

/// Evaluates start i under policies[i] (one policy per start).
EvaluationReport evaluate_per_start(const PlantParams& p, const CostWeights& w,
                                    const std::vector<ControlSource>& policies,
                                    const std::vector<State>& starts,
                                    const EvaluationOptions& options, std::string policy_id = "");

/// The action chosen at each entry into a new symbolic state (the first
/// entry is the start cell), over duration / dt noise-free steps.
std::vector<ActionSequence> action_sequences(const PlantParams& p, const SwitchedPolicy& policy,
                                             const FeatureMap& features,
                                             const std::vector<State>& starts, double duration);

struct ValueGrid {
  std::array<Axis, 2> axes;
  std::array<int, 2> resolution{};
  Eigen::MatrixXd cost;  // resolution[0] x resolution[1]

  double axis_value(int axis, int index) const;
};

/// Cost-to-go from each cell centre of a resolution[0] x resolution[1] grid
/// over the discretised dims.
ValueGrid value_function_grid(const PlantParams& p, const CostWeights& w,
                              const ControlSource& policy, const std::array<int, 2>& resolution,
                              double duration);

void write_report_csv(const EvaluationReport& r, const std::string& path);
void write_value_grid_csv(const ValueGrid& g, const std::string& path);
void write_action_sequences_csv(const std::vector<ActionSequence>& seqs, const std::string& path);

}  // namespace rloc
