#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rloc/angles.hpp"
#include "rloc/evaluation.hpp"
#include "rloc/lqr.hpp"
#include "rloc/plant.hpp"
#include "rloc/serialization.hpp"
#include "rloc/symbolic_rl.hpp"
#include "rloc/sysid.hpp"

namespace rloc {

struct SysidParams {
  int n_starts = 253;       // n_s^ naive start states
  int h = 20;               // sub-trajectory length
  int n_segments = 170;     // n_H
  double decay = 10.0;      // b
  double angle_tol = 20.0 * kPi / 180.0;
  double velocity_tol = 120.0 * kPi / 180.0;
  LdsiOptions em;
};

struct ExperimentConfig {
  PlantParams plant = PlantParams::cart_pole();
  CostWeights weights = CostWeights::cart_pole();
  LearnParams learn;
  SysidParams sysid;
  std::array<int, 2> feature_bins{7, 7};
  int n_actions = 8;
  int n_actions_min = 1;
  int n_actions_max = 10;
  int n_trials = 50;
  int eval_starts = 100;
  double eval_duration = 10.0;
  TargetTolerance tolerance;
  int value_grid = 100;
  std::uint64_t seed = 0;

  /// Desk-scale defaults (50 trials, 100 x 100 value grids).
  static ExperimentConfig defaults(PlantKind kind);
  /// Defaults with the full trial count and value-grid resolution.
  static ExperimentConfig paper_scale(PlantKind kind);
  void validate() const;
};

Json config_to_json(const ExperimentConfig& c);
/// Keys that are absent keep the defaults of the named plant.
ExperimentConfig config_from_json(const Json& j);
ExperimentConfig load_config(const std::string& path);

/// Naive experience for the config's plant (noise drawn from the experience
/// stream of the master seed).
Experience collect_naive_experience(const ExperimentConfig& c);

/// Local model at one centre from pre-collected experience.
LinearModel fit_centre(const ExperimentConfig& c, const Experience& y, const State& centre);

std::vector<Controller> synthesise_bank(const ExperimentConfig& c,
                                        const std::vector<LinearModel>& models);

LearningProblem make_problem(const ExperimentConfig& c, std::vector<Controller> bank);

/// Centres for one trial; trial t, n_a = k is a prefix of n_a = k + 1.
std::vector<State> trial_centres(const ExperimentConfig& c, int trial, int n_actions);

/// Per-start LQR baseline: a controller fitted at each start state, steering to x*.
std::vector<Controller> start_grid_bank(const ExperimentConfig& c, const Experience& y,
                                        const std::vector<State>& starts);

struct TrialPoint {
  int trial = 0;
  int n_actions = 0;
  double rloc_cost = 0.0;
  double nnoc_cost = 0.0;
  double rloc_success = 0.0;
  double nnoc_success = 0.0;
  std::vector<CurvePoint> curve;
  std::string status = "ok";
};

struct SweepResult {
  std::vector<TrialPoint> points;  // trial-major, n_a ascending
};

/// Runs the full pipeline for n_a = n_actions_min..n_actions_max over
/// n_trials trials, growing each trial's centres incrementally. Trials run on
/// up to `jobs` threads; results do not depend on jobs.
SweepResult run_sweep(const ExperimentConfig& c, int jobs, const Experience* shared = nullptr);

// Subcommands. Each writes its outputs under out and a config snapshot at
// out/config.json.
void cmd_sysid(const ExperimentConfig& c, const std::string& out);
void cmd_train(const ExperimentConfig& c, const std::string& out);

enum class EvalMode { kRloc, kNnoc, kLqrTarget, kLqrGrid };
EvalMode eval_mode_from_string(const std::string& name);
std::string to_string(EvalMode mode);

struct EvaluateFlags {
  bool trajectories = false;
  bool action_sequences = false;
  bool value_grid = false;
  /// When set, evaluate a single start: x* with every angle dim offset by
  /// this many degrees.
  std::optional<double> perturbation_deg;
};

EvaluationReport cmd_evaluate(const ExperimentConfig& c, const std::string& out, EvalMode mode,
                              const EvaluateFlags& flags);
SweepResult cmd_sweep(const ExperimentConfig& c, const std::string& out, int jobs);

}  // namespace rloc
