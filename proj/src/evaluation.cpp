#include "rloc/evaluation.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

#include "rloc/angles.hpp"
#include "rloc/serialization.hpp"

namespace rloc {

bool within_tolerance(const State& x, const PlantParams& p, const TargetTolerance& tol) {
  const State e = state_error(x, p.target, p.periodic());
  for (int d : p.angle_dims()) {
    if (!(std::abs(e[d]) < tol.angle)) return false;
  }
  for (int d : p.angular_velocity_dims()) {
    if (!(std::abs(e[d]) < tol.angular_velocity)) return false;
  }
  if (p.kind == PlantKind::kCartPole && !(std::abs(e[0]) < tol.position)) return false;
  return true;
}

int nnoc_index(const std::vector<State>& centres, const State& x, const PlantParams& p) {
  if (centres.empty()) throw std::invalid_argument("nnoc_index: no centres");
  const auto axes = p.discretised_axes();
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < centres.size(); ++i) {
    double d = 0.0;
    for (const Axis& a : axes) {
      const double diff = a.periodic ? angle_difference(x[a.dim], centres[i][a.dim])
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

SwitchedPolicy nnoc_policy(std::vector<Controller> bank, const PlantParams& p) {
  std::vector<State> centres;
  centres.reserve(bank.size());
  for (const Controller& c : bank) centres.push_back(c.centre);
  return SwitchedPolicy(std::move(bank), [centres, p](const State& x) {
    return nnoc_index(centres, x, p);
  });
}

std::vector<State> evaluation_start_grid(const PlantParams& p, int n) {
  if (n < 1) throw std::invalid_argument("evaluation_start_grid: n must be positive");
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  if (side * side != n) {
    throw std::invalid_argument(fmt::format("evaluation_start_grid: {} is not a perfect square", n));
  }
  const FeatureMap grid(p.discretised_axes(), {side, side});
  std::vector<State> starts;
  starts.reserve(n);
  for (int c = 0; c < n; ++c) starts.push_back(grid.cell_centre(c));
  return starts;
}

Rollout rollout(const PlantParams& p, const CostWeights& w, const ControlSource& policy,
                const State& x0, double duration, const TargetTolerance& tol,
                bool keep_trajectory) {
  if (!(duration > 0.0)) throw std::invalid_argument("rollout: duration must be positive");
  const int steps = static_cast<int>(std::lround(duration / p.dt));
  const PeriodicMask periodic = p.periodic();
  Rollout r;
  State x = normalise_state(x0, p);
  if (keep_trajectory) {
    r.trajectory.dt = p.dt;
    r.trajectory.states.push_back(x);
  }
  for (int k = 0; k < steps; ++k) {
    const Control u = saturate(policy(x), p);
    r.cost += stage_cost(x, u, w, p.target, periodic) * p.dt;
    try {
      x = plant_step(x, u, p);
    } catch (const IntegrationDiverged&) {
      r.diverged = true;
      break;
    }
    if (keep_trajectory) {
      r.trajectory.controls.push_back(u);
      r.trajectory.states.push_back(x);
    }
  }
  r.final_state = x;
  r.success = !r.diverged && within_tolerance(x, p, tol);
  return r;
}

double EvaluationReport::success_fraction() const {
  if (success.empty()) return 0.0;
  std::size_t n = 0;
  for (bool s : success) n += s;
  return static_cast<double>(n) / static_cast<double>(success.size());
}

std::pair<double, double> mean_and_sem(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  double sum = 0.0;
  for (double v : values) sum += v;
  const double n = static_cast<double>(values.size());
  const double mean = sum / n;
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

EvaluationReport evaluate_per_start(const PlantParams& p, const CostWeights& w,
                                    const std::vector<ControlSource>& policies,
                                    const std::vector<State>& starts,
                                    const EvaluationOptions& options, std::string policy_id) {
  if (policies.size() != starts.size() && policies.size() != 1) {
    throw std::invalid_argument("evaluate: need one policy, or one per start");
  }
  EvaluationReport report;
  report.policy_id = std::move(policy_id);
  report.starts = starts;
  report.duration = options.duration;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    const ControlSource& policy = policies.size() == 1 ? policies.front() : policies[i];
    Rollout r = rollout(p, w, policy, starts[i], options.duration, options.tolerance,
                        options.keep_trajectories);
    report.costs.push_back(r.cost);
    report.success.push_back(r.success);
    report.diverged.push_back(r.diverged);
    if (options.keep_trajectories) report.trajectories.push_back(std::move(r.trajectory));
  }
  std::tie(report.mean, report.sem) = mean_and_sem(report.costs);
  return report;
}

EvaluationReport evaluate_policy(const PlantParams& p, const CostWeights& w,
                                 const ControlSource& policy, const std::vector<State>& starts,
                                 const EvaluationOptions& options, std::string policy_id) {
  return evaluate_per_start(p, w, std::vector<ControlSource>{policy}, starts, options,
                            std::move(policy_id));
}

std::vector<ActionSequence> action_sequences(const PlantParams& p, const SwitchedPolicy& policy,
                                             const FeatureMap& features,
                                             const std::vector<State>& starts, double duration) {
  const int steps = static_cast<int>(std::lround(duration / p.dt));
  std::vector<ActionSequence> out;
  out.reserve(starts.size());
  for (const State& x0 : starts) {
    ActionSequence seq;
    State x = normalise_state(x0, p);
    int cell = features.cell(x);
    seq.push_back(SwitchEvent{0, 0, policy.action(x)});
    for (int k = 0; k < steps; ++k) {
      const Control u = saturate(policy.control(x), p);
      try {
        x = plant_step(x, u, p);
      } catch (const IntegrationDiverged&) {
        break;
      }
      const int next = features.cell(x);
      if (next != cell) {
        cell = next;
        seq.push_back(SwitchEvent{static_cast<int>(seq.size()), k + 1, policy.action(x)});
      }
    }
    out.push_back(std::move(seq));
  }
  return out;
}

double ValueGrid::axis_value(int axis, int index) const {
  const Axis& a = axes[axis];
  return a.lo + (index + 0.5) * (a.hi - a.lo) / resolution[axis];
}

ValueGrid value_function_grid(const PlantParams& p, const CostWeights& w,
                              const ControlSource& policy, const std::array<int, 2>& resolution,
                              double duration) {
  if (resolution[0] < 2 || resolution[1] < 2) {
    throw std::invalid_argument("value_function_grid: resolution must be at least 2 per axis");
  }
  ValueGrid g;
  g.axes = p.discretised_axes();
  g.resolution = resolution;
  g.cost.resize(resolution[0], resolution[1]);
  const TargetTolerance tol;
  for (int i = 0; i < resolution[0]; ++i) {
    for (int j = 0; j < resolution[1]; ++j) {
      State x0 = State::Zero();
      x0[g.axes[0].dim] = g.axis_value(0, i);
      x0[g.axes[1].dim] = g.axis_value(1, j);
      g.cost(i, j) = rollout(p, w, policy, x0, duration, tol).cost;
    }
  }
  return g;
}

void write_report_csv(const EvaluationReport& r, const std::string& path) {
  std::string out = "start,x0,x1,x2,x3,cost,success,diverged\n";
  for (std::size_t i = 0; i < r.costs.size(); ++i) {
    out += fmt::format("{}", i);
    for (int d = 0; d < kStateDim; ++d) out += "," + format_double(r.starts[i][d]);
    out += fmt::format(",{},{},{}\n", format_double(r.costs[i]), r.success[i] ? 1 : 0,
                       r.diverged[i] ? 1 : 0);
  }
  write_file_atomic(path, out);
}

void write_value_grid_csv(const ValueGrid& g, const std::string& path) {
  std::string out = fmt::format("i,j,x{},x{},cost\n", g.axes[0].dim, g.axes[1].dim);
  for (int i = 0; i < g.resolution[0]; ++i) {
    for (int j = 0; j < g.resolution[1]; ++j) {
      out += fmt::format("{},{},{},{},{}\n", i, j, format_double(g.axis_value(0, i)),
                         format_double(g.axis_value(1, j)), format_double(g.cost(i, j)));
    }
  }
  write_file_atomic(path, out);
}

void write_action_sequences_csv(const std::vector<ActionSequence>& seqs, const std::string& path) {
  std::string out = "start,switch,step,action\n";
  for (std::size_t s = 0; s < seqs.size(); ++s) {
    for (const SwitchEvent& e : seqs[s]) {
      out += fmt::format("{},{},{},{}\n", s, e.switch_index, e.step, e.action);
    }
  }
  write_file_atomic(path, out);
}

}  // namespace rloc
