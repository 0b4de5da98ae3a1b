#include "rloc/symbolic_rl.hpp"

#include <algorithm>
#include <cmath>

#include "rloc/angles.hpp"

namespace rloc {

FeatureMap::FeatureMap(const std::array<Axis, 2>& axes, const std::array<int, 2>& bins)
    : axes_(axes), bins_(bins) {
  for (int i = 0; i < 2; ++i) {
    if (bins_[i] < 1) throw std::invalid_argument("FeatureMap: bin counts must be positive");
    if (!(axes_[i].hi > axes_[i].lo)) throw std::invalid_argument("FeatureMap: empty axis range");
  }
}

FeatureMap FeatureMap::for_plant(const PlantParams& p) {
  const int n = p.kind == PlantKind::kArm ? 6 : 7;
  return FeatureMap(p.discretised_axes(), {n, n});
}

FeatureMap FeatureMap::for_plant(const PlantParams& p, const std::array<int, 2>& bins) {
  return FeatureMap(p.discretised_axes(), bins);
}

int FeatureMap::bin(int axis, double value) const {
  const Axis& a = axes_[axis];
  const int n = bins_[axis];
  const double width = (a.hi - a.lo) / n;
  if (a.periodic) {
    const double offset = wrap_angle(value) - a.lo;  // (0, 2 pi]
    int b = static_cast<int>(std::floor(offset / width));
    b %= n;
    if (b < 0) b += n;
    return b;
  }
  const int b = static_cast<int>(std::floor((value - a.lo) / width));
  return std::clamp(b, 0, n - 1);
}

int FeatureMap::cell(const State& x) const {
  return bin(0, x[axes_[0].dim]) * bins_[1] + bin(1, x[axes_[1].dim]);
}

State FeatureMap::cell_centre(int cell) const {
  if (cell < 0 || cell >= num_cells()) throw std::out_of_range("FeatureMap: cell out of range");
  const int idx[2] = {cell / bins_[1], cell % bins_[1]};
  State x = State::Zero();
  for (int i = 0; i < 2; ++i) {
    const Axis& a = axes_[i];
    x[a.dim] = a.lo + (idx[i] + 0.5) * (a.hi - a.lo) / bins_[i];
  }
  return x;
}

void LearnParams::validate() const {
  if (epsilon < 0.0 || epsilon > 1.0) throw std::invalid_argument("LearnParams: epsilon in [0,1]");
  if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("LearnParams: gamma in [0,1]");
  if (!(alpha > 0.0)) throw std::invalid_argument("LearnParams: alpha must be positive");
  if (alpha_decay < 0.0) throw std::invalid_argument("LearnParams: mu must be non-negative");
  if (epsilon_decay < 0.0) throw std::invalid_argument("LearnParams: nu must be non-negative");
  if (n_epochs < 0) throw std::invalid_argument("LearnParams: n_epochs must be non-negative");
  if (curve_interval < 1) throw std::invalid_argument("LearnParams: curve interval must be >= 1");
}

double LearnParams::epsilon_at(int epoch) const {
  return epsilon * std::pow(static_cast<double>(std::max(epoch, 1)), -epsilon_decay);
}

int select_action(const QTable& q, int state, double epsilon, Rng& rng) {
  const int n = q.num_actions();
  if (n < 1) throw std::invalid_argument("select_action: no actions");
  if (n == 1) return 0;

  const auto row = q.values.row(state);
  const double best = row.maxCoeff();
  int n_ties = 0;
  for (int a = 0; a < n; ++a) n_ties += row[a] == best;
  int pick = std::uniform_int_distribution<int>(0, n_ties - 1)(rng);
  int greedy = 0;
  for (int a = 0; a < n; ++a) {
    if (row[a] == best && pick-- == 0) {
      greedy = a;
      break;
    }
  }
  if (epsilon > 0.0 && std::uniform_real_distribution<double>(0.0, 1.0)(rng) < epsilon) {
    const int other = std::uniform_int_distribution<int>(0, n - 2)(rng);
    return other < greedy ? other : other + 1;
  }
  return greedy;
}

std::vector<int> greedy_policy(const QTable& q) {
  std::vector<int> policy(q.num_states(), 0);
  for (int s = 0; s < q.num_states(); ++s) {
    Eigen::Index best = 0;
    q.values.row(s).maxCoeff(&best);  // first maximum
    policy[s] = static_cast<int>(best);
  }
  return policy;
}

EpochTrace run_epoch(const LearningProblem& problem, const QTable& q, double epsilon,
                     double noise_std, Rng& rng) {
  if (problem.bank.empty()) throw std::invalid_argument("run_epoch: empty controller bank");
  const PlantParams& p = problem.plant;
  const PeriodicMask periodic = p.periodic();
  const Eigen::Matrix4d w = problem.weights.w;
  const Eigen::MatrixXd& z = problem.weights.z;
  auto cost = [&](const State& x, const Control& u) {
    const State e = state_error(x, p.target, periodic);
    return 0.5 * (e.dot(w * e) + u.dot(z * u)) * p.dt;
  };

  EpochTrace trace;
  const int start_cell =
      std::uniform_int_distribution<int>(0, problem.features.num_cells() - 1)(rng);
  State x = normalise_state(problem.features.cell_centre(start_cell), p);
  int s = problem.features.cell(x);
  int a = select_action(q, s, epsilon, rng);
  double accumulated = 0.0;
  std::normal_distribution<double> noise(0.0, 1.0);

  auto close_triplet = [&](double extra) {
    const double r = -(accumulated + extra);
    trace.triplets.push_back(Triplet{r, s, a});
    trace.total_reward += r;
    accumulated = 0.0;
  };

  for (int k = 1; k < p.n_steps; ++k) {
    const Control u = saturate(lqr_control(problem.bank[a], x), p);
    accumulated += cost(x, u);
    State next;
    try {
      next = plant_step(x, u, p);
      if (noise_std > 0.0) {
        for (int i = 0; i < kStateDim; ++i) next[i] += noise_std * noise(rng);
        next = normalise_state(next, p);
      }
      if (!next.allFinite()) throw IntegrationDiverged("run_epoch: non-finite state");
    } catch (const IntegrationDiverged&) {
      Control bound = Control::Constant(p.control_dim(), p.u_max);
      close_triplet(cost(x, bound));
      trace.diverged = true;
      return trace;
    }
    x = next;
    const int s_next = problem.features.cell(x);
    if (s_next != s) {
      close_triplet(0.0);
      s = s_next;
      a = select_action(q, s, epsilon, rng);
    }
  }
  close_triplet(0.0);
  return trace;
}

std::vector<double> discounted_returns(const EpochTrace& trace, double gamma) {
  std::vector<double> returns(trace.triplets.size());
  double acc = 0.0;
  for (std::size_t i = trace.triplets.size(); i-- > 0;) {
    acc = trace.triplets[i].reward + gamma * acc;
    returns[i] = acc;
  }
  return returns;
}

void update_q(QTable& q, const EpochTrace& trace, const LearnParams& params) {
  const std::vector<double> returns = discounted_returns(trace, params.gamma);
  for (std::size_t t = 0; t < trace.triplets.size(); ++t) {
    const Triplet& tr = trace.triplets[t];
    if (tr.state < 0 || tr.state >= q.num_states() || tr.action < 0 ||
        tr.action >= q.num_actions()) {
      throw std::out_of_range("update_q: triplet outside the Q-table");
    }
    const int visits = ++q.visits(tr.state, tr.action);
    const double step = params.alpha / std::pow(static_cast<double>(visits), params.alpha_decay);
    double& value = q.values(tr.state, tr.action);
    value += step * (returns[t] - value);
  }
}

LearnResult learn(const LearningProblem& problem, const LearnParams& params, Rng& rng) {
  params.validate();
  if (problem.bank.empty()) throw std::invalid_argument("learn: empty controller bank");
  LearnResult result;
  result.q = QTable(problem.features.num_cells(), static_cast<int>(problem.bank.size()));
  for (int epoch = 1; epoch <= params.n_epochs; ++epoch) {
    const EpochTrace trace =
        run_epoch(problem, result.q, params.epsilon_at(epoch), params.noise_std, rng);
    update_q(result.q, trace, params);
    if ((epoch - 1) % params.curve_interval == 0) {
      result.curve.push_back(CurvePoint{epoch, trace.total_reward});
    }
  }
  result.policy = greedy_policy(result.q);
  return result;
}

SwitchedPolicy::SwitchedPolicy(std::vector<Controller> bank, Selector selector)
    : bank_(std::move(bank)), selector_(std::move(selector)) {
  if (bank_.empty()) throw std::invalid_argument("SwitchedPolicy: empty controller bank");
}

ControlSource SwitchedPolicy::as_control_source() const {
  return [this](const State& x) { return control(x); };
}

SwitchedPolicy full_control_policy(const std::vector<int>& policy, std::vector<Controller> bank,
                                   const FeatureMap& features) {
  if (static_cast<int>(policy.size()) != features.num_cells()) {
    throw std::invalid_argument("full_control_policy: policy must cover every cell");
  }
  const int n = static_cast<int>(bank.size());
  for (int a : policy) {
    if (a < 0 || a >= n) throw std::invalid_argument("full_control_policy: action out of range");
  }
  return SwitchedPolicy(std::move(bank),
                        [policy, features](const State& x) { return policy[features.cell(x)]; });
}

}  // namespace rloc
