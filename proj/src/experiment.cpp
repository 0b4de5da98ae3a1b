#include "rloc/experiment.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

#include "rloc/angles.hpp"

namespace rloc {

namespace fs = std::filesystem;

ExperimentConfig ExperimentConfig::defaults(PlantKind kind) {
  ExperimentConfig c;
  if (kind == PlantKind::kArm) {
    c.plant = PlantParams::arm();
    c.weights = CostWeights::arm();
    c.sysid.n_starts = 790;
    c.sysid.h = 7;
    c.sysid.n_segments = 6500;
    c.feature_bins = {6, 6};
    c.n_actions = 5;
  }
  return c;
}

ExperimentConfig ExperimentConfig::paper_scale(PlantKind kind) {
  ExperimentConfig c = defaults(kind);
  c.n_trials = 500;
  c.value_grid = 1000;
  return c;
}

void ExperimentConfig::validate() const {
  plant.validate();
  weights.validate();
  learn.validate();
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(fmt::format("invalid config: {}", what));
  };
  require(weights.z.rows() == plant.control_dim(), "Z must match the control dimension");
  require(sysid.n_starts >= 1, "sysid.n_starts must be positive");
  require(sysid.h >= 2, "sysid.h must be at least 2");
  require(sysid.h <= plant.n_steps, "sysid.h cannot exceed n_K");
  require(sysid.n_segments >= 1, "sysid.n_segments must be positive");
  require(sysid.decay > 0.0, "sysid.decay must be positive");
  require(sysid.angle_tol > 0.0 && sysid.velocity_tol > 0.0, "sysid box tolerances must be positive");
  require(sysid.em.max_cycles >= 1, "sysid.em.max_cycles must be positive");
  require(feature_bins[0] >= 1 && feature_bins[1] >= 1, "feature bins must be positive");
  require(n_actions >= 1, "n_actions must be positive");
  require(n_actions_min >= 1 && n_actions_min <= n_actions_max, "n_actions range is empty");
  require(n_trials >= 1, "n_trials must be positive");
  require(eval_starts >= 1, "evaluation.starts must be positive");
  require(eval_duration > 0.0, "evaluation.duration must be positive");
  require(value_grid >= 2, "evaluation.value_grid must be at least 2");
}

Json config_to_json(const ExperimentConfig& c) {
  Json j;
  j["plant"] = plant_to_json(c.plant);
  j["weights"] = weights_to_json(c.weights);
  j["learning"] = learn_params_to_json(c.learn);
  j["sysid"] = Json{{"n_starts", c.sysid.n_starts},
                    {"h", c.sysid.h},
                    {"n_segments", c.sysid.n_segments},
                    {"decay", c.sysid.decay},
                    {"angle_tol_rad", c.sysid.angle_tol},
                    {"velocity_tol_rad_s", c.sysid.velocity_tol},
                    {"em", Json{{"max_cycles", c.sysid.em.max_cycles},
                                {"tolerance", c.sysid.em.tolerance},
                                {"ridge", c.sysid.em.ridge},
                                {"variance_floor", c.sysid.em.variance_floor}}}};
  j["features"] = Json{{"bins", c.feature_bins}};
  j["n_actions"] = c.n_actions;
  j["n_actions_range"] = Json{c.n_actions_min, c.n_actions_max};
  j["n_trials"] = c.n_trials;
  j["evaluation"] = Json{{"starts", c.eval_starts},
                         {"duration", c.eval_duration},
                         {"tolerance", Json{{"angle_rad", c.tolerance.angle},
                                            {"angular_velocity_rad_s", c.tolerance.angular_velocity},
                                            {"position", c.tolerance.position}}},
                         {"value_grid", c.value_grid}};
  j["seed"] = c.seed;
  return j;
}

namespace {

template <typename T>
void maybe(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig config_from_json(const Json& j) {
  PlantKind kind = PlantKind::kCartPole;
  if (j.contains("plant")) {
    kind = plant_kind_from_string(j.at("plant").at("plant").get<std::string>());
  }
  ExperimentConfig c = ExperimentConfig::defaults(kind);
  if (j.contains("plant")) c.plant = plant_from_json(j.at("plant"));
  if (j.contains("weights")) c.weights = weights_from_json(j.at("weights"), c.weights);
  if (j.contains("learning")) c.learn = learn_params_from_json(j.at("learning"), c.learn);
  if (j.contains("sysid")) {
    const Json& s = j.at("sysid");
    maybe(s, "n_starts", c.sysid.n_starts);
    maybe(s, "h", c.sysid.h);
    maybe(s, "n_segments", c.sysid.n_segments);
    maybe(s, "decay", c.sysid.decay);
    maybe(s, "angle_tol_rad", c.sysid.angle_tol);
    maybe(s, "velocity_tol_rad_s", c.sysid.velocity_tol);
    if (s.contains("em")) {
      const Json& em = s.at("em");
      maybe(em, "max_cycles", c.sysid.em.max_cycles);
      maybe(em, "tolerance", c.sysid.em.tolerance);
      maybe(em, "ridge", c.sysid.em.ridge);
      maybe(em, "variance_floor", c.sysid.em.variance_floor);
    }
  }
  if (j.contains("features")) maybe(j.at("features"), "bins", c.feature_bins);
  maybe(j, "n_actions", c.n_actions);
  if (j.contains("n_actions_range")) {
    const auto range = j.at("n_actions_range").get<std::array<int, 2>>();
    c.n_actions_min = range[0];
    c.n_actions_max = range[1];
  }
  maybe(j, "n_trials", c.n_trials);
  if (j.contains("evaluation")) {
    const Json& e = j.at("evaluation");
    maybe(e, "starts", c.eval_starts);
    maybe(e, "duration", c.eval_duration);
    maybe(e, "value_grid", c.value_grid);
    if (e.contains("tolerance")) {
      const Json& t = e.at("tolerance");
      maybe(t, "angle_rad", c.tolerance.angle);
      maybe(t, "angular_velocity_rad_s", c.tolerance.angular_velocity);
      maybe(t, "position", c.tolerance.position);
    }
  }
  maybe(j, "seed", c.seed);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) { return config_from_json(read_json(path)); }

Experience collect_naive_experience(const ExperimentConfig& c) {
  const NaiveControlTensor controls =
      build_naive_controls(c.plant.control_dim(), c.plant.u_max, c.sysid.decay, c.plant.n_steps);
  const std::vector<State> starts = naive_start_grid(c.plant, c.sysid.n_starts);
  Rng rng = make_rng(c.seed, SeedStream::kExperience);
  return collect_experience(c.plant, starts, controls, rng);
}

LinearModel fit_centre(const ExperimentConfig& c, const Experience& y, const State& centre) {
  const SubTrajectorySet set = sample_subtrajectories(y, centre, c.plant, c.sysid.angle_tol,
                                                      c.sysid.velocity_tol, c.sysid.h,
                                                      c.sysid.n_segments);
  if (set.segments.empty()) {
    throw std::runtime_error(fmt::format(
        "no experience segments near centre ({}, {}, {}, {})", centre[0], centre[1], centre[2],
        centre[3]));
  }
  return fit_local_model(set, c.plant, c.sysid.em);
}

std::vector<Controller> synthesise_bank(const ExperimentConfig& c,
                                        const std::vector<LinearModel>& models) {
  return build_controller_bank(models, c.weights, c.plant.target, c.plant.periodic());
}

LearningProblem make_problem(const ExperimentConfig& c, std::vector<Controller> bank) {
  return LearningProblem{c.plant, c.weights, std::move(bank),
                         FeatureMap::for_plant(c.plant, c.feature_bins)};
}

std::vector<State> trial_centres(const ExperimentConfig& c, int trial, int n_actions) {
  Rng rng = make_rng(c.seed, SeedStream::kCentres, static_cast<std::uint64_t>(trial));
  return place_centres(c.plant, n_actions, {}, rng);
}

std::vector<Controller> start_grid_bank(const ExperimentConfig& c, const Experience& y,
                                        const std::vector<State>& starts) {
  std::vector<LinearModel> models;
  models.reserve(starts.size());
  for (const State& s : starts) models.push_back(fit_centre(c, y, s));
  return synthesise_bank(c, models);
}

namespace {

EvaluationOptions eval_options(const ExperimentConfig& c) {
  EvaluationOptions o;
  o.duration = c.eval_duration;
  o.tolerance = c.tolerance;
  return o;
}

std::vector<TrialPoint> run_trial(const ExperimentConfig& c, const Experience& y, int trial) {
  std::vector<TrialPoint> points;
  const std::vector<State> starts = evaluation_start_grid(c.plant, c.eval_starts);
  const EvaluationOptions options = eval_options(c);
  const std::vector<State> centres = trial_centres(c, trial, c.n_actions_max);
  std::vector<LinearModel> models;
  for (int n_a = 1; n_a <= c.n_actions_max; ++n_a) {
    TrialPoint pt;
    pt.trial = trial;
    pt.n_actions = n_a;
    try {
      models.push_back(fit_centre(c, y, centres[n_a - 1]));
      if (n_a < c.n_actions_min) continue;
      std::vector<Controller> bank = synthesise_bank(c, models);
      const LearningProblem problem = make_problem(c, bank);
      Rng rng = make_rng(c.seed, SeedStream::kLearning, static_cast<std::uint64_t>(trial),
                         static_cast<std::uint64_t>(n_a));
      const LearnResult learnt = learn(problem, c.learn, rng);
      const SwitchedPolicy rloc = full_control_policy(learnt.policy, bank, problem.features);
      const SwitchedPolicy nnoc = nnoc_policy(bank, c.plant);
      const EvaluationReport r =
          evaluate_policy(c.plant, c.weights, rloc.as_control_source(), starts, options, "rloc");
      const EvaluationReport n =
          evaluate_policy(c.plant, c.weights, nnoc.as_control_source(), starts, options, "nnoc");
      pt.rloc_cost = r.mean;
      pt.nnoc_cost = n.mean;
      pt.rloc_success = r.success_fraction();
      pt.nnoc_success = n.success_fraction();
      pt.curve = learnt.curve;
    } catch (const std::exception& e) {
      if (n_a < c.n_actions_min) continue;
      pt.status = fmt::format("failed: {}", e.what());
      pt.rloc_cost = pt.nnoc_cost = std::numeric_limits<double>::quiet_NaN();
      // Later n_a in this trial need the missing model; record them as failed too.
      points.push_back(std::move(pt));
      for (int rest = n_a + 1; rest <= c.n_actions_max; ++rest) {
        TrialPoint f;
        f.trial = trial;
        f.n_actions = rest;
        f.status = "failed: earlier centre could not be fitted";
        f.rloc_cost = f.nnoc_cost = std::numeric_limits<double>::quiet_NaN();
        if (rest >= c.n_actions_min) points.push_back(std::move(f));
      }
      return points;
    }
    points.push_back(std::move(pt));
  }
  return points;
}

void write_config_snapshot(const ExperimentConfig& c, const std::string& out) {
  write_json((fs::path(out) / "config.json").string(), config_to_json(c));
}

std::string path_in(const std::string& out, const std::string& rel) {
  return (fs::path(out) / rel).string();
}

Json read_required(const std::string& path, const char* hint) {
  if (!fs::exists(path)) {
    throw std::runtime_error(fmt::format("missing '{}' ({})", path, hint));
  }
  return read_json(path);
}

std::vector<Controller> controllers_from(const Json& j) {
  std::vector<Controller> bank;
  for (const Json& cj : j.at("controllers")) bank.push_back(controller_from_json(cj));
  if (bank.empty()) throw std::runtime_error("no controllers stored");
  return bank;
}

}  // namespace

SweepResult run_sweep(const ExperimentConfig& c, int jobs, const Experience* shared) {
  c.validate();
  Experience local;
  if (shared == nullptr) {
    local = collect_naive_experience(c);
    shared = &local;
  }
  std::vector<std::vector<TrialPoint>> per_trial(c.n_trials);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int t = next++; t < c.n_trials; t = next++) per_trial[t] = run_trial(c, *shared, t);
  };
  const int n_threads = std::max(1, std::min(jobs, c.n_trials));
  std::vector<std::thread> threads;
  for (int i = 1; i < n_threads; ++i) threads.emplace_back(worker);
  worker();
  for (auto& th : threads) th.join();

  SweepResult result;
  for (auto& pts : per_trial) {
    for (auto& pt : pts) result.points.push_back(std::move(pt));
  }
  return result;
}

void cmd_sysid(const ExperimentConfig& c, const std::string& out) {
  c.validate();
  write_config_snapshot(c, out);
  const Experience y = collect_naive_experience(c);
  write_experience_csv(y, path_in(out, "models/experience.csv"));
  const std::vector<State> centres = trial_centres(c, 0, c.n_actions);
  std::vector<LinearModel> models;
  for (const State& centre : centres) models.push_back(fit_centre(c, y, centre));
  const std::vector<Controller> bank = synthesise_bank(c, models);

  Json j;
  j["plant"] = std::string(to_string(c.plant.kind));
  j["seed"] = c.seed;
  j["centre_seed"] = derive_seed(c.seed, SeedStream::kCentres, 0);
  j["experience_seed"] = derive_seed(c.seed, SeedStream::kExperience);
  j["experience_records"] = y.size();
  j["experience_dropped"] = y.dropped;
  j["n_models"] = models.size();
  Json mj = Json::array();
  for (const LinearModel& m : models) mj.push_back(model_to_json(m));
  j["models"] = mj;
  Json cj = Json::array();
  for (const Controller& ctl : bank) cj.push_back(controller_to_json(ctl));
  j["controllers"] = cj;
  write_json(path_in(out, "models/models.json"), j);
}

void cmd_train(const ExperimentConfig& c, const std::string& out) {
  c.validate();
  const Json models = read_required(path_in(out, "models/models.json"), "run sysid first");
  std::vector<Controller> bank = controllers_from(models);
  write_config_snapshot(c, out);
  const LearningProblem problem = make_problem(c, bank);
  Rng rng = make_rng(c.seed, SeedStream::kLearning, 0, bank.size());
  const LearnResult result = learn(problem, c.learn, rng);

  Json j;
  j["plant"] = std::string(to_string(c.plant.kind));
  j["seed"] = c.seed;
  j["learning_seed"] = derive_seed(c.seed, SeedStream::kLearning, 0, bank.size());
  j["n_states"] = result.q.num_states();
  j["n_actions"] = result.q.num_actions();
  j["feature_bins"] = problem.features.bins();
  j["policy"] = result.policy;
  j["q"] = matrix_to_json(result.q.values);
  j["visits"] = matrix_to_json(result.q.visits.cast<double>());
  Json cj = Json::array();
  for (const Controller& ctl : bank) cj.push_back(controller_to_json(ctl));
  j["controllers"] = cj;
  write_json(path_in(out, "policies/policy.json"), j);

  std::string csv = "epoch,direct_reward\n";
  for (const CurvePoint& p : result.curve) {
    csv += fmt::format("{},{}\n", p.epoch, format_double(p.reward));
  }
  write_file_atomic(path_in(out, "policies/learning_curve.csv"), csv);
}

EvalMode eval_mode_from_string(const std::string& name) {
  if (name == "rloc") return EvalMode::kRloc;
  if (name == "nnoc") return EvalMode::kNnoc;
  if (name == "lqr-target") return EvalMode::kLqrTarget;
  if (name == "lqr-grid") return EvalMode::kLqrGrid;
  throw std::invalid_argument(
      fmt::format("unknown evaluation mode '{}' (expected rloc|nnoc|lqr-target|lqr-grid)", name));
}

std::string to_string(EvalMode mode) {
  switch (mode) {
    case EvalMode::kRloc: return "rloc";
    case EvalMode::kNnoc: return "nnoc";
    case EvalMode::kLqrTarget: return "lqr-target";
    case EvalMode::kLqrGrid: return "lqr-grid";
  }
  return "unknown";
}

EvaluationReport cmd_evaluate(const ExperimentConfig& c, const std::string& out, EvalMode mode,
                              const EvaluateFlags& flags) {
  c.validate();
  std::vector<State> starts;
  if (flags.perturbation_deg) {
    State x = c.plant.target;
    for (int d : c.plant.angle_dims()) x[d] += deg2rad(*flags.perturbation_deg);
    starts.push_back(normalise_state(x, c.plant));
  } else {
    starts = evaluation_start_grid(c.plant, c.eval_starts);
  }
  EvaluationOptions options = eval_options(c);
  options.keep_trajectories = flags.trajectories;
  const std::string name = to_string(mode);
  const FeatureMap features = FeatureMap::for_plant(c.plant, c.feature_bins);

  std::optional<SwitchedPolicy> switched;
  std::vector<ControlSource> per_start;
  if (mode == EvalMode::kRloc) {
    const Json pj = read_required(path_in(out, "policies/policy.json"), "run train first");
    const auto policy = pj.at("policy").get<std::vector<int>>();
    if (static_cast<int>(policy.size()) != features.num_cells()) {
      throw std::runtime_error("stored policy does not match the configured feature map");
    }
    switched.emplace(full_control_policy(policy, controllers_from(pj), features));
  } else if (mode == EvalMode::kNnoc) {
    const Json mj = read_required(path_in(out, "models/models.json"), "run sysid first");
    switched.emplace(nnoc_policy(controllers_from(mj), c.plant));
  } else if (mode == EvalMode::kLqrTarget) {
    const Json mj = read_required(path_in(out, "models/models.json"), "run sysid first");
    std::vector<Controller> bank = controllers_from(mj);
    if (!(state_error(bank.front().centre, c.plant.target, c.plant.periodic()).norm() == 0.0)) {
      throw std::runtime_error("lqr-target needs model 0 to be centred at the target");
    }
    bank.resize(1);
    switched.emplace(std::move(bank), [](const State&) { return 0; });
  } else {
    if (flags.action_sequences || flags.value_grid) {
      throw std::invalid_argument(
          "lqr-grid uses a separate controller per start; action sequences and value grids "
          "are not defined for it");
    }
    const Experience y = collect_naive_experience(c);
    for (Controller& ctl : start_grid_bank(c, y, starts)) {
      per_start.push_back([ctl](const State& x) { return lqr_control(ctl, x); });
    }
  }

  write_config_snapshot(c, out);
  EvaluationReport report =
      switched ? evaluate_policy(c.plant, c.weights, switched->as_control_source(), starts,
                                 options, name)
               : evaluate_per_start(c.plant, c.weights, per_start, starts, options, name);

  write_report_csv(report, path_in(out, fmt::format("reports/{}_report.csv", name)));
  Json summary{{"mode", name},
               {"n_starts", report.costs.size()},
               {"duration", report.duration},
               {"mean_cost", report.mean},
               {"sem_cost", report.sem},
               {"success_fraction", report.success_fraction()}};
  write_json(path_in(out, fmt::format("reports/{}_summary.json", name)), summary);

  if (flags.trajectories) {
    for (std::size_t i = 0; i < report.trajectories.size(); ++i) {
      write_trajectory_csv(report.trajectories[i],
                           path_in(out, fmt::format("reports/{}_trajectories/start_{:03}.csv", name, i)));
    }
  }
  if (flags.action_sequences) {
    report.action_sequences = action_sequences(c.plant, *switched, features, starts, c.eval_duration);
    write_action_sequences_csv(report.action_sequences,
                               path_in(out, fmt::format("reports/{}_actions.csv", name)));
  }
  if (flags.value_grid) {
    const ValueGrid g = value_function_grid(c.plant, c.weights, switched->as_control_source(),
                                            {c.value_grid, c.value_grid}, c.eval_duration);
    write_value_grid_csv(g, path_in(out, fmt::format("reports/{}_value_grid.csv", name)));
  }
  return report;
}

SweepResult cmd_sweep(const ExperimentConfig& c, const std::string& out, int jobs) {
  c.validate();
  write_config_snapshot(c, out);
  const SweepResult result = run_sweep(c, jobs);

  std::string trials = "trial,n_a,rloc_mean_cost,nnoc_mean_cost,rloc_success,nnoc_success,status\n";
  for (const TrialPoint& p : result.points) {
    trials += fmt::format("{},{},{},{},{},{},\"{}\"\n", p.trial, p.n_actions,
                          format_double(p.rloc_cost), format_double(p.nnoc_cost),
                          format_double(p.rloc_success), format_double(p.nnoc_success), p.status);
  }
  write_file_atomic(path_in(out, "reports/sweep_trials.csv"), trials);

  std::string summary = "n_a,n_trials,rloc_mean,rloc_sem,nnoc_mean,nnoc_sem\n";
  std::string curves = "n_a,epoch,mean_reward,sem_reward,n_trials\n";
  for (int n_a = c.n_actions_min; n_a <= c.n_actions_max; ++n_a) {
    std::vector<double> rloc;
    std::vector<double> nnoc;
    std::vector<std::vector<double>> rewards;
    std::vector<int> epochs;
    for (const TrialPoint& p : result.points) {
      if (p.n_actions != n_a || p.status != "ok") continue;
      rloc.push_back(p.rloc_cost);
      nnoc.push_back(p.nnoc_cost);
      if (rewards.empty()) {
        rewards.resize(p.curve.size());
        for (const CurvePoint& cp : p.curve) epochs.push_back(cp.epoch);
      }
      for (std::size_t i = 0; i < p.curve.size() && i < rewards.size(); ++i) {
        rewards[i].push_back(p.curve[i].reward);
      }
    }
    const auto [rm, rs] = mean_and_sem(rloc);
    const auto [nm, ns] = mean_and_sem(nnoc);
    summary += fmt::format("{},{},{},{},{},{}\n", n_a, rloc.size(), format_double(rm),
                           format_double(rs), format_double(nm), format_double(ns));
    for (std::size_t i = 0; i < rewards.size(); ++i) {
      const auto [m, s] = mean_and_sem(rewards[i]);
      curves += fmt::format("{},{},{},{},{}\n", n_a, epochs[i], format_double(m), format_double(s),
                            rewards[i].size());
    }
  }
  write_file_atomic(path_in(out, "reports/sweep_summary.csv"), summary);
  write_file_atomic(path_in(out, "reports/sweep_curves.csv"), curves);
  return result;
}

}  // namespace rloc
