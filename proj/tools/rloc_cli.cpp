// Command-line front end: sysid, train, evaluate and sweep.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "rloc/experiment.hpp"

namespace {

struct Common {
  std::string config;
  std::string plant = "cartpole";
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  bool paper_scale = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON config file (missing keys use plant defaults)");
  cmd->add_option("--plant", c.plant, "Plant used when no config file is given")
      ->check(CLI::IsMember({"arm", "cartpole"}));
  cmd->add_option("--seed", c.seed, "Master seed (overrides the config)");
  cmd->add_option("--out", c.out, "Experiment directory");
  cmd->add_flag("--paper-scale", c.paper_scale,
                "Start from full-scale defaults (500 trials, 1000x1000 value grid)");
}

rloc::ExperimentConfig resolve(const Common& c) {
  rloc::ExperimentConfig cfg;
  if (!c.config.empty()) {
    rloc::Json j = rloc::read_json(c.config);
    if (c.paper_scale) {
      const rloc::PlantKind kind =
          j.contains("plant") ? rloc::plant_kind_from_string(j["plant"]["plant"].get<std::string>())
                              : rloc::PlantKind::kCartPole;
      const auto full = rloc::ExperimentConfig::paper_scale(kind);
      if (!j.contains("n_trials")) j["n_trials"] = full.n_trials;
      if (!j.contains("evaluation") || !j["evaluation"].contains("value_grid")) {
        j["evaluation"]["value_grid"] = full.value_grid;
      }
    }
    cfg = rloc::config_from_json(j);
  } else {
    const auto kind = rloc::plant_kind_from_string(c.plant);
    cfg = c.paper_scale ? rloc::ExperimentConfig::paper_scale(kind)
                        : rloc::ExperimentConfig::defaults(kind);
  }
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reinforcement learning over switched local LQR controllers"};
  app.require_subcommand(1);

  Common sysid_opts;
  auto* sysid = app.add_subcommand("sysid", "Collect naive experience and fit local linear models");
  add_common(sysid, sysid_opts);

  Common train_opts;
  auto* train = app.add_subcommand("train", "Learn a controller-selection policy");
  add_common(train, train_opts);
  std::optional<int> epochs;
  train->add_option("--epochs", epochs, "Override the number of learning epochs");

  Common eval_opts;
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a policy or baseline");
  add_common(evaluate, eval_opts);
  std::string mode = "rloc";
  rloc::EvaluateFlags flags;
  evaluate->add_option("--mode", mode, "rloc | nnoc | lqr-target | lqr-grid")
      ->check(CLI::IsMember({"rloc", "nnoc", "lqr-target", "lqr-grid"}));
  evaluate->add_flag("--trajectories", flags.trajectories, "Write one trajectory CSV per start");
  evaluate->add_flag("--action-sequences", flags.action_sequences,
                     "Write the action chosen at each symbolic-state entry");
  evaluate->add_flag("--value-grid", flags.value_grid, "Write the cost-to-go grid");
  std::optional<int> grid;
  evaluate->add_option("--grid", grid, "Value-grid resolution per axis");
  evaluate->add_option("--perturbation", flags.perturbation_deg,
                       "Evaluate a single start: the target with every angle offset by DEG");

  Common sweep_opts;
  auto* sweep = app.add_subcommand("sweep", "Cost versus number of controllers over many trials");
  add_common(sweep, sweep_opts);
  std::optional<int> trials;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  sweep->add_option("--trials", trials, "Override the number of trials");
  sweep->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sysid->parsed()) {
      const auto cfg = resolve(sysid_opts);
      rloc::cmd_sysid(cfg, sysid_opts.out);
      fmt::print("models written to {}/models\n", sysid_opts.out);
    } else if (train->parsed()) {
      auto cfg = resolve(train_opts);
      if (epochs) cfg.learn.n_epochs = *epochs;
      cfg.validate();
      rloc::cmd_train(cfg, train_opts.out);
      fmt::print("policy written to {}/policies\n", train_opts.out);
    } else if (evaluate->parsed()) {
      auto cfg = resolve(eval_opts);
      if (grid) cfg.value_grid = *grid;
      cfg.validate();
      const auto report = rloc::cmd_evaluate(cfg, eval_opts.out, rloc::eval_mode_from_string(mode), flags);
      fmt::print("{}: mean cost {:.6g} (SEM {:.3g}), success {:.1f}% over {} starts\n", mode,
                 report.mean, report.sem, 100.0 * report.success_fraction(), report.costs.size());
    } else if (sweep->parsed()) {
      auto cfg = resolve(sweep_opts);
      if (trials) cfg.n_trials = *trials;
      cfg.validate();
      const auto result = rloc::cmd_sweep(cfg, sweep_opts.out, jobs);
      fmt::print("{} trial points written to {}/reports\n", result.points.size(), sweep_opts.out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
