// craft: experiment runner, grid ablation, session server and metrics tool.

#include <csignal>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "craft/harness.hpp"
#include "craft/service.hpp"

namespace {

struct RunFlags {
  std::string config;
  std::vector<std::string> goals;
  std::optional<std::string> strategy, planner, squeeze_mode, out, endpoint;
  std::optional<int> grid, runs, max_steps;
  bool no_goal_image = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config, "experiment config JSON")->check(CLI::ExistingFile);
  cmd->add_option("--goal", f.goals, "goal letters (repeat or comma separate)")->delimiter(',');
  cmd->add_option("--strategy", f.strategy, "no_replan, iterative, sc or tot");
  cmd->add_option("--planner", f.planner, "scripted or llm");
  cmd->add_option("--squeeze-mode", f.squeeze_mode, "fixed or varied");
  cmd->add_option("--grid", f.grid, "cells per side");
  cmd->add_option("--runs", f.runs, "runs per goal");
  cmd->add_option("--max-steps", f.max_steps, "action budget per run");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--endpoint", f.endpoint, "LLM endpoint config JSON")->check(CLI::ExistingFile);
  cmd->add_flag("--no-goal-image", f.no_goal_image, "describe the goal in text only");
}

craft::ExperimentConfig resolve(const RunFlags& f) {
  craft::ExperimentConfig c = f.config.empty() ? craft::ExperimentConfig{} : craft::load_experiment_config(f.config);
  if (!f.goals.empty()) c.goals = f.goals;
  if (f.strategy) c.strategy = craft::parse_strategy(*f.strategy);
  if (f.planner) c.planner = craft::parse_planner_kind(*f.planner);
  if (f.squeeze_mode) c.squeeze_mode = c.prompt.squeeze_mode = craft::parse_squeeze_mode(*f.squeeze_mode);
  if (f.grid) c.grid = *f.grid;
  if (f.runs) c.runs_per_goal = *f.runs;
  if (f.max_steps) c.max_steps = *f.max_steps;
  if (f.out) c.output_dir = *f.out;
  if (f.endpoint) c.endpoint_file = *f.endpoint;
  if (f.no_goal_image) {
    c.goal_image = c.prompt.goal_image = false;
    c.prompt.goal_text = true;
  }
  return c;
}

int report_status(const std::vector<craft::RunReport>& reports) {
  std::size_t failed = 0, total = 0;
  for (const auto& r : reports)
    for (const auto& run : r.runs) {
      ++total;
      if (!run.completed()) ++failed;
    }
  std::cerr << total - failed << "/" << total << " runs completed\n";
  return failed == 0 ? 0 : 1;
}

craft::SessionServer* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grid-based clay crafting workbench"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "run an experiment");
  add_run_flags(run, run_flags);

  RunFlags abl_flags;
  std::vector<int> sizes{6, 8, 10, 12, 16};
  auto* ablate = app.add_subcommand("ablate-grid", "repeat an experiment over grid sizes");
  add_run_flags(ablate, abl_flags);
  ablate->add_option("--sizes", sizes, "grid sizes")->delimiter(',');

  std::string bind = "127.0.0.1:8080";
  std::string serve_config;
  auto* serve = app.add_subcommand("serve", "start the HTTP session service");
  serve->add_option("--bind", bind, "host:port");
  serve->add_option("--config", serve_config, "experiment config JSON with session defaults")->check(CLI::ExistingFile);

  std::string state_file, goal_letter;
  auto* metrics = app.add_subcommand("metrics", "score a saved clay field against a goal");
  metrics->add_option("--state", state_file, "clay field JSON")->required()->check(CLI::ExistingFile);
  metrics->add_option("--goal", goal_letter, "goal letter")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto rep = craft::run_experiment(resolve(run_flags), nullptr, &std::cerr);
      std::cout << craft::summary_csv(rep);
      return report_status({rep});
    }
    if (*ablate) {
      const auto reps = craft::grid_ablation(resolve(abl_flags), sizes, nullptr, &std::cerr);
      for (const auto& r : reps) std::cout << "grid " << r.config.grid << "\n" << craft::summary_csv(r);
      return report_status(reps);
    }
    if (*serve) {
      const auto colon = bind.rfind(':');
      if (colon == std::string::npos) throw craft::InvalidArgument("--bind needs host:port");
      craft::ServiceConfig sc;
      if (!serve_config.empty()) sc.defaults = craft::load_experiment_config(serve_config);
      craft::SessionServer server(sc);
      const int port = server.bind(bind.substr(0, colon), std::stoi(bind.substr(colon + 1)));
      std::cerr << "listening on " << bind.substr(0, colon) << ":" << port << "\n";
      g_server = &server;
      std::signal(SIGINT, [](int) {
        if (g_server) g_server->stop();
      });
      server.listen();
      return 0;
    }
    if (*metrics) {
      const auto field = craft::field_from_json(craft::read_json_file(state_file));
      const auto goal = craft::make_letter_goal(goal_letter, field.grid());
      std::cout << nlohmann::json(craft::evaluate_metrics(field, goal)).dump(2) << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
