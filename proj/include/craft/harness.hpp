#pragma once

// Experiment runner: configs, run directories, per-run metrics, aggregate
// reports and the grid-size ablation.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "craft/clay.hpp"
#include "craft/error.hpp"
#include "craft/goals.hpp"
#include "craft/llm.hpp"
#include "craft/metrics.hpp"
#include "craft/planner.hpp"
#include "craft/prompts.hpp"
#include "craft/render.hpp"
#include "craft/rollout.hpp"

namespace craft {

enum class PlannerKind { scripted, llm };

inline PlannerKind parse_planner_kind(std::string_view s) {
  if (s == "scripted") return PlannerKind::scripted;
  if (s == "llm") return PlannerKind::llm;
  throw ParseError("planner must be 'scripted' or 'llm', got '" + std::string(s) + "'");
}

inline std::string_view to_string(PlannerKind k) { return k == PlannerKind::scripted ? "scripted" : "llm"; }

/// Square grid of n cells per side over the fixed 80mm workspace. The 4x4
/// grid is the base configuration; finer grids shrink the cells and keep
/// the subcell raster near 32 per side.
inline GridSpec workspace_grid(int n) {
  if (n == 4) return GridSpec::square(4);
  const int subdiv = std::max(2, static_cast<int>(std::lround(32.0 / n)));
  auto g = GridSpec::square(n, 80.0 / n, subdiv);
  g.validate();
  return g;
}

struct ExperimentConfig {
  static PromptConfig varied_prompt() {
    PromptConfig p;
    p.squeeze_mode = SqueezeMode::varied;
    return p;
  }

  std::vector<std::string> goals{"I", "L", "T", "X", "C"};
  int grid = 4;
  Strategy strategy = Strategy::iterative;
  PlannerKind planner = PlannerKind::scripted;
  SqueezeMode squeeze_mode = SqueezeMode::varied;
  bool goal_image = true;
  int runs_per_goal = 5;
  PromptConfig prompt = varied_prompt();
  std::string output_dir = "out";
  LlmEndpointConfig endpoint{};
  std::string endpoint_file;  // JSON endpoint config, overrides `endpoint`
  std::string letters_file;   // JSON letter library merged over the builtins
  int max_steps = 12;
  int sc_samples = 10;
  int tot_branching = 4;
  int tot_depth = 2;
  int tot_beam = 4;
  int vote_samples = 5;
  double iou_threshold = kDefaultIouThreshold;
  double disc_radius_mm = kDefaultDiscRadiusMm;
  Mass initial_density = kDefaultInitialDensity;
  int image_px = 512;

  void validate() const {
    if (goals.empty()) throw InvalidArgument("experiment needs at least one goal");
    if (runs_per_goal < 1) throw InvalidArgument("runs_per_goal must be at least 1");
    if (prompt.goal_image != goal_image)
      throw InvalidArgument("goal_image flag disagrees with the prompt goal_image toggle");
    if (prompt.squeeze_mode != squeeze_mode)
      throw InvalidArgument("squeeze_mode disagrees with the prompt squeeze mode");
    prompt.validate();
    rollout().validate();
    workspace_grid(grid);
  }

  RolloutConfig rollout() const {
    RolloutConfig r;
    r.strategy = strategy;
    r.max_steps = max_steps;
    r.sc_samples = sc_samples;
    r.tot_branching = tot_branching;
    r.tot_depth = tot_depth;
    r.tot_beam = tot_beam;
    r.vote_samples = vote_samples;
    r.strengths = prompt.strengths;
    return r;
  }

  RenderSpec render_spec() const {
    RenderSpec s;
    s.image_px = fitted_image_px(workspace_grid(grid), image_px);
    return s;
  }
};

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = {{"goals", c.goals},
       {"grid", c.grid},
       {"strategy", std::string(to_string(c.strategy))},
       {"planner", std::string(to_string(c.planner))},
       {"squeeze_mode", std::string(to_string(c.squeeze_mode))},
       {"goal_image", c.goal_image},
       {"runs_per_goal", c.runs_per_goal},
       {"prompt", c.prompt},
       {"output_dir", c.output_dir},
       {"endpoint", c.endpoint},
       {"endpoint_file", c.endpoint_file},
       {"letters_file", c.letters_file},
       {"max_steps", c.max_steps},
       {"sc_samples", c.sc_samples},
       {"tot_branching", c.tot_branching},
       {"tot_depth", c.tot_depth},
       {"tot_beam", c.tot_beam},
       {"vote_samples", c.vote_samples},
       {"iou_threshold", c.iou_threshold},
       {"disc_radius_mm", c.disc_radius_mm},
       {"initial_density", c.initial_density},
       {"image_px", c.image_px}};
}

/// Missing keys keep their defaults. The top-level goal_image and
/// squeeze_mode also set the matching prompt fields unless the prompt block
/// states them itself.
inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  c.goals = j.value("goals", c.goals);
  c.grid = j.value("grid", c.grid);
  if (j.contains("strategy")) c.strategy = parse_strategy(j["strategy"].get<std::string>());
  if (j.contains("planner")) c.planner = parse_planner_kind(j["planner"].get<std::string>());
  if (j.contains("squeeze_mode")) c.squeeze_mode = parse_squeeze_mode(j["squeeze_mode"].get<std::string>());
  c.goal_image = j.value("goal_image", c.goal_image);
  c.runs_per_goal = j.value("runs_per_goal", c.runs_per_goal);
  c.prompt.goal_image = c.goal_image;
  c.prompt.squeeze_mode = c.squeeze_mode;
  if (j.contains("prompt")) from_json(j["prompt"], c.prompt);
  c.output_dir = j.value("output_dir", c.output_dir);
  if (j.contains("endpoint")) c.endpoint = j["endpoint"].get<LlmEndpointConfig>();
  c.endpoint_file = j.value("endpoint_file", c.endpoint_file);
  c.letters_file = j.value("letters_file", c.letters_file);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.sc_samples = j.value("sc_samples", c.sc_samples);
  c.tot_branching = j.value("tot_branching", c.tot_branching);
  c.tot_depth = j.value("tot_depth", c.tot_depth);
  c.tot_beam = j.value("tot_beam", c.tot_beam);
  c.vote_samples = j.value("vote_samples", c.vote_samples);
  c.iou_threshold = j.value("iou_threshold", c.iou_threshold);
  c.disc_radius_mm = j.value("disc_radius_mm", c.disc_radius_mm);
  c.initial_density = j.value("initial_density", c.initial_density);
  c.image_px = j.value("image_px", c.image_px);
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  try {
    return read_json_file(path).get<ExperimentConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("invalid experiment config " + path.string() + ": " + e.what());
  }
}

/// Writes through a sibling temporary file and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view data) {
  std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

inline nlohmann::json action_json(const SqueezeAction& a) {
  return {{"cell_a", format_cell(a.a)},
          {"cell_b", format_cell(a.b)},
          {"strength", std::string(to_string(a.strength))},
          {"text", format_action(a)}};
}

inline nlohmann::json trace_json(const RunTrace& t) {
  nlohmann::json steps = nlohmann::json::array();
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    const auto& s = t.steps[i];
    steps.push_back({{"index", i + 1},
                     {"action", action_json(s.action)},
                     {"rationale", s.rationale},
                     {"usage", s.usage},
                     {"post", field_to_json(s.post)}});
  }
  return {{"strategy", std::string(to_string(t.strategy))},
          {"reason", std::string(to_string(t.reason))},
          {"error", t.error},
          {"notes", t.notes},
          {"planner_usage", t.planner_usage},
          {"terminator_usage", t.terminator_usage},
          {"initial", field_to_json(t.initial)},
          {"steps", std::move(steps)}};
}

/// actions.jsonl, step_###.png (000 is the initial state), trace.json.
inline void write_run_directory(const std::filesystem::path& dir, const RunTrace& t, const RenderSpec& spec) {
  std::string lines;
  for (const auto& s : t.steps) {
    auto j = action_json(s.action);
    j["rationale"] = s.rationale;
    lines += j.dump() + "\n";
  }
  write_file_atomic(dir / "actions.jsonl", lines);
  auto png_name = [](std::size_t i) {
    std::ostringstream ss;
    ss << "step_" << std::setw(3) << std::setfill('0') << i << ".png";
    return ss.str();
  };
  write_file_atomic(dir / png_name(0), render_state(t.initial, spec));
  for (std::size_t i = 0; i < t.steps.size(); ++i) write_file_atomic(dir / png_name(i + 1), render_state(t.steps[i].post, spec));
  write_file_atomic(dir / "trace.json", trace_json(t).dump(2) + "\n");
}

struct RunRecord {
  std::string goal;
  int run_index = 0;
  std::string dir;  // relative to the experiment output directory
  std::size_t actions = 0;
  std::string reason;
  std::string error;
  std::optional<MetricsReport> metrics;
  std::string metrics_error;
  TokenUsage usage;
  double cost_usd = 0.0;

  bool completed() const { return error.empty() && metrics.has_value(); }
};

struct Aggregate {
  std::size_t n = 0;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (n - 1); 0 for n < 2
};

inline Aggregate aggregate(const std::vector<double>& xs) {
  Aggregate a;
  a.n = xs.size();
  if (xs.empty()) return a;
  double sum = 0.0;
  for (double x : xs) sum += x;
  a.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - a.mean) * (x - a.mean);
    a.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return a;
}

inline void to_json(nlohmann::json& j, const Aggregate& a) { j = {{"n", a.n}, {"mean", a.mean}, {"std", a.stddev}}; }

struct GoalSummary {
  std::string goal;
  std::size_t runs = 0;
  std::size_t failed = 0;
  Aggregate chamfer, emd, curvature, par, iou, actions, cost;
};

struct RunReport {
  ExperimentConfig config;
  std::vector<RunRecord> runs;
  std::vector<GoalSummary> goals;
  GoalSummary overall;
  double total_cost_usd = 0.0;

  bool all_completed() const {
    for (const auto& r : runs)
      if (!r.completed()) return false;
    return true;
  }
};

inline GoalSummary summarize(const std::string& label, const std::vector<const RunRecord*>& rows) {
  GoalSummary g;
  g.goal = label;
  g.runs = rows.size();
  std::vector<double> cd, emd_v, curv, par, iou_v, acts, cost;
  for (const auto* r : rows) {
    if (!r->completed()) {
      ++g.failed;
      continue;
    }
    cd.push_back(r->metrics->chamfer_mm);
    emd_v.push_back(r->metrics->emd_mm);
    curv.push_back(r->metrics->mean_curvature_per_mm);
    par.push_back(r->metrics->par_per_mm);
    iou_v.push_back(r->metrics->iou);
    acts.push_back(static_cast<double>(r->actions));
    cost.push_back(r->cost_usd);
  }
  g.chamfer = aggregate(cd), g.emd = aggregate(emd_v), g.curvature = aggregate(curv), g.par = aggregate(par);
  g.iou = aggregate(iou_v), g.actions = aggregate(acts), g.cost = aggregate(cost);
  return g;
}

inline void to_json(nlohmann::json& j, const GoalSummary& g) {
  j = {{"goal", g.goal},       {"runs", g.runs},         {"failed", g.failed},   {"chamfer_mm", g.chamfer},
       {"emd_mm", g.emd},      {"curvature", g.curvature}, {"par", g.par},       {"iou", g.iou},
       {"actions", g.actions}, {"cost_usd", g.cost}};
}

inline void to_json(nlohmann::json& j, const RunRecord& r) {
  j = {{"goal", r.goal},          {"run", r.run_index},       {"dir", r.dir},
       {"actions", r.actions},    {"reason", r.reason},       {"error", r.error},
       {"metrics", r.metrics ? nlohmann::json(*r.metrics) : nlohmann::json()},
       {"metrics_error", r.metrics_error},
       {"usage", r.usage},        {"llm_calls", r.usage.requests}, {"cost_usd", r.cost_usd}};
}

inline nlohmann::json report_json(const RunReport& rep) {
  return {{"config", rep.config},
          {"runs", rep.runs},
          {"goals", rep.goals},
          {"overall", rep.overall},
          {"total_cost_usd", rep.total_cost_usd}};
}

/// One row per goal plus an overall row, mean and std of each column.
inline std::string summary_csv(const RunReport& rep) {
  std::ostringstream ss;
  ss << std::setprecision(6);
  ss << "goal,runs,failed,cd_mean,cd_std,emd_mean,emd_std,curv_mean,curv_std,par_mean,par_std,iou_mean,iou_std,"
        "actions_mean,actions_std,cost_mean,cost_std\n";
  auto row = [&](const GoalSummary& g) {
    ss << g.goal << ',' << g.runs << ',' << g.failed;
    for (const Aggregate* a : {&g.chamfer, &g.emd, &g.curvature, &g.par, &g.iou, &g.actions, &g.cost})
      ss << ',' << a->mean << ',' << a->stddev;
    ss << '\n';
  };
  for (const auto& g : rep.goals) row(g);
  row(rep.overall);
  return ss.str();
}

/// Planner, terminator and their clients for one experiment.
struct Agents {
  std::unique_ptr<Planner> planner;
  std::unique_ptr<Terminator> terminator;  // null when termination is off
};

inline Agents make_agents(const ExperimentConfig& cfg, std::shared_ptr<Transport> transport = nullptr) {
  Agents a;
  if (cfg.planner == PlannerKind::scripted) {
    const int horizon = cfg.strategy == Strategy::no_replan ? cfg.max_steps : 1;
    a.planner = std::make_unique<ScriptedPlanner>(cfg.squeeze_mode, cfg.prompt.strengths, horizon);
    if (cfg.prompt.termination_enabled) a.terminator = std::make_unique<IouTerminator>(cfg.iou_threshold);
    return a;
  }
  LlmEndpointConfig endpoint = cfg.endpoint;
  if (!cfg.endpoint_file.empty()) endpoint = read_json_file(cfg.endpoint_file).get<LlmEndpointConfig>();
  endpoint = endpoint.with_env_overrides();
  if (!transport) transport = std::make_shared<HttpTransport>();
  const auto spec = cfg.render_spec();
  // Separate clients keep planner and terminator spend apart.
  a.planner = std::make_unique<LlmPlanner>(std::make_shared<LlmClient>(endpoint, transport), cfg.prompt, spec);
  if (cfg.prompt.termination_enabled)
    a.terminator = std::make_unique<LlmTerminator>(std::make_shared<LlmClient>(endpoint, transport), cfg.prompt, spec);
  return a;
}

inline LlmEndpointConfig effective_endpoint(const ExperimentConfig& cfg) {
  LlmEndpointConfig e = cfg.endpoint;
  if (!cfg.endpoint_file.empty()) e = read_json_file(cfg.endpoint_file).get<LlmEndpointConfig>();
  return e.with_env_overrides();
}

/// Runs every goal runs_per_goal times from a fresh disc and writes
/// <output_dir>/runs/<goal>_<k>/, report.json, summary.csv and config.json.
inline RunReport run_experiment(const ExperimentConfig& cfg, std::shared_ptr<Transport> transport = nullptr,
                                std::ostream* log = nullptr) {
  cfg.validate();
  const GridSpec grid = workspace_grid(cfg.grid);
  const RenderSpec spec = cfg.render_spec();
  const LetterLibrary lib = cfg.letters_file.empty() ? builtin_letters() : load_letter_library(cfg.letters_file);
  const std::filesystem::path out = cfg.output_dir;
  const double price_in = cfg.planner == PlannerKind::llm ? effective_endpoint(cfg).price_in_per_million : 0.0;
  const double price_out = cfg.planner == PlannerKind::llm ? effective_endpoint(cfg).price_out_per_million : 0.0;
  LlmEndpointConfig prices;
  prices.price_in_per_million = price_in, prices.price_out_per_million = price_out;

  RunReport rep;
  rep.config = cfg;
  const ClayField initial = initial_disc(grid, cfg.disc_radius_mm, cfg.initial_density);
  for (const auto& letter : cfg.goals) {
    const GoalSpec goal = make_letter_goal(letter, grid, cfg.goal_image, lib);
    for (int k = 1; k <= cfg.runs_per_goal; ++k) {
      RunRecord rec;
      rec.goal = letter;
      rec.run_index = k;
      rec.dir = "runs/" + letter + "_" + std::to_string(k);
      Agents agents = make_agents(cfg, transport);
      Rollout rollout(*agents.planner, agents.terminator.get(), cfg.rollout());
      const RunTrace trace = rollout.run(initial, goal);
      rec.actions = trace.steps.size();
      rec.reason = std::string(to_string(trace.reason));
      rec.error = trace.error;
      rec.usage = trace.total_usage();
      rec.cost_usd = cost_usd(rec.usage, prices);
      write_run_directory(out / rec.dir, trace, spec);
      try {
        rec.metrics = evaluate_metrics(trace.final_state(), goal);
        write_file_atomic(out / rec.dir / "metrics.json", nlohmann::json(*rec.metrics).dump(2) + "\n");
      } catch (const Error& e) {
        rec.metrics_error = e.what();
      }
      if (log && !rec.completed())
        *log << "warning: " << rec.dir << " excluded from aggregates: "
             << (rec.error.empty() ? rec.metrics_error : rec.error) << "\n";
      rep.runs.push_back(std::move(rec));
    }
  }
  std::vector<const RunRecord*> all;
  for (const auto& letter : cfg.goals) {
    std::vector<const RunRecord*> rows;
    for (const auto& r : rep.runs)
      if (r.goal == letter) rows.push_back(&r);
    rep.goals.push_back(summarize(letter, rows));
  }
  for (const auto& r : rep.runs) {
    all.push_back(&r);
    rep.total_cost_usd += r.cost_usd;
  }
  rep.overall = summarize("all", all);
  write_file_atomic(out / "config.json", nlohmann::json(cfg).dump(2) + "\n");
  write_file_atomic(out / "report.json", report_json(rep).dump(2) + "\n");
  write_file_atomic(out / "summary.csv", summary_csv(rep));
  return rep;
}

/// One experiment per grid size, each in <output_dir>/grid_<n>/.
inline std::vector<RunReport> grid_ablation(const ExperimentConfig& base, const std::vector<int>& sizes,
                                            std::shared_ptr<Transport> transport = nullptr,
                                            std::ostream* log = nullptr) {
  if (sizes.empty()) throw InvalidArgument("grid ablation needs at least one size");
  for (int n : sizes) workspace_grid(n);
  std::vector<RunReport> reports;
  nlohmann::json index = nlohmann::json::array();
  std::string csv;
  for (int n : sizes) {
    ExperimentConfig cfg = base;
    cfg.grid = n;
    cfg.output_dir = (std::filesystem::path(base.output_dir) / ("grid_" + std::to_string(n))).string();
    reports.push_back(run_experiment(cfg, transport, log));
    const auto g = workspace_grid(n);
    index.push_back({{"grid", n},
                     {"cell_size_mm", g.cell_size_mm},
                     {"subdiv", g.subdiv},
                     {"fingertip_width_mm", cfg.prompt.strengths.fingertip_width_mm},
                     {"overall", reports.back().overall}});
    const auto rows = summary_csv(reports.back());
    const auto body = rows.substr(rows.find('\n') + 1);
    if (csv.empty()) csv = "grid," + rows.substr(0, rows.find('\n') + 1);
    std::istringstream lines(body);
    for (std::string line; std::getline(lines, line);) csv += std::to_string(n) + "," + line + "\n";
  }
  write_file_atomic(std::filesystem::path(base.output_dir) / "ablation.json", index.dump(2) + "\n");
  write_file_atomic(std::filesystem::path(base.output_dir) / "ablation.csv", csv);
  return reports;
}

}  // namespace craft
