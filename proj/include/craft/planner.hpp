#pragma once

// Planners choose squeezes; terminators decide when a shape is finished.
// LLM-backed and scripted implementations share one interface so every
// rollout strategy can drive either.

#include <algorithm>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "craft/clay.hpp"
#include "craft/error.hpp"
#include "craft/goals.hpp"
#include "craft/llm.hpp"
#include "craft/parse.hpp"
#include "craft/prompts.hpp"
#include "craft/render.hpp"

namespace craft {

struct PlanRequest {
  const ClayField* field = nullptr;
  const GoalSpec* goal = nullptr;
  Trajectory history;
};

struct PlannerResponse {
  std::string raw_text;
  Trajectory trajectory;
  std::string rationale;
  TokenUsage usage;
};

struct Candidate {
  Trajectory path;  // from the decision root
  ClayField state;
};

class Planner {
 public:
  virtual ~Planner() = default;
  virtual std::string name() const = 0;

  /// Single-shot trajectory. Throws NoImprovement when there is nothing
  /// useful left to do.
  virtual PlannerResponse plan(const PlanRequest& req) = 0;

  /// One diverse sample; may run concurrently with other samples.
  virtual PlannerResponse sample(const PlanRequest& req) { return plan(req); }

  /// Up to `count` next actions, none of them in `exclude`. Duplicates are
  /// possible; callers deduplicate.
  virtual PlannerResponse propose(const PlanRequest& req, std::size_t count, const Trajectory& exclude) = 0;

  /// Index of the preferred candidate.
  virtual std::size_t vote(const PlanRequest& req, const std::vector<Candidate>& candidates) = 0;

  /// Everything spent so far.
  virtual TokenUsage usage() const { return {}; }
};

struct TerminationOutcome {
  TerminationDecision decision;
  TokenUsage usage;
};

class Terminator {
 public:
  virtual ~Terminator() = default;
  virtual std::string name() const = 0;
  virtual TerminationOutcome decide(const ClayField& state, const GoalSpec& goal) = 0;
  virtual TokenUsage usage() const { return {}; }
};

inline constexpr double kDefaultIouThreshold = 0.85;

/// Stops once the occupancy overlaps the goal mask with IoU >= tau.
class IouTerminator final : public Terminator {
 public:
  explicit IouTerminator(double tau = kDefaultIouThreshold) : tau_(tau) {
    if (!(tau > 0.0 && tau <= 1.0)) throw InvalidArgument("IoU threshold must lie in (0, 1]");
  }
  std::string name() const override { return "iou"; }
  TerminationOutcome decide(const ClayField& state, const GoalSpec& goal) override {
    if (!goal.mask) throw InvalidArgument("IoU terminator needs a goal mask");
    const double v = iou(occupancy_mask(state), *goal.mask);
    return {{v >= tau_, "IoU " + std::to_string(v) + (v >= tau_ ? " >= " : " < ") + std::to_string(tau_)}, {}};
  }

 private:
  double tau_;
};

// --- scripted ----------------------------------------------------------------

/// Exhaustive one-step greedy search on symmetric-difference area.
class ScriptedPlanner final : public Planner {
 public:
  struct Scored {
    std::size_t symdiff;
    SqueezeAction action;
    ClayField field;
  };

  /// `horizon` > 1 chains greedy steps into one trajectory (used when the
  /// plan is executed open-loop).
  explicit ScriptedPlanner(SqueezeMode mode = SqueezeMode::varied, StrengthTable strengths = {}, int horizon = 1)
      : mode_(mode), strengths_(strengths), horizon_(horizon) {
    strengths_.validate();
    if (horizon_ < 1) throw InvalidArgument("scripted horizon must be at least 1");
  }

  std::string name() const override { return "scripted"; }

  /// Every executable canonical action, in canonical order.
  std::vector<SqueezeAction> candidate_actions(const GridSpec& grid) const {
    std::vector<SqueezeAction> out;
    for (auto [a, b] : all_cell_pairs(grid))
      for (Strength s : strengths_for(mode_)) {
        const SqueezeAction act{a, b, s};
        if (is_executable(act, grid, strengths_)) out.push_back(act);
      }
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Outcome of every candidate that does not overflow, in canonical order.
  std::vector<Scored> score_all(const ClayField& field, const Mask& goal) const {
    std::vector<Scored> out;
    for (const auto& act : candidate_actions(field.grid())) {
      try {
        auto o = apply_squeeze(field, act, strengths_);
        const auto sd = symmetric_difference(occupancy_mask(o.field), goal);
        out.push_back({sd, act, std::move(o.field)});
      } catch (const OverflowError&) {
        continue;
      }
    }
    return out;
  }

  /// Strictly improving best action (first in canonical order on ties).
  std::optional<Scored> best_step(const ClayField& field, const Mask& goal) const {
    const auto current = symmetric_difference(occupancy_mask(field), goal);
    std::optional<Scored> best;
    for (const auto& act : candidate_actions(field.grid())) {
      try {
        auto o = apply_squeeze(field, act, strengths_);
        if (o.displaced_mass == 0) continue;
        const auto sd = symmetric_difference(occupancy_mask(o.field), goal);
        if (sd < current && (!best || sd < best->symdiff)) best = Scored{sd, act, std::move(o.field)};
      } catch (const OverflowError&) {
        continue;
      }
    }
    return best;
  }

  PlannerResponse plan(const PlanRequest& req) override {
    const Mask& goal = goal_mask(req);
    PlannerResponse r;
    ClayField field = *req.field;
    for (int i = 0; i < horizon_; ++i) {
      auto best = best_step(field, goal);
      if (!best) break;
      r.trajectory.push_back(best->action);
      if (!r.rationale.empty()) r.rationale += "; ";
      r.rationale += format_action(best->action) + " leaves " + std::to_string(best->symdiff) + " mismatched subcells";
      field = std::move(best->field);
    }
    if (r.trajectory.empty()) throw NoImprovement("no squeeze reduces the mismatch with the goal");
    r.raw_text = r.rationale;
    return r;
  }

  PlannerResponse propose(const PlanRequest& req, std::size_t count, const Trajectory& exclude) override {
    auto scored = score_all(*req.field, goal_mask(req));
    std::stable_sort(scored.begin(), scored.end(), [](const Scored& x, const Scored& y) { return x.symdiff < y.symdiff; });
    PlannerResponse r;
    for (const auto& s : scored) {
      if (r.trajectory.size() >= count) break;
      if (std::find(exclude.begin(), exclude.end(), s.action) != exclude.end()) continue;
      r.trajectory.push_back(s.action);
    }
    r.rationale = "lowest mismatch after one squeeze";
    return r;
  }

  std::size_t vote(const PlanRequest& req, const std::vector<Candidate>& candidates) override {
    if (candidates.empty()) throw InvalidArgument("vote needs at least one candidate");
    const Mask& goal = goal_mask(req);
    std::size_t best = 0, best_sd = symmetric_difference(occupancy_mask(candidates[0].state), goal);
    for (std::size_t i = 1; i < candidates.size(); ++i) {
      const auto sd = symmetric_difference(occupancy_mask(candidates[i].state), goal);
      if (sd < best_sd) best = i, best_sd = sd;
    }
    return best;
  }

 private:
  static const Mask& goal_mask(const PlanRequest& req) {
    if (!req.goal || !req.goal->mask) throw InvalidArgument("scripted planner needs a goal mask");
    return *req.goal->mask;
  }

  SqueezeMode mode_;
  StrengthTable strengths_;
  int horizon_;
};

// --- LLM ---------------------------------------------------------------------

namespace detail {

inline PromptInputs prompt_inputs(const PromptConfig& cfg, const RenderSpec& spec, const PlanRequest& req) {
  if (!req.field || !req.goal) throw InvalidArgument("plan request needs a field and a goal");
  PromptInputs in;
  in.grid = req.field->grid();
  in.state_png = render_state(*req.field, spec);
  if (cfg.goal_image && !req.goal->text_only()) in.goal_png = render_goal(*req.goal, in.grid, spec);
  in.goal = req.goal;
  in.history = req.history;
  return in;
}

inline Trajectory parse_executable(const std::string& text, const GridSpec& grid, const PromptConfig& cfg) {
  auto t = parse_trajectory(text, grid, cfg.squeeze_mode);
  for (const auto& a : t)
    if (!is_executable(a, grid, cfg.strengths))
      throw ParseError(format_action(a) + " cannot be executed: the fingertip gap is not below the cell distance");
  return t;
}

}  // namespace detail

class LlmPlanner final : public Planner {
 public:
  LlmPlanner(std::shared_ptr<LlmClient> client, PromptConfig cfg, RenderSpec spec = {})
      : client_(std::move(client)), cfg_(cfg), spec_(spec) {
    if (!client_) throw InvalidArgument("LLM planner needs a client");
    cfg_.validate();
  }

  std::string name() const override { return "llm"; }

  PlannerResponse plan(const PlanRequest& req) override { return ask_plan(req, client_->endpoint().temperature); }
  PlannerResponse sample(const PlanRequest& req) override {
    return ask_plan(req, client_->endpoint().sample_temperature);
  }

  PlannerResponse propose(const PlanRequest& req, std::size_t count, const Trajectory& exclude) override {
    const auto in = detail::prompt_inputs(cfg_, spec_, req);
    const auto prompt = build_propose_prompt(cfg_, in, count, exclude, client_->templates());
    auto res = client_->ask(prompt, client_->endpoint().sample_temperature, action_grammar(cfg_.squeeze_mode),
                            [&](const std::string& text) { return detail::parse_executable(text, in.grid, cfg_); });
    return {res.text, std::move(res.value), res.text, res.usage};
  }

  std::size_t vote(const PlanRequest& req, const std::vector<Candidate>& candidates) override {
    auto in = detail::prompt_inputs(cfg_, spec_, req);
    std::vector<VoteCandidate> vc;
    for (const auto& c : candidates) vc.push_back({c.path, render_state(c.state, spec_)});
    const auto prompt = build_vote_prompt(cfg_, in, vc, client_->templates());
    auto res = client_->ask(prompt, client_->endpoint().sample_temperature, kVoteGrammar,
                            [&](const std::string& text) { return parse_vote(text, candidates.size()); });
    return res.value;
  }

  TokenUsage usage() const override { return client_->total_usage(); }

 private:
  PlannerResponse ask_plan(const PlanRequest& req, double temperature) {
    const auto in = detail::prompt_inputs(cfg_, spec_, req);
    const auto prompt = build_action_prompt(cfg_, in, client_->templates());
    auto res = client_->ask(prompt, temperature, action_grammar(cfg_.squeeze_mode),
                            [&](const std::string& text) { return detail::parse_executable(text, in.grid, cfg_); });
    return {res.text, std::move(res.value), res.text, res.usage};
  }

  std::shared_ptr<LlmClient> client_;
  PromptConfig cfg_;
  RenderSpec spec_;
};

class LlmTerminator final : public Terminator {
 public:
  LlmTerminator(std::shared_ptr<LlmClient> client, PromptConfig cfg, RenderSpec spec = {})
      : client_(std::move(client)), cfg_(cfg), spec_(spec) {
    if (!client_) throw InvalidArgument("LLM terminator needs a client");
    cfg_.validate();
    if (!cfg_.termination_enabled) throw InvalidArgument("termination prompt is disabled in this configuration");
  }

  std::string name() const override { return "llm"; }

  TerminationOutcome decide(const ClayField& state, const GoalSpec& goal) override {
    PlanRequest req{&state, &goal, {}};
    const auto in = detail::prompt_inputs(cfg_, spec_, req);
    const auto prompt = build_termination_prompt(cfg_, in, client_->templates());
    auto res = client_->ask(prompt, client_->endpoint().temperature, kVerdictGrammar, parse_verdict);
    return {res.value, res.usage};
  }

  TokenUsage usage() const override { return client_->total_usage(); }

 private:
  std::shared_ptr<LlmClient> client_;
  PromptConfig cfg_;
  RenderSpec spec_;
};

}  // namespace craft
