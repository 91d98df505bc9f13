#pragma once

// Rollout strategies: open-loop execution of one plan, iterative replanning,
// self-consistency voting over sampled trajectories, and breadth-first tree
// search with candidate voting.

#include <algorithm>
#include <future>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "craft/clay.hpp"
#include "craft/error.hpp"
#include "craft/goals.hpp"
#include "craft/planner.hpp"

namespace craft {

enum class Strategy { no_replan, iterative, self_consistency, tree_of_thought };

inline std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::no_replan: return "no_replan";
    case Strategy::iterative: return "iterative";
    case Strategy::self_consistency: return "sc";
    case Strategy::tree_of_thought: return "tot";
  }
  return "iterative";
}

inline Strategy parse_strategy(std::string_view text) {
  if (text == "no_replan" || text == "no-replan") return Strategy::no_replan;
  if (text == "iterative" || text == "cot") return Strategy::iterative;
  if (text == "sc" || text == "self_consistency") return Strategy::self_consistency;
  if (text == "tot" || text == "tree_of_thought") return Strategy::tree_of_thought;
  throw ParseError("unknown strategy '" + std::string(text) + "' (no_replan, iterative, sc, tot)");
}

struct RolloutConfig {
  Strategy strategy = Strategy::iterative;
  int max_steps = 12;
  int sc_samples = 10;
  int tot_branching = 4;
  int tot_depth = 2;
  int tot_beam = 4;
  int vote_samples = 5;
  StrengthTable strengths{};

  void validate() const {
    if (max_steps < 1) throw InvalidArgument("max_steps must be at least 1");
    if (sc_samples < 1) throw InvalidArgument("sc_samples must be at least 1");
    if (tot_branching < 2) throw InvalidArgument("tot_branching must be at least 2");
    if (tot_depth < 1) throw InvalidArgument("tot_depth must be at least 1");
    if (tot_beam < 1) throw InvalidArgument("tot_beam must be at least 1");
    if (vote_samples < 1) throw InvalidArgument("vote_samples must be at least 1");
    strengths.validate();
  }
};

enum class StopReason { terminator_stop, max_steps, planner_stop, error };

inline std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::terminator_stop: return "terminator_stop";
    case StopReason::max_steps: return "max_steps";
    case StopReason::planner_stop: return "planner_stop";
    case StopReason::error: return "error";
  }
  return "error";
}

struct RunStep {
  ClayField pre;
  SqueezeAction action;
  ClayField post;
  std::string rationale;
  TokenUsage usage;  // planning spend for this step's decision
};

struct RunTrace {
  Strategy strategy = Strategy::iterative;
  ClayField initial;
  std::vector<RunStep> steps;
  StopReason reason = StopReason::max_steps;
  std::string error;
  std::vector<std::string> notes;  // dropped samples, rejected proposals
  TokenUsage planner_usage;
  TokenUsage terminator_usage;

  const ClayField& final_state() const { return steps.empty() ? initial : steps.back().post; }
  TokenUsage total_usage() const { return planner_usage + terminator_usage; }
  Trajectory actions() const {
    Trajectory t;
    for (const auto& s : steps) t.push_back(s.action);
    return t;
  }
};

class Rollout {
 public:
  /// `terminator` may be null: the loop then runs until max_steps or until
  /// the planner gives up.
  Rollout(Planner& planner, Terminator* terminator, RolloutConfig cfg)
      : planner_(planner), terminator_(terminator), cfg_(cfg) {
    cfg_.validate();
  }

  RunTrace run(const ClayField& initial, const GoalSpec& goal) {
    RunTrace trace;
    trace.strategy = cfg_.strategy;
    trace.initial = initial;
    const TokenUsage planner_before = planner_.usage();
    const TokenUsage term_before = terminator_ ? terminator_->usage() : TokenUsage{};
    try {
      if (cfg_.strategy == Strategy::no_replan) {
        run_open_loop(trace, goal);
      } else {
        run_closed_loop(trace, goal);
      }
    } catch (const Error& e) {
      trace.reason = StopReason::error;
      trace.error = e.what();
    }
    trace.planner_usage = minus(planner_.usage(), planner_before);
    if (terminator_) trace.terminator_usage = minus(terminator_->usage(), term_before);
    return trace;
  }

 private:
  struct Decision {
    SqueezeAction action;
    std::string rationale;
  };

  static TokenUsage minus(TokenUsage a, const TokenUsage& b) {
    a.input_tokens -= b.input_tokens;
    a.output_tokens -= b.output_tokens;
    a.requests -= b.requests;
    return a;
  }

  void execute(RunTrace& trace, const SqueezeAction& act, std::string rationale, TokenUsage usage) {
    const ClayField& pre = trace.final_state();
    auto outcome = apply_squeeze(pre, act, cfg_.strengths);
    trace.steps.push_back({pre, canonicalize(act), std::move(outcome.field), std::move(rationale), usage});
  }

  void run_open_loop(RunTrace& trace, const GoalSpec& goal) {
    PlannerResponse resp;
    try {
      resp = planner_.plan({&trace.initial, &goal, {}});
    } catch (const NoImprovement& e) {
      trace.reason = StopReason::planner_stop;
      trace.notes.push_back(e.what());
      return;
    }
    if (resp.trajectory.empty()) throw ParseError("planner returned an empty trajectory");
    const auto n = std::min<std::size_t>(resp.trajectory.size(), static_cast<std::size_t>(cfg_.max_steps));
    for (std::size_t i = 0; i < n; ++i)
      execute(trace, resp.trajectory[i], i == 0 ? resp.rationale : std::string(), i == 0 ? resp.usage : TokenUsage{});
    trace.reason = resp.trajectory.size() > n ? StopReason::max_steps : StopReason::planner_stop;
  }

  void run_closed_loop(RunTrace& trace, const GoalSpec& goal) {
    while (true) {
      if (static_cast<int>(trace.steps.size()) >= cfg_.max_steps) {
        trace.reason = StopReason::max_steps;
        return;
      }
      const ClayField& state = trace.final_state();
      if (terminator_) {
        const auto t = terminator_->decide(state, goal);
        if (t.decision.stop) {
          trace.reason = StopReason::terminator_stop;
          trace.notes.push_back("stop: " + t.decision.rationale);
          return;
        }
      }
      const PlanRequest req{&state, &goal, trace.actions()};
      const TokenUsage before = planner_.usage();
      std::optional<Decision> d;
      try {
        switch (cfg_.strategy) {
          case Strategy::self_consistency: d = decide_self_consistency(req, trace); break;
          case Strategy::tree_of_thought: d = decide_tree_of_thought(req, trace); break;
          default: {
            auto resp = planner_.plan(req);
            if (resp.trajectory.empty()) throw ParseError("planner returned an empty trajectory");
            d = Decision{resp.trajectory.front(), resp.rationale};
          }
        }
      } catch (const NoImprovement& e) {
        trace.reason = StopReason::planner_stop;
        trace.notes.push_back(e.what());
        return;
      }
      execute(trace, d->action, std::move(d->rationale), minus(planner_.usage(), before));
    }
  }

  Decision decide_self_consistency(const PlanRequest& req, RunTrace& trace) {
    std::vector<std::future<PlannerResponse>> futures;
    for (int i = 0; i < cfg_.sc_samples; ++i)
      futures.push_back(std::async(std::launch::async, [this, &req] { return planner_.sample(req); }));
    std::map<Trajectory, int> counts;
    std::map<Trajectory, std::string> rationale;
    int no_improvement = 0;
    std::string last_failure;
    for (auto& f : futures) {
      try {
        auto r = f.get();
        auto t = canonicalize(r.trajectory);
        if (t.empty()) continue;
        ++counts[t];
        rationale.try_emplace(t, r.rationale);
      } catch (const NoImprovement& e) {
        ++no_improvement;
        last_failure = e.what();
      } catch (const Error& e) {
        last_failure = e.what();
        trace.notes.push_back(std::string("dropped sample: ") + e.what());
      }
    }
    if (counts.empty()) {
      if (no_improvement > 0) throw NoImprovement(last_failure);
      throw Error("all " + std::to_string(cfg_.sc_samples) + " samples failed: " + last_failure);
    }
    // Map order is lexicographic, so the first maximum is the smallest.
    auto best = counts.begin();
    for (auto it = counts.begin(); it != counts.end(); ++it)
      if (it->second > best->second) best = it;
    return {best->first.front(), "chosen by " + std::to_string(best->second) + " of " +
                                     std::to_string(cfg_.sc_samples) + " samples: " + rationale[best->first]};
  }

  struct Node {
    ClayField state;
    Trajectory path;
    int votes = 0;  // accumulated along the path
  };

  /// Up to tot_branching distinct actions, re-asking once for missing ones.
  Trajectory distinct_proposals(const PlanRequest& req, RunTrace& trace) {
    const auto want = static_cast<std::size_t>(cfg_.tot_branching);
    Trajectory held;
    auto absorb = [&](const Trajectory& t) {
      for (const auto& a : canonicalize(t)) {
        if (held.size() >= want) break;
        if (std::find(held.begin(), held.end(), a) == held.end()) {
          held.push_back(a);
        } else {
          trace.notes.push_back("duplicate proposal " + format_action(a));
        }
      }
    };
    absorb(planner_.propose(req, want, {}).trajectory);
    if (held.size() < want) absorb(planner_.propose(req, want - held.size(), held).trajectory);
    return held;
  }

  Decision decide_tree_of_thought(const PlanRequest& root_req, RunTrace& trace) {
    std::vector<Node> frontier{{*root_req.field, {}, 0}};
    for (int level = 0; level < cfg_.tot_depth; ++level) {
      std::vector<Node> children;
      for (const auto& node : frontier) {
        Trajectory history = root_req.history;
        history.insert(history.end(), node.path.begin(), node.path.end());
        const PlanRequest req{&node.state, root_req.goal, history};
        for (const auto& act : distinct_proposals(req, trace)) {
          try {
            auto o = apply_squeeze(node.state, act, cfg_.strengths);
            Trajectory path = node.path;
            path.push_back(act);
            children.push_back({std::move(o.field), std::move(path), node.votes});
          } catch (const Error& e) {
            trace.notes.push_back("proposal " + format_action(act) + " rejected: " + e.what());
          }
        }
      }
      if (children.empty()) throw Error("no valid proposals at search depth " + std::to_string(level + 1));
      if (children.size() > 1) {
        std::vector<Candidate> cands;
        for (const auto& c : children) cands.push_back({c.path, c.state});
        std::vector<int> level_votes(children.size(), 0);
        for (int v = 0; v < cfg_.vote_samples; ++v) ++level_votes.at(planner_.vote(root_req, cands));
        for (std::size_t i = 0; i < children.size(); ++i) children[i].votes += level_votes[i];
        // Keep the beam by this level's votes; stable order keeps
        // first-proposed nodes ahead on ties.
        std::vector<std::size_t> order(children.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return level_votes[a] > level_votes[b]; });
        order.resize(std::min(order.size(), static_cast<std::size_t>(cfg_.tot_beam)));
        std::sort(order.begin(), order.end());
        std::vector<Node> kept;
        for (auto i : order) kept.push_back(std::move(children[i]));
        children = std::move(kept);
      }
      frontier = std::move(children);
    }
    const Node* best = &frontier.front();
    for (const auto& n : frontier)
      if (n.votes > best->votes) best = &n;
    std::string path_text;
    for (const auto& a : best->path) path_text += (path_text.empty() ? "" : ", ") + format_action(a);
    return {best->path.front(), "best path " + path_text + " with " + std::to_string(best->votes) + " votes"};
  }

  Planner& planner_;
  Terminator* terminator_;
  RolloutConfig cfg_;
};

}  // namespace craft
