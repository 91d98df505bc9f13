#pragma once

// Multimodal prompt assembly for the action, termination, proposal and vote
// queries. Template text comes from prompts/v1/*.txt, compiled in through the
// generated prompt_templates.hpp; a directory of the same files can replace
// it at runtime.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "craft/error.hpp"
#include "craft/goals.hpp"
#include "craft/grid.hpp"
#include "craft/prompt_templates.hpp"

namespace craft {

struct ContentBlock {
  enum class Kind { text, image };
  Kind kind = Kind::text;
  std::string text;
  std::vector<std::uint8_t> png;

  static ContentBlock of_text(std::string t) { return {Kind::text, std::move(t), {}}; }
  static ContentBlock of_image(std::vector<std::uint8_t> bytes) { return {Kind::image, {}, std::move(bytes)}; }
  friend bool operator==(const ContentBlock&, const ContentBlock&) = default;
};

struct PromptComponent {
  std::string id;
  std::vector<ContentBlock> blocks;
  friend bool operator==(const PromptComponent&, const PromptComponent&) = default;
};

struct Prompt {
  std::string kind;  // "action", "termination", "propose" or "vote"
  std::vector<PromptComponent> components;

  /// Flattened block sequence, images in place.
  std::vector<ContentBlock> blocks() const {
    std::vector<ContentBlock> out;
    for (const auto& c : components) out.insert(out.end(), c.blocks.begin(), c.blocks.end());
    return out;
  }

  /// All text blocks joined with blank lines; images marked as [image].
  std::string text() const {
    std::string s;
    for (const auto& b : blocks()) {
      if (!s.empty()) s += "\n\n";
      s += b.kind == ContentBlock::Kind::text ? b.text : std::string("[image]");
    }
    return s;
  }

  std::size_t image_count() const {
    std::size_t n = 0;
    for (const auto& b : blocks()) n += b.kind == ContentBlock::Kind::image ? 1 : 0;
    return n;
  }

  bool has_component(std::string_view id) const {
    for (const auto& c : components)
      if (c.id == id) return true;
    return false;
  }

  friend bool operator==(const Prompt&, const Prompt&) = default;
};

struct PromptConfig {
  bool goal_image = true;
  bool state_goal_comparison = true;
  bool predicted_effect = true;
  bool grasp_types_explanation = true;
  bool step_by_step = true;
  bool grid_explanation = true;
  bool clay_behavior = true;
  bool goal_text = true;
  bool termination_enabled = true;
  SqueezeMode squeeze_mode = SqueezeMode::fixed;
  StrengthTable strengths{};

  void validate() const {
    if (!goal_image && !goal_text) throw InvalidArgument("prompt needs the goal image, the goal text, or both");
    strengths.validate();
  }

  friend bool operator==(const PromptConfig&, const PromptConfig&) = default;
};

inline constexpr std::array<std::string_view, 9> kPromptToggles{
    "goal_image", "state_goal_comparison", "predicted_effect", "grasp_types_explanation", "step_by_step",
    "grid_explanation", "clay_behavior", "goal_text", "termination_enabled"};

inline bool& toggle_ref(PromptConfig& cfg, std::string_view name) {
  if (name == "goal_image") return cfg.goal_image;
  if (name == "state_goal_comparison") return cfg.state_goal_comparison;
  if (name == "predicted_effect") return cfg.predicted_effect;
  if (name == "grasp_types_explanation") return cfg.grasp_types_explanation;
  if (name == "step_by_step") return cfg.step_by_step;
  if (name == "grid_explanation") return cfg.grid_explanation;
  if (name == "clay_behavior") return cfg.clay_behavior;
  if (name == "goal_text") return cfg.goal_text;
  if (name == "termination_enabled") return cfg.termination_enabled;
  throw InvalidArgument("unknown prompt toggle '" + std::string(name) + "'");
}

inline void to_json(nlohmann::json& j, const PromptConfig& cfg) {
  j = nlohmann::json::object();
  PromptConfig copy = cfg;
  for (auto name : kPromptToggles) j[std::string(name)] = toggle_ref(copy, name);
  j["squeeze_mode"] = std::string(to_string(cfg.squeeze_mode));
}

inline void from_json(const nlohmann::json& j, PromptConfig& cfg) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "squeeze_mode") {
      cfg.squeeze_mode = parse_squeeze_mode(it.value().get<std::string>());
    } else {
      toggle_ref(cfg, it.key()) = it.value().get<bool>();
    }
  }
}

/// Named template texts with {{name}} placeholders.
class TemplateSet {
 public:
  TemplateSet() : texts_(embedded_prompt_templates().begin(), embedded_prompt_templates().end()) {}

  /// Loads every *.txt in `dir`, keyed by file stem, over the embedded set.
  static TemplateSet from_directory(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw InvalidArgument("prompt directory not found: " + dir.string());
    TemplateSet set;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (entry.path().extension() != ".txt") continue;
      std::ifstream in(entry.path(), std::ios::binary);
      std::ostringstream ss;
      ss << in.rdbuf();
      set.texts_[entry.path().stem().string()] = ss.str();
    }
    return set;
  }

  const std::string& raw(const std::string& name) const {
    const auto it = texts_.find(name);
    if (it == texts_.end()) throw InvalidArgument("missing prompt template '" + name + "'");
    return it->second;
  }

  /// Substitutes every {{key}}; unknown keys are an error. Trailing
  /// whitespace of the template is dropped.
  std::string render(const std::string& name, const std::map<std::string, std::string>& vars = {}) const {
    const std::string& t = raw(name);
    std::string out;
    std::size_t pos = 0;
    while (true) {
      const auto open = t.find("{{", pos);
      if (open == std::string::npos) break;
      const auto close = t.find("}}", open + 2);
      if (close == std::string::npos) throw InvalidArgument("unterminated placeholder in template '" + name + "'");
      out.append(t, pos, open - pos);
      const std::string key = t.substr(open + 2, close - open - 2);
      const auto v = vars.find(key);
      if (v == vars.end()) throw InvalidArgument("template '" + name + "' needs a value for {{" + key + "}}");
      out += v->second;
      pos = close + 2;
    }
    out.append(t, pos, std::string::npos);
    while (!out.empty() && (out.back() == '\n' || out.back() == ' ' || out.back() == '\r')) out.pop_back();
    return out;
  }

 private:
  std::map<std::string, std::string> texts_;
};

/// Inputs shared by every prompt kind.
struct PromptInputs {
  GridSpec grid;
  std::vector<std::uint8_t> state_png;
  std::vector<std::uint8_t> goal_png;  // empty when the goal has no image
  const GoalSpec* goal = nullptr;
  Trajectory history;
};

namespace detail {

inline std::string join_actions(const Trajectory& t, std::string_view sep) {
  std::string s;
  for (const auto& a : t) {
    if (!s.empty()) s += sep;
    s += format_action(a);
  }
  return s;
}

inline std::string grammar_line(SqueezeMode mode) {
  return mode == SqueezeMode::fixed ? "SQUEEZE <cell> AND <cell>" : "SQUEEZE <cell> AND <cell> AT <MIN|MEDIUM|MAX>";
}

inline std::string gap_text(double mm) {
  std::ostringstream ss;
  ss << mm;
  return ss.str();
}

inline std::string strength_text(const PromptConfig& cfg) {
  const auto& s = cfg.strengths;
  if (cfg.squeeze_mode == SqueezeMode::fixed)
    return "The gripper always closes until the fingertips are " + gap_text(s.fixed_mm) + " mm apart.";
  return "Every squeeze has a strength that sets how far the gripper closes: MIN leaves a " + gap_text(s.min_mm) +
         " mm gap between the fingertips, MEDIUM leaves " + gap_text(s.medium_mm) + " mm and MAX leaves " +
         gap_text(s.max_mm) + " mm.";
}

inline std::map<std::string, std::string> base_vars(const PromptConfig& cfg, const PromptInputs& in) {
  const auto& g = in.grid;
  std::string goal_name;
  if (cfg.goal_text) {
    goal_name = in.goal->text_description;
  } else {
    goal_name = "the shape shown in the goal image";
  }
  return {
      {"rows", std::to_string(g.rows)},
      {"cols", std::to_string(g.cols)},
      {"last_col", std::string(1, static_cast<char>('A' + g.cols - 1))},
      {"last_cell", format_cell({g.cols - 1, g.rows - 1})},
      {"cell_mm", gap_text(g.cell_size_mm)},
      {"finger_mm", gap_text(cfg.strengths.fingertip_width_mm)},
      {"strength_text", strength_text(cfg)},
      {"grammar", grammar_line(cfg.squeeze_mode)},
      {"goal_name", goal_name},
      {"history", in.history.empty() ? std::string("none") : join_actions(in.history, "; ")},
  };
}

inline std::string paragraphs(const std::vector<std::string>& parts) {
  std::string s;
  for (const auto& p : parts) {
    if (p.empty()) continue;
    if (!s.empty()) s += "\n";
    s += p;
  }
  return s;
}

inline PromptComponent text_component(std::string id, std::string text) {
  return {std::move(id), {ContentBlock::of_text(std::move(text))}};
}

inline PromptComponent image_component(std::string id, std::string caption, std::vector<std::uint8_t> png) {
  return {std::move(id), {ContentBlock::of_text(std::move(caption)), ContentBlock::of_image(std::move(png))}};
}

inline void check_inputs(const PromptConfig& cfg, const PromptInputs& in) {
  cfg.validate();
  in.grid.validate();
  if (!in.goal) throw InvalidArgument("prompt needs a goal");
  if (in.state_png.empty()) throw InvalidArgument("prompt needs a state image");
  if (cfg.goal_image && (in.goal->text_only() || in.goal_png.empty()))
    throw InvalidArgument("goal image requested but goal '" + in.goal->text_description + "' is text-only");
}

// Components shared by the action and proposal prompts: task overview,
// environment, grasp description.
inline std::vector<PromptComponent> preamble(const TemplateSet& t, const PromptConfig& cfg,
                                             const std::map<std::string, std::string>& vars) {
  std::vector<PromptComponent> out;
  out.push_back(text_component("overview", t.render("action_overview", vars)));
  out.push_back(text_component(
      "environment",
      paragraphs({t.render("action_environment", vars), cfg.grid_explanation ? t.render("action_grid", vars) : ""})));
  out.push_back(text_component(
      "grasp", paragraphs({t.render("action_grasp", vars),
                           cfg.grasp_types_explanation ? t.render("action_grasp_types", vars) : "",
                           cfg.clay_behavior ? t.render("action_clay_behavior", vars) : ""})));
  return out;
}

}  // namespace detail

inline Prompt build_action_prompt(const PromptConfig& cfg, const PromptInputs& in, const TemplateSet& t = {}) {
  detail::check_inputs(cfg, in);
  const auto vars = detail::base_vars(cfg, in);
  Prompt p{"action", detail::preamble(t, cfg, vars)};
  p.components.push_back(detail::text_component(
      "trajectory", detail::paragraphs({t.render("action_trajectory", vars),
                                        cfg.state_goal_comparison ? t.render("action_comparison", vars) : "",
                                        cfg.step_by_step ? t.render("action_step_by_step", vars) : "",
                                        cfg.predicted_effect ? t.render("action_predicted_effect", vars) : "",
                                        t.render("action_grammar", vars)})));
  if (cfg.goal_image) p.components.push_back(detail::image_component("goal_image", t.render("action_goal_image", vars), in.goal_png));
  p.components.push_back(detail::image_component("state_image", t.render("action_state_image", vars), in.state_png));
  p.components.push_back(detail::text_component("command", t.render("action_command", vars)));
  return p;
}

inline Prompt build_termination_prompt(const PromptConfig& cfg, const PromptInputs& in, const TemplateSet& t = {}) {
  if (!cfg.termination_enabled) throw InvalidArgument("termination prompt is disabled in this configuration");
  detail::check_inputs(cfg, in);
  auto vars = detail::base_vars(cfg, in);
  Prompt p{"termination", {}};
  p.components.push_back(detail::text_component("overview", t.render("termination_overview", vars)));
  p.components.push_back(detail::text_component("decision", t.render("termination_decision", vars)));
  p.components.push_back(
      detail::image_component("state_image", t.render("termination_state_image", vars), in.state_png));
  if (cfg.goal_image) {
    p.components.push_back(detail::image_component("goal", t.render("termination_goal", vars), in.goal_png));
  } else {
    vars["goal_name"] = in.goal->text_description;
    p.components.push_back(detail::text_component("goal", t.render("termination_goal_text", vars)));
  }
  p.components.push_back(detail::text_component("command", t.render("termination_command", vars)));
  return p;
}

/// Tree search proposal: the action preamble and images, then a request for
/// `count` distinct next squeezes, optionally excluding some already held.
inline Prompt build_propose_prompt(const PromptConfig& cfg, const PromptInputs& in, std::size_t count,
                                   const Trajectory& exclude = {}, const TemplateSet& t = {}) {
  detail::check_inputs(cfg, in);
  auto vars = detail::base_vars(cfg, in);
  vars["count"] = std::to_string(count);
  vars["exclude"] = exclude.empty() ? "" : " Do not repeat any of these: " + detail::join_actions(exclude, "; ") + ".";
  Prompt p{"propose", detail::preamble(t, cfg, vars)};
  if (cfg.goal_image) p.components.push_back(detail::image_component("goal_image", t.render("action_goal_image", vars), in.goal_png));
  p.components.push_back(detail::image_component("state_image", t.render("action_state_image", vars), in.state_png));
  p.components.push_back(detail::text_component(
      "command", detail::paragraphs({t.render("action_command", vars), t.render("propose", vars)})));
  return p;
}

struct VoteCandidate {
  Trajectory path;  // actions from the decision root
  std::vector<std::uint8_t> state_png;
};

inline Prompt build_vote_prompt(const PromptConfig& cfg, const PromptInputs& in,
                                const std::vector<VoteCandidate>& candidates, const TemplateSet& t = {}) {
  cfg.validate();
  if (!in.goal) throw InvalidArgument("prompt needs a goal");
  if (candidates.empty()) throw InvalidArgument("vote prompt needs at least one candidate");
  auto vars = detail::base_vars(cfg, in);
  vars["count"] = std::to_string(candidates.size());
  Prompt p{"vote", {}};
  p.components.push_back(detail::text_component("overview", t.render("vote", vars)));
  if (cfg.goal_image && !in.goal_png.empty()) {
    p.components.push_back(detail::image_component("goal", t.render("termination_goal", vars), in.goal_png));
  } else {
    vars["goal_name"] = in.goal->text_description;
    p.components.push_back(detail::text_component("goal", t.render("termination_goal_text", vars)));
  }
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    auto cv = vars;
    cv["index"] = std::to_string(i + 1);
    cv["actions"] = detail::join_actions(candidates[i].path, ", then ");
    p.components.push_back(
        detail::image_component("candidate_" + std::to_string(i + 1), t.render("vote_candidate", cv), candidates[i].state_png));
  }
  return p;
}

inline std::string action_grammar(SqueezeMode mode) { return detail::grammar_line(mode); }
inline constexpr std::string_view kVerdictGrammar = "VERDICT: STOP  or  VERDICT: CONTINUE";
inline constexpr std::string_view kVoteGrammar = "VOTE: <number>";

/// Corrective follow-up after an unparseable reply.
inline std::string build_retry_text(const std::string& reason, std::string_view grammar, const TemplateSet& t = {}) {
  return t.render("retry", {{"reason", reason}, {"grammar", std::string(grammar)}});
}

}  // namespace craft
