#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "craft/prompts.hpp"
#include "craft/render.hpp"

using namespace craft;

namespace {

struct Fixture {
  GridSpec grid = GridSpec::square(4);
  GoalSpec goal = make_letter_goal("X", grid);
  PromptInputs in;

  Fixture() {
    in.grid = grid;
    in.state_png = render_state(initial_disc(grid));
    in.goal_png = render_goal(goal, grid);
    in.goal = &goal;
    in.history = {{{0, 0}, {1, 1}, Strength::fixed}};
  }
};

std::vector<std::string> ids(const Prompt& p) {
  std::vector<std::string> out;
  for (const auto& c : p.components) out.push_back(c.id);
  return out;
}

// Prompt pair emitted for a config; a missing termination prompt is empty.
std::pair<Prompt, std::optional<Prompt>> emitted(const PromptConfig& cfg, const PromptInputs& in) {
  std::optional<Prompt> term;
  if (cfg.termination_enabled) term = build_termination_prompt(cfg, in);
  return {build_action_prompt(cfg, in), term};
}

}  // namespace

TEST(ActionPrompt, AllTogglesGiveSevenOrderedComponents) {
  Fixture f;
  const auto p = build_action_prompt({}, f.in);
  EXPECT_EQ(p.kind, "action");
  EXPECT_EQ(ids(p), (std::vector<std::string>{"overview", "environment", "grasp", "trajectory", "goal_image",
                                              "state_image", "command"}));
  EXPECT_EQ(p.image_count(), 2u);
  EXPECT_NE(p.text().find("SQUEEZE A1 AND B2"), std::string::npos);
  EXPECT_NE(p.text().find("the capital letter X"), std::string::npos);
}

TEST(ActionPrompt, GoalImageOffRemovesOnlyTheGoalImage) {
  Fixture f;
  PromptConfig off;
  off.goal_image = false;
  auto text_in = f.in;
  text_in.goal_png.clear();
  const auto on = build_action_prompt({}, f.in);
  const auto without = build_action_prompt(off, text_in);
  EXPECT_FALSE(without.has_component("goal_image"));
  EXPECT_EQ(without.image_count(), 1u);
  auto expected = on.components;
  std::erase_if(expected, [](const PromptComponent& c) { return c.id == "goal_image"; });
  EXPECT_EQ(without.components, expected);
}

TEST(ActionPrompt, Deterministic) {
  Fixture f;
  EXPECT_EQ(build_action_prompt({}, f.in), build_action_prompt({}, f.in));
  EXPECT_EQ(build_termination_prompt({}, f.in), build_termination_prompt({}, f.in));
}

TEST(ActionPrompt, GoalImageNeedsAnImage) {
  Fixture f;
  auto in = f.in;
  in.goal_png.clear();
  EXPECT_THROW(build_action_prompt({}, in), InvalidArgument);
}

TEST(ActionPrompt, VariedModeMentionsStrengths) {
  Fixture f;
  PromptConfig cfg;
  cfg.squeeze_mode = SqueezeMode::varied;
  const auto text = build_action_prompt(cfg, f.in).text();
  EXPECT_NE(text.find("MIN leaves a"), std::string::npos);
  EXPECT_NE(text.find("AT <MIN|MEDIUM|MAX>"), std::string::npos);
  EXPECT_EQ(build_action_prompt({}, f.in).text().find("AT <MIN|MEDIUM|MAX>"), std::string::npos);
}

TEST(PromptToggles, EachToggleChangesTheEmittedPrompts) {
  Fixture f;
  const PromptConfig all_on;
  const auto base = emitted(all_on, f.in);
  for (auto name : kPromptToggles) {
    PromptConfig cfg;
    toggle_ref(cfg, name) = false;
    auto in = f.in;
    if (!cfg.goal_image) in.goal_png.clear();
    const auto got = emitted(cfg, in);
    EXPECT_TRUE(got.first != base.first || got.second != base.second) << name;
  }
}

TEST(PromptToggles, AllOffIsRejected) {
  PromptConfig cfg;
  for (auto name : kPromptToggles) toggle_ref(cfg, name) = false;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  EXPECT_THROW(toggle_ref(cfg, "colour"), InvalidArgument);
}

TEST(PromptToggles, JsonRoundTrip) {
  PromptConfig cfg;
  cfg.step_by_step = false;
  cfg.squeeze_mode = SqueezeMode::varied;
  nlohmann::json j = cfg;
  EXPECT_EQ(j.get<PromptConfig>(), cfg);
  EXPECT_THROW(nlohmann::json({{"bogus", true}}).get<PromptConfig>(), InvalidArgument);
}

TEST(TerminationPrompt, AllTogglesGiveFiveComponents) {
  Fixture f;
  const auto p = build_termination_prompt({}, f.in);
  EXPECT_EQ(ids(p), (std::vector<std::string>{"overview", "decision", "state_image", "goal", "command"}));
  EXPECT_EQ(p.image_count(), 2u);
}

TEST(TerminationPrompt, TextOnlyGoalUsesDescription) {
  Fixture f;
  PromptConfig cfg;
  cfg.goal_image = false;
  auto in = f.in;
  in.goal_png.clear();
  const auto p = build_termination_prompt(cfg, in);
  EXPECT_EQ(p.image_count(), 1u);
  EXPECT_EQ(p.components.size(), 5u);
  EXPECT_NE(p.text().find("the capital letter X"), std::string::npos);
}

TEST(TerminationPrompt, DisabledIsAnError) {
  Fixture f;
  PromptConfig cfg;
  cfg.termination_enabled = false;
  EXPECT_THROW(build_termination_prompt(cfg, f.in), InvalidArgument);
}

TEST(SearchPrompts, ProposeAndVote) {
  Fixture f;
  const auto p = build_propose_prompt({}, f.in, 4, {{{0, 0}, {1, 0}, Strength::fixed}});
  EXPECT_EQ(p.kind, "propose");
  EXPECT_NE(p.text().find("Propose 4 different"), std::string::npos);
  EXPECT_NE(p.text().find("Do not repeat any of these: SQUEEZE A1 AND B1"), std::string::npos);
  std::vector<VoteCandidate> cands(3, VoteCandidate{{{{0, 0}, {1, 0}, Strength::fixed}}, f.in.state_png});
  const auto v = build_vote_prompt({}, f.in, cands);
  EXPECT_EQ(v.kind, "vote");
  EXPECT_EQ(v.image_count(), 4u);
  EXPECT_NE(v.text().find("VOTE: <number>"), std::string::npos);
  EXPECT_THROW(build_vote_prompt({}, f.in, {}), InvalidArgument);
}

TEST(Templates, StrictSubstitution) {
  const TemplateSet t;
  EXPECT_THROW(t.render("action_command"), InvalidArgument);
  EXPECT_THROW(t.raw("no_such_template"), InvalidArgument);
  EXPECT_EQ(t.render("action_command", {{"history", "none"}, {"goal_name", "X"}}).back(), '.');
}

TEST(Templates, DirectoryOverridesEmbedded) {
  const auto dir = std::filesystem::temp_directory_path() / "craft_prompt_override";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "action_command.txt") << "Shape {{goal_name}} now.\n";
  }
  const auto t = TemplateSet::from_directory(dir);
  EXPECT_EQ(t.render("action_command", {{"goal_name", "X"}}), "Shape X now.");
  EXPECT_NO_THROW(t.raw("action_overview"));
  std::filesystem::remove_all(dir);
  EXPECT_THROW(TemplateSet::from_directory("/nonexistent/prompts"), InvalidArgument);
}

TEST(Templates, RetryText) {
  const auto s = build_retry_text("no action", kVoteGrammar);
  EXPECT_NE(s.find("no action"), std::string::npos);
  EXPECT_NE(s.find("VOTE: <number>"), std::string::npos);
}
