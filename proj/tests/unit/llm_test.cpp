#include <gtest/gtest.h>

#include "craft/llm.hpp"
#include "support/mock_transport.hpp"

using namespace craft;
using craft::testing::MockReply;
using craft::testing::MockTransport;

namespace {

Prompt simple_prompt() {
  Prompt p;
  p.kind = "action";
  p.components.push_back({"overview", {ContentBlock::of_text("Shape the clay.")}});
  p.components.push_back({"state_image", {ContentBlock::of_image({1, 2, 3, 250})}});
  return p;
}

auto accept_ok = [](const std::string& s) {
  if (s != "ok") throw ParseError("expected ok, got '" + s + "'");
  return s;
};

}  // namespace

TEST(Base64, KnownVectorsAndRoundTrip) {
  EXPECT_EQ(base64_encode({}), "");
  EXPECT_EQ(base64_encode({'f'}), "Zg==");
  EXPECT_EQ(base64_encode({'f', 'o'}), "Zm8=");
  EXPECT_EQ(base64_encode({'f', 'o', 'o'}), "Zm9v");
  for (std::size_t n = 0; n < 40; ++n) {
    std::vector<std::uint8_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<std::uint8_t>(i * 37 + 11);
    EXPECT_EQ(base64_decode(base64_encode(v)), v);
  }
  EXPECT_THROW(base64_decode("@@@@"), ParseError);
}

TEST(Cost, ToTheCent) {
  LlmEndpointConfig e;
  e.price_in_per_million = 0.10;
  e.price_out_per_million = 0.40;
  EXPECT_NEAR(cost_usd({1'000'000, 0, 1}, e), 0.10, 1e-12);
  EXPECT_NEAR(cost_usd({0, 1'000'000, 1}, e), 0.40, 1e-12);
  EXPECT_NEAR(cost_usd({250'000, 50'000, 3}, e), 0.045, 1e-12);
  EXPECT_EQ(cost_usd({}, e), 0.0);
}

TEST(Wire, MessageLayout) {
  const auto m = wire_message("user", simple_prompt().blocks());
  EXPECT_EQ(m["role"], "user");
  ASSERT_EQ(m["content"].size(), 2u);
  EXPECT_EQ(m["content"][0]["type"], "text");
  EXPECT_EQ(m["content"][1]["type"], "image");
  EXPECT_EQ(m["content"][1]["mime_type"], "image/png");
  EXPECT_EQ(base64_decode(m["content"][1]["data"]), (std::vector<std::uint8_t>{1, 2, 3, 250}));
}

TEST(Wire, BothReplyLayouts) {
  const auto a = parse_wire_reply(nlohmann::json::parse(
      R"({"choices":[{"message":{"content":"hi"}}],"usage":{"prompt_tokens":7,"completion_tokens":3}})"));
  EXPECT_EQ(a.text, "hi");
  EXPECT_EQ(a.usage.input_tokens, 7);
  EXPECT_EQ(a.usage.output_tokens, 3);
  const auto b = parse_wire_reply(nlohmann::json::parse(
      R"({"content":[{"type":"text","text":"hey"}],"usage":{"input_tokens":5,"output_tokens":2}})"));
  EXPECT_EQ(b.text, "hey");
  EXPECT_EQ(b.usage.input_tokens, 5);
  EXPECT_EQ(b.usage.output_tokens, 2);
  EXPECT_THROW(parse_wire_reply(nlohmann::json::parse(R"({"choices":[]})")), TransportError);
}

TEST(Wire, SplitUrl) {
  EXPECT_EQ(HttpTransport::split_url("http://h:1/v1/x"), (std::pair<std::string, std::string>{"http://h:1", "/v1/x"}));
  EXPECT_EQ(HttpTransport::split_url("https://h"), (std::pair<std::string, std::string>{"https://h", "/"}));
  EXPECT_THROW(HttpTransport::split_url("h/v1"), InvalidArgument);
}

TEST(Client, RequestBody) {
  auto t = std::make_shared<MockTransport>();
  t->push("action", "ok");
  LlmEndpointConfig e;
  e.model = "m1";
  auto c = craft::testing::fast_client(t, e);
  const auto r = c->ask(simple_prompt(), 0.2, "G", accept_ok);
  EXPECT_EQ(r.value, "ok");
  const auto body = t->log().at(0).body;
  EXPECT_EQ(body["model"], "m1");
  EXPECT_DOUBLE_EQ(body["temperature"].get<double>(), 0.2);
  EXPECT_EQ(body["messages"].size(), 1u);
  EXPECT_EQ(r.usage, (TokenUsage{100, 20, 1}));
}

TEST(Client, GarbageThenValidTakesTwoRequests) {
  auto t = std::make_shared<MockTransport>();
  t->push("action", "garbage");
  t->push("action", "ok");
  auto c = craft::testing::fast_client(t);
  const auto r = c->ask(simple_prompt(), 0.2, "SAY ok", accept_ok);
  EXPECT_EQ(r.value, "ok");
  EXPECT_EQ(t->count(), 2u);
  EXPECT_EQ(r.usage, (TokenUsage{200, 40, 2}));
  const auto second = t->log()[1].body["messages"];
  ASSERT_EQ(second.size(), 3u);
  EXPECT_EQ(second[1]["role"], "assistant");
  EXPECT_EQ(second[1]["content"][0]["text"], "garbage");
  EXPECT_NE(second[2]["content"][0]["text"].get<std::string>().find("SAY ok"), std::string::npos);
}

TEST(Client, RetriesExhaustedRaisesParseError) {
  auto t = std::make_shared<MockTransport>();
  t->repeat("action", "garbage");
  LlmEndpointConfig e;
  e.max_retries = 2;
  auto c = craft::testing::fast_client(t, e);
  EXPECT_THROW(c->ask(simple_prompt(), 0.2, "G", accept_ok), ParseError);
  EXPECT_EQ(t->count(), 3u);
  EXPECT_EQ(c->total_usage(), (TokenUsage{300, 60, 3}));
}

TEST(Client, RateLimitIsRetried) {
  auto t = std::make_shared<MockTransport>();
  t->push("action", MockReply{"slow down", 0, 0, 429});
  t->push("action", MockReply{"", 0, 0, 503});
  t->push("action", "ok");
  auto c = craft::testing::fast_client(t);
  EXPECT_EQ(c->ask(simple_prompt(), 0.2, "G", accept_ok).value, "ok");
  EXPECT_EQ(t->count(), 3u);
}

TEST(Client, ClientErrorIsImmediate) {
  auto t = std::make_shared<MockTransport>();
  t->push("action", MockReply{"bad request", 0, 0, 400});
  t->repeat("action", "ok");
  auto c = craft::testing::fast_client(t);
  try {
    c->ask(simple_prompt(), 0.2, "G", accept_ok);
    FAIL() << "expected HttpStatusError";
  } catch (const HttpStatusError& e) {
    EXPECT_EQ(e.status(), 400);
  }
  EXPECT_EQ(t->count(), 1u);
}

TEST(Client, TransportFailuresExhausted) {
  auto t = std::make_shared<MockTransport>();
  t->repeat("action", MockReply{"", 0, 0, 500});
  LlmEndpointConfig e;
  e.max_retries = 1;
  auto c = craft::testing::fast_client(t, e);
  EXPECT_THROW(c->ask(simple_prompt(), 0.2, "G", accept_ok), TransportError);
  EXPECT_EQ(t->count(), 2u);
}

TEST(Endpoint, JsonDefaultsAndValidation) {
  const auto e = nlohmann::json::parse(R"({"model":"x","price_in_per_million":0.1})").get<LlmEndpointConfig>();
  EXPECT_EQ(e.model, "x");
  EXPECT_EQ(e.max_retries, 3);
  EXPECT_DOUBLE_EQ(e.temperature, 0.2);
  EXPECT_DOUBLE_EQ(e.sample_temperature, 1.0);
  LlmEndpointConfig bad;
  bad.max_retries = -1;
  EXPECT_THROW(bad.validate(), InvalidArgument);
  EXPECT_THROW(LlmClient(LlmEndpointConfig{}, nullptr), InvalidArgument);
}
