#include <gtest/gtest.h>

#include "craft/service.hpp"
#include "support/mock_transport.hpp"

using namespace craft;
using nlohmann::json;

namespace {

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    transport = std::make_shared<craft::testing::MockTransport>();
    ServiceConfig cfg;
    cfg.defaults.image_px = 128;
    cfg.defaults.endpoint.max_retries = 0;
    cfg.transport = transport;
    server = std::make_unique<SessionServer>(cfg);
    const int port = server->bind("127.0.0.1", 0);
    server->start();
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
  }
  void TearDown() override { server->stop(); }

  httplib::Result post(const std::string& path, const json& body = json::object()) {
    return client->Post(path, body.dump(), "application/json");
  }

  std::string create(const json& body) {
    auto r = post("/sessions", body);
    EXPECT_TRUE(r);
    EXPECT_EQ(r->status, 201) << r->body;
    return json::parse(r->body)["id"];
  }

  static json body(const httplib::Result& r) { return json::parse(r->body); }

  std::shared_ptr<craft::testing::MockTransport> transport;
  std::unique_ptr<SessionServer> server;
  std::unique_ptr<httplib::Client> client;
};

}  // namespace

TEST_F(ServiceTest, CreateAndSqueezeConservesMass) {
  const auto id = create({{"grid", 4}, {"goal", "X"}});
  auto state = body(client->Get("/sessions/" + id));
  EXPECT_EQ(state["grid_size"], 4);
  EXPECT_EQ(state["goal"]["letter"], "X");
  EXPECT_EQ(state["cells"].size(), 4u);
  const auto mass = state["total_mass"].get<long long>();

  auto r = post("/sessions/" + id + "/actions", {{"cell_a", "B2"}, {"cell_b", "C3"}, {"strength", "max"}});
  ASSERT_EQ(r->status, 200) << r->body;
  const auto reply = body(r);
  EXPECT_EQ(reply["state"]["total_mass"].get<long long>(), mass);
  EXPECT_EQ(reply["state"]["steps"], 1);
  EXPECT_EQ(reply["state"]["history"][0]["text"], "SQUEEZE B2 AND C3 AT MAX");
  EXPECT_TRUE(reply["metrics"].is_object());
  EXPECT_TRUE(reply["executed"].get<bool>());
}

TEST_F(ServiceTest, ErrorStatuses) {
  const auto id = create({{"goal", "X"}});
  EXPECT_EQ(post("/sessions/" + id + "/actions", {{"cell_a", "B2"}, {"cell_b", "B2"}})->status, 422);
  EXPECT_EQ(post("/sessions/" + id + "/actions", {{"cell_a", "B2"}, {"cell_b", "Z9"}})->status, 422);
  EXPECT_EQ(post("/sessions/" + id + "/actions", {{"cell_a", "B2"}})->status, 400);
  EXPECT_EQ(post("/sessions/" + id + "/actions", {{"cell_a", "A1"}, {"cell_b", "B1"}, {"strength", "min"}})->status,
            422);
  EXPECT_EQ(client->Get("/sessions/ffffffff")->status, 404);
  EXPECT_EQ(post("/sessions/ffffffff/step")->status, 404);
  EXPECT_EQ(client->Post("/sessions", "{not json", "application/json")->status, 400);
  EXPECT_EQ(post("/sessions", {{"goal", "Q"}})->status, 422);
  EXPECT_EQ(post("/sessions", {{"goal", "X"}, {"grid", 1}})->status, 422);
  // Human sessions have no planner.
  EXPECT_EQ(post("/sessions/" + id + "/plan")->status, 400);
  const auto err = body(post("/sessions/" + id + "/actions", {{"cell_a", "B2"}, {"cell_b", "B2"}}));
  EXPECT_EQ(err["status"], 422);
  EXPECT_TRUE(err["error"].is_string());
}

TEST_F(ServiceTest, TerminatedSessionRejectsActions) {
  const auto id = create({{"goal", "I"}});
  const auto fin = body(post("/sessions/" + id + "/finish"));
  EXPECT_TRUE(fin["terminated"].get<bool>());
  EXPECT_EQ(fin["reason"], "human_stop");
  EXPECT_EQ(post("/sessions/" + id + "/actions", {{"cell_a", "B1"}, {"cell_b", "B4"}})->status, 409);
}

TEST_F(ServiceTest, BudgetClosesTheSession) {
  auto s = server->store().create({{"goal", "I"}});
  const std::string id = s->id();
  // Alternate between two distant squeezes until the budget is spent.
  for (int i = 0; i < 12; ++i) {
    const json act = i % 2 ? json{{"cell_a", "A1"}, {"cell_b", "A4"}} : json{{"cell_a", "D1"}, {"cell_b", "D4"}};
    ASSERT_EQ(post("/sessions/" + id + "/actions", act)->status, 200) << i;
  }
  auto r = post("/sessions/" + id + "/actions", {{"cell_a", "A1"}, {"cell_b", "A4"}});
  EXPECT_EQ(r->status, 409);
  const auto state = body(client->Get("/sessions/" + id));
  EXPECT_EQ(state["reason"], "max_steps");
  EXPECT_EQ(state["steps"], 12);
}

TEST_F(ServiceTest, ReplayIsBitExact) {
  const auto id = create({{"goal", "T"}});
  for (auto [a, b] : {std::pair{"A1", "D1"}, {"A2", "A4"}, {"D4", "D2"}, {"B1", "C3"}})
    ASSERT_EQ(post("/sessions/" + id + "/actions", {{"cell_a", a}, {"cell_b", b}, {"strength", "max"}})->status, 200);
  const auto s = server->store().get(id);
  EXPECT_EQ(s->replay(), s->field());
  const auto state = body(client->Get("/sessions/" + id));
  EXPECT_EQ(field_from_json(state["field"]), s->field());
  EXPECT_EQ(state["history"][2]["cell_a"], "D2");
}

TEST_F(ServiceTest, PngEndpoints) {
  const auto id = create({{"goal", "X"}});
  auto r = client->Get("/sessions/" + id + "/render.png");
  ASSERT_EQ(r->status, 200);
  EXPECT_EQ(r->get_header_value("Content-Type"), "image/png");
  const std::vector<std::uint8_t> bytes(r->body.begin(), r->body.end());
  EXPECT_NO_THROW(decode_png(bytes));
  EXPECT_EQ(client->Get("/sessions/" + id + "/goal.png")->status, 200);
  const auto text = create({{"goal", {{"text", "a five-pointed star"}}}});
  EXPECT_EQ(client->Get("/sessions/" + text + "/goal.png")->status, 404);
  EXPECT_EQ(client->Get("/sessions/" + text + "/metrics")->status, 422);
  EXPECT_FALSE(body(client->Get("/sessions/" + text))["goal"]["has_image"].get<bool>());
}

TEST_F(ServiceTest, MetricsEndpoint) {
  const auto id = create({{"goal", "X"}});
  const auto m = body(client->Get("/sessions/" + id + "/metrics"));
  for (const char* k : {"chamfer_mm", "emd_mm", "iou", "curvature", "par"})
    EXPECT_TRUE(m.contains(k)) << k;
}

TEST_F(ServiceTest, ScriptedPlanAndStep) {
  const auto id = create({{"goal", "I"}, {"mode", "scripted"}});
  const auto plan = body(post("/sessions/" + id + "/plan"));
  ASSERT_TRUE(plan["action"].is_object());
  EXPECT_EQ(body(client->Get("/sessions/" + id))["steps"], 0);
  const auto step = body(post("/sessions/" + id + "/step"));
  EXPECT_TRUE(step["executed"].get<bool>());
  EXPECT_EQ(step["state"]["history"][0]["text"], plan["action"]["text"]);
  EXPECT_EQ(step["state"]["history"][0]["source"], "planner");
  json last;
  for (int i = 0; i < 20 && !(last = body(post("/sessions/" + id + "/step")))["state"]["terminated"].get<bool>(); ++i) {
  }
  EXPECT_TRUE(last["state"]["terminated"].get<bool>());
  EXPECT_FALSE(last["executed"].get<bool>());
  EXPECT_EQ(post("/sessions/" + id + "/step")->status, 409);
}

TEST_F(ServiceTest, LlmSpectateUsesTransport) {
  transport->push("termination", "VERDICT: CONTINUE");
  transport->push("action", "SQUEEZE B1 AND B4 AT MAX");
  transport->push("termination", "VERDICT: STOP");
  const auto id = create({{"goal", "I"}, {"mode", "llm-spectate"}});
  auto s1 = body(post("/sessions/" + id + "/step"));
  EXPECT_TRUE(s1["executed"].get<bool>());
  auto s2 = body(post("/sessions/" + id + "/step"));
  EXPECT_EQ(s2["state"]["reason"], "terminator_stop");
  EXPECT_EQ(transport->count(), 3u);
  // Transport trouble surfaces as a bad gateway.
  const auto id2 = create({{"goal", "I"}, {"mode", "llm-spectate"}});
  EXPECT_EQ(post("/sessions/" + id2 + "/step")->status, 502);
}

TEST_F(ServiceTest, FixedModeCoercesStrength) {
  const auto id = create({{"goal", "X"}, {"squeeze_mode", "fixed"}});
  const auto r = body(post("/sessions/" + id + "/actions", {{"cell_a", "A1"}, {"cell_b", "B1"}, {"strength", "min"}}));
  EXPECT_EQ(r["state"]["history"][0]["strength"], "fixed");
}

TEST_F(ServiceTest, DeleteAndCors) {
  const auto id = create({{"goal", "L"}});
  EXPECT_EQ(server->store().size(), 1u);
  auto opt = client->Options("/sessions");
  EXPECT_EQ(opt->status, 204);
  EXPECT_EQ(opt->get_header_value("Access-Control-Allow-Origin"), "*");
  EXPECT_EQ(client->Delete("/sessions/" + id)->status, 204);
  EXPECT_EQ(client->Delete("/sessions/" + id)->status, 404);
  EXPECT_EQ(server->store().size(), 0u);
}

TEST(SessionStatus, ExceptionMapping) {
  EXPECT_EQ(detail::status_for(HttpError(409, "x")), 409);
  EXPECT_EQ(detail::status_for(InvalidAction("x")), 422);
  EXPECT_EQ(detail::status_for(TransportError("x")), 502);
  EXPECT_EQ(detail::status_for(std::runtime_error("x")), 500);
  EXPECT_EQ(parse_session_mode("llm-spectate"), SessionMode::llm_spectate);
  EXPECT_THROW(parse_session_mode("robot"), Error);
}
