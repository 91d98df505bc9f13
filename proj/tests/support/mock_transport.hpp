#pragma once

// Scripted stand-in for an LLM endpoint. Replies are queued per prompt kind
// and every request is logged.

#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "craft/llm.hpp"

namespace craft::testing {

struct MockReply {
  std::string text;
  long long input_tokens = 100;
  long long output_tokens = 20;
  int http_status = 0;  // non-zero: fail with this status instead
};

/// Kind of the conversation, judged from its first message.
inline std::string classify_request(const nlohmann::json& body) {
  std::string text;
  for (const auto& block : body.at("messages").at(0).at("content"))
    if (block.value("type", "") == "text") text += block.value("text", "");
  if (text.find("decide whether shaping is finished") != std::string::npos) return "termination";
  if (text.find("candidate clay states") != std::string::npos) return "vote";
  if (text.find("different next squeezes") != std::string::npos) return "propose";
  return "action";
}

class MockTransport final : public Transport {
 public:
  struct Entry {
    std::string kind;
    nlohmann::json body;
  };
  using Handler = std::function<MockReply(const std::string& kind, const nlohmann::json& body)>;

  void push(const std::string& kind, MockReply r) {
    std::lock_guard lock(mutex_);
    queues_[kind].push_back(std::move(r));
  }
  void push(const std::string& kind, const std::string& text) { push(kind, MockReply{text}); }

  /// Reply used once a kind's queue is empty.
  void repeat(const std::string& kind, MockReply r) {
    std::lock_guard lock(mutex_);
    fallback_[kind] = std::move(r);
  }
  void repeat(const std::string& kind, const std::string& text) { repeat(kind, MockReply{text}); }

  void handle(Handler h) {
    std::lock_guard lock(mutex_);
    handler_ = std::move(h);
  }

  nlohmann::json post(const LlmEndpointConfig&, const nlohmann::json& body) override {
    const std::string kind = classify_request(body);
    MockReply r;
    {
      std::lock_guard lock(mutex_);
      log_.push_back({kind, body});
      if (handler_) {
        r = handler_(kind, body);
      } else if (auto& q = queues_[kind]; !q.empty()) {
        r = q.front();
        q.pop_front();
      } else if (auto it = fallback_.find(kind); it != fallback_.end()) {
        r = it->second;
      } else {
        throw TransportError("mock transport has no reply for a " + kind + " request");
      }
    }
    if (r.http_status != 0) throw HttpStatusError(r.http_status, r.text);
    return {{"choices", {{{"message", {{"role", "assistant"}, {"content", r.text}}}}}},
            {"usage", {{"prompt_tokens", r.input_tokens}, {"completion_tokens", r.output_tokens}}}};
  }

  std::vector<Entry> log() const {
    std::lock_guard lock(mutex_);
    return log_;
  }

  std::size_t count(const std::string& kind = "") const {
    std::lock_guard lock(mutex_);
    std::size_t n = 0;
    for (const auto& e : log_)
      if (kind.empty() || e.kind == kind) ++n;
    return n;
  }

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::deque<MockReply>> queues_;
  std::map<std::string, MockReply> fallback_;
  Handler handler_;
  std::vector<Entry> log_;
};

/// Client with no retry sleep.
inline std::shared_ptr<LlmClient> fast_client(std::shared_ptr<Transport> t, LlmEndpointConfig e = {}) {
  auto c = std::make_shared<LlmClient>(e, std::move(t));
  c->retry_delay = std::chrono::milliseconds(0);
  return c;
}

}  // namespace craft::testing
