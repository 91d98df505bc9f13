#pragma once

// Chat-completion client for multimodal LLM endpoints: wire format, HTTP
// transport, retry policy and token accounting.

#include <openssl/evp.h>

#include <chrono>
#include <cstdlib>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "craft/error.hpp"
#include "craft/prompts.hpp"

namespace craft {

struct TokenUsage {
  long long input_tokens = 0;
  long long output_tokens = 0;
  long long requests = 0;

  TokenUsage& operator+=(const TokenUsage& o) {
    input_tokens += o.input_tokens;
    output_tokens += o.output_tokens;
    requests += o.requests;
    return *this;
  }
  friend TokenUsage operator+(TokenUsage a, const TokenUsage& b) { return a += b; }
  friend bool operator==(const TokenUsage&, const TokenUsage&) = default;
};

inline void to_json(nlohmann::json& j, const TokenUsage& u) {
  j = {{"input_tokens", u.input_tokens}, {"output_tokens", u.output_tokens}, {"requests", u.requests}};
}

inline void from_json(const nlohmann::json& j, TokenUsage& u) {
  u.input_tokens = j.value("input_tokens", 0LL);
  u.output_tokens = j.value("output_tokens", 0LL);
  u.requests = j.value("requests", 0LL);
}

struct LlmEndpointConfig {
  std::string url = "http://127.0.0.1:8000/v1/chat/completions";
  std::string model = "default";
  std::string auth_header = "Authorization";
  std::string auth_prefix = "Bearer ";
  std::string api_key_env = "CRAFT_API_KEY";
  double temperature = 0.2;
  double sample_temperature = 1.0;
  int max_retries = 3;
  double timeout_s = 120.0;
  double price_in_per_million = 0.0;
  double price_out_per_million = 0.0;

  void validate() const {
    if (max_retries < 0) throw InvalidArgument("max_retries must be non-negative");
    if (price_in_per_million < 0.0 || price_out_per_million < 0.0) throw InvalidArgument("token prices must be non-negative");
    if (!(timeout_s > 0.0)) throw InvalidArgument("request timeout must be positive");
    if (url.empty()) throw InvalidArgument("endpoint url is empty");
  }

  /// CRAFT_LLM_URL and CRAFT_LLM_MODEL override the configured values.
  LlmEndpointConfig with_env_overrides() const {
    LlmEndpointConfig c = *this;
    if (const char* u = std::getenv("CRAFT_LLM_URL"); u && *u) c.url = u;
    if (const char* m = std::getenv("CRAFT_LLM_MODEL"); m && *m) c.model = m;
    return c;
  }

  std::string api_key() const {
    const char* k = api_key_env.empty() ? nullptr : std::getenv(api_key_env.c_str());
    return k ? k : "";
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(LlmEndpointConfig, url, model, auth_header, auth_prefix, api_key_env,
                                                temperature, sample_temperature, max_retries, timeout_s,
                                                price_in_per_million, price_out_per_million)

/// USD for the given usage.
inline double cost_usd(const TokenUsage& u, const LlmEndpointConfig& e) {
  return (static_cast<double>(u.input_tokens) * e.price_in_per_million +
          static_cast<double>(u.output_tokens) * e.price_out_per_million) /
         1e6;
}

inline std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

inline std::vector<std::uint8_t> base64_decode(const std::string& text) {
  std::vector<std::uint8_t> out(3 * ((text.size() + 3) / 4));
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
  if (n < 0) throw ParseError("invalid base64 data");
  std::size_t size = static_cast<std::size_t>(n);
  // EVP_DecodeBlock counts padding bytes as output.
  for (std::size_t i = text.size(); i > 0 && text[i - 1] == '='; --i) --size;
  out.resize(size);
  return out;
}

/// One chat message in wire form.
inline nlohmann::json wire_message(const std::string& role, const std::vector<ContentBlock>& blocks) {
  nlohmann::json content = nlohmann::json::array();
  for (const auto& b : blocks) {
    if (b.kind == ContentBlock::Kind::text) {
      content.push_back({{"type", "text"}, {"text", b.text}});
    } else {
      content.push_back({{"type", "image"}, {"mime_type", "image/png"}, {"data", base64_encode(b.png)}});
    }
  }
  return {{"role", role}, {"content", std::move(content)}};
}

/// First text of a reply in either the choices/message or the content-block
/// response layout, plus its usage counts.
struct WireReply {
  std::string text;
  TokenUsage usage;
};

inline WireReply parse_wire_reply(const nlohmann::json& j) {
  WireReply r;
  auto first_text = [](const nlohmann::json& content) -> std::optional<std::string> {
    if (content.is_string()) return content.get<std::string>();
    if (content.is_array())
      for (const auto& b : content)
        if (b.is_object() && b.value("type", "") == "text" && b.contains("text")) return b["text"].get<std::string>();
    return std::nullopt;
  };
  std::optional<std::string> text;
  if (j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
    const auto& msg = j["choices"][0].value("message", nlohmann::json::object());
    if (msg.contains("content")) text = first_text(msg["content"]);
  } else if (j.contains("content")) {
    text = first_text(j["content"]);
  }
  if (!text) throw TransportError("endpoint reply carries no text content");
  r.text = *text;
  if (j.contains("usage") && j["usage"].is_object()) {
    const auto& u = j["usage"];
    r.usage.input_tokens = u.value("prompt_tokens", u.value("input_tokens", 0LL));
    r.usage.output_tokens = u.value("completion_tokens", u.value("output_tokens", 0LL));
  }
  return r;
}

/// Sends one request body and returns the decoded JSON reply. Must allow
/// concurrent calls.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual nlohmann::json post(const LlmEndpointConfig& endpoint, const nlohmann::json& body) = 0;
};

class HttpTransport final : public Transport {
 public:
  nlohmann::json post(const LlmEndpointConfig& endpoint, const nlohmann::json& body) override {
    const auto [origin, path] = split_url(endpoint.url);
    httplib::Client client(origin);
    const auto timeout = std::chrono::duration<double>(endpoint.timeout_s);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    httplib::Headers headers;
    if (const auto key = endpoint.api_key(); !key.empty())
      headers.emplace(endpoint.auth_header, endpoint.auth_prefix + key);
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) throw TransportError("request to " + endpoint.url + " failed: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300) throw HttpStatusError(res->status, res->body);
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(std::string("endpoint reply is not JSON: ") + e.what());
    }
  }

  static std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos) throw InvalidArgument("endpoint url needs a scheme: " + url);
    const auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
  }
};

/// Everything one logical query cost, successful or not.
template <typename T>
struct LlmResult {
  T value;
  std::string text;  // reply that parsed
  TokenUsage usage;
};

class LlmClient {
 public:
  LlmClient(LlmEndpointConfig endpoint, std::shared_ptr<Transport> transport, TemplateSet templates = {})
      : endpoint_(std::move(endpoint)), transport_(std::move(transport)), templates_(std::move(templates)) {
    endpoint_.validate();
    if (!transport_) throw InvalidArgument("LLM client needs a transport");
  }

  const LlmEndpointConfig& endpoint() const { return endpoint_; }
  const TemplateSet& templates() const { return templates_; }

  /// Sends the prompt and parses the reply with `parse`. A reply that fails
  /// to parse is answered with a corrective message quoting `grammar`, up to
  /// max_retries times. Rate limits and server errors are retried within the
  /// same budget; other HTTP errors are raised at once.
  template <typename Parse>
  auto ask(const Prompt& prompt, double temperature, std::string_view grammar, Parse&& parse) const
      -> LlmResult<decltype(parse(std::string{}))> {
    nlohmann::json messages = nlohmann::json::array({wire_message("user", prompt.blocks())});
    TokenUsage usage;
    std::string last_error;
    bool transport_failed = false;
    for (int attempt = 0; attempt <= endpoint_.max_retries; ++attempt) {
      nlohmann::json body = {{"model", endpoint_.model}, {"temperature", temperature}, {"messages", messages}};
      WireReply reply;
      try {
        ++usage.requests;
        record({0, 0, 1});
        reply = parse_wire_reply(transport_->post(endpoint_, body));
        usage += reply.usage;
        record(reply.usage);
      } catch (const HttpStatusError& e) {
        if (e.status() != 429 && e.status() < 500) throw;
        last_error = e.what();
        transport_failed = true;
        backoff(attempt);
        continue;
      } catch (const TransportError& e) {
        last_error = e.what();
        transport_failed = true;
        backoff(attempt);
        continue;
      }
      transport_failed = false;
      try {
        return {parse(reply.text), reply.text, usage};
      } catch (const ParseError& e) {
        last_error = e.what();
        messages.push_back(wire_message("assistant", {ContentBlock::of_text(reply.text)}));
        messages.push_back(
            wire_message("user", {ContentBlock::of_text(build_retry_text(e.what(), grammar, templates_))}));
      }
    }
    if (transport_failed) throw TransportError("endpoint failed after " + std::to_string(usage.requests) + " requests: " + last_error);
    throw ParseError("no usable reply after " + std::to_string(usage.requests) + " requests: " + last_error);
  }

  /// Everything sent through this client so far, failed queries included.
  TokenUsage total_usage() const {
    std::lock_guard lock(mutex_);
    return total_;
  }

  /// Sleep between transport retries; tests shorten it.
  std::chrono::milliseconds retry_delay{500};

 private:
  void backoff(int attempt) const {
    if (retry_delay.count() > 0) std::this_thread::sleep_for(retry_delay * (1 << std::min(attempt, 4)));
  }

  void record(const TokenUsage& u) const {
    std::lock_guard lock(mutex_);
    total_ += u;
  }

  LlmEndpointConfig endpoint_;
  std::shared_ptr<Transport> transport_;
  TemplateSet templates_;
  mutable std::mutex mutex_;
  mutable TokenUsage total_;
};

}  // namespace craft
