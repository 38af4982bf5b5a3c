#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <string>

#include "crashxai/error.hpp"

namespace crashxai {

struct ChatRequest {
  std::string system;
  std::string user;
  double temperature = 0.0;
  std::string model;
};

/// Raised by clients for failures worth retrying (connection reset, HTTP 5xx,
/// 429). Anything else is reported as a plain Error.
class TransientError : public Error {
 public:
  explicit TransientError(const std::string& message) : Error(ErrorKind::Unavailable, message) {}
};

/// Chat-completion capability. Implementations must be safe to call from
/// several threads at once.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string complete(const ChatRequest& request) const = 0;
};

/// Deterministic client driven by a function of the request.
class StubChatClient final : public ChatClient {
 public:
  using Responder = std::function<std::string(const ChatRequest&)>;

  explicit StubChatClient(Responder responder) : responder_(std::move(responder)) {}

  /// Returns the user message unchanged.
  static StubChatClient echo();
  /// Looks the user message up in `table`; unmatched messages are echoed.
  static StubChatClient from_table(std::map<std::string, std::string> table);
  /// Loads a `{ "<user message>": "<completion>", ... }` JSON fixture.
  static StubChatClient from_fixture_file(const std::string& path);

  std::string complete(const ChatRequest& request) const override { return responder_(request); }

 private:
  Responder responder_;
};

/// OpenAI-style `/v1/chat/completions` client:
///   request  {"model", "temperature", "messages":[{"role":"system",...},{"role":"user",...}]}
///   response {"choices":[{"message":{"content": "..."}}]}
class HttpChatClient final : public ChatClient {
 public:
  /// `endpoint` is a full URL such as https://host/v1/chat/completions.
  HttpChatClient(std::string endpoint, std::string api_key,
                 std::chrono::seconds timeout = std::chrono::seconds(60));

  /// Reads CRASHXAI_CHAT_ENDPOINT and CRASHXAI_API_KEY; nullptr when the
  /// endpoint variable is unset.
  static std::unique_ptr<HttpChatClient> from_environment();

  std::string complete(const ChatRequest& request) const override;

  const std::string& endpoint() const { return endpoint_; }

 private:
  std::string endpoint_;
  std::string api_key_;
  std::chrono::seconds timeout_;
};

std::string chat_request_body(const ChatRequest& request);
/// Extracts choices[0].message.content; throws Error(Parse) otherwise.
std::string parse_chat_response(const std::string& body);

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds base_delay{200};
  std::chrono::milliseconds max_delay{5000};
};

/// Calls the client, retrying TransientError with exponential backoff
/// (base, 2*base, ... capped at max_delay). Throws Error(Unavailable) when the
/// attempts are exhausted.
std::string complete_with_retry(const ChatClient& client, const ChatRequest& request,
                                const RetryPolicy& policy);

}  // namespace crashxai
