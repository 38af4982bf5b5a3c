#include "crashxai/chat.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "crashxai/util.hpp"

namespace crashxai {

StubChatClient StubChatClient::echo() {
  return StubChatClient([](const ChatRequest& r) { return r.user; });
}

StubChatClient StubChatClient::from_table(std::map<std::string, std::string> table) {
  return StubChatClient([table = std::move(table)](const ChatRequest& r) {
    auto it = table.find(r.user);
    return it == table.end() ? r.user : it->second;
  });
}

StubChatClient StubChatClient::from_fixture_file(const std::string& path) {
  const auto j = nlohmann::json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorKind::Parse, "stub fixture '" + path + "' is not a JSON object");
  }
  std::map<std::string, std::string> table;
  for (const auto& [k, v] : j.items()) table[k] = v.get<std::string>();
  return from_table(std::move(table));
}

std::string chat_request_body(const ChatRequest& request) {
  nlohmann::ordered_json j;
  j["model"] = request.model;
  j["temperature"] = request.temperature;
  j["messages"] = nlohmann::ordered_json::array(
      {{{"role", "system"}, {"content", request.system}},
       {{"role", "user"}, {"content", request.user}}});
  return j.dump();
}

std::string parse_chat_response(const std::string& body) {
  const auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorKind::Parse, "chat response is not JSON");
  try {
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorKind::Parse, "chat response lacks choices[0].message.content");
  }
}

HttpChatClient::HttpChatClient(std::string endpoint, std::string api_key,
                               std::chrono::seconds timeout)
    : endpoint_(std::move(endpoint)), api_key_(std::move(api_key)), timeout_(timeout) {
  if (!endpoint_.starts_with("http://") && !endpoint_.starts_with("https://")) {
    throw Error(ErrorKind::InvalidConfig, "chat endpoint must be an http(s) URL: " + endpoint_);
  }
}

std::unique_ptr<HttpChatClient> HttpChatClient::from_environment() {
  const char* endpoint = std::getenv("CRASHXAI_CHAT_ENDPOINT");
  if (endpoint == nullptr || *endpoint == '\0') return nullptr;
  const char* key = std::getenv("CRASHXAI_API_KEY");
  return std::make_unique<HttpChatClient>(endpoint, key ? key : "");
}

std::string HttpChatClient::complete(const ChatRequest& request) const {
  const auto scheme_end = endpoint_.find("://") + 3;
  const auto path_start = endpoint_.find('/', scheme_end);
  const std::string origin = endpoint_.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : endpoint_.substr(path_start);

  httplib::Client client(origin);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  auto res = client.Post(path, headers, chat_request_body(request), "application/json");
  if (!res) throw TransientError("chat transport failure: " + httplib::to_string(res.error()));
  if (res->status == 429 || res->status >= 500) {
    throw TransientError("chat endpoint returned HTTP " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw Error(ErrorKind::Unavailable, "chat endpoint returned HTTP " + std::to_string(res->status));
  }
  return parse_chat_response(res->body);
}

std::string complete_with_retry(const ChatClient& client, const ChatRequest& request,
                                const RetryPolicy& policy) {
  auto delay = policy.base_delay;
  std::string last;
  for (int attempt = 1; attempt <= std::max(policy.max_attempts, 1); ++attempt) {
    try {
      return client.complete(request);
    } catch (const TransientError& e) {
      last = e.what();
    }
    if (attempt < policy.max_attempts) {
      std::this_thread::sleep_for(delay);
      delay = std::min(delay * 2, policy.max_delay);
    }
  }
  throw Error(ErrorKind::Unavailable, "chat endpoint unavailable after " +
                                          std::to_string(policy.max_attempts) +
                                          " attempts: " + last);
}

}  // namespace crashxai
