#include <httplib.h>

#include <cstdlib>
#include <thread>

#include <json.hpp>

#include "rubric/error.hpp"
#include "rubric/llm_backend.hpp"

namespace rubric {

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ValidationError("endpoint_url lacks a scheme: " + url);
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw ValidationError("endpoint_url scheme must be http or https: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

bool retryable(int status) { return status == 408 || status == 429 || status >= 500; }

std::string extract_text(const std::string& body, int status) {
  const auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("choices") || !j["choices"].is_array() ||
      j["choices"].empty()) {
    throw TransportError("backend returned a malformed completion body", status);
  }
  const auto& choice = j["choices"][0];
  if (choice.contains("message") && choice["message"].is_object() &&
      choice["message"].contains("content") && choice["message"]["content"].is_string()) {
    return choice["message"]["content"].get<std::string>();
  }
  if (choice.contains("text") && choice["text"].is_string()) return choice["text"].get<std::string>();
  throw TransportError("backend completion carries no text", status);
}

}  // namespace

std::string remote_complete(const BackendConfig& config, const std::string& prompt) {
  config.validate();
  const Endpoint ep = split_url(config.endpoint_url);

  nlohmann::json body = {{"model", config.model_name},
                         {"max_tokens", config.max_completion_tokens},
                         {"temperature", config.temperature}};
  if (config.api_style == ApiStyle::chat) {
    body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", prompt}}});
  } else {
    body["prompt"] = prompt;
  }
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (const char* key = std::getenv(config.api_key_env.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  httplib::Client client(ep.origin);
  client.set_connection_timeout(config.request_timeout);
  client.set_read_timeout(config.request_timeout);
  client.set_write_timeout(config.request_timeout);

  int last_status = 0;
  std::string last_reason;
  auto backoff = config.initial_backoff;
  for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    auto res = client.Post(ep.path, headers, payload, "application/json");
    if (!res) {
      last_status = 0;
      last_reason = httplib::to_string(res.error());
      continue;
    }
    last_status = res->status;
    if (res->status >= 200 && res->status < 300) return extract_text(res->body, res->status);
    if (!retryable(res->status)) {
      throw RequestError("backend rejected request with status " + std::to_string(res->status),
                         res->status);
    }
    last_reason = "status " + std::to_string(res->status);
  }
  throw TransportError("backend request failed after " + std::to_string(config.max_retries + 1) +
                           " attempts (" + last_reason + ")",
                       last_status);
}

RemoteBackend::RemoteBackend(BackendConfig config)
    : Backend(config.concurrency_budget), config_(std::move(config)) {
  config_.validate();
}

std::string RemoteBackend::do_complete(const std::string& prompt) {
  return remote_complete(config_, prompt);
}

}  // namespace rubric
