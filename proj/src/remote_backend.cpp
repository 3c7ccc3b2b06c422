#include "sophia/remote_backend.hpp"

#include <thread>

#include <httplib.h>

namespace sophia {

std::string_view to_string(BackendErrorKind kind) {
  switch (kind) {
    case BackendErrorKind::kConnection:
      return "connection";
    case BackendErrorKind::kHttpStatus:
      return "http_status";
    case BackendErrorKind::kMalformedBody:
      return "malformed_body";
    case BackendErrorKind::kRetryExhausted:
      return "retry_exhausted";
    case BackendErrorKind::kInvalidRequest:
      return "invalid_request";
  }
  return "unknown";
}

Json build_chat_body(const GenRequest& request, const std::string& model) {
  Json messages = Json::array();
  if (!request.system_prompt.empty()) {
    messages.push_back({{"role", "system"}, {"content", request.system_prompt}});
  }
  if (request.image_ref) {
    Json content = Json::array();
    content.push_back({{"type", "image_url"}, {"image_url", {{"url", *request.image_ref}}}});
    content.push_back({{"type", "text"}, {"text", request.user_prompt}});
    messages.push_back({{"role", "user"}, {"content", std::move(content)}});
  } else {
    messages.push_back({{"role", "user"}, {"content", request.user_prompt}});
  }
  return Json{{"model", model},
              {"messages", std::move(messages)},
              {"temperature", request.temperature},
              {"max_tokens", request.max_tokens},
              {"seed", request.seed}};
}

GenResponse parse_chat_response(std::string_view body, const std::string& backend_id) {
  Json parsed;
  try {
    parsed = Json::parse(body);
  } catch (const Json::parse_error& e) {
    throw MalformedResponseError(std::string("response is not JSON: ") + e.what(), 1);
  }
  const auto fail = [](const std::string& what) -> GenResponse {
    throw MalformedResponseError("malformed chat response: " + what, 1);
  };
  if (!parsed.is_object() || !parsed.contains("choices") || !parsed["choices"].is_array() ||
      parsed["choices"].empty()) {
    return fail("missing choices");
  }
  const auto& first = parsed["choices"][0];
  if (!first.is_object() || !first.contains("message") || !first["message"].is_object()) {
    return fail("missing choices[0].message");
  }
  const auto& message = first["message"];
  if (!message.contains("content") || !message["content"].is_string()) {
    return fail("missing choices[0].message.content");
  }
  GenResponse response;
  response.text = message["content"].get<std::string>();
  response.backend_id = backend_id;
  if (parsed.contains("usage") && parsed["usage"].is_object()) {
    const auto& usage = parsed["usage"];
    if (usage.contains("completion_tokens") && usage["completion_tokens"].is_number_integer()) {
      const auto count = usage["completion_tokens"].get<std::int64_t>();
      if (count >= 0) response.token_count = count;
    }
  }
  return response;
}

RemoteChatBackend::RemoteChatBackend(RemoteOptions options) : options_(std::move(options)) {
  if (options_.max_attempts < 1) {
    throw BackendError(BackendErrorKind::kInvalidRequest, "max_attempts must be >= 1");
  }
  const auto scheme_end = options_.url.find("://");
  if (scheme_end == std::string::npos) {
    throw BackendError(BackendErrorKind::kInvalidRequest, "endpoint URL needs a scheme: " + options_.url);
  }
  const auto path_start = options_.url.find('/', scheme_end + 3);
  scheme_host_port_ = options_.url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : options_.url.substr(path_start);
  if (!options_.sleep) {
    options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

GenResponse RemoteChatBackend::generate(const GenRequest& request) const {
  if (request.max_tokens < 1) {
    throw BackendError(BackendErrorKind::kInvalidRequest, "max_tokens must be >= 1");
  }
  const std::string body = build_chat_body(request, options_.model).dump();
  httplib::Headers headers;
  if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);

  bool only_connection_failures = true;
  int last_status = 0;
  std::string last_error;
  auto backoff = options_.initial_backoff;
  for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
    if (attempt > 1) {
      options_.sleep(backoff);
      backoff *= 2;
    }
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(options_.timeout);
    client.set_read_timeout(options_.timeout);
    client.set_write_timeout(options_.timeout);

    const auto started = std::chrono::steady_clock::now();
    auto result = client.Post(path_, headers, body, "application/json");
    if (!result) {
      last_error = "connection to " + scheme_host_port_ + " failed: " + httplib::to_string(result.error());
      continue;
    }
    const int status = result->status;
    if (status >= 200 && status < 300) {
      GenResponse response;
      try {
        response = parse_chat_response(result->body, id());
      } catch (const MalformedResponseError& e) {
        throw MalformedResponseError(e.what(), attempt);
      }
      response.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                std::chrono::steady_clock::now() - started)
                                .count();
      return response;
    }
    only_connection_failures = false;
    last_status = status;
    last_error = "HTTP " + std::to_string(status) + ": " + result->body.substr(0, 200);
    const bool retryable = status == 408 || status == 429 || status >= 500;
    if (!retryable) throw HttpStatusError(status, last_error, attempt);
  }
  if (only_connection_failures) throw ConnectionError(last_error, options_.max_attempts);
  throw RetryExhaustedError(last_status,
                            "gave up after " + std::to_string(options_.max_attempts) +
                                " attempts; last error " + last_error,
                            options_.max_attempts);
}

}  // namespace sophia
