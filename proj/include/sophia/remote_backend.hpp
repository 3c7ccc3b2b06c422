#pragma once

#include <chrono>
#include <functional>
#include <string>

#include "sophia/backends.hpp"
#include "sophia/records.hpp"

namespace sophia {

struct RemoteOptions {
  std::string url;  // http(s)://host[:port]/path
  std::string model;
  std::string api_key;  // empty: no Authorization header
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};
  std::chrono::seconds timeout{600};
  // Injected for tests; defaults to std::this_thread::sleep_for.
  std::function<void(std::chrono::milliseconds)> sleep;
};

/// Chat-completion request body: model, messages, temperature, max_tokens,
/// seed. A vision request carries the image as an `image_url` content part.
Json build_chat_body(const GenRequest& request, const std::string& model);

/// Content of the first choice's message, plus `usage.completion_tokens`
/// when present. Throws MalformedResponseError.
GenResponse parse_chat_response(std::string_view body, const std::string& backend_id);

/// Client for an OpenAI-compatible chat-completion endpoint.
///
/// Connection failures and 408/429/5xx responses are retried with exponential
/// backoff, re-sending the identical body, up to `max_attempts` in total.
class RemoteChatBackend final : public TextBackend {
 public:
  explicit RemoteChatBackend(RemoteOptions options);
  GenResponse generate(const GenRequest& request) const override;
  std::string id() const override { return "remote:" + options_.model; }

 private:
  RemoteOptions options_;
  std::string scheme_host_port_;
  std::string path_;
};

}  // namespace sophia
