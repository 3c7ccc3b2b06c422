#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sophia {

struct GenRequest {
  std::string system_prompt;
  std::string user_prompt;
  double temperature = 1.0;
  std::int64_t max_tokens = 32768;
  std::uint64_t seed = 0;
  // Image attachment for vision requests; sent as an image part on the wire.
  std::optional<std::string> image_ref;
};

struct GenResponse {
  std::string text;
  std::optional<std::int64_t> token_count;
  std::string backend_id;
  std::int64_t latency_ms = 0;
};

enum class BackendErrorKind { kConnection, kHttpStatus, kMalformedBody, kRetryExhausted, kInvalidRequest };

std::string_view to_string(BackendErrorKind kind);

class BackendError : public std::runtime_error {
 public:
  BackendError(BackendErrorKind kind, const std::string& message, int attempts = 1)
      : std::runtime_error(message), kind_(kind), attempts_(attempts) {}
  BackendErrorKind kind() const { return kind_; }
  int attempts() const { return attempts_; }

 private:
  BackendErrorKind kind_;
  int attempts_;
};

/// The endpoint could not be reached on any attempt.
class ConnectionError : public BackendError {
 public:
  ConnectionError(const std::string& message, int attempts)
      : BackendError(BackendErrorKind::kConnection, message, attempts) {}
};

/// Non-retryable non-success status (4xx other than 408/429).
class HttpStatusError : public BackendError {
 public:
  HttpStatusError(int status, const std::string& message, int attempts)
      : BackendError(BackendErrorKind::kHttpStatus, message, attempts), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

/// Success status whose body is not a chat-completion response.
class MalformedResponseError : public BackendError {
 public:
  MalformedResponseError(const std::string& message, int attempts)
      : BackendError(BackendErrorKind::kMalformedBody, message, attempts) {}
};

/// Every attempt ended in a retryable server-side failure (408, 429, 5xx).
class RetryExhaustedError : public BackendError {
 public:
  RetryExhaustedError(int last_status, const std::string& message, int attempts)
      : BackendError(BackendErrorKind::kRetryExhausted, message, attempts),
        last_status_(last_status) {}
  int last_status() const { return last_status_; }

 private:
  int last_status_;
};

/// Text generation handle. Implementations must tolerate concurrent calls.
class TextBackend {
 public:
  virtual ~TextBackend() = default;
  virtual GenResponse generate(const GenRequest& request) const = 0;
  virtual std::string id() const = 0;
};

}  // namespace sophia
