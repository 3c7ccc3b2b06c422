#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

#include "sophia/core.hpp"

namespace sophia {

/// Parse failure or invariant violation in a configuration source. `key()`
/// names the offending key (empty for structural errors such as a bad line).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(key.empty() ? message : key + ": " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

enum class GoldFunction { kSum, kMax, kCount };
enum class BackendKind { kStub, kRemote };
enum class OptimizerKind { kSgd, kAdamW };

struct WorldConfig {
  int attributes = 4;          // M
  int value_range = 10;        // hidden attribute values in [0, value_range)
  double fidelity = 0.9;       // q
  double reasoner_skill = 0.95;
  GoldFunction gold = GoldFunction::kSum;
  int tasks = 16;              // size of the synthetic dataset
};

struct RemoteConfig {
  std::string url = "http://127.0.0.1:8000/v1/chat/completions";
  std::string api_key_env = "SOPHIA_API_KEY";
  std::string vision_model = "vision";
  std::string reasoner_model = "reasoner";
  int max_attempts = 3;
  int initial_backoff_ms = 1000;
  int timeout_s = 600;
};

struct TrainConfig {
  double learning_rate = 0.1;
  int rounds = 50;
  int minibatch = 0;           // 0: one step over all selected records
  OptimizerKind optimizer = OptimizerKind::kSgd;
  double weight_decay = 0.05;  // AdamW only
  double theta_cap = 50.0;     // divergence guard on mean |theta|
  // Synthetic curriculum.
  int tasks = 6;
  int attributes = 2;
  int value_range = 3;
  int captions_per_task = 16;
  int window = 2;
  double reasoner_skill = 1.0;
};

struct PipelineConfig {
  int K = 8;
  int N = 8;
  double alpha = 0.75;
  int keep_n = 1;
  std::int64_t max_gen_tokens = 32768;
  std::uint64_t seed = 7;
  int parallelism = 4;
  TokenizationRule tokenization_rule = TokenizationRule::kWhitespace;
  double temperature = 1.0;
  BackendKind vision_backend = BackendKind::kStub;
  BackendKind reasoner_backend = BackendKind::kStub;

  WorldConfig world;
  RemoteConfig remote;
  TrainConfig train;
};

/// Applies `key = value` onto `config`. Throws ConfigError naming the key on an
/// unknown key or unparseable value; invariants are checked by validate().
void apply_setting(PipelineConfig& config, std::string_view key, std::string_view value);

void validate(const PipelineConfig& config);

/// Plain-text `key = value` lines; `#` starts a comment. Unset keys keep their
/// defaults.
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::filesystem::path& path);

/// Canonical `key = value` listing of every setting, sorted by key.
std::map<std::string, std::string> config_settings(const PipelineConfig& config);
std::string render_config(const PipelineConfig& config);

/// Stable 64-bit FNV-1a hash of the canonical rendering.
std::uint64_t config_hash(const PipelineConfig& config);

std::string_view to_string(GoldFunction fn);
std::string_view to_string(BackendKind kind);
std::string_view to_string(OptimizerKind kind);

}  // namespace sophia
