#include "sophia/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <sstream>

#include "sophia/records.hpp"
#include "sophia/rng.hpp"

namespace sophia {
namespace {

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_integer(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(std::string(key), "expected an integer, got '" + std::string(value) + "'");
  }
  return out;
}

double parse_real(std::string_view key, std::string_view value) {
  std::string buf(value);
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(buf, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != buf.size() || buf.empty() || !std::isfinite(out)) {
    throw ConfigError(std::string(key), "expected a real number, got '" + buf + "'");
  }
  return out;
}

std::string format_real(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

GoldFunction parse_gold(std::string_view key, std::string_view v) {
  if (v == "sum") return GoldFunction::kSum;
  if (v == "max") return GoldFunction::kMax;
  if (v == "count") return GoldFunction::kCount;
  throw ConfigError(std::string(key), "expected sum|max|count");
}

BackendKind parse_backend(std::string_view key, std::string_view v) {
  if (v == "stub") return BackendKind::kStub;
  if (v == "remote") return BackendKind::kRemote;
  throw ConfigError(std::string(key), "expected stub|remote");
}

OptimizerKind parse_optimizer(std::string_view key, std::string_view v) {
  if (v == "sgd") return OptimizerKind::kSgd;
  if (v == "adamw") return OptimizerKind::kAdamW;
  throw ConfigError(std::string(key), "expected sgd|adamw");
}

struct Field {
  std::function<void(PipelineConfig&, std::string_view, std::string_view)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

template <typename T>
Field int_field(T PipelineConfig::*member) {
  return {[member](PipelineConfig& c, std::string_view k, std::string_view v) {
            c.*member = parse_integer<T>(k, v);
          },
          [member](const PipelineConfig& c) { return std::to_string(c.*member); }};
}

template <typename Section, typename T>
Field nested_int(Section PipelineConfig::*section, T Section::*member) {
  return {[=](PipelineConfig& c, std::string_view k, std::string_view v) {
            c.*section.*member = parse_integer<T>(k, v);
          },
          [=](const PipelineConfig& c) { return std::to_string(c.*section.*member); }};
}

template <typename Section>
Field nested_real(Section PipelineConfig::*section, double Section::*member) {
  return {[=](PipelineConfig& c, std::string_view k, std::string_view v) {
            c.*section.*member = parse_real(k, v);
          },
          [=](const PipelineConfig& c) { return format_real(c.*section.*member); }};
}

template <typename Section>
Field nested_string(Section PipelineConfig::*section, std::string Section::*member) {
  return {[=](PipelineConfig& c, std::string_view, std::string_view v) {
            c.*section.*member = std::string(v);
          },
          [=](const PipelineConfig& c) { return c.*section.*member; }};
}

const std::map<std::string, Field, std::less<>>& fields() {
  static const std::map<std::string, Field, std::less<>> table = [] {
    std::map<std::string, Field, std::less<>> t;
    t["K"] = int_field(&PipelineConfig::K);
    t["N"] = int_field(&PipelineConfig::N);
    t["keep_n"] = int_field(&PipelineConfig::keep_n);
    t["max_gen_tokens"] = int_field(&PipelineConfig::max_gen_tokens);
    t["seed"] = int_field(&PipelineConfig::seed);
    t["parallelism"] = int_field(&PipelineConfig::parallelism);
    t["alpha"] = {[](PipelineConfig& c, std::string_view k, std::string_view v) {
                    c.alpha = parse_real(k, v);
                  },
                  [](const PipelineConfig& c) { return format_real(c.alpha); }};
    t["temperature"] = {[](PipelineConfig& c, std::string_view k, std::string_view v) {
                          c.temperature = parse_real(k, v);
                        },
                        [](const PipelineConfig& c) { return format_real(c.temperature); }};
    t["tokenization_rule"] = {
        [](PipelineConfig& c, std::string_view k, std::string_view v) {
          try {
            c.tokenization_rule = parse_tokenization_rule(v);
          } catch (const InvariantError&) {
            throw ConfigError(std::string(k), "expected whitespace|backend_reported");
          }
        },
        [](const PipelineConfig& c) { return std::string(to_string(c.tokenization_rule)); }};
    t["backend.vision"] = {[](PipelineConfig& c, std::string_view k, std::string_view v) {
                             c.vision_backend = parse_backend(k, v);
                           },
                           [](const PipelineConfig& c) {
                             return std::string(to_string(c.vision_backend));
                           }};
    t["backend.reasoner"] = {[](PipelineConfig& c, std::string_view k, std::string_view v) {
                               c.reasoner_backend = parse_backend(k, v);
                             },
                             [](const PipelineConfig& c) {
                               return std::string(to_string(c.reasoner_backend));
                             }};

    using W = WorldConfig;
    t["world.attributes"] = nested_int(&PipelineConfig::world, &W::attributes);
    t["world.value_range"] = nested_int(&PipelineConfig::world, &W::value_range);
    t["world.fidelity"] = nested_real(&PipelineConfig::world, &W::fidelity);
    t["world.reasoner_skill"] = nested_real(&PipelineConfig::world, &W::reasoner_skill);
    t["world.tasks"] = nested_int(&PipelineConfig::world, &W::tasks);
    t["world.gold"] = {[](PipelineConfig& c, std::string_view k, std::string_view v) {
                         c.world.gold = parse_gold(k, v);
                       },
                       [](const PipelineConfig& c) { return std::string(to_string(c.world.gold)); }};

    using R = RemoteConfig;
    t["remote.url"] = nested_string(&PipelineConfig::remote, &R::url);
    t["remote.api_key_env"] = nested_string(&PipelineConfig::remote, &R::api_key_env);
    t["remote.vision_model"] = nested_string(&PipelineConfig::remote, &R::vision_model);
    t["remote.reasoner_model"] = nested_string(&PipelineConfig::remote, &R::reasoner_model);
    t["remote.max_attempts"] = nested_int(&PipelineConfig::remote, &R::max_attempts);
    t["remote.initial_backoff_ms"] = nested_int(&PipelineConfig::remote, &R::initial_backoff_ms);
    t["remote.timeout_s"] = nested_int(&PipelineConfig::remote, &R::timeout_s);

    using T = TrainConfig;
    t["train.learning_rate"] = nested_real(&PipelineConfig::train, &T::learning_rate);
    t["train.rounds"] = nested_int(&PipelineConfig::train, &T::rounds);
    t["train.minibatch"] = nested_int(&PipelineConfig::train, &T::minibatch);
    t["train.weight_decay"] = nested_real(&PipelineConfig::train, &T::weight_decay);
    t["train.theta_cap"] = nested_real(&PipelineConfig::train, &T::theta_cap);
    t["train.tasks"] = nested_int(&PipelineConfig::train, &T::tasks);
    t["train.attributes"] = nested_int(&PipelineConfig::train, &T::attributes);
    t["train.value_range"] = nested_int(&PipelineConfig::train, &T::value_range);
    t["train.captions_per_task"] = nested_int(&PipelineConfig::train, &T::captions_per_task);
    t["train.window"] = nested_int(&PipelineConfig::train, &T::window);
    t["train.reasoner_skill"] = nested_real(&PipelineConfig::train, &T::reasoner_skill);
    t["train.optimizer"] = {[](PipelineConfig& c, std::string_view k, std::string_view v) {
                              c.train.optimizer = parse_optimizer(k, v);
                            },
                            [](const PipelineConfig& c) {
                              return std::string(to_string(c.train.optimizer));
                            }};
    return t;
  }();
  return table;
}

void require(bool ok, const char* key, const char* message) {
  if (!ok) throw ConfigError(key, message);
}

}  // namespace

std::string_view to_string(GoldFunction fn) {
  switch (fn) {
    case GoldFunction::kSum:
      return "sum";
    case GoldFunction::kMax:
      return "max";
    case GoldFunction::kCount:
      return "count";
  }
  return "sum";
}

std::string_view to_string(BackendKind kind) {
  return kind == BackendKind::kStub ? "stub" : "remote";
}

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::kSgd ? "sgd" : "adamw";
}

void apply_setting(PipelineConfig& config, std::string_view key, std::string_view value) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError(std::string(key), "unknown key");
  it->second.set(config, key, trim(value));
}

void validate(const PipelineConfig& c) {
  require(c.alpha > 0.0 && c.alpha < 1.0, "alpha", "must lie in (0, 1)");
  require(c.K >= 1, "K", "must be >= 1");
  require(c.N >= 1, "N", "must be >= 1");
  require(c.keep_n >= 1, "keep_n", "must be >= 1");
  require(c.max_gen_tokens >= 1, "max_gen_tokens", "must be >= 1");
  require(c.parallelism >= 1, "parallelism", "must be >= 1");
  require(c.temperature >= 0.0, "temperature", "must be >= 0");
  require(c.world.attributes >= 1, "world.attributes", "must be >= 1");
  require(c.world.value_range >= 2, "world.value_range", "must be >= 2");
  require(c.world.fidelity >= 0.0 && c.world.fidelity <= 1.0, "world.fidelity",
          "must lie in [0, 1]");
  require(c.world.reasoner_skill >= 0.0 && c.world.reasoner_skill <= 1.0, "world.reasoner_skill",
          "must lie in [0, 1]");
  require(c.world.tasks >= 1, "world.tasks", "must be >= 1");
  require(c.remote.max_attempts >= 1, "remote.max_attempts", "must be >= 1");
  require(c.remote.initial_backoff_ms >= 0, "remote.initial_backoff_ms", "must be >= 0");
  require(c.remote.timeout_s >= 1, "remote.timeout_s", "must be >= 1");
  require(c.train.learning_rate >= 0.0, "train.learning_rate", "must be >= 0");
  require(c.train.rounds >= 1, "train.rounds", "must be >= 1");
  require(c.train.minibatch >= 0, "train.minibatch", "must be >= 0");
  require(c.train.weight_decay >= 0.0, "train.weight_decay", "must be >= 0");
  require(c.train.theta_cap > 0.0, "train.theta_cap", "must be > 0");
  require(c.train.tasks >= 1, "train.tasks", "must be >= 1");
  require(c.train.attributes >= 1, "train.attributes", "must be >= 1");
  require(c.train.value_range >= 2 && c.train.value_range <= 16, "train.value_range",
          "must lie in [2, 16]");
  require(c.train.captions_per_task >= 1, "train.captions_per_task", "must be >= 1");
  require(c.train.window >= 0, "train.window", "must be >= 0");
  require(c.train.reasoner_skill >= 0.0 && c.train.reasoner_skill <= 1.0, "train.reasoner_skill",
          "must lie in [0, 1]");
}

PipelineConfig parse_config(std::string_view text) {
  PipelineConfig config;
  int line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("", "line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) {
      throw ConfigError("", "line " + std::to_string(line_no) + ": empty key");
    }
    apply_setting(config, key, line.substr(eq + 1));
  }
  validate(config);
  return config;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError("", e.what());
  }
  return parse_config(text);
}

std::map<std::string, std::string> config_settings(const PipelineConfig& config) {
  std::map<std::string, std::string> out;
  for (const auto& [key, field] : fields()) out.emplace(key, field.get(config));
  return out;
}

std::string render_config(const PipelineConfig& config) {
  std::string out;
  for (const auto& [key, value] : config_settings(config)) {
    out += key + " = " + value + "\n";
  }
  return out;
}

std::uint64_t config_hash(const PipelineConfig& config) {
  return fnv1a64(render_config(config));
}

}  // namespace sophia
