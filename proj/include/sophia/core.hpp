#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sophia {

/// Thrown when an input violates a documented precondition or invariant.
class InvariantError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exact non-negative ratio j/n. Kept unreduced so the rollout count survives
/// serialization (6/8 and 3/4 are distinct records of how a reward arose).
struct Fraction {
  std::int64_t num = 0;
  std::int64_t den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }

  /// num/den > threshold. Values within 1e-12 of the threshold count as equal
  /// so that decimal thresholds such as 0.7 behave as written.
  bool strictly_greater(double threshold) const {
    return static_cast<double>(num) - threshold * static_cast<double>(den) >
           1e-12 * static_cast<double>(den);
  }

  friend bool operator==(const Fraction&, const Fraction&) = default;
};

enum class TokenizationRule { kWhitespace, kBackendReported };
enum class SystemPromptId { kSlowThinking, kDefault };

std::string_view to_string(TokenizationRule rule);
std::string_view to_string(SystemPromptId id);
TokenizationRule parse_tokenization_rule(std::string_view text);
SystemPromptId parse_system_prompt_id(std::string_view text);

struct TaskItem {
  std::string id;
  std::string image_ref;
  std::string query;
  std::string gold_answer;

  friend bool operator==(const TaskItem&, const TaskItem&) = default;
};

struct Caption {
  std::string task_id;
  int index = 0;
  std::string text;
  std::optional<Fraction> reward;
  std::string backend_id;

  friend bool operator==(const Caption&, const Caption&) = default;
};

struct Trajectory {
  std::string task_id;
  int caption_index = 0;
  int index = 0;
  std::string text;
  std::optional<std::string> extracted_answer;
  // Unset until the pool has been scored.
  std::optional<int> outcome_reward;
  std::int64_t length_tokens = 0;
  bool has_think_tag = false;
  std::string backend_id;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct OffPolicyRecord {
  std::string task_id;
  std::string query;
  std::string image_ref;
  int caption_index = 0;
  Trajectory trajectory;
  int dataset_reward = 0;
  SystemPromptId system_prompt_id = SystemPromptId::kDefault;

  friend bool operator==(const OffPolicyRecord&, const OffPolicyRecord&) = default;
};

/// Number of maximal non-whitespace runs. The backend-reported rule has no
/// text-only definition, so it falls back to the whitespace count here.
std::int64_t count_tokens(std::string_view text,
                          TokenizationRule rule = TokenizationRule::kWhitespace);

bool contains_think_tag(std::string_view text);

SystemPromptId system_prompt_for(const Trajectory& trajectory);

void validate(const TaskItem& item);
void validate(const Caption& caption, int captions_per_task);
void validate(const Trajectory& trajectory);
void validate(const OffPolicyRecord& record, double alpha, const Fraction& caption_reward);

/// Rejects datasets with duplicate ids or empty gold answers.
void validate_dataset(const std::vector<TaskItem>& items);

}  // namespace sophia
