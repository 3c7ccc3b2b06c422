#include "sophia/core.hpp"

#include <cctype>
#include <unordered_set>

namespace sophia {

std::string_view to_string(TokenizationRule rule) {
  switch (rule) {
    case TokenizationRule::kWhitespace:
      return "whitespace";
    case TokenizationRule::kBackendReported:
      return "backend_reported";
  }
  return "whitespace";
}

std::string_view to_string(SystemPromptId id) {
  return id == SystemPromptId::kSlowThinking ? "slow_thinking" : "default";
}

TokenizationRule parse_tokenization_rule(std::string_view text) {
  if (text == "whitespace") return TokenizationRule::kWhitespace;
  if (text == "backend_reported") return TokenizationRule::kBackendReported;
  throw InvariantError("unknown tokenization rule '" + std::string(text) + "'");
}

SystemPromptId parse_system_prompt_id(std::string_view text) {
  if (text == "slow_thinking") return SystemPromptId::kSlowThinking;
  if (text == "default") return SystemPromptId::kDefault;
  throw InvariantError("unknown system prompt id '" + std::string(text) + "'");
}

std::int64_t count_tokens(std::string_view text, TokenizationRule) {
  std::int64_t runs = 0;
  bool in_run = false;
  for (char ch : text) {
    const bool space = std::isspace(static_cast<unsigned char>(ch)) != 0;
    if (!space && !in_run) ++runs;
    in_run = !space;
  }
  return runs;
}

bool contains_think_tag(std::string_view text) {
  return text.find("<think>") != std::string_view::npos;
}

SystemPromptId system_prompt_for(const Trajectory& trajectory) {
  return trajectory.has_think_tag ? SystemPromptId::kSlowThinking : SystemPromptId::kDefault;
}

void validate(const TaskItem& item) {
  if (item.id.empty()) throw InvariantError("task id must be non-empty");
  if (item.gold_answer.empty()) {
    throw InvariantError("task '" + item.id + "': gold_answer must be non-empty");
  }
}

void validate(const Caption& caption, int captions_per_task) {
  if (caption.index < 0 || caption.index >= captions_per_task) {
    throw InvariantError("caption index out of range for task '" + caption.task_id + "'");
  }
  if (caption.reward) {
    const auto& r = *caption.reward;
    if (r.den <= 0 || r.num < 0 || r.num > r.den) {
      throw InvariantError("caption reward must be j/n with 0 <= j <= n");
    }
  }
}

void validate(const Trajectory& trajectory) {
  if (trajectory.outcome_reward) {
    const int r = *trajectory.outcome_reward;
    if (r != 0 && r != 1) throw InvariantError("outcome_reward must be 0 or 1");
    if (r == 1 && !trajectory.extracted_answer) {
      throw InvariantError("outcome_reward 1 requires an extracted answer");
    }
  }
  if (trajectory.length_tokens < 0) throw InvariantError("length_tokens must be nonnegative");
}

void validate(const OffPolicyRecord& record, double alpha, const Fraction& caption_reward) {
  validate(record.trajectory);
  if (record.dataset_reward != 0 && record.dataset_reward != 1) {
    throw InvariantError("dataset_reward must be 0 or 1");
  }
  if (record.dataset_reward == 1) {
    if (record.trajectory.outcome_reward != 1) {
      throw InvariantError("dataset_reward 1 requires outcome_reward 1");
    }
    if (!caption_reward.strictly_greater(alpha)) {
      throw InvariantError("dataset_reward 1 requires caption reward > alpha");
    }
  }
  if (record.system_prompt_id != system_prompt_for(record.trajectory)) {
    throw InvariantError("system_prompt_id must be slow_thinking iff the trajectory has <think>");
  }
}

void validate_dataset(const std::vector<TaskItem>& items) {
  std::unordered_set<std::string> seen;
  for (const auto& item : items) {
    validate(item);
    if (!seen.insert(item.id).second) {
      throw InvariantError("duplicate task id '" + item.id + "'");
    }
  }
}

}  // namespace sophia
