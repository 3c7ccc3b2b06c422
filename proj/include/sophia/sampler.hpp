#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sophia/backends.hpp"
#include "sophia/config.hpp"
#include "sophia/core.hpp"
#include "sophia/records.hpp"

namespace sophia {

struct PromptPair {
  std::string system;
  std::string user;
};

/// Caption-elicitation prompt. Identical for every task and never mentions
/// the query, so a captioner cannot answer the question in its description.
PromptPair build_caption_prompt();

/// Prompt asking a text-only reasoner to act as if it sees the image through
/// `caption`. The caption precedes the query. Throws InvariantError when the
/// caption is empty.
PromptPair build_reasoning_prompt(std::string_view query, std::string_view caption);

struct TrajectorySlot {
  std::optional<Trajectory> trajectory;
  std::string error;  // set iff trajectory is unset
};

struct CaptionSlot {
  std::optional<Caption> caption;
  std::string error;
  std::vector<TrajectorySlot> rollouts;  // always N slots
};

struct TaskPool {
  TaskItem task;
  std::vector<CaptionSlot> captions;  // always K slots
  bool flagged = false;               // no successful trajectory at all
};

/// K captions per task and N rollouts per caption. Failed generations keep
/// their slot with an error message so counts always reconcile to K x N.
struct RawPool {
  int K = 0;
  int N = 0;
  std::vector<TaskPool> tasks;
};

struct PoolCounts {
  std::int64_t tasks = 0;
  std::int64_t captions = 0;
  std::int64_t caption_errors = 0;
  std::int64_t trajectories = 0;
  std::int64_t trajectory_errors = 0;
  std::int64_t flagged_tasks = 0;
};

PoolCounts count_pool(const RawPool& pool);

struct CollectOptions {
  int K = 8;
  int N = 8;
  std::uint64_t seed = 0;
  int parallelism = 1;
  TokenizationRule tokenization_rule = TokenizationRule::kWhitespace;
  double temperature = 1.0;
  std::int64_t max_tokens = 32768;
  // Per-task reasoner override, keyed by task id.
  std::map<std::string, const TextBackend*> reasoner_overrides;
};

CollectOptions collect_options_from(const PipelineConfig& config);

/// Samples the raw pool. Each slot draws from its own seed derived from
/// (seed, task id, slot), so the result does not depend on task order or on
/// scheduling. Backend failures are recorded per slot and never abort.
RawPool collect(const std::vector<TaskItem>& dataset, const CollectOptions& options,
                const TextBackend& vision, const TextBackend& reasoner);

std::uint64_t caption_seed(std::uint64_t seed, std::string_view task_id, int caption_index);
std::uint64_t rollout_seed(std::uint64_t seed, std::string_view task_id, int caption_index,
                           int rollout_index);

/// Line-delimited pool: a header line, then per task a `task` line followed by
/// `caption`/`caption_error` and `trajectory`/`trajectory_error` lines keyed by
/// (task_id, caption_index, index).
std::vector<Json> encode_pool(const RawPool& pool);
RawPool decode_pool(const std::vector<Json>& lines);

/// Runs fn(i) for i in [0, n) on up to `workers` threads.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace sophia
