#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sophia/core.hpp"
#include "sophia/records.hpp"
#include "sophia/sampler.hpp"
#include "sophia/verifier.hpp"

namespace sophia {

/// Sets extracted_answer and outcome_reward on every trajectory, then the
/// propagated reward on every caption. Throws InvariantError when a task has
/// no gold answer.
void score_pool(RawPool& pool, const std::map<std::string, std::string>& gold_answers,
                const verifier::VerifierOptions& options = {});

std::map<std::string, std::string> gold_map(const std::vector<TaskItem>& dataset);

/// Mean outcome over the successful rollouts of one caption, as the exact
/// ratio j/n. Unset when there are no rollouts.
std::optional<Fraction> caption_reward(std::span<const int> outcomes);

/// Recomputes Caption::reward from the scored rollouts of each caption.
void assign_caption_rewards(RawPool& pool);

struct TrajectoryRef {
  int caption_index = 0;
  int trajectory_index = 0;
  friend bool operator==(const TrajectoryRef&, const TrajectoryRef&) = default;
  friend auto operator<=>(const TrajectoryRef&, const TrajectoryRef&) = default;
};

struct TaskSelection {
  std::string task_id;
  std::int64_t eligible_count = 0;
  std::vector<TrajectoryRef> selected;  // ascending length, ties by ref
  std::int64_t wrong_answer = 0;
  std::int64_t caption_below_alpha = 0;
  std::int64_t not_shortest = 0;
};

struct SelectionReport {
  double alpha = 0;
  int keep_n = 1;
  std::vector<TaskSelection> tasks;

  std::int64_t total_selected() const;
};

struct SelectionResult {
  std::vector<OffPolicyRecord> records;
  SelectionReport report;
};

/// Per task: keep trajectories with outcome 1 whose caption reward is
/// strictly above alpha, emit the keep_n shortest (ties by caption index,
/// then trajectory index) with dataset_reward 1, drop the rest.
SelectionResult select(const RawPool& pool, double alpha, int keep_n);

void to_json(Json& j, const TrajectoryRef& ref);
void to_json(Json& j, const TaskSelection& selection);
void to_json(Json& j, const SelectionReport& report);

}  // namespace sophia
