#include "sophia/rewards.hpp"

#include <algorithm>
#include <numeric>

namespace sophia {

std::map<std::string, std::string> gold_map(const std::vector<TaskItem>& dataset) {
  std::map<std::string, std::string> out;
  for (const auto& item : dataset) out.emplace(item.id, item.gold_answer);
  return out;
}

void score_pool(RawPool& pool, const std::map<std::string, std::string>& gold_answers,
                const verifier::VerifierOptions& options) {
  for (auto& task : pool.tasks) {
    const auto gold = gold_answers.find(task.task.id);
    if (gold == gold_answers.end()) {
      throw InvariantError("no gold answer for task '" + task.task.id + "'");
    }
    for (auto& cap : task.captions) {
      for (auto& roll : cap.rollouts) {
        if (!roll.trajectory) continue;
        auto& t = *roll.trajectory;
        t.extracted_answer = verifier::extract_answer(t.text, options);
        t.outcome_reward =
            t.extracted_answer && verifier::check_equivalence(*t.extracted_answer, gold->second, options)
                ? 1
                : 0;
      }
    }
  }
  assign_caption_rewards(pool);
}

std::optional<Fraction> caption_reward(std::span<const int> outcomes) {
  if (outcomes.empty()) return std::nullopt;
  for (int r : outcomes) {
    if (r != 0 && r != 1) throw InvariantError("outcome rewards must be 0 or 1");
  }
  return Fraction{std::accumulate(outcomes.begin(), outcomes.end(), std::int64_t{0}),
                  static_cast<std::int64_t>(outcomes.size())};
}

void assign_caption_rewards(RawPool& pool) {
  for (auto& task : pool.tasks) {
    for (auto& cap : task.captions) {
      if (!cap.caption) continue;
      std::vector<int> outcomes;
      for (const auto& roll : cap.rollouts) {
        if (roll.trajectory && roll.trajectory->outcome_reward) {
          outcomes.push_back(*roll.trajectory->outcome_reward);
        }
      }
      cap.caption->reward = caption_reward(outcomes);
    }
  }
}

std::int64_t SelectionReport::total_selected() const {
  std::int64_t total = 0;
  for (const auto& t : tasks) total += static_cast<std::int64_t>(t.selected.size());
  return total;
}

SelectionResult select(const RawPool& pool, double alpha, int keep_n) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvariantError("alpha must lie in (0, 1)");
  if (keep_n < 1) throw InvariantError("keep_n must be >= 1");

  SelectionResult result;
  result.report.alpha = alpha;
  result.report.keep_n = keep_n;

  for (const auto& task : pool.tasks) {
    TaskSelection sel;
    sel.task_id = task.task.id;

    struct Candidate {
      std::int64_t length;
      TrajectoryRef ref;
      const Trajectory* trajectory;
    };
    std::vector<Candidate> eligible;
    for (const auto& cap : task.captions) {
      if (!cap.caption) continue;
      const bool caption_ok = cap.caption->reward && cap.caption->reward->strictly_greater(alpha);
      for (const auto& roll : cap.rollouts) {
        if (!roll.trajectory) continue;
        const auto& t = *roll.trajectory;
        if (!t.outcome_reward) {
          throw InvariantError("select requires a scored pool (task '" + task.task.id + "')");
        }
        if (*t.outcome_reward != 1) {
          ++sel.wrong_answer;
        } else if (!caption_ok) {
          ++sel.caption_below_alpha;
        } else {
          eligible.push_back({t.length_tokens, {t.caption_index, t.index}, &t});
        }
      }
    }
    std::sort(eligible.begin(), eligible.end(), [](const Candidate& a, const Candidate& b) {
      return a.length != b.length ? a.length < b.length : a.ref < b.ref;
    });
    sel.eligible_count = static_cast<std::int64_t>(eligible.size());
    const std::size_t take = std::min(eligible.size(), static_cast<std::size_t>(keep_n));
    sel.not_shortest = static_cast<std::int64_t>(eligible.size() - take);
    for (std::size_t i = 0; i < take; ++i) {
      const auto& c = eligible[i];
      sel.selected.push_back(c.ref);
      OffPolicyRecord record;
      record.task_id = task.task.id;
      record.query = task.task.query;
      record.image_ref = task.task.image_ref;
      record.caption_index = c.ref.caption_index;
      record.trajectory = *c.trajectory;
      record.dataset_reward = 1;
      record.system_prompt_id = system_prompt_for(record.trajectory);
      result.records.push_back(std::move(record));
    }
    result.report.tasks.push_back(std::move(sel));
  }
  return result;
}

void to_json(Json& j, const TrajectoryRef& ref) {
  j = Json{{"caption_index", ref.caption_index}, {"trajectory_index", ref.trajectory_index}};
}

void to_json(Json& j, const TaskSelection& s) {
  j = Json{{"task_id", s.task_id},
           {"eligible_count", s.eligible_count},
           {"selected", s.selected},
           {"rejections",
            {{"wrong_answer", s.wrong_answer},
             {"caption_below_alpha", s.caption_below_alpha},
             {"not_shortest", s.not_shortest}}}};
}

void to_json(Json& j, const SelectionReport& r) {
  j = Json{{"alpha", r.alpha},
           {"keep_n", r.keep_n},
           {"total_selected", r.total_selected()},
           {"tasks", r.tasks}};
}

}  // namespace sophia
