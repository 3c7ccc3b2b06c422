#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sophia/backends.hpp"
#include "sophia/config.hpp"
#include "sophia/optimizer.hpp"
#include "sophia/records.hpp"
#include "sophia/stub_backend.hpp"
#include "sophia/toy_policy.hpp"

namespace sophia {

/// Cosine annealing from `initial` at step 0 to initial/4 at step total-1.
double cosine_learning_rate(double initial, int step, int total);

/// Synthetic training tasks: each context is a one-hot task id, and the
/// hidden attribute pattern of the task's image decides which captions lead
/// the reasoner to the gold answer.
struct Curriculum {
  std::shared_ptr<SyntheticWorld> world;
  std::vector<TaskItem> tasks;
  std::map<std::string, Context> contexts;  // by image_ref
  ToyPolicyShape shape;
};

Curriculum make_curriculum(const PipelineConfig& config);

/// Caption tokens <-> caption text for the toy captioner.
std::string render_caption_tokens(std::span<const int> tokens);
Sequence parse_caption_tokens(std::string_view caption);

/// Vision backend backed by a frozen snapshot of the toy policy: the caption
/// is the sampled token sequence rendered as an attribute list.
class ToyCaptionerBackend final : public TextBackend {
 public:
  ToyCaptionerBackend(ToyPolicy snapshot, std::map<std::string, Context> contexts)
      : policy_(std::move(snapshot)), contexts_(std::move(contexts)) {}
  GenResponse generate(const GenRequest& request) const override;
  std::string id() const override { return "toy-captioner"; }

 private:
  ToyPolicy policy_;
  std::map<std::string, Context> contexts_;
};

struct TrainState {
  ToyPolicy policy;
  int round = 0;
  long long step = 0;
  double learning_rate = 0.0;
  double mean_reward = 0.0;
  // AdamW moments; empty under SGD.
  std::vector<double> first_moment;
  std::vector<double> second_moment;
};

struct RoundLog {
  int round = 0;  // 0 is the untrained baseline
  double learning_rate = 0.0;
  double eval_reward = 0.0;
  std::int64_t records = 0;
  std::int64_t trajectories = 0;
  long long steps = 0;
  double mean_abs_theta = 0.0;
};

void to_json(Json& j, const RoundLog& log);

/// Thrown by the divergence guard.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One pass over `samples` in minibatches (0: a single batch). Each step adds
/// lr times the mean of R * grad log pi, or an AdamW step along it; there is
/// no KL or other regularizing term.
void apply_update(TrainState& state, std::span<const ToySample> samples, double learning_rate,
                  const TrainConfig& config);

/// Exact mean reward over tasks: every caption sequence is enumerated under the
/// policy and scored by the stub reasoner and the verifier.
class CurriculumEvaluator {
 public:
  CurriculumEvaluator(const Curriculum& curriculum, std::uint64_t seed);
  double evaluate(const ToyPolicy& policy);

 private:
  const Curriculum& curriculum_;
  std::uint64_t seed_;
  std::map<std::pair<std::string, Sequence>, int> cache_;
};

struct TrainResult {
  TrainState state;
  std::vector<RoundLog> history;  // baseline plus one entry per round
};

/// Training loop at toy scale: per round collect captions from the current
/// policy and rollouts from the stub reasoner, score, select, and apply one
/// update pass over the selected records.
TrainResult train(const PipelineConfig& config);

}  // namespace sophia
