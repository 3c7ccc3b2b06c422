#include "sophia/train.hpp"

#include <cmath>
#include <numbers>

#include "sophia/rewards.hpp"
#include "sophia/sampler.hpp"
#include "sophia/verifier.hpp"

namespace sophia {

double cosine_learning_rate(double initial, int step, int total) {
  if (total <= 1) return initial;
  const double floor = initial / 4.0;
  const double progress = static_cast<double>(step) / static_cast<double>(total - 1);
  return floor + 0.5 * (initial - floor) * (1.0 + std::cos(std::numbers::pi * progress));
}

std::string render_caption_tokens(std::span<const int> tokens) {
  return render_attribute_caption(std::vector<int>(tokens.begin(), tokens.end()));
}

Sequence parse_caption_tokens(std::string_view caption) {
  auto parsed = parse_attribute_caption(caption);
  return parsed ? *parsed : Sequence{};
}

Curriculum make_curriculum(const PipelineConfig& config) {
  const auto& t = config.train;
  WorldConfig world_config;
  world_config.attributes = t.attributes;
  world_config.value_range = t.value_range;
  world_config.fidelity = 1.0;
  world_config.reasoner_skill = t.reasoner_skill;
  world_config.gold = GoldFunction::kSum;
  world_config.tasks = t.tasks;

  Curriculum c;
  c.world = std::make_shared<SyntheticWorld>(derive_seed(config.seed, "curriculum"), world_config);
  c.tasks = make_synthetic_dataset(*c.world, t.tasks);
  for (std::size_t i = 0; i < c.tasks.size(); ++i) {
    Context ctx(c.tasks.size(), 0.0);
    ctx[i] = 1.0;
    c.contexts.emplace(c.tasks[i].image_ref, std::move(ctx));
  }
  c.shape.vocab = t.value_range;
  c.shape.max_len = t.attributes;
  c.shape.context_dim = t.tasks;
  c.shape.window = t.window;
  return c;
}

GenResponse ToyCaptionerBackend::generate(const GenRequest& request) const {
  if (!request.image_ref) {
    throw BackendError(BackendErrorKind::kInvalidRequest, "vision request without an image");
  }
  const auto ctx = contexts_.find(*request.image_ref);
  if (ctx == contexts_.end()) {
    throw BackendError(BackendErrorKind::kInvalidRequest, "unknown image " + *request.image_ref);
  }
  Rng rng(request.seed);
  const auto tokens = policy_.sample(ctx->second, rng);
  GenResponse response;
  response.text = render_caption_tokens(tokens);
  response.token_count = static_cast<std::int64_t>(tokens.size());
  response.backend_id = id();
  return response;
}

void to_json(Json& j, const RoundLog& log) {
  j = Json{{"round", log.round},
           {"learning_rate", log.learning_rate},
           {"eval_reward", log.eval_reward},
           {"records", log.records},
           {"trajectories", log.trajectories},
           {"steps", log.steps},
           {"mean_abs_theta", log.mean_abs_theta}};
}

void apply_update(TrainState& state, std::span<const ToySample> samples, double learning_rate,
                  const TrainConfig& config) {
  if (samples.empty()) return;
  const std::size_t batch =
      config.minibatch > 0 ? static_cast<std::size_t>(config.minibatch) : samples.size();
  auto& theta = state.policy.mutable_params();
  for (std::size_t start = 0; start < samples.size(); start += batch) {
    const auto chunk = samples.subspan(start, std::min(batch, samples.size() - start));
    const auto grad = policy_gradient(chunk, state.policy);
    ++state.step;
    if (config.optimizer == OptimizerKind::kSgd) {
      for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += learning_rate * grad[i];
    } else {
      constexpr double kBeta1 = 0.9;
      constexpr double kBeta2 = 0.999;
      constexpr double kEps = 1e-8;
      state.first_moment.resize(theta.size(), 0.0);
      state.second_moment.resize(theta.size(), 0.0);
      const double t = static_cast<double>(state.step);
      const double c1 = 1.0 - std::pow(kBeta1, t);
      const double c2 = 1.0 - std::pow(kBeta2, t);
      for (std::size_t i = 0; i < theta.size(); ++i) {
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        m = kBeta1 * m + (1.0 - kBeta1) * grad[i];
        v = kBeta2 * v + (1.0 - kBeta2) * grad[i] * grad[i];
        // Ascent on the objective; decoupled decay pulls towards zero.
        theta[i] += learning_rate * ((m / c1) / (std::sqrt(v / c2) + kEps) - config.weight_decay * theta[i]);
      }
    }
  }
  state.learning_rate = learning_rate;
}

CurriculumEvaluator::CurriculumEvaluator(const Curriculum& curriculum, std::uint64_t seed)
    : curriculum_(curriculum), seed_(seed) {}

double CurriculumEvaluator::evaluate(const ToyPolicy& policy) {
  double total = 0.0;
  for (const auto& task : curriculum_.tasks) {
    const auto& ctx = curriculum_.contexts.at(task.image_ref);
    double task_reward = 0.0;
    for (const auto& [seq, p] : policy.enumerate(ctx)) {
      auto key = std::make_pair(task.id, seq);
      auto it = cache_.find(key);
      if (it == cache_.end()) {
        const auto prompt = build_reasoning_prompt(task.query, render_caption_tokens(seq));
        std::string key_text;
        for (int t : seq) key_text += std::to_string(t) + ",";
        Rng rng(derive_seed(seed_, "eval", task.id, key_text));
        const auto text = stub_reasoner(*curriculum_.world, prompt.user, rng);
        it = cache_.emplace(std::move(key), verifier::score_trajectory(text, task.gold_answer)).first;
      }
      task_reward += p * it->second;
    }
    total += task_reward;
  }
  return total / static_cast<double>(curriculum_.tasks.size());
}

TrainResult train(const PipelineConfig& config) {
  validate(config);
  const auto curriculum = make_curriculum(config);
  const auto& tc = config.train;

  TrainResult result{TrainState{ToyPolicy(curriculum.shape), 0, 0, 0.0, 0.0, {}, {}}, {}};
  auto& state = result.state;
  CurriculumEvaluator evaluator(curriculum, config.seed);
  const StubReasonerBackend reasoner(curriculum.world);
  const auto gold = gold_map(curriculum.tasks);

  RoundLog baseline;
  baseline.eval_reward = evaluator.evaluate(state.policy);
  baseline.learning_rate = cosine_learning_rate(tc.learning_rate, 0, tc.rounds);
  baseline.mean_abs_theta = mean_abs(state.policy.params());
  state.mean_reward = baseline.eval_reward;
  result.history.push_back(baseline);

  for (int round = 0; round < tc.rounds; ++round) {
    const double lr = cosine_learning_rate(tc.learning_rate, round, tc.rounds);

    const ToyCaptionerBackend captioner(state.policy, curriculum.contexts);
    CollectOptions options = collect_options_from(config);
    options.K = tc.captions_per_task;
    options.seed = derive_seed(config.seed, "round", round);
    auto pool = collect(curriculum.tasks, options, captioner, reasoner);
    score_pool(pool, gold);
    const auto selection = select(pool, config.alpha, config.keep_n);

    std::vector<ToySample> samples;
    samples.reserve(selection.records.size());
    for (const auto& record : selection.records) {
      const auto& task_pool = *std::find_if(pool.tasks.begin(), pool.tasks.end(), [&](const TaskPool& t) {
        return t.task.id == record.task_id;
      });
      const auto& caption = *task_pool.captions[static_cast<std::size_t>(record.caption_index)].caption;
      samples.push_back({curriculum.contexts.at(record.image_ref), parse_caption_tokens(caption.text),
                         static_cast<double>(record.dataset_reward)});
    }

    apply_update(state, samples, lr, tc);
    state.round = round + 1;
    state.learning_rate = lr;

    RoundLog log;
    log.round = round + 1;
    log.learning_rate = lr;
    log.eval_reward = evaluator.evaluate(state.policy);
    log.records = static_cast<std::int64_t>(samples.size());
    log.trajectories = count_pool(pool).trajectories;
    log.steps = state.step;
    log.mean_abs_theta = mean_abs(state.policy.params());
    state.mean_reward = log.eval_reward;
    result.history.push_back(log);

    if (!(log.mean_abs_theta <= tc.theta_cap)) {
      throw TrainingDiverged("mean |theta| " + std::to_string(log.mean_abs_theta) +
                             " exceeded the cap after round " + std::to_string(log.round));
    }
  }
  return result;
}

}  // namespace sophia
