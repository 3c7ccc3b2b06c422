#include "sophia/sampler.hpp"

#include <atomic>
#include <thread>

#include "sophia/rng.hpp"

namespace sophia {

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(workers, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

std::uint64_t caption_seed(std::uint64_t seed, std::string_view task_id, int caption_index) {
  return derive_seed(seed, task_id, "caption", caption_index);
}

std::uint64_t rollout_seed(std::uint64_t seed, std::string_view task_id, int caption_index,
                           int rollout_index) {
  return derive_seed(seed, task_id, "rollout", caption_index, rollout_index);
}

CollectOptions collect_options_from(const PipelineConfig& config) {
  CollectOptions o;
  o.K = config.K;
  o.N = config.N;
  o.seed = config.seed;
  o.parallelism = config.parallelism;
  o.tokenization_rule = config.tokenization_rule;
  o.temperature = config.temperature;
  o.max_tokens = config.max_gen_tokens;
  return o;
}

PoolCounts count_pool(const RawPool& pool) {
  PoolCounts c;
  c.tasks = static_cast<std::int64_t>(pool.tasks.size());
  for (const auto& task : pool.tasks) {
    if (task.flagged) ++c.flagged_tasks;
    for (const auto& cap : task.captions) {
      cap.caption ? ++c.captions : ++c.caption_errors;
      for (const auto& roll : cap.rollouts) roll.trajectory ? ++c.trajectories : ++c.trajectory_errors;
    }
  }
  return c;
}

RawPool collect(const std::vector<TaskItem>& dataset, const CollectOptions& options,
                const TextBackend& vision, const TextBackend& reasoner) {
  if (dataset.empty()) throw InvariantError("collect needs a non-empty dataset");
  if (options.K < 1 || options.N < 1) throw InvariantError("K and N must be >= 1");
  validate_dataset(dataset);

  RawPool pool;
  pool.K = options.K;
  pool.N = options.N;
  pool.tasks.resize(dataset.size());
  for (std::size_t t = 0; t < dataset.size(); ++t) {
    pool.tasks[t].task = dataset[t];
    pool.tasks[t].captions.resize(static_cast<std::size_t>(options.K));
    for (auto& slot : pool.tasks[t].captions) slot.rollouts.resize(static_cast<std::size_t>(options.N));
  }

  const auto caption_prompt = build_caption_prompt();
  const std::size_t K = static_cast<std::size_t>(options.K);
  const std::size_t N = static_cast<std::size_t>(options.N);

  parallel_for(dataset.size() * K, options.parallelism, [&](std::size_t job) {
    auto& task = pool.tasks[job / K];
    auto& slot = task.captions[job % K];
    const int k = static_cast<int>(job % K);
    GenRequest request;
    request.system_prompt = caption_prompt.system;
    request.user_prompt = caption_prompt.user;
    request.temperature = options.temperature;
    request.max_tokens = options.max_tokens;
    request.seed = caption_seed(options.seed, task.task.id, k);
    request.image_ref = task.task.image_ref;
    try {
      auto response = vision.generate(request);
      if (response.text.find_first_not_of(" \t\r\n") == std::string::npos) {
        slot.error = "empty caption";
        return;
      }
      Caption caption;
      caption.task_id = task.task.id;
      caption.index = k;
      caption.text = std::move(response.text);
      caption.backend_id = response.backend_id;
      slot.caption = std::move(caption);
    } catch (const std::exception& e) {
      slot.error = e.what();
    }
  });

  parallel_for(dataset.size() * K * N, options.parallelism, [&](std::size_t job) {
    auto& task = pool.tasks[job / (K * N)];
    auto& cap_slot = task.captions[(job / N) % K];
    auto& slot = cap_slot.rollouts[job % N];
    const int k = static_cast<int>((job / N) % K);
    const int n = static_cast<int>(job % N);
    if (!cap_slot.caption) {
      slot.error = "caption unavailable: " + cap_slot.error;
      return;
    }
    const auto prompt = build_reasoning_prompt(task.task.query, cap_slot.caption->text);
    GenRequest request;
    request.system_prompt = prompt.system;
    request.user_prompt = prompt.user;
    request.temperature = options.temperature;
    request.max_tokens = options.max_tokens;
    request.seed = rollout_seed(options.seed, task.task.id, k, n);
    const auto override_it = options.reasoner_overrides.find(task.task.id);
    const TextBackend& backend =
        override_it != options.reasoner_overrides.end() ? *override_it->second : reasoner;
    try {
      auto response = backend.generate(request);
      Trajectory t;
      t.task_id = task.task.id;
      t.caption_index = k;
      t.index = n;
      t.length_tokens = options.tokenization_rule == TokenizationRule::kBackendReported &&
                                response.token_count
                            ? *response.token_count
                            : count_tokens(response.text);
      t.has_think_tag = contains_think_tag(response.text);
      t.text = std::move(response.text);
      t.backend_id = response.backend_id;
      slot.trajectory = std::move(t);
    } catch (const std::exception& e) {
      slot.error = e.what();
    }
  });

  for (auto& task : pool.tasks) {
    bool any = false;
    for (const auto& cap : task.captions) {
      for (const auto& roll : cap.rollouts) any = any || roll.trajectory.has_value();
    }
    task.flagged = !any;
  }
  return pool;
}

std::vector<Json> encode_pool(const RawPool& pool) {
  std::vector<Json> lines;
  lines.push_back(Json{{"kind", "pool"}, {"K", pool.K}, {"N", pool.N}});
  for (const auto& task : pool.tasks) {
    Json task_line = task.task;
    task_line["kind"] = "task";
    task_line["flagged"] = task.flagged;
    lines.push_back(std::move(task_line));
    for (std::size_t k = 0; k < task.captions.size(); ++k) {
      const auto& cap = task.captions[k];
      if (cap.caption) {
        Json line = *cap.caption;
        line["kind"] = "caption";
        lines.push_back(std::move(line));
      } else {
        lines.push_back(Json{{"kind", "caption_error"},
                             {"task_id", task.task.id},
                             {"index", k},
                             {"error", cap.error}});
      }
      for (std::size_t n = 0; n < cap.rollouts.size(); ++n) {
        const auto& roll = cap.rollouts[n];
        if (roll.trajectory) {
          Json line = *roll.trajectory;
          line["kind"] = "trajectory";
          lines.push_back(std::move(line));
        } else {
          lines.push_back(Json{{"kind", "trajectory_error"},
                               {"task_id", task.task.id},
                               {"caption_index", k},
                               {"index", n},
                               {"error", roll.error}});
        }
      }
    }
  }
  return lines;
}

RawPool decode_pool(const std::vector<Json>& lines) {
  if (lines.empty() || lines.front().value("kind", "") != "pool") {
    throw InvariantError("pool file must start with a pool header line");
  }
  RawPool pool;
  pool.K = lines.front().at("K").get<int>();
  pool.N = lines.front().at("N").get<int>();
  if (pool.K < 1 || pool.N < 1) throw InvariantError("pool header has invalid K/N");

  const auto slot_for = [&](const std::string& task_id, int k) -> CaptionSlot& {
    if (pool.tasks.empty() || pool.tasks.back().task.id != task_id) {
      throw InvariantError("pool line for task '" + task_id + "' outside its task block");
    }
    if (k < 0 || k >= pool.K) throw InvariantError("caption index out of range in pool");
    return pool.tasks.back().captions[static_cast<std::size_t>(k)];
  };
  const auto rollout_for = [&](const std::string& task_id, int k, int n) -> TrajectorySlot& {
    auto& cap = slot_for(task_id, k);
    if (n < 0 || n >= pool.N) throw InvariantError("trajectory index out of range in pool");
    return cap.rollouts[static_cast<std::size_t>(n)];
  };

  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& line = lines[i];
    const auto kind = line.at("kind").get<std::string>();
    if (kind == "task") {
      TaskPool task;
      task.task = line.get<TaskItem>();
      task.flagged = line.value("flagged", false);
      task.captions.resize(static_cast<std::size_t>(pool.K));
      for (auto& cap : task.captions) cap.rollouts.resize(static_cast<std::size_t>(pool.N));
      pool.tasks.push_back(std::move(task));
    } else if (kind == "caption") {
      auto caption = line.get<Caption>();
      validate(caption, pool.K);
      slot_for(caption.task_id, caption.index).caption = std::move(caption);
    } else if (kind == "caption_error") {
      slot_for(line.at("task_id").get<std::string>(), line.at("index").get<int>()).error =
          line.at("error").get<std::string>();
    } else if (kind == "trajectory") {
      auto t = line.get<Trajectory>();
      validate(t);
      rollout_for(t.task_id, t.caption_index, t.index).trajectory = std::move(t);
    } else if (kind == "trajectory_error") {
      rollout_for(line.at("task_id").get<std::string>(), line.at("caption_index").get<int>(),
                  line.at("index").get<int>())
          .error = line.at("error").get<std::string>();
    } else {
      throw InvariantError("unknown pool line kind '" + kind + "'");
    }
  }
  for (const auto& task : pool.tasks) {
    for (const auto& cap : task.captions) {
      if (!cap.caption && cap.error.empty()) {
        throw InvariantError("pool is missing a caption slot for task '" + task.task.id + "'");
      }
      for (const auto& roll : cap.rollouts) {
        if (!roll.trajectory && roll.error.empty()) {
          throw InvariantError("pool is missing a trajectory slot for task '" + task.task.id + "'");
        }
      }
    }
  }
  return pool;
}

}  // namespace sophia
