#include "sophia/pipeline.hpp"

#include <cstdio>
#include <cstdlib>

#include "sophia/remote_backend.hpp"

namespace sophia {

RunManifest make_manifest(std::string command, const PipelineConfig& config) {
  RunManifest m;
  m.command = std::move(command);
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash(config)));
  m.config_hash = hash;
  m.seed = config.seed;
  if (config.vision_backend == BackendKind::kRemote || config.reasoner_backend == BackendKind::kRemote) {
    m.notes["behavior_probabilities"] =
        "unavailable from remote backends; the bias bound can only be checked on toy policies";
  }
  return m;
}

void to_json(Json& j, const RunManifest& m) {
  Json timings = Json::array();
  for (const auto& t : m.timings) timings.push_back({{"stage", t.stage}, {"millis", t.millis}});
  j = Json{{"command", m.command},
           {"engine_version", m.engine_version},
           {"config_hash", m.config_hash},
           {"seed", m.seed},
           {"timings", timings},
           {"counts",
            {{"tasks", m.counts.tasks},
             {"captions", m.counts.captions},
             {"trajectories", m.counts.trajectories},
             {"selected_records", m.counts.selected_records}}},
           {"backends", {{"vision", m.vision_backend}, {"reasoner", m.reasoner_backend}}},
           {"notes", m.notes}};
}

void from_json(const Json& j, RunManifest& m) {
  m.command = j.at("command").get<std::string>();
  m.engine_version = j.at("engine_version").get<std::string>();
  m.config_hash = j.at("config_hash").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.timings.clear();
  for (const auto& t : j.at("timings")) {
    m.timings.push_back({t.at("stage").get<std::string>(), t.at("millis").get<double>()});
  }
  const auto& c = j.at("counts");
  m.counts.tasks = c.at("tasks").get<std::int64_t>();
  m.counts.captions = c.at("captions").get<std::int64_t>();
  m.counts.trajectories = c.at("trajectories").get<std::int64_t>();
  m.counts.selected_records = c.at("selected_records").get<std::int64_t>();
  m.vision_backend = j.at("backends").at("vision").get<std::string>();
  m.reasoner_backend = j.at("backends").at("reasoner").get<std::string>();
  m.notes = j.at("notes").get<std::map<std::string, std::string>>();
}

void check_counts(const RunCounts& c, int K, int N) {
  if (c.captions > c.tasks * K) throw InvariantError("more captions than tasks x K");
  if (c.trajectories > c.captions * N) throw InvariantError("more trajectories than captions x N");
  if (c.selected_records > c.trajectories) throw InvariantError("more records than trajectories");
}

std::shared_ptr<SyntheticWorld> make_stub_world(const PipelineConfig& config,
                                               const std::vector<TaskItem>& dataset) {
  auto world = std::make_shared<SyntheticWorld>(derive_seed(config.seed, "world"), config.world);
  for (const auto& item : dataset) world->register_image(item.image_ref);
  return world;
}

std::vector<TaskItem> make_stub_dataset(const PipelineConfig& config) {
  auto world = make_stub_world(config);
  return make_synthetic_dataset(*world, config.world.tasks);
}

namespace {

std::unique_ptr<TextBackend> make_remote(const PipelineConfig& config, const std::string& model) {
  RemoteOptions options;
  options.url = config.remote.url;
  options.model = model;
  if (const char* key = std::getenv(config.remote.api_key_env.c_str())) options.api_key = key;
  options.max_attempts = config.remote.max_attempts;
  options.initial_backoff = std::chrono::milliseconds(config.remote.initial_backoff_ms);
  options.timeout = std::chrono::seconds(config.remote.timeout_s);
  return std::make_unique<RemoteChatBackend>(std::move(options));
}

}  // namespace

BackendPair make_backends(const PipelineConfig& config, const std::vector<TaskItem>& dataset) {
  BackendPair pair;
  std::shared_ptr<SyntheticWorld> world;
  if (config.vision_backend == BackendKind::kStub || config.reasoner_backend == BackendKind::kStub) {
    world = make_stub_world(config, dataset);
  }
  pair.vision = config.vision_backend == BackendKind::kStub
                    ? std::unique_ptr<TextBackend>(std::make_unique<StubVisionBackend>(world))
                    : make_remote(config, config.remote.vision_model);
  pair.reasoner = config.reasoner_backend == BackendKind::kStub
                      ? std::unique_ptr<TextBackend>(std::make_unique<StubReasonerBackend>(world))
                      : make_remote(config, config.remote.reasoner_model);
  return pair;
}

void to_json(Json& j, const ExportExample& e) {
  j = Json{{"task_id", e.task_id},
           {"system_prompt_id", to_string(e.system_prompt_id)},
           {"image_ref", e.image_ref},
           {"user", e.user},
           {"assistant", e.assistant}};
}

void from_json(const Json& j, ExportExample& e) {
  e.task_id = j.at("task_id").get<std::string>();
  e.system_prompt_id = parse_system_prompt_id(j.at("system_prompt_id").get<std::string>());
  e.image_ref = j.at("image_ref").get<std::string>();
  e.user = j.at("user").get<std::string>();
  e.assistant = j.at("assistant").get<std::string>();
}

ExportExample to_export_example(const OffPolicyRecord& record) {
  ExportExample e;
  e.task_id = record.task_id;
  e.system_prompt_id = system_prompt_for(record.trajectory);
  e.image_ref = record.image_ref;
  e.user = record.query;
  e.assistant = record.trajectory.text;
  return e;
}

std::string export_records(const std::vector<OffPolicyRecord>& records, std::string_view format) {
  if (format != "jsonl") throw InvariantError("unknown export format '" + std::string(format) + "'");
  std::vector<Json> lines;
  lines.reserve(records.size());
  for (const auto& r : records) lines.emplace_back(to_export_example(r));
  return to_jsonl(lines);
}

E2EPaths e2e_paths(const std::filesystem::path& out_dir) {
  return {out_dir / "dataset.jsonl", out_dir / "pool.jsonl",    out_dir / "scored.jsonl",
          out_dir / "records.jsonl", out_dir / "report.json",   out_dir / "history.jsonl",
          out_dir / "policy.txt",    out_dir / "manifest.json"};
}

namespace {

template <typename Fn>
decltype(auto) stage(RunManifest& manifest, const std::string& name, Fn&& fn) {
  try {
    return manifest.timed(name, std::forward<Fn>(fn));
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

}  // namespace

E2EResult run_e2e_stub(const PipelineConfig& input, const std::filesystem::path& out_dir) {
  PipelineConfig config = input;
  config.vision_backend = BackendKind::kStub;
  config.reasoner_backend = BackendKind::kStub;
  E2EResult result;
  auto& manifest = result.manifest;
  manifest = make_manifest("e2e-stub", config);
  stage(manifest, "config", [&] { validate(config); });

  const auto dataset = stage(manifest, "dataset", [&] { return make_stub_dataset(config); });
  const auto backends = make_backends(config, dataset);
  manifest.vision_backend = backends.vision->id();
  manifest.reasoner_backend = backends.reasoner->id();

  const auto pool = stage(manifest, "sample", [&] {
    return collect(dataset, collect_options_from(config), *backends.vision, *backends.reasoner);
  });
  auto scored = pool;
  stage(manifest, "score", [&] { score_pool(scored, gold_map(dataset)); });
  const auto selection = stage(manifest, "select", [&] { return select(scored, config.alpha, config.keep_n); });
  const auto trained = stage(manifest, "train", [&] { return train(config); });

  const auto counts = count_pool(pool);
  manifest.counts = {counts.tasks, counts.captions, counts.trajectories, selection.report.total_selected()};
  check_counts(manifest.counts, config.K, config.N);

  std::vector<Json> history;
  for (const auto& log : trained.history) history.emplace_back(log);

  stage(manifest, "write", [&] {
    const auto paths = e2e_paths(out_dir);
    write_file_atomic(paths.dataset, to_jsonl(encode_all(dataset)));
    write_file_atomic(paths.pool, to_jsonl(encode_pool(pool)));
    write_file_atomic(paths.scored, to_jsonl(encode_pool(scored)));
    write_file_atomic(paths.records, to_jsonl(encode_all(selection.records)));
    write_file_atomic(paths.report, Json(selection.report).dump(2) + "\n");
    write_file_atomic(paths.history, to_jsonl(history));
    write_file_atomic(paths.policy, serialize_policy(trained.state.policy));
  });
  write_file_atomic(e2e_paths(out_dir).manifest, Json(manifest).dump(2) + "\n");

  result.report = selection.report;
  result.history = trained.history;
  return result;
}

}  // namespace sophia
