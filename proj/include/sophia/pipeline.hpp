#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "sophia/backends.hpp"
#include "sophia/config.hpp"
#include "sophia/records.hpp"
#include "sophia/rewards.hpp"
#include "sophia/sampler.hpp"
#include "sophia/stub_backend.hpp"
#include "sophia/train.hpp"

namespace sophia {

inline constexpr std::string_view kEngineVersion = "0.1.0";

struct StageTiming {
  std::string stage;
  double millis = 0.0;
};

struct RunCounts {
  std::int64_t tasks = 0;
  std::int64_t captions = 0;
  std::int64_t trajectories = 0;
  std::int64_t selected_records = 0;
};

/// Provenance written next to every command's outputs.
struct RunManifest {
  std::string command;
  std::string engine_version{kEngineVersion};
  std::string config_hash;  // 16 hex digits
  std::uint64_t seed = 0;
  std::vector<StageTiming> timings;
  RunCounts counts;
  std::string vision_backend;
  std::string reasoner_backend;
  std::map<std::string, std::string> notes;

  /// Runs fn, appending its wall time under `stage`.
  template <typename Fn>
  decltype(auto) timed(const std::string& stage, Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    struct Record {
      RunManifest* self;
      std::string stage;
      std::chrono::steady_clock::time_point start;
      ~Record() {
        const std::chrono::duration<double, std::milli> d = std::chrono::steady_clock::now() - start;
        self->timings.push_back({stage, d.count()});
      }
    } record{this, stage, start};
    return fn();
  }
};

RunManifest make_manifest(std::string command, const PipelineConfig& config);
void to_json(Json& j, const RunManifest& manifest);
void from_json(const Json& j, RunManifest& manifest);

/// Throws InvariantError when the counts do not reconcile with each other or
/// with the report.
void check_counts(const RunCounts& counts, int K, int N);

/// Errors raised by a pipeline stage, carrying the stage name.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& message)
      : std::runtime_error(stage + ": " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// Synthetic world for the stub backends, with every dataset image known.
std::shared_ptr<SyntheticWorld> make_stub_world(const PipelineConfig& config,
                                               const std::vector<TaskItem>& dataset = {});

/// Stub dataset of config.world.tasks items.
std::vector<TaskItem> make_stub_dataset(const PipelineConfig& config);

struct BackendPair {
  std::unique_ptr<TextBackend> vision;
  std::unique_ptr<TextBackend> reasoner;
};

/// Backends named by the config. Remote backends read the auth token from the
/// environment variable named by remote.api_key_env.
BackendPair make_backends(const PipelineConfig& config, const std::vector<TaskItem>& dataset);

/// One chat-style training example derived from a selected record.
struct ExportExample {
  std::string task_id;
  SystemPromptId system_prompt_id = SystemPromptId::kDefault;
  std::string image_ref;
  std::string user;       // the query only, no reasoning
  std::string assistant;  // full trajectory text

  friend bool operator==(const ExportExample&, const ExportExample&) = default;
};

void to_json(Json& j, const ExportExample& example);
void from_json(const Json& j, ExportExample& example);

ExportExample to_export_example(const OffPolicyRecord& record);

/// Formats: "jsonl". Throws InvariantError for anything else.
std::string export_records(const std::vector<OffPolicyRecord>& records, std::string_view format);

/// Output files of an end-to-end stub run.
struct E2EPaths {
  std::filesystem::path dataset, pool, scored, records, report, history, policy, manifest;
};

E2EPaths e2e_paths(const std::filesystem::path& out_dir);

struct E2EResult {
  RunManifest manifest;
  SelectionReport report;
  std::vector<RoundLog> history;
};

/// Sample, score, select and train on stub backends. The config is validated
/// and every stage runs before any file is written, so a failure leaves no
/// partial outputs. Throws StageError naming the failing stage.
E2EResult run_e2e_stub(const PipelineConfig& config, const std::filesystem::path& out_dir);

}  // namespace sophia
