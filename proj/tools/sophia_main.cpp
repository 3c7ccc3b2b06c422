// Command-line entry point for the data loop and its checks.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sophia/config.hpp"
#include "sophia/optimizer.hpp"
#include "sophia/pipeline.hpp"
#include "sophia/records.hpp"
#include "sophia/rewards.hpp"
#include "sophia/sampler.hpp"
#include "sophia/train.hpp"
#include "sophia/verifier.hpp"

namespace fs = std::filesystem;
using namespace sophia;

namespace {

struct ConfigArgs {
  std::string path;
  std::vector<std::string> overrides;
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("--config", args.path, "Config file (key = value lines)");
  cmd->add_option("--set", args.overrides, "Override a config key, as key=value")->take_all();
}

PipelineConfig resolve_config(const ConfigArgs& args,
                              const std::vector<std::pair<std::string, std::string>>& flags = {}) {
  PipelineConfig config = args.path.empty() ? PipelineConfig{} : load_config(args.path);
  for (const auto& item : args.overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError(item, "override must look like key=value");
    apply_setting(config, item.substr(0, eq), item.substr(eq + 1));
  }
  for (const auto& [key, value] : flags) apply_setting(config, key, value);
  validate(config);
  return config;
}

fs::path manifest_path(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

void write_manifest(const fs::path& path, const RunManifest& manifest) {
  write_file_atomic(path, Json(manifest).dump(2) + "\n");
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

int run_verify_corpus(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  int total = 0;
  int passed = 0;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    for (std::size_t tab; (tab = line.find('\t', start)) != std::string::npos; start = tab + 1) {
      cols.push_back(line.substr(start, tab - start));
    }
    cols.push_back(line.substr(start));
    if (cols.size() < 2 || cols.size() > 3) {
      std::cerr << path.string() << ":" << line_no << ": expected 2 or 3 tab-separated columns\n";
      return 2;
    }
    const bool expected = cols.size() == 2 || cols[2] == "1";
    const bool got = verifier::check_equivalence(cols[0], cols[1]);
    ++total;
    if (got == expected) {
      ++passed;
    } else {
      std::cout << "FAIL line " << line_no << ": '" << cols[0] << "' vs '" << cols[1] << "' expected "
                << expected << " got " << got << "\n";
    }
  }
  std::cout << "passed " << passed << "/" << total << "\n";
  return passed == total ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-off-policy data loop: sampling, scoring, selection, toy training"};
  app.set_version_flag("--version", std::string(kEngineVersion));
  app.require_subcommand(1);

  // synth-dataset
  ConfigArgs synth_cfg;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth-dataset", "Write the stub environment's dataset");
  add_config_options(synth, synth_cfg);
  synth->add_option("--out", synth_out)->required();

  // sample
  ConfigArgs sample_cfg;
  std::string sample_dataset, sample_out;
  auto* sample = app.add_subcommand("sample", "Collect K captions and N rollouts per caption");
  add_config_options(sample, sample_cfg);
  sample->add_option("--dataset", sample_dataset)->required()->check(CLI::ExistingFile);
  sample->add_option("--out", sample_out)->required();

  // score
  std::string score_pool_path, score_dataset, score_out;
  auto* score = app.add_subcommand("score", "Verify rollouts and propagate caption rewards");
  score->add_option("--pool", score_pool_path)->required()->check(CLI::ExistingFile);
  score->add_option("--dataset", score_dataset)->required()->check(CLI::ExistingFile);
  score->add_option("--out", score_out)->required();

  // select
  std::string select_scored, select_out, select_report;
  double select_alpha = 0.75;
  int select_keep_n = 1;
  auto* select_cmd = app.add_subcommand("select", "Threshold captions and keep the shortest rollouts");
  select_cmd->add_option("--scored", select_scored)->required()->check(CLI::ExistingFile);
  select_cmd->add_option("--alpha", select_alpha, "Caption reward threshold")->capture_default_str();
  select_cmd->add_option("--keep-n", select_keep_n, "Records kept per task")->capture_default_str();
  select_cmd->add_option("--out", select_out)->required();
  select_cmd->add_option("--report", select_report)->required();

  // train
  ConfigArgs train_cfg;
  std::string train_out, train_policy;
  int train_rounds = -1;
  auto* train_cmd = app.add_subcommand("train", "Run the toy training loop on the synthetic curriculum");
  add_config_options(train_cmd, train_cfg);
  train_cmd->add_option("--rounds", train_rounds);
  train_cmd->add_option("--out", train_out, "History file")->required();
  train_cmd->add_option("--policy", train_policy, "Where to save the final parameters");

  // e2e-stub
  ConfigArgs e2e_cfg;
  std::string e2e_out = "runs/e2e-stub";
  auto* e2e = app.add_subcommand("e2e-stub", "sample, score, select and train on stub backends");
  add_config_options(e2e, e2e_cfg);
  e2e->add_option("--out-dir", e2e_out)->capture_default_str();

  // check-bias
  int bias_vtok = 3, bias_maxlen = 3, bias_window = 2;
  double bias_delta = 0.05, bias_density = 0.5;
  std::uint64_t bias_seed = 1;
  auto* bias = app.add_subcommand("check-bias", "Exact IS-bias check on an engineered toy policy pair");
  bias->add_option("--vtok", bias_vtok)->capture_default_str();
  bias->add_option("--maxlen", bias_maxlen)->capture_default_str();
  bias->add_option("--window", bias_window)->capture_default_str();
  bias->add_option("--delta", bias_delta)->capture_default_str();
  bias->add_option("--density", bias_density, "Fraction of sequences rewarded")->capture_default_str();
  bias->add_option("--seed", bias_seed)->capture_default_str();

  // verify-answer
  std::string pred, gold;
  auto* verify = app.add_subcommand("verify-answer", "Print 1 if the answers are equivalent, else 0");
  verify->add_option("--pred", pred)->required();
  verify->add_option("--gold", gold)->required();

  // verify-corpus
  std::string corpus;
  auto* verify_corpus = app.add_subcommand("verify-corpus", "Run a tab-separated pred/gold[/expected] corpus");
  verify_corpus->add_option("corpus", corpus)->required()->check(CLI::ExistingFile);

  // export
  std::string export_records_path, export_format = "jsonl", export_out;
  auto* export_cmd = app.add_subcommand("export", "Write selected records as chat training examples");
  export_cmd->add_option("--records", export_records_path)->required()->check(CLI::ExistingFile);
  export_cmd->add_option("--format", export_format)->capture_default_str();
  export_cmd->add_option("--out", export_out)->required();

  CLI11_PARSE(app, argc, argv);

  std::string stage = "config";
  try {
    if (*synth) {
      const auto config = resolve_config(synth_cfg);
      stage = "dataset";
      auto manifest = make_manifest("synth-dataset", config);
      const auto dataset = manifest.timed("dataset", [&] { return make_stub_dataset(config); });
      manifest.counts.tasks = static_cast<std::int64_t>(dataset.size());
      write_file_atomic(synth_out, to_jsonl(encode_all(dataset)));
      write_manifest(manifest_path(synth_out), manifest);
    } else if (*sample) {
      const auto config = resolve_config(sample_cfg);
      stage = "sample";
      auto manifest = make_manifest("sample", config);
      const auto dataset = load_dataset(sample_dataset);
      const auto backends = make_backends(config, dataset);
      manifest.vision_backend = backends.vision->id();
      manifest.reasoner_backend = backends.reasoner->id();
      const auto pool = manifest.timed("sample", [&] {
        return collect(dataset, collect_options_from(config), *backends.vision, *backends.reasoner);
      });
      const auto counts = count_pool(pool);
      manifest.counts = {counts.tasks, counts.captions, counts.trajectories, 0};
      write_file_atomic(sample_out, to_jsonl(encode_pool(pool)));
      write_manifest(manifest_path(sample_out), manifest);
      std::cerr << "sampled " << counts.captions << " captions (" << counts.caption_errors << " failed), "
                << counts.trajectories << " trajectories (" << counts.trajectory_errors << " failed)\n";
    } else if (*score) {
      stage = "score";
      RunManifest manifest;
      manifest.command = "score";
      auto pool = decode_pool(read_jsonl(score_pool_path));
      const auto dataset = load_dataset(score_dataset);
      manifest.timed("score", [&] { score_pool(pool, gold_map(dataset)); });
      const auto counts = count_pool(pool);
      manifest.counts = {counts.tasks, counts.captions, counts.trajectories, 0};
      write_file_atomic(score_out, to_jsonl(encode_pool(pool)));
      write_manifest(manifest_path(score_out), manifest);
    } else if (*select_cmd) {
      PipelineConfig config;
      apply_setting(config, "alpha", format_double(select_alpha));
      apply_setting(config, "keep_n", std::to_string(select_keep_n));
      validate(config);
      stage = "select";
      RunManifest manifest;
      manifest.command = "select";
      const auto pool = decode_pool(read_jsonl(select_scored));
      const auto selection = manifest.timed("select", [&] { return select(pool, config.alpha, config.keep_n); });
      const auto counts = count_pool(pool);
      manifest.counts = {counts.tasks, counts.captions, counts.trajectories,
                         selection.report.total_selected()};
      check_counts(manifest.counts, pool.K, pool.N);
      write_file_atomic(select_out, to_jsonl(encode_all(selection.records)));
      write_file_atomic(select_report, Json(selection.report).dump(2) + "\n");
      write_manifest(manifest_path(select_out), manifest);
      std::cerr << "selected " << selection.report.total_selected() << " records\n";
    } else if (*train_cmd) {
      std::vector<std::pair<std::string, std::string>> flags;
      if (train_rounds >= 0) flags.emplace_back("train.rounds", std::to_string(train_rounds));
      const auto config = resolve_config(train_cfg, flags);
      stage = "train";
      auto manifest = make_manifest("train", config);
      manifest.vision_backend = "toy-captioner";
      manifest.reasoner_backend = "stub-reasoner";
      const auto result = manifest.timed("train", [&] { return train(config); });
      std::vector<Json> history;
      for (const auto& log : result.history) {
        history.emplace_back(log);
        std::cerr << "round " << log.round << " eval_reward " << log.eval_reward << "\n";
      }
      write_file_atomic(train_out, to_jsonl(history));
      if (!train_policy.empty()) save_policy(result.state.policy, train_policy);
      write_manifest(manifest_path(train_out), manifest);
    } else if (*e2e) {
      const auto config = resolve_config(e2e_cfg);
      stage = "e2e-stub";
      const auto result = run_e2e_stub(config, e2e_out);
      const auto& c = result.manifest.counts;
      std::cout << "tasks " << c.tasks << ", captions " << c.captions << ", trajectories " << c.trajectories
                << ", selected " << c.selected_records << "\n";
      std::cout << "eval reward: baseline " << result.history.front().eval_reward << ", final "
                << result.history.back().eval_reward << "\n";
      std::cout << "outputs in " << e2e_out << "\n";
    } else if (*bias) {
      stage = "check-bias";
      ToyPolicyShape shape{bias_vtok, bias_maxlen, 1, bias_window};
      const std::vector<double> context{1.0};
      const auto reward = hashed_reward(bias_seed, bias_density);
      const auto pair = engineer_policy_pair(shape, context, reward, bias_delta, bias_seed);
      const auto report = check_bias_bound(pair.pi, pair.mu, reward, context);
      const Json out{{"g_is", report.g_is},
                     {"g_1", report.g_1},
                     {"abs_difference", std::abs(report.g_is - report.g_1)},
                     {"delta", report.delta},
                     {"bound_satisfied", report.bound_satisfied}};
      std::cout << out.dump(2) << "\n";
      return report.bound_satisfied ? 0 : 1;
    } else if (*verify) {
      std::cout << (verifier::check_equivalence(pred, gold) ? "1" : "0") << "\n";
    } else if (*verify_corpus) {
      return run_verify_corpus(corpus);
    } else if (*export_cmd) {
      stage = "export";
      const auto records = load_records(export_records_path);
      write_file_atomic(export_out, export_records(records, export_format));
      RunManifest manifest;
      manifest.command = "export";
      manifest.counts.selected_records = static_cast<std::int64_t>(records.size());
      write_manifest(manifest_path(export_out), manifest);
    }
  } catch (const ConfigError& e) {
    std::cerr << "sophia: config: " << e.what() << "\n";
    return 2;
  } catch (const StageError& e) {
    std::cerr << "sophia: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "sophia: " << stage << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}
