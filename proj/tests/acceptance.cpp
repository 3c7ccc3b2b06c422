// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "mock_chat_server.hpp"
#include "pool_fixtures.hpp"
#include "sophia/optimizer.hpp"
#include "sophia/pipeline.hpp"
#include "sophia/remote_backend.hpp"
#include "sophia/rewards.hpp"
#include "sophia/stub_backend.hpp"
#include "sophia/toy_policy.hpp"
#include "sophia/verifier.hpp"

namespace fs = std::filesystem;
using namespace sophia;
using verifier::Rational;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& check) {
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = check();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const std::chrono::duration<double> secs = std::chrono::steady_clock::now() - start;
  if (!out.pass) ++failures;
  std::printf("[%s] criterion %d: %s (%s; %.2fs)\n", out.pass ? "PASS" : "FAIL", id, name.c_str(),
              out.detail.c_str(), secs.count());
  std::fflush(stdout);
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double elapsed_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// 1. Exact bias bound on engineered pairs.
Outcome bias_bound() {
  const auto start = std::chrono::steady_clock::now();
  const ToyPolicyShape shape{3, 3, 1, 2};
  const Context context{1.0};
  int cases = 0;
  double worst_ratio = 0.0;
  for (double delta : {0.01, 0.05, 0.1}) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      for (double density : {0.2, 0.5, 0.9}) {
        const auto reward = hashed_reward(seed * 31 + 7, density);
        const auto pair = engineer_policy_pair(shape, context, reward, delta, seed);
        const auto r = check_bias_bound(pair.pi, pair.mu, reward, context);
        ++cases;
        if (!(pair.delta <= delta) || !r.bound_satisfied || std::abs(r.g_is - r.g_1) > delta) {
          return {false, fmt("violated at delta=%g seed=%llu: |G_IS-G_1|=%.3g, engineered delta %.6g",
                             delta, static_cast<unsigned long long>(seed), std::abs(r.g_is - r.g_1),
                             pair.delta)};
        }
        worst_ratio = std::max(worst_ratio, std::abs(r.g_is - r.g_1) / pair.delta);
      }
    }
  }
  const double secs = elapsed_since(start);
  return {secs < 60.0, fmt("%d enumerated cases, max |G_IS-G_1|/delta = %.4f, %.2fs < 60s", cases,
                           worst_ratio, secs)};
}

// 2. Analytic gradient vs central differences; zero-mean score.
Outcome gradient() {
  const auto start = std::chrono::steady_clock::now();
  const ToyPolicyShape shape{3, 3, 2, 2};
  Rng rng(2);
  const double h = 1e-6;
  double worst_rel = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    ToyPolicy p(shape);
    for (auto& v : p.mutable_params()) v = 2.0 * rng.uniform01() - 1.0;
    const Context ctx{2.0 * rng.uniform01() - 1.0, 2.0 * rng.uniform01() - 1.0};
    Sequence seq(rng.uniform_below(4));
    for (auto& t : seq) t = static_cast<int>(rng.uniform_below(3));
    const auto g = p.grad_log_prob(ctx, seq);
    double diff = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      auto& theta = p.mutable_params()[i];
      const double saved = theta;
      theta = saved + h;
      const double up = p.log_prob(ctx, seq);
      theta = saved - h;
      const double down = p.log_prob(ctx, seq);
      theta = saved;
      const double fd = (up - down) / (2 * h);
      diff += (g[i] - fd) * (g[i] - fd);
      norm += g[i] * g[i];
    }
    worst_rel = std::max(worst_rel, std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12));
  }
  double worst_mean = 0.0;
  for (int draw = 0; draw < 20; ++draw) {
    ToyPolicy p(shape);
    for (auto& v : p.mutable_params()) v = 4.0 * rng.uniform01() - 2.0;
    const Context ctx{rng.uniform01(), rng.uniform01()};
    std::vector<double> mean(p.num_params(), 0.0);
    for (const auto& [seq, prob] : p.enumerate(ctx)) {
      const auto g = p.grad_log_prob(ctx, seq);
      for (std::size_t i = 0; i < g.size(); ++i) mean[i] += prob * g[i];
    }
    for (double m : mean) worst_mean = std::max(worst_mean, std::abs(m));
  }
  const double secs = elapsed_since(start);
  return {worst_rel < 1e-5 && worst_mean <= 1e-9 && secs < 60.0,
          fmt("max FD relative error %.2e < 1e-5 over 100 draws, max |E[grad log pi]| %.2e <= 1e-9",
              worst_rel, worst_mean)};
}

// 3. Caption reward is exactly j/n.
Outcome caption_reward_exact() {
  for (int mask = 0; mask < 256; ++mask) {
    std::vector<int> outcomes(8);
    int j = 0;
    for (int b = 0; b < 8; ++b) j += outcomes[static_cast<std::size_t>(b)] = (mask >> b) & 1;
    const auto r = caption_reward(outcomes);
    if (!r || !(*r == Fraction{j, 8})) return {false, fmt("pattern %d gave a wrong ratio", mask)};
  }
  const auto six = *caption_reward(std::vector<int>{1, 1, 1, 1, 1, 1, 0, 0});
  const bool operating_point = six.value() == 0.75 && !six.strictly_greater(0.75) &&
                               caption_reward(std::vector<int>{1, 1, 1, 1, 1, 1, 1, 0})->strictly_greater(0.75);
  return {operating_point, "256/256 patterns exact; 6/8 = 0.75 is not > 0.75, 7/8 is"};
}

// 4. Selection agrees with a brute-force oracle.
Outcome selection_oracle() {
  Rng rng(4);
  int agree = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto pool = testing::random_scored_pool(rng, 1 + static_cast<int>(rng.uniform_below(6)),
                                                  1 + static_cast<int>(rng.uniform_below(8)),
                                                  1 + static_cast<int>(rng.uniform_below(8)));
    const double alpha = (1.0 + static_cast<double>(rng.uniform_below(15))) / 16.0;
    const int keep_n = 1 + static_cast<int>(rng.uniform_below(4));
    if (testing::selected_refs(select(pool, alpha, keep_n), pool) == testing::oracle_select(pool, alpha, keep_n)) {
      ++agree;
    }
  }
  return {agree == 1000, fmt("%d/1000 randomized pools agree", agree)};
}

// 5. Mean caption reward equals q^M.
Rational exact_mean_caption_reward(const Rational& q, int M, int images) {
  WorldConfig wc;
  wc.attributes = M;
  wc.reasoner_skill = 1.0;
  SyntheticWorld world(55, wc);
  const int range = wc.value_range;
  const Rational p_decoy = (1 - q) / (range - 1);
  Rational total = 0;
  for (int image = 0; image < images; ++image) {
    const auto ref = "img-" + std::to_string(image);
    world.register_image(ref);
    const auto truth = world.attributes(ref);
    const auto gold = std::to_string(world.gold_value(truth));
    // Every (kept | offset) outcome per attribute: choice 0 keeps the value,
    // choice c in [1, range) adds offset c.
    std::vector<int> choice(static_cast<std::size_t>(M), 0);
    while (true) {
      Rational weight = 1;
      auto reported = truth;
      for (int i = 0; i < M; ++i) {
        const int c = choice[static_cast<std::size_t>(i)];
        weight *= c == 0 ? q : p_decoy;
        reported[static_cast<std::size_t>(i)] += c;
      }
      if (weight != 0) {
        const auto prompt = build_reasoning_prompt(world.query_text(), render_attribute_caption(reported));
        std::vector<int> outcomes;
        for (int n = 0; n < 8; ++n) {
          Rng rng(derive_seed(1, ref, n));
          outcomes.push_back(verifier::score_trajectory(stub_reasoner(world, prompt.user, rng), gold));
        }
        const auto r = *caption_reward(outcomes);
        total += weight * Rational(r.num, r.den);
      }
      int i = 0;
      while (i < M && ++choice[static_cast<std::size_t>(i)] == range) choice[static_cast<std::size_t>(i++)] = 0;
      if (i == M) break;
    }
  }
  return total / images;
}

Outcome propagation_law() {
  const int M = 4;
  std::string detail;
  for (const Rational q : {Rational(0), Rational(1, 2), Rational(1)}) {
    const auto mean = exact_mean_caption_reward(q, M, 3);
    Rational expected = 1;
    for (int i = 0; i < M; ++i) expected *= q;
    if (mean != expected) return {false, "exhaustive mean " + mean.str() + " != " + expected.str()};
    detail += "q=" + q.str() + ": " + mean.str() + " exact; ";
  }
  for (double q : {0.0, 0.5, 0.9, 1.0}) {
    PipelineConfig c;
    c.world.attributes = M;
    c.world.fidelity = q;
    c.world.reasoner_skill = 1.0;
    c.world.tasks = 1000;
    c.K = 1;
    c.N = 8;
    const auto dataset = make_stub_dataset(c);
    const auto backends = make_backends(c, dataset);
    auto pool = collect(dataset, collect_options_from(c), *backends.vision, *backends.reasoner);
    score_pool(pool, gold_map(dataset));
    double sum = 0.0, sum_sq = 0.0;
    for (const auto& task : pool.tasks) {
      const double r = task.captions[0].caption->reward->value();
      sum += r;
      sum_sq += r * r;
    }
    const double mean = sum / 1000.0;
    const double se = std::sqrt(std::max(0.0, sum_sq / 1000.0 - mean * mean) / 999.0);
    const double target = std::pow(q, M);
    if (std::abs(mean - target) > 3 * se + 1e-12) {
      return {false, fmt("Monte Carlo q=%g: mean %.4f vs %.4f, 3 SE = %.4f", q, mean, target, 3 * se)};
    }
    detail += fmt("MC q=%g: %.4f vs %.4f (SE %.4f); ", q, mean, target, se);
  }
  return {true, detail};
}

// 6. End-to-end training on the synthetic curriculum.
constexpr double kPinnedBaseline = 0.17708333333333334;
constexpr double kPinnedFinal = 0.97602206;

Outcome e2e_training() {
  const auto start = std::chrono::steady_clock::now();
  const auto config = load_config(fs::path(SOPHIA_SOURCE_DIR) / "configs" / "e2e_stub.conf");
  const auto dir = fs::temp_directory_path() / "sophia_acceptance_e2e";
  fs::remove_all(dir);
  const auto result = run_e2e_stub(config, dir);
  const auto& h = result.history;
  if (h.size() != 51) return {false, fmt("expected 51 history entries, got %zu", h.size())};
  bool increasing = true;
  for (std::size_t r = 1; r <= 5; ++r) increasing = increasing && h[r].eval_reward > h[r - 1].eval_reward;
  int reached = -1;
  for (const auto& log : h) {
    if (log.eval_reward >= 0.8) {
      reached = log.round;
      break;
    }
  }
  const double secs = elapsed_since(start);
  const bool pinned = std::abs(h.front().eval_reward - kPinnedBaseline) < 1e-6 &&
                      std::abs(h.back().eval_reward - kPinnedFinal) < 1e-6;
  std::string rounds;
  for (std::size_t r = 0; r <= 5; ++r) rounds += fmt("%.4f ", h[r].eval_reward);
  return {config.seed == 7 && h.front().eval_reward <= 0.35 && increasing && reached >= 0 && pinned &&
              secs < 300.0,
          fmt("seed %llu; rounds 0-5: %s; >= 0.8 at round %d; final %.6f; pinned %s; %.1fs < 300s",
              static_cast<unsigned long long>(config.seed), rounds.c_str(), reached, h.back().eval_reward,
              pinned ? "match" : "MISMATCH", secs)};
}

// 7. Verifier corpus and fuzzing.
Outcome verifier_corpus() {
  std::ifstream in(fs::path(SOPHIA_TEST_DATA_DIR) / "verifier_corpus.tsv");
  if (!in) return {false, "corpus missing"};
  int cases = 0, passed = 0;
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string col; std::getline(ss, col, '\t');) cols.push_back(col);
    const bool expected = cols.size() < 3 || cols[2] == "1";
    ++cases;
    if (cols.size() >= 2 && verifier::check_equivalence(cols[0], cols[1]) == expected) ++passed;
  }
  Rng rng(7);
  int fuzz_ok = 0;
  for (int i = 0; i < 10000; ++i) {
    std::string text;
    for (std::uint64_t k = 0, n = rng.uniform_below(300); k < n; ++k) {
      text.push_back(static_cast<char>(rng.uniform_below(256)));
    }
    try {
      const int s = verifier::score_trajectory(text, rng.bernoulli(0.5) ? "42" : text);
      if (s == 0 || s == 1) ++fuzz_ok;
    } catch (...) {
    }
  }
  return {cases >= 50 && passed == cases && fuzz_ok == 10000,
          fmt("corpus %d/%d (>= 50 cases); fuzz %d/10000 returned 0 or 1 without error", passed, cases,
              fuzz_ok)};
}

// 8. Two identical runs give identical bytes.
Outcome determinism() {
  auto config = load_config(fs::path(SOPHIA_SOURCE_DIR) / "configs" / "e2e_stub.conf");
  config.train.rounds = 10;
  const auto a = fs::temp_directory_path() / "sophia_acceptance_det_a";
  const auto b = fs::temp_directory_path() / "sophia_acceptance_det_b";
  fs::remove_all(a);
  fs::remove_all(b);
  run_e2e_stub(config, a);
  config.parallelism = 1;  // scheduling must not matter either
  run_e2e_stub(config, b);
  config.parallelism = 4;
  for (auto pick : {&E2EPaths::pool, &E2EPaths::scored, &E2EPaths::records, &E2EPaths::report,
                    &E2EPaths::history, &E2EPaths::policy}) {
    const auto pa = e2e_paths(a).*pick;
    if (read_file(pa) != read_file(e2e_paths(b).*pick)) return {false, pa.filename().string() + " differs"};
  }
  return {true, "pool, scored, records, report, history and policy byte-identical"};
}

// 9. Remote client against a local mock endpoint.
Outcome remote_conformance() {
  int slept = 0;
  const auto client = [&](const std::string& url) {
    RemoteOptions o;
    o.url = url;
    o.model = "m";
    o.timeout = std::chrono::seconds(5);
    o.sleep = [&](std::chrono::milliseconds) { ++slept; };
    return RemoteChatBackend(o);
  };
  GenRequest request;
  request.user_prompt = "hello";
  request.seed = 1;

  std::vector<std::string> kinds;
  std::string detail;
  const auto expect_error = [&](const std::string& url, auto tag, std::size_t max_bodies,
                                const testing::MockChatServer* server) -> bool {
    using Expected = decltype(tag);
    try {
      client(url).generate(request);
      return false;
    } catch (const Expected& e) {
      kinds.emplace_back(to_string(e.kind()));
      if (e.attempts() > 3) return false;
    } catch (...) {
      return false;
    }
    if (server) {
      const auto bodies = server->bodies();
      if (bodies.size() > max_bodies) return false;
      for (const auto& body : bodies) {
        if (body != bodies.front()) return false;
      }
    }
    return true;
  };

  testing::MockChatServer flaky({{503, ""}, {503, ""}, {200, testing::chat_reply("ok")}});
  const bool recovers = client(flaky.url()).generate(request).text == "ok" && flaky.bodies().size() == 3 &&
                        flaky.bodies()[0] == flaky.bodies()[2];
  testing::MockChatServer down({{503, "busy"}});
  testing::MockChatServer bad_request({{400, "no"}});
  testing::MockChatServer malformed({{200, "{\"choices\": 5}"}});
  const auto closed = "http://127.0.0.1:" + std::to_string(testing::closed_port()) + "/v1/chat/completions";
  const bool ok = recovers && expect_error(down.url(), RetryExhaustedError(503, "", 0), 3, &down) &&
                  expect_error(bad_request.url(), HttpStatusError(400, "", 0), 1, &bad_request) &&
                  expect_error(malformed.url(), MalformedResponseError("", 0), 1, &malformed) &&
                  expect_error(closed, ConnectionError("", 0), 3, nullptr);
  std::string joined;
  for (const auto& k : kinds) joined += (joined.empty() ? "" : ", ") + k;
  const bool distinct = std::set<std::string>(kinds.begin(), kinds.end()).size() == 4;
  return {ok && distinct, "recovered after 2x503 in 3 identical attempts; error classes: " + joined};
}

}  // namespace

int main() {
  report(1, "IS bias bound |G_IS - G_1| <= delta by exhaustive enumeration", bias_bound);
  report(2, "analytic score gradient vs finite differences, zero-mean score", gradient);
  report(3, "caption reward is the exact ratio j/n", caption_reward_exact);
  report(4, "threshold-and-shortest selection matches a brute-force oracle", selection_oracle);
  report(5, "mean caption reward equals q^M", propagation_law);
  report(6, "e2e-stub toy training improves from a uniform baseline", e2e_training);
  report(7, "verifier corpus and fuzzing", verifier_corpus);
  report(8, "e2e-stub outputs are byte-identical across runs", determinism);
  report(9, "remote client retries and error classes against a mock endpoint", remote_conformance);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures;
}
