#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "sophia/core.hpp"
#include "sophia/toy_policy.hpp"

namespace sophia {
namespace {

ToyPolicy random_policy(const ToyPolicyShape& shape, Rng& rng, double scale = 1.0) {
  ToyPolicy p(shape);
  for (auto& v : p.mutable_params()) v = scale * (2.0 * rng.uniform01() - 1.0);
  return p;
}

Context random_context(int dim, Rng& rng) {
  Context c(static_cast<std::size_t>(dim));
  for (auto& v : c) v = 2.0 * rng.uniform01() - 1.0;
  return c;
}

Sequence random_sequence(const ToyPolicyShape& shape, Rng& rng) {
  Sequence s(rng.uniform_below(static_cast<std::uint64_t>(shape.max_len) + 1));
  for (auto& t : s) t = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(shape.vocab)));
  return s;
}

TEST(ToyPolicy, EnumerationSizeAndNormalization) {
  ToyPolicyShape shape{2, 2, 1, 2};
  Rng rng(1);
  const auto p = random_policy(shape, rng);
  const auto all = p.enumerate(Context{0.3});
  EXPECT_EQ(all.size(), 7u);
  EXPECT_EQ(ToyPolicy::support_size(shape), 7);
  double total = 0.0;
  for (const auto& [seq, prob] : all) {
    total += prob;
    EXPECT_NEAR(prob, std::exp(p.log_prob(Context{0.3}, seq)), 1e-15);
  }
  EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST(ToyPolicy, StepDistributionsSumToOne) {
  ToyPolicyShape shape{4, 3, 2, 2};
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    const auto p = random_policy(shape, rng, 3.0);
    const auto ctx = random_context(2, rng);
    auto seq = random_sequence(shape, rng);
    if (seq.size() == 3) seq.pop_back();
    const auto dist = p.step_distribution(ctx, seq);
    ASSERT_EQ(dist.size(), 5u);
    EXPECT_NEAR(std::accumulate(dist.begin(), dist.end(), 0.0), 1.0, 1e-12);
    for (double d : dist) EXPECT_GT(d, 0.0);
  }
}

TEST(ToyPolicy, LogProbFactorizes) {
  ToyPolicyShape shape{3, 4, 2, 2};
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto p = random_policy(shape, rng, 2.0);
    const auto ctx = random_context(2, rng);
    const auto seq = random_sequence(shape, rng);
    double manual = 0.0;
    for (std::size_t l = 0; l < seq.size(); ++l) {
      const auto dist = p.step_distribution(ctx, std::span<const int>(seq.data(), l));
      manual += std::log(dist[static_cast<std::size_t>(seq[l])]);
    }
    if (static_cast<int>(seq.size()) < shape.max_len) {
      manual += std::log(p.step_distribution(ctx, seq)[static_cast<std::size_t>(p.stop_token())]);
    }
    EXPECT_NEAR(p.log_prob(ctx, seq), manual, 1e-10);
  }
}

TEST(ToyPolicy, UniformInitMakesSameLengthEquiprobable) {
  ToyPolicyShape shape{3, 3, 1, 2};
  ToyPolicy p(shape);
  std::map<std::size_t, double> by_length;
  for (const auto& [seq, prob] : p.enumerate(Context{1.0})) {
    auto [it, inserted] = by_length.emplace(seq.size(), prob);
    if (!inserted) EXPECT_NEAR(it->second, prob, 1e-15);
  }
  // Each step is uniform over vocab + STOP.
  EXPECT_NEAR(by_length[0], 0.25, 1e-15);
  EXPECT_NEAR(by_length[3], std::pow(0.25, 3), 1e-15);
}

TEST(ToyPolicy, GradientMatchesFiniteDifferences) {
  ToyPolicyShape shape{3, 3, 2, 2};
  Rng rng(4);
  const double h = 1e-6;
  for (int draw = 0; draw < 100; ++draw) {
    auto p = random_policy(shape, rng);
    const auto ctx = random_context(2, rng);
    const auto seq = random_sequence(shape, rng);
    const auto g = p.grad_log_prob(ctx, seq);
    double diff = 0.0;
    double norm = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      auto& theta = p.mutable_params()[i];
      const double saved = theta;
      theta = saved + h;
      const double up = p.log_prob(ctx, seq);
      theta = saved - h;
      const double down = p.log_prob(ctx, seq);
      theta = saved;
      const double fd = (up - down) / (2.0 * h);
      diff += (g[i] - fd) * (g[i] - fd);
      norm += g[i] * g[i];
    }
    EXPECT_LT(std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12), 1e-5) << "draw " << draw;
  }
}

TEST(ToyPolicy, ScoreFunctionHasZeroMean) {
  ToyPolicyShape shape{3, 3, 2, 2};
  Rng rng(5);
  for (int draw = 0; draw < 20; ++draw) {
    const auto p = random_policy(shape, rng, 2.0);
    const auto ctx = random_context(2, rng);
    std::vector<double> mean(p.num_params(), 0.0);
    for (const auto& [seq, prob] : p.enumerate(ctx)) {
      const auto g = p.grad_log_prob(ctx, seq);
      for (std::size_t i = 0; i < g.size(); ++i) mean[i] += prob * g[i];
    }
    for (double m : mean) EXPECT_NEAR(m, 0.0, 1e-9);
  }
}

TEST(ToyPolicy, SamplingMatchesEnumeration) {
  ToyPolicyShape shape{2, 2, 1, 1};
  Rng init(6);
  const auto p = random_policy(shape, init);
  const Context ctx{0.5};
  std::map<Sequence, int> counts;
  Rng rng(7);
  const int draws = 200000;
  for (int i = 0; i < draws; ++i) counts[p.sample(ctx, rng)]++;
  for (const auto& [seq, prob] : p.enumerate(ctx)) {
    const double se = std::sqrt(prob * (1 - prob) / draws);
    EXPECT_NEAR(counts[seq] / static_cast<double>(draws), prob, 5 * se);
  }
  Rng a(9), b(9);
  EXPECT_EQ(p.sample(ctx, a), p.sample(ctx, b));
}

TEST(ToyPolicy, RejectsBadInput) {
  ToyPolicy p({3, 2, 1, 2});
  EXPECT_THROW(p.log_prob(Context{1.0}, Sequence{3}), InvariantError);
  EXPECT_THROW(p.log_prob(Context{1.0}, Sequence{0, 1, 2}), InvariantError);
  EXPECT_THROW(p.log_prob(Context{1.0, 2.0}, Sequence{0}), InvariantError);
  EXPECT_THROW(ToyPolicy({3, 8, 1, 2}).enumerate(Context{1.0}, 1000), InvariantError);
}

TEST(ToyPolicy, SerializationRoundTrip) {
  Rng rng(8);
  const auto p = random_policy({4, 3, 2, 1}, rng);
  const auto text = serialize_policy(p);
  const auto back = deserialize_policy(text);
  EXPECT_EQ(back.shape(), p.shape());
  ASSERT_EQ(back.num_params(), p.num_params());
  for (std::size_t i = 0; i < p.num_params(); ++i) EXPECT_EQ(back.params()[i], p.params()[i]);
  EXPECT_THROW(deserialize_policy("garbage"), std::exception);
}

}  // namespace
}  // namespace sophia
