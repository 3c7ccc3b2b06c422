#include <gtest/gtest.h>

#include "pool_fixtures.hpp"
#include "sophia/rewards.hpp"
#include "sophia/stub_backend.hpp"

namespace sophia {
namespace {

TEST(CaptionReward, ExactRatio) {
  const std::vector<int> six_of_eight{1, 1, 0, 1, 1, 0, 1, 1};
  const auto r = caption_reward(six_of_eight);
  ASSERT_TRUE(r);
  EXPECT_EQ(*r, (Fraction{6, 8}));
  EXPECT_DOUBLE_EQ(r->value(), 0.75);
  EXPECT_FALSE(r->strictly_greater(0.75));
  EXPECT_EQ(caption_reward(std::vector<int>{}), std::nullopt);
  EXPECT_EQ(*caption_reward(std::vector<int>{1, 1, 1}), (Fraction{3, 3}));
}

TEST(CaptionReward, AllPatternsAtEight) {
  for (int mask = 0; mask < 256; ++mask) {
    std::vector<int> outcomes(8);
    int j = 0;
    for (int b = 0; b < 8; ++b) j += outcomes[static_cast<std::size_t>(b)] = (mask >> b) & 1;
    EXPECT_EQ(*caption_reward(outcomes), (Fraction{j, 8})) << mask;
  }
}

TEST(ScorePool, SetsOutcomesAndCaptionRewards) {
  WorldConfig wc;
  wc.fidelity = 0.6;
  auto world = std::make_shared<SyntheticWorld>(3, wc);
  const auto dataset = make_synthetic_dataset(*world, 4);
  StubVisionBackend vision(world);
  StubReasonerBackend reasoner(world);
  CollectOptions o;
  o.K = 4;
  o.N = 4;
  o.seed = 1;
  auto pool = collect(dataset, o, vision, reasoner);
  score_pool(pool, gold_map(dataset));
  for (const auto& task : pool.tasks) {
    for (const auto& slot : task.captions) {
      int j = 0;
      for (const auto& r : slot.rollouts) {
        ASSERT_TRUE(r.trajectory->outcome_reward);
        j += *r.trajectory->outcome_reward;
        if (*r.trajectory->outcome_reward == 1) EXPECT_TRUE(r.trajectory->extracted_answer);
      }
      EXPECT_EQ(*slot.caption->reward, (Fraction{j, 4}));
    }
  }
  EXPECT_THROW(score_pool(pool, {}), InvariantError);
}

TEST(Select, RequiresScoredPool) {
  Rng rng(1);
  auto pool = testing::random_scored_pool(rng, 1, 2, 2);
  for (auto& slot : pool.tasks[0].captions) {
    for (auto& r : slot.rollouts) {
      if (r.trajectory) r.trajectory->outcome_reward.reset();
    }
  }
  EXPECT_THROW(select(pool, 0.5, 1), InvariantError);
  EXPECT_THROW(select(pool, 1.0, 1), InvariantError);
  EXPECT_THROW(select(pool, 0.5, 0), InvariantError);
}

TEST(Select, MatchesOracle) {
  Rng rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const auto pool = testing::random_scored_pool(rng, 1 + static_cast<int>(rng.uniform_below(4)),
                                                  1 + static_cast<int>(rng.uniform_below(5)),
                                                  1 + static_cast<int>(rng.uniform_below(8)));
    const double alpha = (1.0 + static_cast<double>(rng.uniform_below(7))) / 8.0;
    const int keep_n = 1 + static_cast<int>(rng.uniform_below(4));
    const auto result = select(pool, alpha, keep_n);
    ASSERT_EQ(testing::selected_refs(result, pool), testing::oracle_select(pool, alpha, keep_n));
  }
}

TEST(Select, RecordInvariants) {
  Rng rng(7);
  const auto pool = testing::random_scored_pool(rng, 20, 4, 6);
  const auto result = select(pool, 0.5, 2);
  for (const auto& record : result.records) {
    EXPECT_EQ(record.dataset_reward, 1);
    EXPECT_EQ(record.trajectory.outcome_reward, 1);
    const auto& task = *std::find_if(pool.tasks.begin(), pool.tasks.end(),
                                     [&](const TaskPool& t) { return t.task.id == record.task_id; });
    const auto& caption = *task.captions[static_cast<std::size_t>(record.caption_index)].caption;
    EXPECT_TRUE(caption.reward->strictly_greater(0.5));
    EXPECT_NO_THROW(validate(record, 0.5, *caption.reward));
  }
  std::int64_t accounted = 0;
  for (const auto& t : result.report.tasks) {
    EXPECT_EQ(static_cast<std::int64_t>(t.selected.size()), std::min<std::int64_t>(2, t.eligible_count));
    EXPECT_EQ(t.eligible_count, static_cast<std::int64_t>(t.selected.size()) + t.not_shortest);
    accounted += t.wrong_answer + t.caption_below_alpha + t.eligible_count;
  }
  EXPECT_EQ(accounted, count_pool(pool).trajectories);
  EXPECT_EQ(result.report.total_selected(), static_cast<std::int64_t>(result.records.size()));
}

TEST(Select, TieBreakByCaptionThenIndex) {
  RawPool pool{2, 2, {}};
  TaskPool task;
  task.task = {"t", "img", "q", "1"};
  for (int k = 0; k < 2; ++k) {
    CaptionSlot slot;
    slot.caption = Caption{"t", k, "c", std::nullopt, "b"};
    for (int n = 0; n < 2; ++n) {
      slot.rollouts.push_back({Trajectory{"t", k, n, "x", "1", 1, 5, false, "b"}, ""});
    }
    task.captions.push_back(slot);
  }
  pool.tasks.push_back(task);
  assign_caption_rewards(pool);
  const auto result = select(pool, 0.5, 3);
  ASSERT_EQ(result.report.tasks[0].selected.size(), 3u);
  EXPECT_EQ(result.report.tasks[0].selected[0], (TrajectoryRef{0, 0}));
  EXPECT_EQ(result.report.tasks[0].selected[1], (TrajectoryRef{0, 1}));
  EXPECT_EQ(result.report.tasks[0].selected[2], (TrajectoryRef{1, 0}));
}

TEST(Select, AntitoneInAlpha) {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const auto pool = testing::random_scored_pool(rng, 5, 4, 8);
    std::int64_t previous = -1;
    for (int step = 1; step < 8; ++step) {
      // Selection with keep_n large enough to expose the whole eligible set.
      const auto n = select(pool, step / 8.0, 1000).report.total_selected();
      if (previous >= 0) EXPECT_LE(n, previous);
      previous = n;
    }
  }
}

TEST(Select, Deterministic) {
  Rng rng(10);
  const auto pool = testing::random_scored_pool(rng, 8, 4, 4);
  const auto a = select(pool, 0.5, 2);
  const auto b = select(pool, 0.5, 2);
  EXPECT_EQ(a.records, b.records);
  EXPECT_EQ(Json(a.report).dump(), Json(b.report).dump());
}

}  // namespace
}  // namespace sophia
