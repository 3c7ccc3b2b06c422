#include <gtest/gtest.h>

#include "mock_chat_server.hpp"
#include "sophia/remote_backend.hpp"
#include "sophia/sampler.hpp"
#include "sophia/stub_backend.hpp"
#include "sophia/verifier.hpp"

namespace sophia {
namespace {

using testing::chat_reply;
using testing::MockChatServer;

WorldConfig world_config(int attributes, double fidelity, double skill) {
  WorldConfig c;
  c.attributes = attributes;
  c.fidelity = fidelity;
  c.reasoner_skill = skill;
  return c;
}

TEST(SyntheticWorld, AttributesAreDeterministicAndInRange) {
  SyntheticWorld a(5, world_config(4, 0.9, 1.0));
  SyntheticWorld b(5, world_config(4, 0.9, 1.0));
  a.register_image("img-1");
  b.register_image("img-1");
  EXPECT_EQ(a.attributes("img-1"), b.attributes("img-1"));
  for (int v : a.attributes("img-1")) {
    EXPECT_GE(v, 0);
    EXPECT_LT(v, 10);
  }
  EXPECT_THROW(a.attributes("img-2"), InvariantError);
}

TEST(GoldFunction, Variants) {
  EXPECT_EQ(apply_gold(GoldFunction::kSum, {1, 2, 3}, 10), 6);
  EXPECT_EQ(apply_gold(GoldFunction::kMax, {1, 7, 3}, 10), 7);
  EXPECT_EQ(apply_gold(GoldFunction::kCount, {1, 5, 9, 4}, 10), 2);
}

TEST(AttributeCaption, RoundTrip) {
  const std::vector<int> values{3, 0, 12};
  const auto text = render_attribute_caption(values);
  EXPECT_EQ(parse_attribute_caption(text), values);
  EXPECT_EQ(parse_attribute_caption("nothing here"), std::nullopt);
  EXPECT_EQ(parse_attribute_caption("attribute 2 = 4"), std::nullopt);
}

TEST(StubVision, SameSeedSameCaption) {
  auto world = std::make_shared<SyntheticWorld>(1, world_config(4, 0.5, 1.0));
  world->register_image("img-0");
  StubVisionBackend vision(world);
  GenRequest request;
  request.image_ref = "img-0";
  request.seed = caption_seed(9, "task-0", 3);
  EXPECT_EQ(vision.generate(request).text, vision.generate(request).text);
  request.image_ref.reset();
  try {
    vision.generate(request);
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendErrorKind::kInvalidRequest);
  }
}

TEST(StubVision, FidelityOneIsFaithful) {
  SyntheticWorld world(2, world_config(5, 1.0, 1.0));
  world.register_image("img");
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    EXPECT_EQ(parse_attribute_caption(stub_vision_caption(world, "img", rng)), world.attributes("img"));
  }
}

TEST(StubVision, CorruptionNeverLowersAValue) {
  SyntheticWorld world(3, world_config(4, 0.0, 1.0));
  world.register_image("img");
  const auto truth = world.attributes("img");
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const auto reported = *parse_attribute_caption(stub_vision_caption(world, "img", rng));
    for (std::size_t i = 0; i < truth.size(); ++i) {
      EXPECT_GT(reported[i], truth[i]);
      EXPECT_LT(reported[i], truth[i] + 10);
    }
  }
}

TEST(StubReasoner, ExactCaptionGivesGold) {
  SyntheticWorld world(4, world_config(4, 1.0, 1.0));
  world.register_image("img");
  const auto truth = world.attributes("img");
  const auto gold = std::to_string(world.gold_value(truth));
  const auto prompt = build_reasoning_prompt(world.query_text(), render_attribute_caption(truth));
  Rng rng(1);
  const auto text = stub_reasoner(world, prompt.user, rng);
  EXPECT_EQ(verifier::score_trajectory(text, gold), 1);
  EXPECT_TRUE(contains_think_tag(text));

  auto corrupted = truth;
  corrupted[2] += 1;
  const auto bad = build_reasoning_prompt(world.query_text(), render_attribute_caption(corrupted));
  Rng rng2(1);
  EXPECT_EQ(verifier::score_trajectory(stub_reasoner(world, bad.user, rng2), gold), 0);
}

TEST(StubReasoner, MalformedCaptionHasNoAnswer) {
  SyntheticWorld world(4, world_config(4, 1.0, 1.0));
  Rng rng(1);
  const auto text = stub_reasoner(world, "<image>\na blurry photo\n</image>", rng);
  EXPECT_EQ(verifier::extract_answer(text), std::nullopt);
}

TEST(StubReasoner, SkillZeroAlwaysSlips) {
  SyntheticWorld world(4, world_config(3, 1.0, 0.0));
  world.register_image("img");
  const auto truth = world.attributes("img");
  const auto gold = std::to_string(world.gold_value(truth));
  const auto prompt = build_reasoning_prompt(world.query_text(), render_attribute_caption(truth));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    EXPECT_EQ(verifier::score_trajectory(stub_reasoner(world, prompt.user, rng), gold), 0);
  }
}

TEST(ChatBody, Fields) {
  GenRequest request;
  request.system_prompt = "sys";
  request.user_prompt = "describe";
  request.temperature = 0.7;
  request.max_tokens = 100;
  request.seed = 42;
  request.image_ref = "file:///a.png";
  const auto body = build_chat_body(request, "vision-model");
  EXPECT_EQ(body["model"], "vision-model");
  EXPECT_EQ(body["temperature"], 0.7);
  EXPECT_EQ(body["max_tokens"], 100);
  EXPECT_EQ(body["seed"], 42);
  ASSERT_EQ(body["messages"].size(), 2u);
  EXPECT_EQ(body["messages"][0]["role"], "system");
  const auto& parts = body["messages"][1]["content"];
  EXPECT_EQ(parts[0]["type"], "image_url");
  EXPECT_EQ(parts[0]["image_url"]["url"], "file:///a.png");
  EXPECT_EQ(parts[1]["text"], "describe");
}

TEST(ChatResponse, Parse) {
  const auto r = parse_chat_response(chat_reply("hi", 3), "remote:m");
  EXPECT_EQ(r.text, "hi");
  EXPECT_EQ(r.token_count, 3);
  EXPECT_THROW(parse_chat_response("{}", "x"), MalformedResponseError);
  EXPECT_THROW(parse_chat_response("not json", "x"), MalformedResponseError);
  EXPECT_THROW(parse_chat_response(R"({"choices":[{"message":{"content":5}}]})", "x"),
               MalformedResponseError);
}

struct RemoteFixture : ::testing::Test {
  std::vector<std::chrono::milliseconds> sleeps;

  RemoteChatBackend backend(const std::string& url, int attempts = 3) {
    RemoteOptions o;
    o.url = url;
    o.model = "reasoner";
    o.api_key = "secret";
    o.max_attempts = attempts;
    o.timeout = std::chrono::seconds(5);
    o.sleep = [this](std::chrono::milliseconds d) { sleeps.push_back(d); };
    return RemoteChatBackend(o);
  }

  static GenRequest request() {
    GenRequest r;
    r.user_prompt = "2+2?";
    r.seed = 5;
    return r;
  }
};

TEST_F(RemoteFixture, SuccessOnFirstAttempt) {
  MockChatServer server({{200, chat_reply("four", 1)}});
  const auto response = backend(server.url()).generate(request());
  EXPECT_EQ(response.text, "four");
  EXPECT_EQ(response.backend_id, "remote:reasoner");
  ASSERT_EQ(server.bodies().size(), 1u);
  EXPECT_EQ(server.authorization()[0], "Bearer secret");
  EXPECT_TRUE(sleeps.empty());
}

TEST_F(RemoteFixture, RetriesServerErrorsWithIdenticalBody) {
  MockChatServer server({{503, "busy"}, {429, "slow down"}, {200, chat_reply("ok")}});
  EXPECT_EQ(backend(server.url()).generate(request()).text, "ok");
  const auto bodies = server.bodies();
  ASSERT_EQ(bodies.size(), 3u);
  EXPECT_EQ(bodies[0], bodies[1]);
  EXPECT_EQ(bodies[1], bodies[2]);
  EXPECT_EQ(sleeps, (std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(1000),
                                                            std::chrono::milliseconds(2000)}));
}

TEST_F(RemoteFixture, RetryExhausted) {
  MockChatServer server({{500, "boom"}});
  try {
    backend(server.url()).generate(request());
    FAIL();
  } catch (const RetryExhaustedError& e) {
    EXPECT_EQ(e.attempts(), 3);
    EXPECT_EQ(e.last_status(), 500);
  }
  EXPECT_EQ(server.bodies().size(), 3u);
}

TEST_F(RemoteFixture, ClientErrorIsNotRetried) {
  MockChatServer server({{400, "bad request"}});
  try {
    backend(server.url()).generate(request());
    FAIL();
  } catch (const HttpStatusError& e) {
    EXPECT_EQ(e.status(), 400);
    EXPECT_EQ(e.attempts(), 1);
  }
  EXPECT_EQ(server.bodies().size(), 1u);
}

TEST_F(RemoteFixture, MalformedBodyIsNotRetried) {
  MockChatServer server({{200, R"({"choices":[]})"}});
  EXPECT_THROW(backend(server.url()).generate(request()), MalformedResponseError);
  EXPECT_EQ(server.bodies().size(), 1u);
}

TEST_F(RemoteFixture, ConnectionFailure) {
  const auto url = "http://127.0.0.1:" + std::to_string(testing::closed_port()) + "/v1/chat/completions";
  try {
    backend(url).generate(request());
    FAIL();
  } catch (const ConnectionError& e) {
    EXPECT_EQ(e.kind(), BackendErrorKind::kConnection);
    EXPECT_EQ(e.attempts(), 3);
  }
}

TEST_F(RemoteFixture, AttemptLimitIsConfigurable) {
  MockChatServer server({{502, "bad gateway"}});
  EXPECT_THROW(backend(server.url(), 2).generate(request()), RetryExhaustedError);
  EXPECT_EQ(server.bodies().size(), 2u);
}

}  // namespace
}  // namespace sophia
