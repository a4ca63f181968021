#include <gtest/gtest.h>

#include <set>

#include "epimark/elicit.hpp"
#include "fake_transport.hpp"
#include "helpers.hpp"

namespace epimark::elicit {
namespace {

using testing::completion_body;
using testing::FakeTransport;
using testing::TempDir;

QAItem binary_item() {
  QAItem item;
  item.dataset_id = "boolq";
  item.item_id = "1";
  item.question_type = QuestionType::binary;
  item.question_text = "Is the sky blue?";
  item.gold_answer = "yes";
  return item;
}

QAItem mcq_item() {
  QAItem item;
  item.dataset_id = "csqa";
  item.item_id = "2";
  item.question_type = QuestionType::multiple_choice;
  item.question_text = "Pick one.";
  item.options = {{"A", "red"}, {"B", "green"}};
  item.gold_answer = "A";
  return item;
}

ClientConfig config_in(const TempDir& dir) {
  ClientConfig c;
  c.model_id = "test-model";
  c.cache_dir = dir / "cache";
  c.max_inflight = 1;
  return c;
}

auto no_sleep() {
  return [](std::chrono::milliseconds) {};
}
auto key() {
  return []() -> std::optional<std::string> { return "secret"; };
}

TEST(Prompt, BinaryMarker) {
  EXPECT_EQ(render_prompt(binary_item(), PromptMode::marker),
            "The following is a binary question. When responding, answer with a binary answer from yes or no and "
            "incorporate only one epistemic marker to reflect your confidence level. You must include your binary "
            "answer at the beginning of your response then respond with the epistemic markers in a concise and "
            "brief manner.\nThe question is: Is the sky blue?\nAnd your answer is:");
}

TEST(Prompt, McqNumericListsOptions) {
  const auto p = render_prompt(mcq_item(), PromptMode::numeric);
  EXPECT_NE(p.find("answer with a letter from A, B"), std::string::npos);
  EXPECT_NE(p.find("a number between 0 and 100"), std::string::npos);
  EXPECT_NE(p.find("respond with the confidence score"), std::string::npos);
  EXPECT_NE(p.find("The options are:\nA. red\nB. green\n"), std::string::npos);
  EXPECT_EQ(p, render_prompt(mcq_item(), PromptMode::numeric));
}

TEST(Request, Checks) {
  ElicitationRequest r{binary_item(), PromptMode::marker, "m"};
  EXPECT_NO_THROW(check_request(r));
  EXPECT_DOUBLE_EQ(r.temperature, 0.5);
  r.temperature = 2.1;
  EXPECT_THROW(check_request(r), UsageError);
  r.temperature = 0.0;
  r.max_tokens = 0;
  EXPECT_THROW(check_request(r), UsageError);
}

TEST(Config, FromJson) {
  const auto c = client_config_from_json(json{{"model_id", "x"}, {"max_retries", 2}, {"backoff_initial_ms", 10},
                                              {"cache_dir", "/tmp/c"}, {"unknown", 1}});
  EXPECT_EQ(c.model_id, "x");
  EXPECT_EQ(c.max_retries, 2);
  EXPECT_EQ(c.backoff_initial.count(), 10);
  EXPECT_EQ(c.cache_dir, "/tmp/c");
  EXPECT_THROW(client_config_from_json(json{{"max_inflight", 0}}), UsageError);
  EXPECT_THROW(client_config_from_json(json{{"max_retries", "many"}}), UsageError);
}

TEST(CacheKey, SensitiveToEveryInput) {
  const auto k = cache_key("m", "p", 0.5, 128);
  EXPECT_EQ(k.size(), 64u);
  EXPECT_EQ(k, cache_key("m", "p", 0.5, 128));
  EXPECT_NE(k, cache_key("n", "p", 0.5, 128));
  EXPECT_NE(k, cache_key("m", "q", 0.5, 128));
  EXPECT_NE(k, cache_key("m", "p", 0.6, 128));
  EXPECT_NE(k, cache_key("m", "p", 0.5, 64));
}

TEST(CacheKey, HundredThousandDistinct) {
  std::set<std::string> keys;
  for (int i = 0; i < 100000; ++i) keys.insert(cache_key("m", "prompt " + std::to_string(i), 0.5, 128));
  EXPECT_EQ(keys.size(), 100000u);
}

TEST(Cache, PutGetAndCorruption) {
  TempDir dir;
  ResponseCache cache(dir / "c");
  const auto k = cache_key("m", "p", 0.5, 1);
  EXPECT_FALSE(cache.get(k));
  cache.put({k, "yes, likely", "{}"});
  const auto hit = cache.get(k);
  ASSERT_TRUE(hit);
  EXPECT_EQ(hit->raw_response, "yes, likely");
  EXPECT_EQ(cache.path_for(k).parent_path().filename(), k.substr(0, 2));
  testing::write_text(cache.path_for(k), "{oops");
  EXPECT_THROW(cache.get(k), DataError);
}

TEST(Client, RetriesTransientFailures) {
  TempDir dir;
  FakeTransport t;
  t.script = {{500, "", ""}, {500, "", ""}, {200, completion_body("Yes, probably."), ""}};
  std::vector<std::chrono::milliseconds> sleeps;
  Client client(config_in(dir), t, [&](std::chrono::milliseconds d) { sleeps.push_back(d); }, key());
  EXPECT_EQ(client.complete({binary_item(), PromptMode::marker, "test-model"}), "Yes, probably.");
  EXPECT_EQ(t.calls(), 3u);
  EXPECT_EQ(client.retries(), 2u);
  ASSERT_EQ(sleeps.size(), 2u);
  EXPECT_LT(sleeps[0], sleeps[1]);

  const json sent = json::parse(t.last_body());
  EXPECT_EQ(sent["model"], "test-model");
  EXPECT_DOUBLE_EQ(sent["temperature"].get<double>(), 0.5);
  EXPECT_EQ(sent["messages"][0]["content"], render_prompt(binary_item(), PromptMode::marker));
  EXPECT_EQ(t.last_headers().front().second, "Bearer secret");
}

TEST(Client, RetryExhaustion) {
  TempDir dir;
  FakeTransport t;
  t.fallback = HttpResponse{503, "", ""};
  auto cfg = config_in(dir);
  cfg.max_retries = 3;
  Client client(cfg, t, no_sleep(), key());
  EXPECT_THROW(client.complete({binary_item(), PromptMode::marker, "test-model"}), RetryExhaustedError);
  EXPECT_EQ(t.calls(), 4u);
}

TEST(Client, MissingCredentialBeforeAnyCall) {
  TempDir dir;
  FakeTransport t;
  Client client(config_in(dir), t, no_sleep(), [] { return std::optional<std::string>{}; });
  try {
    client.complete({binary_item(), PromptMode::marker, "test-model"});
    FAIL() << "expected AuthenticationError";
  } catch (const AuthenticationError& e) {
    EXPECT_EQ(e.exit_code(), 3);
  }
  EXPECT_EQ(t.calls(), 0u);
}

TEST(Client, RejectedCredentialIsNotRetried) {
  TempDir dir;
  FakeTransport t;
  t.fallback = HttpResponse{401, "unauthorized", ""};
  Client client(config_in(dir), t, no_sleep(), key());
  EXPECT_THROW(client.complete({binary_item(), PromptMode::marker, "test-model"}), AuthenticationError);
  EXPECT_EQ(t.calls(), 1u);
}

TEST(Client, PermanentErrorAndSchemaMismatch) {
  TempDir dir;
  FakeTransport t;
  t.script = {{400, "bad request", ""}, {200, R"({"object": "error"})", ""}};
  Client client(config_in(dir), t, no_sleep(), key());
  EXPECT_THROW(client.complete({binary_item(), PromptMode::marker, "test-model"}), EndpointError);
  EXPECT_THROW(client.complete({binary_item(), PromptMode::marker, "test-model"}), SchemaMismatchError);
  EXPECT_EQ(t.calls(), 2u);
}

TEST(Client, CacheHitSkipsTransportAndCredential) {
  TempDir dir;
  FakeTransport t;
  {
    Client first(config_in(dir), t, no_sleep(), key());
    EXPECT_EQ(first.complete({binary_item(), PromptMode::marker, "test-model"}), "yes, likely");
    EXPECT_EQ(first.network_calls(), 1u);
    EXPECT_EQ(first.cache_hits(), 0u);
  }
  Client second(config_in(dir), t, no_sleep(), [] { return std::optional<std::string>{}; });
  EXPECT_EQ(second.complete({binary_item(), PromptMode::marker, "test-model"}), "yes, likely");
  EXPECT_EQ(second.network_calls(), 0u);
  EXPECT_EQ(second.cache_hits(), 1u);
  EXPECT_EQ(t.calls(), 1u);
  // a different temperature is a different key
  EXPECT_THROW(second.complete({binary_item(), PromptMode::marker, "test-model", 0.7}), AuthenticationError);
}

TEST(Generate, PreservesOrderUnderConcurrency) {
  TempDir dir;
  FakeTransport t;
  auto cfg = config_in(dir);
  cfg.max_inflight = 4;
  Client client(cfg, t, no_sleep(), key());
  std::vector<QAItem> items;
  for (int i = 0; i < 40; ++i) {
    auto it = binary_item();
    it.item_id = std::to_string(i);
    it.question_text = "Q" + std::to_string(i);
    items.push_back(it);
  }
  const auto recs = generate_responses(items, PromptMode::marker, client);
  ASSERT_EQ(recs.size(), 40u);
  for (int i = 0; i < 40; ++i) {
    EXPECT_EQ(recs[static_cast<std::size_t>(i)].item.item_id, std::to_string(i));
    EXPECT_EQ(recs[static_cast<std::size_t>(i)].model_id, "test-model");
    EXPECT_FALSE(recs[static_cast<std::size_t>(i)].marker.has_value());
  }
  EXPECT_EQ(t.calls(), 40u);
}

TEST(Generate, PropagatesFailure) {
  TempDir dir;
  FakeTransport t;
  t.fallback = HttpResponse{401, "", ""};
  Client client(config_in(dir), t, no_sleep(), key());
  std::vector<QAItem> items(3, binary_item());
  EXPECT_THROW(generate_responses(items, PromptMode::marker, client), AuthenticationError);
}

}  // namespace
}  // namespace epimark::elicit
