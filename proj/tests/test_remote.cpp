// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The fastcurv Authors

#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "fastcurv/mock_server.hpp"
#include "fastcurv/prose.hpp"
#include "fastcurv/remote.hpp"

using namespace fastcurv;

namespace {

constexpr const char* kTokenEnv = "FASTCURV_TEST_TOKEN";

std::shared_ptr<const lm::NgramModel> small_model() {
  static const auto m =
      std::make_shared<const lm::NgramModel>(lm::train_on_text(prose::generate_documents({.seed = 2, .documents = 30})));
  return m;
}

RemoteBackendConfig config_for(const MockServer& server) {
  RemoteBackendConfig c;
  c.base_url = server.url();
  c.auth_env = "";
  c.model = "toy-lm";
  c.backoff_base_ms = 5;
  c.backoff_max_ms = 40;
  c.max_retries = 2;
  c.timeout_ms = 5000;
  return c;
}

std::vector<FixtureExchange> fixtures() {
  return load_fixtures(std::string(FASTCURV_FIXTURES_DIR) + "/remote_retry.fixture");
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no fastcurv::Error thrown";
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST(Fixtures, ParseScenarios) {
  const auto ex = fixtures();
  ASSERT_EQ(ex.size(), 5u);
  EXPECT_EQ(ex[0].responses.size(), 2u);
  EXPECT_EQ(ex[0].responses[0].status, 429);
  EXPECT_EQ(ex[0].responses[0].retry_after_s, 1);
  EXPECT_EQ(ex[0].responses[1].retry_after_s, -1);
}

TEST(Fixtures, RejectMalformedFiles) {
  EXPECT_THROW(parse_fixtures("< 200 {}\n"), Error);
  EXPECT_THROW(parse_fixtures("> [1]\n< 200 {}\n"), Error);
  EXPECT_THROW(parse_fixtures("> {}\n"), Error);
  EXPECT_THROW(parse_fixtures("> {}\n< 200 ratelimit=3 {}\n"), Error);
  EXPECT_THROW(parse_fixtures("hello\n"), Error);
}

TEST(RemoteClient, RetriesAfterRateLimitHonoringRetryAfter) {
  MockServer server(fixtures());
  server.start();
  RemoteClient client(config_for(server));
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = client.complete("slow down", {});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_EQ(res.attempts, 2);
  ASSERT_EQ(res.waits_ms.size(), 1u);
  EXPECT_EQ(res.waits_ms[0], 1000);  // Retry-After beats the 5 ms backoff
  EXPECT_GE(secs, 1.0);
  EXPECT_EQ(server.requests(), 2u);
  ASSERT_EQ(res.tokens.size(), 2u);
  EXPECT_FALSE(res.tokens[0].logprob.has_value());
  EXPECT_DOUBLE_EQ(*res.tokens[1].logprob, -0.5);
}

TEST(RemoteClient, MalformedBodyIsNotRetried) {
  MockServer server(fixtures());
  server.start();
  RemoteClient client(config_for(server));
  EXPECT_EQ(code_of([&] { client.complete("garbled", {}); }), ErrorCode::kFormatError);
  EXPECT_EQ(server.requests(), 1u);
}

TEST(RemoteClient, AuthFailureIsNotRetried) {
  MockServer server(fixtures());
  server.start();
  RemoteClient client(config_for(server));
  EXPECT_EQ(code_of([&] { client.complete("locked", {}); }), ErrorCode::kAuthError);
  EXPECT_EQ(server.requests(), 1u);
}

TEST(RemoteClient, ClientErrorIsNotRetried) {
  MockServer server(fixtures());
  server.start();
  RemoteClient client(config_for(server));
  EXPECT_EQ(code_of([&] { client.complete("bad", {}); }), ErrorCode::kBackendUnavailable);
  EXPECT_EQ(server.requests(), 1u);
}

TEST(RemoteClient, ServerErrorsExhaustRetries) {
  MockServer server(fixtures());
  server.start();
  RemoteClient client(config_for(server));
  EXPECT_EQ(code_of([&] { client.complete("down", {}); }), ErrorCode::kBackendUnavailable);
  EXPECT_EQ(server.requests(), 3u);
}

TEST(RemoteClient, ExponentialBackoffIsCapped) {
  MockServer server(fixtures());
  server.start();
  auto cfg = config_for(server);
  cfg.max_retries = 4;
  cfg.backoff_base_ms = 10;
  cfg.backoff_max_ms = 30;
  RemoteClient client(cfg);
  EXPECT_THROW(client.complete("down", {}), Error);
  EXPECT_EQ(server.requests(), 5u);
}

TEST(RemoteClient, UnreachableServerIsUnavailable) {
  RemoteBackendConfig cfg;
  cfg.base_url = "http://127.0.0.1:1";
  cfg.auth_env = "";
  cfg.max_retries = 1;
  cfg.backoff_base_ms = 1;
  cfg.backoff_max_ms = 1;
  RemoteClient client(cfg);
  const ErrorCode c = code_of([&] { client.complete("x", {}); });
  EXPECT_TRUE(c == ErrorCode::kBackendUnavailable || c == ErrorCode::kTimeout);
  EXPECT_EQ(client.requests_sent(), 2u);
}

TEST(RemoteClient, SlowServerTimesOut) {
  MockServer server({}, small_model());
  server.set_delay_ms(600);
  server.start();
  auto cfg = config_for(server);
  cfg.timeout_ms = 100;
  cfg.max_retries = 0;
  RemoteClient client(cfg);
  EXPECT_EQ(code_of([&] { client.complete("the", {}); }), ErrorCode::kTimeout);
}

TEST(RemoteClient, BearerTokenFromEnvironment) {
  ::setenv(kTokenEnv, "s3cret-value", 1);
  MockServer server({}, small_model(), std::string("s3cret-value"));
  server.start();
  auto cfg = config_for(server);
  cfg.auth_env = kTokenEnv;
  RemoteClient client(cfg);
  EXPECT_NO_THROW(client.complete("the old man", {}));

  ::setenv(kTokenEnv, "wrong-value", 1);
  try {
    client.complete("the old man", {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kAuthError);
    EXPECT_EQ(std::string(e.what()).find("wrong-value"), std::string::npos);
  }

  ::unsetenv(kTokenEnv);
  const std::uint64_t before = server.requests();
  EXPECT_EQ(code_of([&] { client.complete("the old man", {}); }), ErrorCode::kAuthError);
  EXPECT_EQ(server.requests(), before);
}

TEST(RemoteClient, ConcurrencyCapHolds) {
  MockServer server({}, small_model());
  server.set_delay_ms(80);
  server.start();
  auto cfg = config_for(server);
  cfg.max_concurrency = 2;
  RemoteClient client(cfg);
  {
    std::vector<std::jthread> threads;
    for (int t = 0; t < 6; ++t) threads.emplace_back([&] { client.complete("the old man", {}); });
  }
  EXPECT_EQ(server.requests(), 6u);
  EXPECT_LE(server.max_in_flight(), 2);
  EXPECT_GE(server.max_in_flight(), 1);
}

TEST(RemoteConfig, JsonRoundTripAndValidation) {
  const auto demo = nlohmann::json::parse(read_file_bytes(std::string(FASTCURV_FIXTURES_DIR) + "/remote_demo.json"));
  const auto cfg = RemoteBackendConfig::from_json(demo);
  EXPECT_EQ(cfg.top_logprobs, 5u);
  EXPECT_EQ(cfg.policy, TruncationPolicy::kSpreadUniform);
  EXPECT_EQ(RemoteBackendConfig::from_json(cfg.to_json()).to_json(), cfg.to_json());
  EXPECT_THROW(RemoteBackendConfig::from_json({{"model", "x"}}), Error);
  EXPECT_THROW(RemoteBackendConfig::from_json({{"base_url", "http://x"}, {"max_concurrency", 0}}), Error);
  EXPECT_THROW(RemoteBackendConfig::from_json({{"base_url", "http://x"}, {"policy", "zero"}}), Error);
  EXPECT_THROW(RemoteBackendConfig::from_json({{"base_url", "https://x"}}), Error);
}

TEST(RemoteBackend, RowsRebuiltFromTopK) {
  const auto model = small_model();
  MockServer server({}, model);
  server.start();
  auto cfg = config_for(server);
  RemoteBackend backend(cfg, model->vocab(), "remote-test");
  const Passage p = lm::tokenize("the old man walked to the river and sat down .", model->vocab());
  const auto d = backend.score_passage(p);
  EXPECT_EQ(backend.calls(), 1u);
  EXPECT_EQ(backend.filled_rows(), 1u);
  ASSERT_EQ(d->length(), p.size());
  const std::size_t V = model->vocab_size();
  for (std::size_t v = 0; v < V; ++v) EXPECT_NEAR(d->row(0)[v], -std::log(static_cast<double>(V)), 1e-12);
  const auto local = lm::predict_dists(*model, p);
  for (std::size_t j = 1; j < p.size(); ++j) {
    std::vector<std::size_t> order(V);
    for (std::size_t v = 0; v < V; ++v) order[v] = v;
    const auto row = local.row(j);
    std::partial_sort(order.begin(), order.begin() + 5, order.end(),
                      [&](std::size_t a, std::size_t b) { return row[a] > row[b] || (row[a] == row[b] && a < b); });
    double top_mass = 0.0;
    for (int i = 0; i < 5; ++i) {
      EXPECT_NEAR(d->row(j)[order[static_cast<std::size_t>(i)]], row[order[static_cast<std::size_t>(i)]], 1e-9);
      top_mass += std::exp(row[order[static_cast<std::size_t>(i)]]);
    }
    const double fill = std::log((1.0 - top_mass) / static_cast<double>(V - 5));
    EXPECT_NEAR(d->row(j)[order[5]], fill, 1e-9);
  }
  EXPECT_TRUE(backend.capabilities().top_k_only.has_value());
}

TEST(RemoteBackend, FloorPolicyNeedsPassageTokenInTopK) {
  const auto model = small_model();
  MockServer server({}, model);
  server.start();
  auto cfg = config_for(server);
  cfg.policy = TruncationPolicy::kFloor;
  cfg.top_logprobs = 1;
  RemoteBackend backend(cfg, model->vocab());
  const Passage p = lm::tokenize(". . the the river river", model->vocab());
  EXPECT_EQ(code_of([&] { backend.score_passage(p); }), ErrorCode::kTokenNotInTopK);
}

TEST(RemoteBackend, GenerationIsSeeded) {
  const auto model = small_model();
  MockServer server({}, model);
  server.start();
  RemoteBackend backend(config_for(server), model->vocab());
  const Passage prefix = lm::tokenize("the old man", model->vocab());
  const auto a = backend.generate(prefix, 12, lm::DecodingConfig::with_top_p(0.9, 4));
  const auto b = backend.generate(prefix, 12, lm::DecodingConfig::with_top_p(0.9, 4));
  EXPECT_EQ(a.token_ids, b.token_ids);
  EXPECT_EQ(a.size(), prefix.size() + 12);
  EXPECT_EQ(a.token_ids, lm::generate(*model, prefix, 12, lm::DecodingConfig::with_top_p(0.9, 4)).token_ids);
  EXPECT_EQ(backend.calls(), 0u);
}

TEST(RemoteBackend, VocabularyDisagreementDetected) {
  const auto model = small_model();
  MockServer server({}, model);
  server.start();
  // The service does not know "zyzzyva" and echoes "<unk>" in its place.
  RemoteBackend backend(config_for(server), Vocab({"<unk>", "the", "river", "zyzzyva"}));
  EXPECT_NO_THROW(backend.score_passage(lm::make_passage({1, 2}, backend.vocab())));
  EXPECT_EQ(code_of([&] { backend.score_passage(lm::make_passage({1, 3}, backend.vocab())); }), ErrorCode::kVocabMismatch);
}
