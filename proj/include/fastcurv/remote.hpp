// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The fastcurv Authors

#pragma once

// Client for completion services that return per-token log-probabilities
// (the widely used "completions with logprobs" JSON shape), and a scoring
// backend built on it.
//
// Request:  POST {model, prompt, max_tokens, temperature, logprobs: K, echo}
// Response: {"choices": [{"text": ..., "logprobs": {"tokens": [...],
//            "token_logprobs": [...], "top_logprobs": [{tok: lp, ...}, ...]}}]}
//
// The bearer token is read from a named environment variable at request
// time and is never included in errors or logs.

#include <httplib.h>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "fastcurv/backends.hpp"
#include "fastcurv/distributions.hpp"
#include "fastcurv/error.hpp"
#include "fastcurv/lm.hpp"

namespace fastcurv {

struct RemoteBackendConfig {
  std::string base_url;                     // scheme://host[:port]
  std::string path = "/v1/completions";
  std::string auth_env = "FASTCURV_API_KEY";  // empty: no Authorization header
  std::string model;
  std::size_t top_logprobs = 5;
  long timeout_ms = 30'000;
  int max_retries = 3;
  int max_concurrency = 4;
  long backoff_base_ms = 250;
  long backoff_max_ms = 8'000;
  TruncationPolicy policy = TruncationPolicy::kSpreadUniform;

  void check() const {
    if (base_url.empty()) throw Error(ErrorCode::kInvalidArgument, "remote backend needs base_url");
    // Built without TLS.
    if (base_url.rfind("http://", 0) != 0) throw Error(ErrorCode::kInvalidArgument, "base_url must start with http://");
    if (top_logprobs < 1) throw Error(ErrorCode::kInvalidArgument, "top_logprobs must be >= 1");
    if (timeout_ms <= 0) throw Error(ErrorCode::kInvalidArgument, "timeout_ms must be > 0");
    if (max_retries < 0) throw Error(ErrorCode::kInvalidArgument, "max_retries must be >= 0");
    if (max_concurrency < 1) throw Error(ErrorCode::kInvalidArgument, "max_concurrency must be >= 1");
    if (backoff_base_ms < 0 || backoff_max_ms < backoff_base_ms) {
      throw Error(ErrorCode::kInvalidArgument, "bad backoff bounds");
    }
  }

  static RemoteBackendConfig from_json(const nlohmann::json& j) {
    RemoteBackendConfig c;
    try {
      c.base_url = j.at("base_url").get<std::string>();
      c.path = j.value("path", c.path);
      c.auth_env = j.value("auth_env", c.auth_env);
      c.model = j.value("model", c.model);
      c.top_logprobs = j.value("top_logprobs", c.top_logprobs);
      c.timeout_ms = j.value("timeout_ms", c.timeout_ms);
      c.max_retries = j.value("max_retries", c.max_retries);
      c.max_concurrency = j.value("max_concurrency", c.max_concurrency);
      c.backoff_base_ms = j.value("backoff_base_ms", c.backoff_base_ms);
      c.backoff_max_ms = j.value("backoff_max_ms", c.backoff_max_ms);
      if (j.contains("policy")) c.policy = parse_truncation_policy(j.at("policy").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kInvalidArgument, std::string("remote config: ") + e.what());
    }
    c.check();
    return c;
  }

  nlohmann::json to_json() const {
    return {{"base_url", base_url},         {"path", path},
            {"auth_env", auth_env},         {"model", model},
            {"top_logprobs", top_logprobs}, {"timeout_ms", timeout_ms},
            {"max_retries", max_retries},   {"max_concurrency", max_concurrency},
            {"backoff_base_ms", backoff_base_ms}, {"backoff_max_ms", backoff_max_ms},
            {"policy", std::string(to_string(policy))}};
  }
};

struct CompletionParams {
  std::size_t max_tokens = 0;
  double temperature = 1.0;
  std::optional<double> top_p;
  bool echo = true;
  std::optional<std::uint64_t> seed;  // honored by services that support it
};

struct TokenLogprob {
  std::string token;
  std::optional<double> logprob;  // null for the first echoed token
  std::optional<std::vector<std::pair<std::string, double>>> top;
};

struct CompletionResult {
  std::string text;
  std::vector<TokenLogprob> tokens;
  int attempts = 0;
  std::vector<long> waits_ms;  // backoff before each retry
};

namespace detail {

inline std::string trim_token(std::string_view s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\n' || s[a] == '\t')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\n' || s[b - 1] == '\t')) --b;
  return std::string(s.substr(a, b - a));
}

inline long parse_retry_after_ms(const httplib::Result& res) {
  if (!res || !res->has_header("Retry-After")) return 0;
  try {
    const double secs = std::stod(res->get_header_value("Retry-After"));
    return secs > 0 ? static_cast<long>(std::ceil(secs * 1000.0)) : 0;
  } catch (const std::exception&) {
    return 0;
  }
}

inline CompletionResult parse_completion(const std::string& body) {
  CompletionResult out;
  try {
    const auto j = nlohmann::json::parse(body);
    const auto& choice = j.at("choices").at(0);
    out.text = choice.value("text", std::string());
    const auto& lp = choice.at("logprobs");
    const auto& tokens = lp.at("tokens");
    const auto& token_lps = lp.at("token_logprobs");
    const auto& tops = lp.at("top_logprobs");
    if (!tokens.is_array() || !token_lps.is_array() || !tops.is_array() || tokens.size() != token_lps.size() ||
        tokens.size() != tops.size()) {
      throw Error(ErrorCode::kFormatError, "logprobs arrays missing or of unequal length");
    }
    out.tokens.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      TokenLogprob t;
      t.token = tokens[i].get<std::string>();
      if (!token_lps[i].is_null()) t.logprob = token_lps[i].get<double>();
      if (!tops[i].is_null()) {
        if (!tops[i].is_object()) throw Error(ErrorCode::kFormatError, "top_logprobs entry is not an object");
        std::vector<std::pair<std::string, double>> top;
        for (const auto& [k, v] : tops[i].items()) top.emplace_back(k, v.get<double>());
        t.top = std::move(top);
      }
      out.tokens.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormatError, std::string("malformed completion response: ") + e.what());
  }
  return out;
}

}  // namespace detail

/// HTTP client with retries and an in-flight cap. Shareable across threads.
class RemoteClient {
 public:
  explicit RemoteClient(RemoteBackendConfig config)
      : config_((config.check(), std::move(config))),
        slots_(std::make_unique<std::counting_semaphore<>>(config_.max_concurrency)) {}

  const RemoteBackendConfig& config() const noexcept { return config_; }
  std::uint64_t requests_sent() const noexcept { return sent_.load(); }

  CompletionResult complete(std::string_view prompt, const CompletionParams& params) {
    nlohmann::json req = {{"model", config_.model},          {"prompt", std::string(prompt)},
                          {"max_tokens", params.max_tokens}, {"temperature", params.temperature},
                          {"logprobs", config_.top_logprobs}, {"echo", params.echo}};
    if (params.top_p) req["top_p"] = *params.top_p;
    if (params.seed) req["seed"] = *params.seed;
    const std::string body = req.dump();

    httplib::Headers headers;
    if (!config_.auth_env.empty()) {
      const char* token = std::getenv(config_.auth_env.c_str());
      if (token == nullptr || *token == '\0') {
        throw Error(ErrorCode::kAuthError, "environment variable " + config_.auth_env + " is not set");
      }
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }

    std::vector<long> waits;
    for (int attempt = 0;; ++attempt) {
      const long backoff = std::min(config_.backoff_max_ms, config_.backoff_base_ms << std::min(attempt, 20));
      enum class Outcome { kTimeout, kUnavailable, kRateLimited } outcome;
      long retry_after = 0;
      std::string detail;
      {
        slots_->acquire();
        struct Release {
          std::counting_semaphore<>* s;
          ~Release() { s->release(); }
        } release{slots_.get()};

        httplib::Client cli(config_.base_url);
        const auto timeout = std::chrono::milliseconds(config_.timeout_ms);
        cli.set_connection_timeout(timeout);
        cli.set_read_timeout(timeout);
        cli.set_write_timeout(timeout);
        sent_.fetch_add(1);
        const auto res = cli.Post(config_.path, headers, body, "application/json");

        if (!res) {
          const auto err = res.error();
          outcome = (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) ? Outcome::kTimeout
                                                                                              : Outcome::kUnavailable;
          detail = httplib::to_string(err);
        } else if (res->status == 200) {
          CompletionResult out = detail::parse_completion(res->body);
          out.attempts = attempt + 1;
          out.waits_ms = std::move(waits);
          return out;
        } else if (res->status == 401 || res->status == 403) {
          throw Error(ErrorCode::kAuthError, "server rejected credentials (HTTP " + std::to_string(res->status) + ")");
        } else if (res->status == 429) {
          outcome = Outcome::kRateLimited;
          retry_after = detail::parse_retry_after_ms(res);
          detail = "HTTP 429";
        } else if (res->status >= 500) {
          outcome = Outcome::kUnavailable;
          detail = "HTTP " + std::to_string(res->status);
        } else {
          throw Error(ErrorCode::kBackendUnavailable, "request rejected (HTTP " + std::to_string(res->status) + ")");
        }
      }

      if (attempt >= config_.max_retries) {
        const std::string tries = " after " + std::to_string(attempt + 1) + " attempts";
        switch (outcome) {
          case Outcome::kTimeout: throw Error(ErrorCode::kTimeout, detail + tries);
          case Outcome::kRateLimited: throw RateLimitedError("rate limited" + tries, retry_after);
          case Outcome::kUnavailable: throw Error(ErrorCode::kBackendUnavailable, detail + tries);
        }
      }
      const long wait = std::max(backoff, retry_after);
      waits.push_back(wait);
      std::this_thread::sleep_for(std::chrono::milliseconds(wait));
    }
  }

 private:
  RemoteBackendConfig config_;
  std::unique_ptr<std::counting_semaphore<>> slots_;
  std::atomic<std::uint64_t> sent_{0};
};

/// One-shot helper.
inline CompletionResult remote_complete(const RemoteBackendConfig& config, std::string_view prompt,
                                        const CompletionParams& params) {
  RemoteClient client(config);
  return client.complete(prompt, params);
}

/// Scores passages by echoing them through a completion service. Rows are
/// rebuilt from the top-K lists; see TruncationPolicy. A missing first row
/// (no context for the first token) is filled with the uniform
/// distribution and counted in filled_rows().
class RemoteBackend final : public ScoringBackend {
 public:
  RemoteBackend(RemoteBackendConfig config, Vocab vocab, std::string id = "")
      : client_(std::move(config)), vocab_(std::move(vocab)), id_(id.empty() ? "remote:" + client_.config().model : id) {}

  std::string id() const override { return id_; }
  const Vocab& vocab() const override { return vocab_; }
  Capabilities capabilities() const override {
    return {.full_distribution = false, .top_k_only = client_.config().top_logprobs, .can_generate = true};
  }

  DistributionsPtr score_passage(const Passage& passage) override {
    check_compatible(passage);
    const std::string text = lm::detokenize(passage, vocab_);
    const CompletionResult res = client_.complete(text, {.max_tokens = 0, .temperature = 1.0, .echo = true});
    if (res.tokens.size() != passage.size()) {
      throw Error(ErrorCode::kVocabMismatch, "service tokenized the passage into " + std::to_string(res.tokens.size()) +
                                                 " tokens, expected " + std::to_string(passage.size()));
    }
    TruncatedDistributions trunc;
    trunc.vocab_size = vocab_.size();
    trunc.rows.resize(passage.size());
    for (std::size_t j = 0; j < passage.size(); ++j) {
      const TokenLogprob& t = res.tokens[j];
      if (detail::trim_token(t.token) != vocab_.token(passage.token_ids[j])) {
        throw Error(ErrorCode::kVocabMismatch, "service token '" + t.token + "' does not match passage", {.row = j});
      }
      TruncatedRow& row = trunc.rows[j];
      if (!t.top) {
        if (j != 0) throw Error(ErrorCode::kFormatError, "missing top_logprobs", {.row = j});
        const double u = -std::log(static_cast<double>(vocab_.size()));
        for (TokenId v = 0; v < vocab_.size(); ++v) row.top.emplace_back(v, u);
        filled_rows_.fetch_add(1);
        continue;
      }
      CompensatedSum mass;
      bool has_passage_token = false;
      for (const auto& [tok, lp] : *t.top) {
        const auto id = vocab_.find(detail::trim_token(tok));
        if (!id) continue;  // outside our vocabulary: left in the residual
        if (std::isnan(lp) || lp > kPositiveSlack) throw Error(ErrorCode::kFormatError, "bad log-prob", {.row = j});
        row.top.emplace_back(*id, std::min(lp, 0.0));
        mass.add(std::exp(std::min(lp, 0.0)));
        has_passage_token = has_passage_token || *id == passage.token_ids[j];
      }
      if (mass.value() > 1.0 + kTruncatedMassTolerance) {
        throw Error(ErrorCode::kFormatError, "top-K probabilities exceed one", {.row = j});
      }
      row.residual = std::max(0.0, 1.0 - mass.value());
      if (!has_passage_token && client_.config().policy == TruncationPolicy::kFloor) {
        throw Error(ErrorCode::kTokenNotInTopK, "passage token absent from top-K list", {.row = j});
      }
    }
    auto dists = std::make_shared<const PredictiveDistributions>(expand_truncated(trunc, client_.config().policy));
    return finish_call(passage, std::move(dists));
  }

  Passage generate(const Passage& prefix, std::size_t length, const lm::DecodingConfig& dec) override {
    if (prefix.token_ids.empty()) throw Error(ErrorCode::kInvalidArgument, "generation prefix must be non-empty");
    CompletionParams params{.max_tokens = length, .temperature = dec.temperature.value_or(1.0), .top_p = dec.top_p,
                            .echo = false, .seed = dec.seed};
    const CompletionResult res = client_.complete(lm::detokenize(prefix, vocab_), params);
    std::vector<TokenId> ids = prefix.token_ids;
    for (const auto& t : res.tokens) ids.push_back(vocab_.find(detail::trim_token(t.token)).value_or(lm::kUnkId));
    Passage out = lm::make_passage(std::move(ids), vocab_, Label::kMachine);
    out.meta["decoding"] = dec.describe();
    out.meta["source"] = id_;
    out.meta["prefix_tokens"] = std::to_string(prefix.size());
    return out;
  }

  std::uint64_t filled_rows() const noexcept { return filled_rows_.load(); }
  const RemoteClient& client() const noexcept { return client_; }

 private:
  RemoteClient client_;
  Vocab vocab_;
  std::string id_;
  std::atomic<std::uint64_t> filled_rows_{0};
};

}  // namespace fastcurv
