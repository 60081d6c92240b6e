// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The fastcurv Authors

#pragma once

// A local stand-in for a completion service, used by tests and demos.
//
// Fixture files are line oriented:
//
//   # comment
//   > {"prompt": "the cat sat ."}          request matcher (JSON subset)
//   < 429 retry-after=1 {"error": "slow"}  responses, served in order;
//   < 200 {"choices": [...]}               the last one repeats
//
// A request is answered by the first exchange whose matcher fields all
// equal the request's fields. With a model attached, unmatched requests
// are answered from the model; otherwise they get 404.

#include <httplib.h>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "fastcurv/error.hpp"
#include "fastcurv/lm.hpp"

namespace fastcurv {

struct FixtureResponse {
  int status = 200;
  long retry_after_s = -1;  // -1: no header
  std::string body;
};

struct FixtureExchange {
  nlohmann::json matcher;
  std::vector<FixtureResponse> responses;
};

inline std::vector<FixtureExchange> parse_fixtures(std::string_view text) {
  std::vector<FixtureExchange> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto where = " (fixture line " + std::to_string(lineno) + ")";
    if (line.rfind("> ", 0) == 0) {
      FixtureExchange ex;
      try {
        ex.matcher = nlohmann::json::parse(line.substr(2));
      } catch (const nlohmann::json::exception&) {
        throw Error(ErrorCode::kFormatError, "bad matcher JSON" + where);
      }
      if (!ex.matcher.is_object()) throw Error(ErrorCode::kFormatError, "matcher must be an object" + where);
      out.push_back(std::move(ex));
    } else if (line.rfind("< ", 0) == 0) {
      if (out.empty()) throw Error(ErrorCode::kFormatError, "response before any request" + where);
      std::istringstream ls(line.substr(2));
      FixtureResponse r;
      if (!(ls >> r.status)) throw Error(ErrorCode::kFormatError, "missing status" + where);
      ls >> std::ws;
      if (ls.peek() == 'r') {
        std::string kv;
        ls >> kv;
        if (kv.rfind("retry-after=", 0) != 0) throw Error(ErrorCode::kFormatError, "unknown option " + kv + where);
        r.retry_after_s = std::stol(kv.substr(12));
        ls >> std::ws;
      }
      std::getline(ls, r.body);
      out.back().responses.push_back(std::move(r));
    } else {
      throw Error(ErrorCode::kFormatError, "line must start with '>' or '<'" + where);
    }
  }
  for (const auto& ex : out) {
    if (ex.responses.empty()) throw Error(ErrorCode::kFormatError, "request without responses: " + ex.matcher.dump());
  }
  return out;
}

inline std::vector<FixtureExchange> load_fixtures(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_fixtures(ss.str());
}

/// Completion response computed from the n-gram model: echoed prompt
/// tokens with top-K lists (first entry null), then max_tokens sampled
/// tokens. Sampling uses request field "seed" (default 0).
inline nlohmann::json model_completion(const lm::NgramModel& model, const nlohmann::json& req) {
  const std::string prompt = req.value("prompt", std::string());
  const std::size_t max_tokens = req.value("max_tokens", std::size_t{0});
  const std::size_t k = std::max<std::size_t>(1, req.value("logprobs", std::size_t{5}));
  const bool echo = req.value("echo", false);
  lm::DecodingConfig dec;
  dec.seed = req.value("seed", std::uint64_t{0});
  if (req.contains("temperature") && req["temperature"].get<double>() != 1.0) dec.temperature = req["temperature"].get<double>();
  if (req.contains("top_p")) dec.top_p = req["top_p"].get<double>();

  const Passage p = lm::tokenize(prompt, model.vocab());
  std::vector<TokenId> ids = p.token_ids;
  std::size_t first_out = echo ? 0 : ids.size();
  if (max_tokens > 0) {
    Passage gen = lm::generate(model, p, max_tokens, dec);
    ids = std::move(gen.token_ids);
  }

  nlohmann::json tokens = nlohmann::json::array();
  nlohmann::json token_lps = nlohmann::json::array();
  nlohmann::json tops = nlohmann::json::array();
  std::vector<double> row(model.vocab_size());
  std::vector<TokenId> order(model.vocab_size());
  std::string text;
  for (std::size_t j = first_out; j < ids.size(); ++j) {
    const std::string& tok = model.vocab().token(ids[j]);
    tokens.push_back(tok);
    if (!text.empty()) text.push_back(' ');
    text += tok;
    if (j == 0) {
      token_lps.push_back(nullptr);
      tops.push_back(nullptr);
      continue;
    }
    model.next_token_logprobs(std::span<const TokenId>(ids).subspan(0, j), row);
    token_lps.push_back(row[ids[j]]);
    for (std::size_t v = 0; v < order.size(); ++v) order[v] = static_cast<TokenId>(v);
    const std::size_t kk = std::min(k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(kk), order.end(),
                      [&](TokenId a, TokenId b) { return row[a] > row[b] || (row[a] == row[b] && a < b); });
    nlohmann::json top = nlohmann::json::object();
    for (std::size_t i = 0; i < kk; ++i) top[model.vocab().token(order[i])] = row[order[i]];
    tops.push_back(std::move(top));
  }
  return {{"object", "text_completion"},
          {"model", req.value("model", std::string("toy-lm"))},
          {"choices",
           {{{"index", 0},
             {"text", text},
             {"finish_reason", "length"},
             {"logprobs", {{"tokens", tokens}, {"token_logprobs", token_lps}, {"top_logprobs", tops}}}}}}};
}

class MockServer {
 public:
  MockServer(std::vector<FixtureExchange> fixtures, std::shared_ptr<const lm::NgramModel> model = nullptr,
             std::optional<std::string> expected_token = std::nullopt, std::string path = "/v1/completions")
      : fixtures_(std::move(fixtures)),
        served_(fixtures_.size(), 0),
        model_(std::move(model)),
        expected_token_(std::move(expected_token)) {
    server_.Post(path, [this](const httplib::Request& req, httplib::Response& res) { handle(req, res); });
  }

  ~MockServer() { stop(); }
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  /// Binds to an ephemeral port on host and serves in a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0) {
    port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (port_ < 0) throw Error(ErrorCode::kBackendUnavailable, "mock server cannot bind " + host);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  /// Blocks serving on the calling thread.
  void run(const std::string& host, int port) {
    if (!server_.listen(host, port)) throw Error(ErrorCode::kBackendUnavailable, "mock server cannot listen");
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const noexcept { return port_; }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  std::uint64_t requests() const noexcept { return requests_.load(); }
  int max_in_flight() const noexcept { return max_in_flight_.load(); }

  /// Artificial per-request latency, for exercising timeouts and caps.
  void set_delay_ms(long ms) { delay_ms_ = ms; }

 private:
  void handle(const httplib::Request& req, httplib::Response& res) {
    requests_.fetch_add(1);
    const int now = in_flight_.fetch_add(1) + 1;
    int prev = max_in_flight_.load();
    while (now > prev && !max_in_flight_.compare_exchange_weak(prev, now)) {
    }
    struct Leave {
      std::atomic<int>& n;
      ~Leave() { n.fetch_sub(1); }
    } leave{in_flight_};
    if (delay_ms_ > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms_));

    if (expected_token_ && req.get_header_value("Authorization") != "Bearer " + *expected_token_) {
      res.status = 401;
      res.set_content(R"({"error":"unauthorized"})", "application/json");
      return;
    }
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception&) {
      res.status = 400;
      res.set_content(R"({"error":"bad json"})", "application/json");
      return;
    }
    {
      std::lock_guard lock(mu_);
      for (std::size_t i = 0; i < fixtures_.size(); ++i) {
        if (!matches(fixtures_[i].matcher, body)) continue;
        const auto& rs = fixtures_[i].responses;
        const FixtureResponse& r = rs[std::min(served_[i], rs.size() - 1)];
        ++served_[i];
        res.status = r.status;
        if (r.retry_after_s >= 0) res.set_header("Retry-After", std::to_string(r.retry_after_s));
        res.set_content(r.body, "application/json");
        return;
      }
    }
    if (model_) {
      try {
        res.set_content(model_completion(*model_, body).dump(), "application/json");
      } catch (const std::exception& e) {
        res.status = 400;
        res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
      }
      return;
    }
    res.status = 404;
    res.set_content(R"({"error":"no fixture matches"})", "application/json");
  }

  static bool matches(const nlohmann::json& matcher, const nlohmann::json& body) {
    if (!body.is_object()) return false;
    for (const auto& [k, v] : matcher.items()) {
      if (!body.contains(k) || body[k] != v) return false;
    }
    return true;
  }

  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
  std::mutex mu_;
  std::vector<FixtureExchange> fixtures_;
  std::vector<std::size_t> served_;
  std::shared_ptr<const lm::NgramModel> model_;
  std::optional<std::string> expected_token_;
  std::atomic<std::uint64_t> requests_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
  long delay_ms_ = 0;
};

}  // namespace fastcurv
