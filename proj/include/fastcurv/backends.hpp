// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The fastcurv Authors

#pragma once

// Scoring backends: anything that turns a passage into per-position
// predictive distributions. Every backend counts its logical passes so that
// detectors can be compared by model calls as well as wall-clock.

#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fastcurv/distributions.hpp"
#include "fastcurv/error.hpp"
#include "fastcurv/lm.hpp"
#include "fastcurv/logits_file.hpp"

namespace fastcurv {

struct Capabilities {
  bool full_distribution = true;
  std::optional<std::size_t> top_k_only;  // set when rows come from top-K lists
  bool can_generate = false;
};

class ScoringBackend {
 public:
  virtual ~ScoringBackend() = default;

  virtual std::string id() const = 0;
  virtual const Vocab& vocab() const = 0;
  virtual Capabilities capabilities() const = 0;
  std::size_t vocab_size() const { return vocab().size(); }

  /// One logical pass over the passage. Output always passes validate().
  virtual DistributionsPtr score_passage(const Passage& passage) = 0;

  /// Continues `prefix` by `length` tokens. Does not count as a scoring call.
  virtual Passage generate(const Passage& /*prefix*/, std::size_t /*length*/, const lm::DecodingConfig& /*dec*/) {
    throw Error(ErrorCode::kUnsupported, "backend '" + id() + "' cannot generate");
  }

  /// Number of scoring passes performed so far.
  virtual std::uint64_t calls() const noexcept { return calls_.load(std::memory_order_relaxed); }

 protected:
  void check_compatible(const Passage& passage) const {
    if (passage.token_ids.empty()) throw Error(ErrorCode::kEmptyInput, "cannot score an empty passage");
    const std::size_t V = vocab_size();
    for (std::size_t j = 0; j < passage.size(); ++j) {
      if (passage.token_ids[j] >= V) {
        throw Error(ErrorCode::kVocabMismatch,
                    "token id " + std::to_string(passage.token_ids[j]) + " outside backend vocabulary", {.row = j});
      }
    }
  }

  /// Validates shape and rows, then counts the call.
  DistributionsPtr finish_call(const Passage& passage, DistributionsPtr dists) {
    if (dists->length() != passage.size() || dists->vocab_size() != vocab_size()) {
      throw Error(ErrorCode::kLengthMismatch, "backend '" + id() + "' returned distributions of the wrong shape");
    }
    validate(*dists);
    calls_.fetch_add(1, std::memory_order_relaxed);
    return dists;
  }

 private:
  std::atomic<std::uint64_t> calls_{0};
};

using BackendPtr = std::shared_ptr<ScoringBackend>;

// ---------------------------------------------------------------------------

/// The bundled n-gram model as a backend.
class LocalModelBackend final : public ScoringBackend {
 public:
  explicit LocalModelBackend(std::shared_ptr<const lm::NgramModel> model, std::string id = "toy-lm")
      : model_(std::move(model)), id_(std::move(id)) {
    if (!model_) throw Error(ErrorCode::kInvalidArgument, "null model");
  }

  std::string id() const override { return id_; }
  const Vocab& vocab() const override { return model_->vocab(); }
  Capabilities capabilities() const override { return {.full_distribution = true, .can_generate = true}; }

  DistributionsPtr score_passage(const Passage& passage) override {
    check_compatible(passage);
    return finish_call(passage, std::make_shared<const PredictiveDistributions>(lm::predict_dists(*model_, passage)));
  }

  Passage generate(const Passage& prefix, std::size_t length, const lm::DecodingConfig& dec) override {
    Passage out = lm::generate(*model_, prefix, length, dec);
    out.meta["source"] = id_;
    return out;
  }

  const lm::NgramModel& model() const noexcept { return *model_; }
  std::shared_ptr<const lm::NgramModel> model_ptr() const noexcept { return model_; }

 private:
  std::shared_ptr<const lm::NgramModel> model_;
  std::string id_;
};

// ---------------------------------------------------------------------------

/// Thread-safe store keyed by (backend id, passage hash). Shared between
/// CachingBackend instances when several views wrap one model.
class DistributionCache {
 public:
  std::optional<DistributionsPtr> find(const std::string& backend, const Passage& passage) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find({backend, passage_hash(passage.token_ids)});
    if (it == entries_.end() || it->second.ids != passage.token_ids) return std::nullopt;
    return it->second.dists;
  }
  void put(const std::string& backend, const Passage& passage, DistributionsPtr dists) {
    std::lock_guard lock(mu_);
    entries_[{backend, passage_hash(passage.token_ids)}] = Entry{passage.token_ids, std::move(dists)};
  }
  std::size_t size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
  }

 private:
  struct Entry {
    std::vector<TokenId> ids;
    DistributionsPtr dists;
  };
  mutable std::mutex mu_;
  std::map<std::pair<std::string, std::uint64_t>, Entry> entries_;
};

/// Scores each passage once; repeats return the stored pointer. calls()
/// counts only the passes forwarded to the wrapped backend.
class CachingBackend final : public ScoringBackend {
 public:
  explicit CachingBackend(BackendPtr inner, std::shared_ptr<DistributionCache> cache = nullptr)
      : inner_(std::move(inner)), cache_(cache ? std::move(cache) : std::make_shared<DistributionCache>()) {
    if (!inner_) throw Error(ErrorCode::kInvalidArgument, "null backend");
  }

  std::string id() const override { return inner_->id(); }
  const Vocab& vocab() const override { return inner_->vocab(); }
  Capabilities capabilities() const override { return inner_->capabilities(); }

  DistributionsPtr score_passage(const Passage& passage) override {
    if (auto hit = cache_->find(inner_->id(), passage)) return *hit;
    auto dists = inner_->score_passage(passage);
    misses_.fetch_add(1, std::memory_order_relaxed);
    cache_->put(inner_->id(), passage, dists);
    return dists;
  }

  Passage generate(const Passage& prefix, std::size_t length, const lm::DecodingConfig& dec) override {
    return inner_->generate(prefix, length, dec);
  }

  std::uint64_t calls() const noexcept override { return misses_.load(std::memory_order_relaxed); }
  const DistributionCache& cache() const noexcept { return *cache_; }

 private:
  BackendPtr inner_;
  std::shared_ptr<DistributionCache> cache_;
  std::atomic<std::uint64_t> misses_{0};
};

// ---------------------------------------------------------------------------

inline std::string logits_file_name(const Passage& passage) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx.clgt", static_cast<unsigned long long>(passage_hash(passage.token_ids)));
  return buf;
}

/// Writes every scored passage into a directory of logits files, one per
/// passage, named by passage hash.
class RecordingBackend final : public ScoringBackend {
 public:
  RecordingBackend(BackendPtr inner, std::filesystem::path dir) : inner_(std::move(inner)), dir_(std::move(dir)) {
    if (!inner_) throw Error(ErrorCode::kInvalidArgument, "null backend");
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw Error(ErrorCode::kIoError, "cannot create " + dir_.string() + ": " + ec.message());
  }

  std::string id() const override { return inner_->id(); }
  const Vocab& vocab() const override { return inner_->vocab(); }
  Capabilities capabilities() const override { return inner_->capabilities(); }

  DistributionsPtr score_passage(const Passage& passage) override {
    auto dists = inner_->score_passage(passage);
    write_logits_file((dir_ / logits_file_name(passage)).string(), vocab(), passage, *dists);
    return dists;
  }

  Passage generate(const Passage& prefix, std::size_t length, const lm::DecodingConfig& dec) override {
    return inner_->generate(prefix, length, dec);
  }

  std::uint64_t calls() const noexcept override { return inner_->calls(); }

 private:
  BackendPtr inner_;
  std::filesystem::path dir_;
};

/// Serves distributions from logits files: either one file, or a directory
/// written by RecordingBackend.
class LogitsStoreBackend final : public ScoringBackend {
 public:
  explicit LogitsStoreBackend(std::filesystem::path path, std::string id = "logits") : path_(std::move(path)), id_(std::move(id)) {
    if (std::filesystem::is_directory(path_)) {
      for (const auto& entry : std::filesystem::directory_iterator(path_)) {
        if (entry.path().extension() == ".clgt") {
          vocab_ = read_logits_file(entry.path().string()).vocab;
          found_vocab_ = true;
          break;
        }
      }
      if (!found_vocab_) throw Error(ErrorCode::kBackendUnavailable, "no logits files in " + path_.string());
    } else {
      single_ = read_logits_file(path_.string());
      vocab_ = single_->vocab;
      found_vocab_ = true;
    }
  }

  std::string id() const override { return id_; }
  const Vocab& vocab() const override { return vocab_; }
  Capabilities capabilities() const override { return {.full_distribution = true}; }

  DistributionsPtr score_passage(const Passage& passage) override {
    check_compatible(passage);
    LogitsRecord rec = single_ ? *single_ : load(passage);
    if (rec.vocab != vocab_) throw Error(ErrorCode::kVocabMismatch, "logits files disagree on vocabulary");
    if (rec.passage.token_ids != passage.token_ids) {
      throw Error(ErrorCode::kBackendUnavailable, "no stored distributions for this passage");
    }
    return finish_call(passage, std::make_shared<const PredictiveDistributions>(std::move(rec.dists)));
  }

 private:
  LogitsRecord load(const Passage& passage) const {
    const auto file = path_ / logits_file_name(passage);
    if (!std::filesystem::exists(file)) {
      throw Error(ErrorCode::kBackendUnavailable, "no stored distributions for this passage (" + file.string() + ")");
    }
    return read_logits_file(file.string());
  }

  std::filesystem::path path_;
  std::string id_;
  Vocab vocab_;
  bool found_vocab_ = false;
  std::optional<LogitsRecord> single_;
};

// ---------------------------------------------------------------------------
// Top-K rows

inline constexpr double kTruncatedMassTolerance = 1e-4;

struct TruncatedRow {
  std::vector<std::pair<TokenId, double>> top;  // (token, logprob), any order
  double residual = 0.0;                        // 1 - sum exp(top)
};

struct TruncatedDistributions {
  std::size_t vocab_size = 0;
  std::vector<TruncatedRow> rows;

  std::size_t length() const noexcept { return rows.size(); }

  void check() const {
    for (std::size_t j = 0; j < rows.size(); ++j) {
      const TruncatedRow& row = rows[j];
      if (!(row.residual >= 0.0)) throw Error(ErrorCode::kNotNormalized, "negative residual mass", {.row = j});
      CompensatedSum s;
      for (const auto& [tok, lp] : row.top) {
        if (tok >= vocab_size) throw Error(ErrorCode::kIndexOutOfRange, "top-K token outside vocabulary", {.row = j});
        if (std::isnan(lp) || lp > kPositiveSlack) throw Error(ErrorCode::kNotNormalized, "bad top-K log-prob", {.row = j});
        if (lp != kNegInf) s.add(std::exp(lp));
      }
      s.add(row.residual);
      if (std::fabs(s.value() - 1.0) > kTruncatedMassTolerance) {
        throw Error(ErrorCode::kNotNormalized, "top-K mass plus residual is " + std::to_string(s.value()), {.row = j});
      }
    }
  }
};

enum class TruncationPolicy { kSpreadUniform, kFloor };

inline std::string_view to_string(TruncationPolicy p) {
  return p == TruncationPolicy::kFloor ? "floor" : "spread_uniform";
}

inline TruncationPolicy parse_truncation_policy(std::string_view s) {
  if (s == "spread_uniform") return TruncationPolicy::kSpreadUniform;
  if (s == "floor") return TruncationPolicy::kFloor;
  throw Error(ErrorCode::kInvalidArgument, "unknown truncation policy '" + std::string(s) + "'");
}

/// Dense rows from top-K lists. spread_uniform gives each unlisted token
/// r/(V-K); floor gives them -inf. Rows are renormalized exactly after.
inline PredictiveDistributions expand_truncated(const TruncatedDistributions& trunc, TruncationPolicy policy) {
  trunc.check();
  const std::size_t V = trunc.vocab_size;
  std::vector<double> buf(trunc.length() * V, kNegInf);
  std::vector<char> listed(V);
  for (std::size_t j = 0; j < trunc.length(); ++j) {
    const TruncatedRow& row = trunc.rows[j];
    double* out = buf.data() + j * V;
    std::fill(listed.begin(), listed.end(), 0);
    std::size_t n_listed = 0;
    for (const auto& [tok, lp] : row.top) {
      if (!listed[tok]) ++n_listed;
      listed[tok] = 1;
      out[tok] = lp;
    }
    if (policy == TruncationPolicy::kSpreadUniform && row.residual > 0.0 && n_listed < V) {
      const double fill = std::log(row.residual / static_cast<double>(V - n_listed));
      for (std::size_t v = 0; v < V; ++v) {
        if (!listed[v]) out[v] = fill;
      }
    }
    const std::span<double> r(out, V);
    const double lse = row_logsumexp(r);
    if (lse == kNegInf) throw Error(ErrorCode::kNotNormalized, "row has no probability mass", {.row = j});
    for (double& v : r) {
      if (v != kNegInf) v -= lse;
    }
  }
  return PredictiveDistributions(trunc.length(), V, std::move(buf));
}

}  // namespace fastcurv
