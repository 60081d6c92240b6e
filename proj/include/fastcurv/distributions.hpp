// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The fastcurv Authors

#pragma once

// Core types: vocabularies, passages and per-position log-probability rows.
// All log quantities are natural logs (nats).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fastcurv/error.hpp"
#include "fastcurv/numeric.hpp"

namespace fastcurv {

using TokenId = std::uint32_t;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Normalization tolerance for validate(): |logsumexp(row)| <= 1e-6.
inline constexpr double kNormalizationTolerance = 1e-6;
/// Entries may exceed 0 by this much before they are rejected.
inline constexpr double kPositiveSlack = 1e-9;

class Vocab {
 public:
  Vocab() = default;

  explicit Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    if (tokens_.size() < 2) {
      throw Error(ErrorCode::kInvalidArgument, "vocabulary needs at least two tokens");
    }
    index_.reserve(tokens_.size());
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      auto [it, inserted] = index_.emplace(tokens_[i], static_cast<TokenId>(i));
      if (!inserted) {
        throw Error(ErrorCode::kInvalidArgument, "duplicate vocabulary token '" + tokens_[i] + "'");
      }
    }
  }

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::string& token(TokenId id) const {
    if (id >= tokens_.size()) {
      throw Error(ErrorCode::kIndexOutOfRange, "token id " + std::to_string(id) + " outside vocabulary");
    }
    return tokens_[id];
  }
  std::optional<TokenId> find(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

enum class Label { kHuman, kMachine, kUnknown };

inline std::string_view to_string(Label label) {
  switch (label) {
    case Label::kHuman: return "human";
    case Label::kMachine: return "machine";
    case Label::kUnknown: return "unknown";
  }
  return "unknown";
}

inline Label parse_label(std::string_view s) {
  if (s == "human") return Label::kHuman;
  if (s == "machine") return Label::kMachine;
  if (s == "unknown") return Label::kUnknown;
  throw Error(ErrorCode::kInvalidArgument, "unknown label '" + std::string(s) + "'");
}

struct Passage {
  std::vector<TokenId> token_ids;
  std::string raw_text;
  Label label = Label::kUnknown;
  std::map<std::string, std::string> meta;

  std::size_t size() const noexcept { return token_ids.size(); }
};

/// 64-bit FNV-1a over the token ids; used as a cache and file key.
inline std::uint64_t passage_hash(std::span<const TokenId> ids) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (TokenId id : ids) {
    for (int b = 0; b < 4; ++b) {
      h ^= (id >> (8 * b)) & 0xFFu;
      h *= 0x100000001B3ULL;
    }
  }
  return h;
}

/// L x V row-major matrix of log-probabilities; row j is the model's
/// distribution for token j given the tokens before it.
class PredictiveDistributions {
 public:
  PredictiveDistributions() = default;
  PredictiveDistributions(std::size_t length, std::size_t vocab_size, std::vector<double> logprobs)
      : length_(length), vocab_size_(vocab_size), logprobs_(std::move(logprobs)) {
    if (logprobs_.size() != length_ * vocab_size_) {
      throw Error(ErrorCode::kLengthMismatch, "logprob buffer does not match L x V");
    }
  }

  std::size_t length() const noexcept { return length_; }
  std::size_t vocab_size() const noexcept { return vocab_size_; }

  std::span<const double> row(std::size_t j) const {
    if (j >= length_) {
      throw Error(ErrorCode::kIndexOutOfRange, "row " + std::to_string(j) + " >= length " + std::to_string(length_),
                  {.row = j});
    }
    return {logprobs_.data() + j * vocab_size_, vocab_size_};
  }
  std::span<const double> data() const noexcept { return logprobs_; }

  friend bool operator==(const PredictiveDistributions& a, const PredictiveDistributions& b) {
    if (a.length_ != b.length_ || a.vocab_size_ != b.vocab_size_) return false;
    // Bitwise, so that -inf == -inf and +0 != -0 do what a byte compare would.
    return std::equal(a.logprobs_.begin(), a.logprobs_.end(), b.logprobs_.begin(),
                      [](double x, double y) { return std::memcmp(&x, &y, sizeof x) == 0; });
  }

 private:
  std::size_t length_ = 0;
  std::size_t vocab_size_ = 0;
  std::vector<double> logprobs_;
};

using DistributionsPtr = std::shared_ptr<const PredictiveDistributions>;

struct RowStats {
  double entropy = 0.0;  // nats
  double mu = 0.0;       // E_q[log p]
  double var = 0.0;      // E_q[log^2 p] - mu^2, clamped at 0
};

/// Log-sum-exp of a row, ignoring -inf entries.
inline double row_logsumexp(std::span<const double> row) {
  double mx = kNegInf;
  for (double v : row) mx = std::max(mx, v);
  if (mx == kNegInf) return kNegInf;
  CompensatedSum s;
  for (double v : row) {
    if (v != kNegInf) s.add(std::exp(v - mx));
  }
  return mx + std::log(s.value());
}

inline void validate_row(std::span<const double> row, std::size_t j) {
  for (std::size_t v = 0; v < row.size(); ++v) {
    const double x = row[v];
    if (std::isnan(x) || x == std::numeric_limits<double>::infinity()) {
      throw Error(ErrorCode::kNonFinite, "row " + std::to_string(j) + " col " + std::to_string(v),
                  {.row = j, .col = v});
    }
    if (x > kPositiveSlack) {
      throw Error(ErrorCode::kNotNormalized,
                  "row " + std::to_string(j) + " has positive log-probability at col " + std::to_string(v),
                  {.row = j, .col = v});
    }
  }
  const double lse = row_logsumexp(row);
  if (!(std::fabs(lse) <= kNormalizationTolerance)) {
    throw Error(ErrorCode::kNotNormalized,
                "row " + std::to_string(j) + " log-sum-exp deviates by " + std::to_string(lse), {.row = j});
  }
}

/// Returns normally iff every row is finite (or -inf), non-positive and sums
/// to one within kNormalizationTolerance.
inline void validate(const PredictiveDistributions& dists) {
  for (std::size_t j = 0; j < dists.length(); ++j) validate_row(dists.row(j), j);
}

/// Shannon entropy of a normalized log-probability row; -inf entries add 0.
inline double row_entropy(std::span<const double> row) {
  CompensatedSum h;
  for (double lp : row) {
    if (lp == kNegInf) continue;
    h.add(-std::exp(lp) * lp);
  }
  return std::max(0.0, h.value());
}

inline double token_logprob(const PredictiveDistributions& dists, const Passage& passage, std::size_t j) {
  if (j >= passage.size() || j >= dists.length()) {
    throw Error(ErrorCode::kIndexOutOfRange, "position " + std::to_string(j) + " out of range", {.row = j});
  }
  const TokenId id = passage.token_ids[j];
  if (id >= dists.vocab_size()) {
    throw Error(ErrorCode::kVocabMismatch, "token id " + std::to_string(id) + " outside vocabulary", {.row = j});
  }
  const double lp = dists.row(j)[id];
  if (lp == kNegInf) {
    throw Error(ErrorCode::kZeroProbabilityToken, "passage token at position " + std::to_string(j) +
                                                      " has zero probability",
                {.row = j, .col = id});
  }
  return lp;
}

/// 1-based rank of token_id in descending probability order. Ties go to the
/// lower token index, so ranks form a permutation of 1..V.
inline std::size_t token_rank(std::span<const double> row, TokenId token_id) {
  if (token_id >= row.size()) {
    throw Error(ErrorCode::kIndexOutOfRange, "token id " + std::to_string(token_id) + " outside row");
  }
  const double target = row[token_id];
  std::size_t rank = 1;
  for (std::size_t v = 0; v < row.size(); ++v) {
    if (row[v] > target || (row[v] == target && v < token_id)) ++rank;
  }
  return rank;
}

}  // namespace fastcurv
