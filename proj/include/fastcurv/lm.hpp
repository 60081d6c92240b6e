// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The fastcurv Authors

#pragma once

/**
 * Toy autoregressive language model: word-level tokenizer plus an
 * interpolated n-gram model with additive smoothing,
 *
 *   P(w | h) = sum_k lambda_k * (c_k(h_k, w) + alpha) / (c_k(h_k) + alpha * V)
 *
 * where h_k is the last k-1 tokens of the history. Orders whose history is
 * not yet available (the first positions of a passage) are dropped and the
 * remaining weights renormalized, so every row is a proper distribution.
 *
 * Decoding strategies (temperature, top-k, top-p) are applied to a row in
 * that order when several are set.
 */

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fastcurv/bytes.hpp"
#include "fastcurv/distributions.hpp"
#include "fastcurv/error.hpp"
#include "fastcurv/numeric.hpp"

namespace fastcurv::lm {

inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr TokenId kUnkId = 0;
inline constexpr std::size_t kDefaultVocabCap = 8192;
inline constexpr int kMaxOrder = 5;

// ---------------------------------------------------------------------------
// Tokenizer

namespace detail {

inline bool is_word_char(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '\'' || c == '-';
}
inline bool is_punct_char(unsigned char c) {
  switch (c) {
    case '.': case ',': case ';': case ':': case '!': case '?': case '(': case ')':
      return true;
    default:
      return false;
  }
}
inline bool is_space_char(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

}  // namespace detail

inline bool is_punctuation_token(std::string_view tok) {
  return tok.size() == 1 && detail::is_punct_char(static_cast<unsigned char>(tok[0]));
}
inline bool is_sentence_end_token(std::string_view tok) { return tok == "." || tok == "?" || tok == "!"; }
inline bool is_word_token(std::string_view tok) { return !tok.empty() && !is_punctuation_token(tok); }

/// Lowercases ASCII, splits on whitespace, emits each of . , ; : ! ? ( ) as
/// its own token and words as runs of [a-z0-9'-]. A run of any other
/// characters becomes one "<unk>" token; the literal "<unk>" is kept as is.
inline std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(std::tolower(static_cast<unsigned char>(text[i])));
    if (detail::is_space_char(c)) {
      ++i;
    } else if (text.substr(i, kUnkToken.size()) == kUnkToken) {
      out.emplace_back(kUnkToken);
      i += kUnkToken.size();
    } else if (detail::is_punct_char(c)) {
      out.emplace_back(1, static_cast<char>(c));
      ++i;
    } else if (detail::is_word_char(c)) {
      std::string w;
      while (i < n) {
        const auto d = static_cast<unsigned char>(std::tolower(static_cast<unsigned char>(text[i])));
        if (!detail::is_word_char(d)) break;
        w.push_back(static_cast<char>(d));
        ++i;
      }
      out.push_back(std::move(w));
    } else {
      while (i < n) {
        const auto d = static_cast<unsigned char>(std::tolower(static_cast<unsigned char>(text[i])));
        if (detail::is_space_char(d) || detail::is_punct_char(d) || detail::is_word_char(d)) break;
        if (text.substr(i, kUnkToken.size()) == kUnkToken) break;
        ++i;
      }
      out.emplace_back(kUnkToken);
    }
  }
  return out;
}

/// Inverse of split_tokens on canonical text: tokens joined by one space,
/// except no space before . , ; : ! ? ) and none after (.
inline std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  bool suppress_next_space = true;
  for (const auto& tok : tokens) {
    const bool closes = tok.size() == 1 && (tok[0] == '.' || tok[0] == ',' || tok[0] == ';' || tok[0] == ':' ||
                                            tok[0] == '!' || tok[0] == '?' || tok[0] == ')');
    if (!suppress_next_space && !closes) out.push_back(' ');
    out += tok;
    suppress_next_space = (tok == "(");
  }
  return out;
}

inline Passage tokenize(std::string_view text, const Vocab& vocab, Label label = Label::kUnknown) {
  const auto pieces = split_tokens(text);
  if (pieces.empty()) throw Error(ErrorCode::kEmptyInput, "no tokens in input text");
  Passage p;
  p.label = label;
  p.token_ids.reserve(pieces.size());
  std::size_t unk = 0;
  for (const auto& piece : pieces) {
    auto id = vocab.find(piece);
    if (!id) {
      id = vocab.find(kUnkToken);
      if (!id) throw Error(ErrorCode::kVocabMismatch, "token '" + piece + "' not in vocabulary and no <unk>");
    }
    if (*id == kUnkId) ++unk;
    p.token_ids.push_back(*id);
  }
  p.raw_text = std::string(text);
  if (unk > 0) p.meta["unk_count"] = std::to_string(unk);
  return p;
}

inline std::string detokenize(std::span<const TokenId> ids, const Vocab& vocab) {
  std::vector<std::string> toks;
  toks.reserve(ids.size());
  for (TokenId id : ids) toks.push_back(vocab.token(id));
  return join_tokens(toks);
}

inline std::string detokenize(const Passage& passage, const Vocab& vocab) {
  return detokenize(passage.token_ids, vocab);
}

/// Builds a passage from ids with canonical raw text.
inline Passage make_passage(std::vector<TokenId> ids, const Vocab& vocab, Label label = Label::kUnknown) {
  Passage p;
  p.raw_text = detokenize(ids, vocab);
  p.token_ids = std::move(ids);
  p.label = label;
  return p;
}

/// "<unk>" at id 0, then the `cap` most frequent tokens (ties broken
/// lexicographically).
inline Vocab build_vocab(const std::vector<std::vector<std::string>>& documents, std::size_t cap = kDefaultVocabCap) {
  std::unordered_map<std::string, std::uint64_t> freq;
  for (const auto& doc : documents) {
    for (const auto& tok : doc) {
      if (tok != kUnkToken) ++freq[tok];
    }
  }
  std::vector<std::pair<std::string, std::uint64_t>> items(freq.begin(), freq.end());
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (items.size() > cap) items.resize(cap);
  std::vector<std::string> tokens;
  tokens.reserve(items.size() + 1);
  tokens.emplace_back(kUnkToken);
  for (auto& [tok, _] : items) tokens.push_back(std::move(tok));
  return Vocab(std::move(tokens));
}

// ---------------------------------------------------------------------------
// Decoding

struct DecodingConfig {
  std::optional<std::size_t> top_k;
  std::optional<double> top_p;
  std::optional<double> temperature;
  std::uint64_t seed = 0;

  static DecodingConfig pure(std::uint64_t seed = 0) { return {.seed = seed}; }
  static DecodingConfig with_top_k(std::size_t k, std::uint64_t seed = 0) { return {.top_k = k, .seed = seed}; }
  static DecodingConfig with_top_p(double p, std::uint64_t seed = 0) { return {.top_p = p, .seed = seed}; }
  static DecodingConfig with_temperature(double t, std::uint64_t seed = 0) { return {.temperature = t, .seed = seed}; }

  void check() const {
    if (top_k && *top_k < 1) throw Error(ErrorCode::kInvalidArgument, "top-k needs k >= 1");
    if (top_p && !(*top_p > 0.0 && *top_p <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "top-p needs 0 < p <= 1");
    if (temperature && !(*temperature > 0.0)) throw Error(ErrorCode::kInvalidArgument, "temperature must be > 0");
  }

  /// e.g. "pure", "k=40", "p=0.96", "T=0.8", "k=40,T=0.8".
  std::string describe() const {
    std::ostringstream os;
    bool any = false;
    auto sep = [&] { if (any) os << ','; any = true; };
    // Shortest text that parses back to the same double.
    auto num = [](double v) {
      char buf[32];
      const auto res = std::to_chars(buf, buf + sizeof buf, v);
      return std::string(buf, res.ptr);
    };
    if (top_k) { sep(); os << "k=" << *top_k; }
    if (top_p) { sep(); os << "p=" << num(*top_p); }
    if (temperature) { sep(); os << "T=" << num(*temperature); }
    return any ? os.str() : "pure";
  }

  /// Inverse of describe(); also accepts top_k:40 / top_p:0.9 / temperature:0.8.
  static DecodingConfig parse(std::string_view spec, std::uint64_t seed = 0) {
    DecodingConfig cfg;
    cfg.seed = seed;
    if (spec.empty() || spec == "pure") return cfg;
    std::size_t start = 0;
    while (start <= spec.size()) {
      const std::size_t end = std::min(spec.find(',', start), spec.size());
      const std::string_view item = spec.substr(start, end - start);
      const std::size_t eq = item.find_first_of("=:");
      if (eq == std::string_view::npos) throw Error(ErrorCode::kInvalidArgument, "bad decoding item '" + std::string(item) + "'");
      const std::string key(item.substr(0, eq));
      const std::string val(item.substr(eq + 1));
      try {
        if (key == "k" || key == "top_k") cfg.top_k = std::stoul(val);
        else if (key == "p" || key == "top_p") cfg.top_p = std::stod(val);
        else if (key == "T" || key == "t" || key == "temperature") cfg.temperature = std::stod(val);
        else throw Error(ErrorCode::kInvalidArgument, "unknown decoding key '" + key + "'");
      } catch (const std::logic_error&) {
        throw Error(ErrorCode::kInvalidArgument, "bad decoding value '" + val + "'");
      }
      start = end + 1;
    }
    cfg.check();
    return cfg;
  }
};

/// Applies temperature, then top-k, then top-p to a normalized log-prob row.
/// Removed tokens get -inf; the result is renormalized. Ordering for top-k /
/// top-p is by log-prob descending, lower token id first on ties. The token
/// that crosses the top-p threshold is kept.
inline std::vector<double> apply_decoding(std::span<const double> logprobs, const DecodingConfig& cfg) {
  cfg.check();
  std::vector<double> row(logprobs.begin(), logprobs.end());
  const std::size_t n = row.size();
  auto renormalize = [&] {
    const double lse = row_logsumexp(row);
    for (double& v : row) {
      if (v != kNegInf) v -= lse;
    }
  };
  if (cfg.temperature && *cfg.temperature != 1.0) {
    for (double& v : row) {
      if (v != kNegInf) v /= *cfg.temperature;
    }
    renormalize();
  }
  const bool need_k = cfg.top_k && *cfg.top_k < n;
  const bool need_p = cfg.top_p && *cfg.top_p < 1.0;
  if (!need_k && !need_p) return row;

  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  auto before = [&](std::uint32_t a, std::uint32_t b) { return row[a] != row[b] ? row[a] > row[b] : a < b; };
  std::size_t keep = n;
  if (need_k) {
    keep = *cfg.top_k;
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep - 1), order.end(), before);
    std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), before);
  } else {
    std::sort(order.begin(), order.end(), before);
  }
  if (need_p) {
    // Mass is measured on the current (post top-k) distribution.
    CompensatedSum total;
    for (std::size_t i = 0; i < keep; ++i) {
      if (row[order[i]] != kNegInf) total.add(std::exp(row[order[i]]));
    }
    const double target = *cfg.top_p * total.value();
    CompensatedSum cum;
    std::size_t cut = keep;
    for (std::size_t i = 0; i < keep; ++i) {
      cum.add(std::exp(row[order[i]]));
      if (cum.value() >= target) {
        cut = i + 1;
        break;
      }
    }
    keep = cut;
  }
  std::vector<double> out(n, kNegInf);
  for (std::size_t i = 0; i < keep; ++i) out[order[i]] = row[order[i]];
  row = std::move(out);
  renormalize();
  return row;
}

// ---------------------------------------------------------------------------
// Model

struct NgramParams {
  int order = 3;
  double alpha = 4e-4;
  std::vector<double> lambdas = {0.1, 0.3, 0.6};  // unigram first
};

namespace detail {

inline std::uint64_t pack_context(std::span<const TokenId> ctx) {
  std::uint64_t key = 0;
  for (std::size_t i = 0; i < ctx.size(); ++i) key |= static_cast<std::uint64_t>(ctx[i]) << (16 * i);
  return key;
}

}  // namespace detail

struct Continuations {
  std::uint64_t total = 0;
  std::vector<std::pair<TokenId, std::uint32_t>> next;  // sorted by token id
};

/// Mutable count tables. Counting is commutative: documents or whole
/// counters can be merged in any order with the same result.
class NgramCounter {
 public:
  NgramCounter(std::size_t vocab_size, int order) : vocab_size_(vocab_size), order_(order), unigram_(vocab_size, 0) {
    if (order < 1 || order > kMaxOrder) throw Error(ErrorCode::kInvalidArgument, "order must be in [1, 5]");
    if (vocab_size > 0xFFFF) throw Error(ErrorCode::kInvalidArgument, "vocabulary larger than 65535 tokens");
    higher_.resize(static_cast<std::size_t>(order > 1 ? order - 1 : 0));
  }

  void add_document(std::span<const TokenId> ids) {
    for (std::size_t j = 0; j < ids.size(); ++j) {
      const TokenId w = ids[j];
      if (w >= vocab_size_) throw Error(ErrorCode::kVocabMismatch, "token id outside vocabulary");
      ++unigram_[w];
      ++tokens_;
      for (int k = 2; k <= order_; ++k) {
        const auto ctx_len = static_cast<std::size_t>(k - 1);
        if (j < ctx_len) break;
        const std::uint64_t key = detail::pack_context(ids.subspan(j - ctx_len, ctx_len));
        ++higher_[static_cast<std::size_t>(k - 2)][key][w];
      }
    }
  }

  void merge(const NgramCounter& other) {
    if (other.vocab_size_ != vocab_size_ || other.order_ != order_) {
      throw Error(ErrorCode::kInvalidArgument, "cannot merge counters of different shape");
    }
    for (std::size_t w = 0; w < vocab_size_; ++w) unigram_[w] += other.unigram_[w];
    tokens_ += other.tokens_;
    for (std::size_t k = 0; k < higher_.size(); ++k) {
      for (const auto& [key, nexts] : other.higher_[k]) {
        auto& mine = higher_[k][key];
        for (const auto& [w, c] : nexts) mine[w] += c;
      }
    }
  }

  std::uint64_t token_count() const noexcept { return tokens_; }

 private:
  friend class NgramModel;
  std::size_t vocab_size_;
  int order_;
  std::vector<std::uint64_t> unigram_;
  std::uint64_t tokens_ = 0;
  std::vector<std::unordered_map<std::uint64_t, std::unordered_map<TokenId, std::uint64_t>>> higher_;
};

class NgramModel {
 public:
  NgramModel(Vocab vocab, const NgramCounter& counts, NgramParams params)
      : vocab_(std::move(vocab)), params_(std::move(params)) {
    check_params();
    if (counts.vocab_size_ != vocab_.size() || counts.order_ != params_.order) {
      throw Error(ErrorCode::kInvalidArgument, "counter shape does not match vocabulary/order");
    }
    unigram_ = counts.unigram_;
    tokens_ = counts.tokens_;
    tables_.resize(counts.higher_.size());
    for (std::size_t k = 0; k < counts.higher_.size(); ++k) {
      auto& table = tables_[k];
      table.reserve(counts.higher_[k].size());
      for (const auto& [key, nexts] : counts.higher_[k]) {
        Continuations c;
        c.next.reserve(nexts.size());
        for (const auto& [w, n] : nexts) {
          c.next.emplace_back(w, static_cast<std::uint32_t>(n));
          c.total += n;
        }
        std::sort(c.next.begin(), c.next.end());
        table.emplace(key, std::move(c));
      }
    }
    finalize();
  }

  int order() const noexcept { return params_.order; }
  double alpha() const noexcept { return params_.alpha; }
  const std::vector<double>& lambdas() const noexcept { return params_.lambdas; }
  const NgramParams& params() const noexcept { return params_; }
  const Vocab& vocab() const noexcept { return vocab_; }
  std::size_t vocab_size() const noexcept { return vocab_.size(); }
  std::uint64_t token_count() const noexcept { return tokens_; }
  std::uint64_t unigram_count(TokenId w) const { return unigram_.at(w); }

  /// Count table for order k (k >= 2); nullptr when the context is unseen.
  const Continuations* continuations(std::span<const TokenId> context) const {
    if (context.empty() || context.size() >= static_cast<std::size_t>(params_.order)) return nullptr;
    const auto& table = tables_[context.size() - 1];
    auto it = table.find(detail::pack_context(context));
    return it == table.end() ? nullptr : &it->second;
  }

  /// Fills `out` (size V) with P(. | history). Only the last order-1
  /// tokens of the history matter.
  void next_token_probs(std::span<const TokenId> history, std::span<double> out) const {
    const std::size_t V = vocab_.size();
    if (out.size() != V) throw Error(ErrorCode::kLengthMismatch, "output row has wrong size");
    const double aV = params_.alpha * static_cast<double>(V);
    const auto avail = static_cast<int>(std::min<std::size_t>(history.size() + 1, static_cast<std::size_t>(params_.order)));

    double lambda_total = 0.0;
    for (int k = 1; k <= avail; ++k) lambda_total += params_.lambdas[static_cast<std::size_t>(k - 1)];

    struct Term {
      double weight;  // lambda'_k / (c(h) + alpha V)
      const Continuations* cont;
    };
    std::array<Term, kMaxOrder> terms{};
    double base = 0.0;
    const double lambda1 = params_.lambdas[0] / lambda_total;
    base += lambda1 * params_.alpha / (static_cast<double>(tokens_) + aV);
    for (int k = 2; k <= avail; ++k) {
      const double lam = params_.lambdas[static_cast<std::size_t>(k - 1)] / lambda_total;
      const auto ctx = history.subspan(history.size() - static_cast<std::size_t>(k - 1));
      const Continuations* c = continuations(ctx);
      const double denom = (c ? static_cast<double>(c->total) : 0.0) + aV;
      base += lam * params_.alpha / denom;
      terms[static_cast<std::size_t>(k - 1)] = {lam / denom, c};
    }
    const double uni_weight = lambda1 / (static_cast<double>(tokens_) + aV);
    for (std::size_t w = 0; w < V; ++w) out[w] = base + uni_weight * static_cast<double>(unigram_[w]);
    for (int k = 2; k <= avail; ++k) {
      const Term& t = terms[static_cast<std::size_t>(k - 1)];
      if (!t.cont) continue;
      for (const auto& [w, c] : t.cont->next) out[w] += t.weight * static_cast<double>(c);
    }
  }

  void next_token_logprobs(std::span<const TokenId> history, std::span<double> out) const {
    next_token_probs(history, out);
    for (double& v : out) v = std::log(v);
  }

  std::vector<double> next_token_logprobs(std::span<const TokenId> history) const {
    std::vector<double> row(vocab_.size());
    next_token_logprobs(history, row);
    return row;
  }

  friend bool operator==(const NgramModel& a, const NgramModel& b) {
    return a.vocab_ == b.vocab_ && a.params_.order == b.params_.order && a.params_.alpha == b.params_.alpha &&
           a.params_.lambdas == b.params_.lambdas && a.unigram_ == b.unigram_ && a.tokens_ == b.tokens_ &&
           a.tables_equal(b);
  }

  // Serialization (see docs/formats.md, "Model file").
  std::string serialize() const;
  static NgramModel deserialize(std::string_view bytes);

 private:
  NgramModel() = default;

  void check_params() const {
    if (params_.order < 1 || params_.order > kMaxOrder) throw Error(ErrorCode::kInvalidArgument, "order must be in [1, 5]");
    if (!(params_.alpha > 0.0)) throw Error(ErrorCode::kInvalidArgument, "smoothing alpha must be > 0");
    if (params_.lambdas.size() != static_cast<std::size_t>(params_.order)) {
      throw Error(ErrorCode::kInvalidArgument, "need one interpolation weight per order");
    }
    double s = 0.0;
    for (double l : params_.lambdas) {
      if (!(l > 0.0)) throw Error(ErrorCode::kInvalidArgument, "interpolation weights must be positive");
      s += l;
    }
    if (std::fabs(s - 1.0) > 1e-9) throw Error(ErrorCode::kInvalidArgument, "interpolation weights must sum to 1");
  }

  void finalize() {
    if (vocab_.size() > 0xFFFF) throw Error(ErrorCode::kInvalidArgument, "vocabulary larger than 65535 tokens");
  }

  bool tables_equal(const NgramModel& o) const {
    if (tables_.size() != o.tables_.size()) return false;
    for (std::size_t k = 0; k < tables_.size(); ++k) {
      if (tables_[k].size() != o.tables_[k].size()) return false;
      for (const auto& [key, c] : tables_[k]) {
        auto it = o.tables_[k].find(key);
        if (it == o.tables_[k].end() || it->second.total != c.total || it->second.next != c.next) return false;
      }
    }
    return true;
  }

  Vocab vocab_;
  NgramParams params_;
  std::vector<std::uint64_t> unigram_;
  std::uint64_t tokens_ = 0;
  std::vector<std::unordered_map<std::uint64_t, Continuations>> tables_;  // index k-2 for order k
};

/// Trains on documents of token ids; n-grams never cross documents.
inline NgramModel train(const std::vector<std::vector<TokenId>>& documents, Vocab vocab, NgramParams params = {}) {
  NgramCounter counter(vocab.size(), params.order);
  for (const auto& doc : documents) counter.add_document(doc);
  if (counter.token_count() < static_cast<std::uint64_t>(params.order)) {
    throw Error(ErrorCode::kCorpusTooSmall, "corpus has fewer tokens than the model order");
  }
  return NgramModel(std::move(vocab), counter, std::move(params));
}

/// Tokenizes raw documents, builds the vocabulary and trains.
inline NgramModel train_on_text(const std::vector<std::string>& documents, NgramParams params = {},
                                std::size_t vocab_cap = kDefaultVocabCap) {
  std::vector<std::vector<std::string>> split;
  split.reserve(documents.size());
  for (const auto& d : documents) split.push_back(split_tokens(d));
  Vocab vocab = build_vocab(split, vocab_cap);
  std::vector<std::vector<TokenId>> ids;
  ids.reserve(split.size());
  for (const auto& doc : split) {
    std::vector<TokenId> row;
    row.reserve(doc.size());
    for (const auto& tok : doc) row.push_back(vocab.find(tok).value_or(kUnkId));
    ids.push_back(std::move(row));
  }
  return train(ids, std::move(vocab), std::move(params));
}

/// One row per position, conditioned on the true prefix of the passage.
inline PredictiveDistributions predict_dists(const NgramModel& model, const Passage& passage) {
  const std::size_t L = passage.size();
  const std::size_t V = model.vocab_size();
  for (TokenId id : passage.token_ids) {
    if (id >= V) throw Error(ErrorCode::kVocabMismatch, "passage token outside model vocabulary");
  }
  std::vector<double> buf(L * V);
  const std::span<const TokenId> ids(passage.token_ids);
  for (std::size_t j = 0; j < L; ++j) {
    model.next_token_logprobs(ids.subspan(0, j), std::span<double>(buf.data() + j * V, V));
  }
  return PredictiveDistributions(L, V, std::move(buf));
}

/// Mean per-token negative log-likelihood exponentiated.
inline double perplexity(const NgramModel& model, const std::vector<Passage>& passages) {
  CompensatedSum nll;
  std::size_t n = 0;
  std::vector<double> row(model.vocab_size());
  for (const auto& p : passages) {
    const std::span<const TokenId> ids(p.token_ids);
    for (std::size_t j = 0; j < ids.size(); ++j) {
      model.next_token_logprobs(ids.subspan(0, j), row);
      nll.add(-row[ids[j]]);
      ++n;
    }
  }
  return n == 0 ? 1.0 : std::exp(nll.value() / static_cast<double>(n));
}

/// Autoregressive sampling after `prefix`; returns prefix + `length` new
/// tokens, labeled machine. Deterministic in decoding.seed.
inline Passage generate(const NgramModel& model, const Passage& prefix, std::size_t length,
                        const DecodingConfig& decoding) {
  if (prefix.token_ids.empty()) throw Error(ErrorCode::kInvalidArgument, "generation prefix must be non-empty");
  if (length < 1) throw Error(ErrorCode::kInvalidArgument, "generation length must be >= 1");
  decoding.check();
  std::vector<TokenId> ids = prefix.token_ids;
  ids.reserve(ids.size() + length);
  Rng rng(decoding.seed);
  std::vector<double> row(model.vocab_size());
  const std::size_t ctx = static_cast<std::size_t>(model.order() - 1);
  for (std::size_t step = 0; step < length; ++step) {
    const std::size_t from = ids.size() > ctx ? ids.size() - ctx : 0;
    model.next_token_logprobs(std::span<const TokenId>(ids).subspan(from), row);
    const auto decoded = apply_decoding(row, decoding);
    const CategoricalSampler sampler(decoded);
    ids.push_back(sampler.draw(rng));
  }
  Passage out = make_passage(std::move(ids), model.vocab(), Label::kMachine);
  out.meta["decoding"] = decoding.describe();
  out.meta["decoding_seed"] = std::to_string(decoding.seed);
  out.meta["prefix_tokens"] = std::to_string(prefix.size());
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline constexpr std::string_view kModelMagic = "FCNG";
inline constexpr std::uint16_t kModelVersion = 1;

inline std::string NgramModel::serialize() const {
  ByteWriter w;
  w.raw(kModelMagic);
  w.u16(kModelVersion);
  w.u32(static_cast<std::uint32_t>(params_.order));
  w.u32(static_cast<std::uint32_t>(vocab_.size()));
  for (const auto& tok : vocab_.tokens()) w.str(tok);
  for (double l : params_.lambdas) w.f64(l);
  w.f64(params_.alpha);
  for (std::uint64_t c : unigram_) w.u64(c);
  for (std::size_t k = 0; k < tables_.size(); ++k) {
    const std::size_t ctx_len = k + 1;
    std::vector<std::uint64_t> keys;
    keys.reserve(tables_[k].size());
    for (const auto& [key, _] : tables_[k]) keys.push_back(key);
    std::sort(keys.begin(), keys.end());
    w.u64(keys.size());
    for (std::uint64_t key : keys) {
      for (std::size_t i = 0; i < ctx_len; ++i) w.u32(static_cast<std::uint32_t>((key >> (16 * i)) & 0xFFFF));
      const Continuations& c = tables_[k].at(key);
      w.u32(static_cast<std::uint32_t>(c.next.size()));
      for (const auto& [tok, n] : c.next) {
        w.u32(tok);
        w.u32(n);
      }
    }
  }
  w.crc_trailer();
  return w.take();
}

inline NgramModel NgramModel::deserialize(std::string_view bytes) {
  ByteReader r(bytes);
  r.verify_crc_trailer();
  if (r.raw(4, "magic") != kModelMagic) throw Error(ErrorCode::kFormatError, "not a model file", {.offset = 0});
  const std::uint16_t version = r.u16("version");
  if (version != kModelVersion) {
    throw Error(ErrorCode::kVersionUnsupported, "model file version " + std::to_string(version), {.offset = 4});
  }
  NgramModel m;
  m.params_.order = static_cast<int>(r.u32("order"));
  if (m.params_.order < 1 || m.params_.order > kMaxOrder) {
    throw Error(ErrorCode::kFormatError, "order out of range", {.offset = r.offset()});
  }
  const std::uint32_t V = r.u32("vocab size");
  if (V < 2 || V > 0xFFFF) throw Error(ErrorCode::kFormatError, "vocabulary size out of range", {.offset = r.offset()});
  std::vector<std::string> tokens;
  tokens.reserve(V);
  for (std::uint32_t i = 0; i < V; ++i) tokens.push_back(r.str("vocab token"));
  m.vocab_ = Vocab(std::move(tokens));
  m.params_.lambdas.resize(static_cast<std::size_t>(m.params_.order));
  for (double& l : m.params_.lambdas) l = r.f64("lambda");
  m.params_.alpha = r.f64("alpha");
  m.unigram_.resize(V);
  for (auto& c : m.unigram_) {
    c = r.u64("unigram count");
    m.tokens_ += c;
  }
  m.tables_.resize(static_cast<std::size_t>(m.params_.order - 1));
  for (std::size_t k = 0; k < m.tables_.size(); ++k) {
    const std::size_t ctx_len = k + 1;
    const std::uint64_t n_ctx = r.u64("context count");
    for (std::uint64_t i = 0; i < n_ctx; ++i) {
      std::uint64_t key = 0;
      for (std::size_t t = 0; t < ctx_len; ++t) {
        const std::uint32_t id = r.u32("context token");
        if (id >= V) throw Error(ErrorCode::kFormatError, "context token out of range", {.offset = r.offset()});
        key |= static_cast<std::uint64_t>(id) << (16 * t);
      }
      Continuations c;
      const std::uint32_t n_next = r.u32("continuation count");
      c.next.reserve(n_next);
      for (std::uint32_t t = 0; t < n_next; ++t) {
        const std::uint32_t tok = r.u32("continuation token");
        const std::uint32_t cnt = r.u32("continuation count");
        if (tok >= V) throw Error(ErrorCode::kFormatError, "continuation token out of range", {.offset = r.offset()});
        c.next.emplace_back(tok, cnt);
        c.total += cnt;
      }
      m.tables_[k].emplace(key, std::move(c));
    }
  }
  if (r.remaining() != 0) throw Error(ErrorCode::kFormatError, "trailing bytes after count tables", {.offset = r.offset()});
  try {
    m.check_params();
  } catch (const Error& e) {
    throw Error(ErrorCode::kFormatError, e.what());
  }
  return m;
}

inline void save_model(const NgramModel& model, const std::string& path) { write_file_bytes(path, model.serialize()); }
inline NgramModel load_model(const std::string& path) { return NgramModel::deserialize(read_file_bytes(path)); }

}  // namespace fastcurv::lm
