// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The fastcurv Authors

#pragma once

// Benchmark construction and measurement: paired human/machine datasets,
// text attacks, truncation, ROC analysis and the timed detector runner.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "fastcurv/backends.hpp"
#include "fastcurv/baselines.hpp"
#include "fastcurv/distributions.hpp"
#include "fastcurv/error.hpp"
#include "fastcurv/lm.hpp"
#include "fastcurv/numeric.hpp"

namespace fastcurv {

// ---------------------------------------------------------------------------
// Datasets

struct PairedItem {
  Passage human;
  Passage machine;
};

struct PairedDataset {
  std::vector<PairedItem> items;
  std::size_t prefix_tokens = 30;
  std::string decoding;
  std::string source;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> meta;  // transforms applied, etc.

  std::size_t size() const noexcept { return items.size(); }
};

inline constexpr std::size_t kMinContinuationTokens = 20;

/// Takes the first n_pairs corpus passages with at least prefix+20 tokens;
/// each machine passage continues the human passage's first prefix_tokens
/// tokens up to the human passage's length. Item i samples with seed
/// derive_seed(decoding.seed, {i}).
inline PairedDataset build_dataset(const std::vector<Passage>& human_corpus, ScoringBackend& source, std::size_t n_pairs,
                                   std::size_t prefix_tokens, const lm::DecodingConfig& decoding) {
  if (n_pairs == 0) throw Error(ErrorCode::kInvalidArgument, "n_pairs must be positive");
  if (prefix_tokens == 0) throw Error(ErrorCode::kInvalidArgument, "prefix_tokens must be positive");
  decoding.check();
  PairedDataset ds;
  ds.prefix_tokens = prefix_tokens;
  ds.decoding = decoding.describe();
  ds.source = source.id();
  ds.seed = decoding.seed;
  for (const Passage& h : human_corpus) {
    if (ds.items.size() == n_pairs) break;
    if (h.size() < prefix_tokens + kMinContinuationTokens) continue;
    const std::size_t i = ds.items.size();
    Passage prefix;
    prefix.token_ids.assign(h.token_ids.begin(), h.token_ids.begin() + static_cast<std::ptrdiff_t>(prefix_tokens));
    lm::DecodingConfig dec = decoding;
    dec.seed = derive_seed(decoding.seed, {i});
    PairedItem item{h, source.generate(prefix, h.size() - prefix_tokens, dec)};
    item.human.label = Label::kHuman;
    item.machine.label = Label::kMachine;
    ds.items.push_back(std::move(item));
  }
  if (ds.items.size() < n_pairs) {
    throw Error(ErrorCode::kCorpusTooSmall, "corpus has only " + std::to_string(ds.items.size()) +
                                                " passages of at least " +
                                                std::to_string(prefix_tokens + kMinContinuationTokens) + " tokens");
  }
  return ds;
}

// ---------------------------------------------------------------------------
// ROC

struct RocCurve {
  std::vector<std::pair<double, double>> points;  // (fpr, tpr), threshold descending
  double auroc = 0.5;
};

/// AUROC by mid-ranks (ties count half) plus the threshold-sweep curve.
inline RocCurve roc_auc(std::span<const double> machine, std::span<const double> human) {
  if (machine.empty() || human.empty()) throw Error(ErrorCode::kEmptyScoreSet, "AUROC needs scores in both classes");
  struct Item {
    double score;
    bool is_machine;
  };
  std::vector<Item> all;
  all.reserve(machine.size() + human.size());
  for (double s : machine) all.push_back({s, true});
  for (double s : human) all.push_back({s, false});
  for (const Item& it : all) {
    if (std::isnan(it.score)) throw Error(ErrorCode::kNonFinite, "AUROC input contains NaN");
  }
  std::sort(all.begin(), all.end(), [](const Item& a, const Item& b) { return a.score < b.score; });

  // Sum of 2 * (mid-rank) over machine items; kept doubled so it is an integer.
  double twice_rank_sum = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    std::size_t m_in_group = 0;
    while (j < all.size() && all[j].score == all[i].score) {
      m_in_group += all[j].is_machine ? 1 : 0;
      ++j;
    }
    const double twice_mid = static_cast<double>(i + 1 + j);  // ranks i+1..j
    twice_rank_sum += twice_mid * static_cast<double>(m_in_group);
    i = j;
  }
  const double nm = static_cast<double>(machine.size());
  const double nh = static_cast<double>(human.size());
  const double twice_u = twice_rank_sum - nm * (nm + 1.0);

  RocCurve curve;
  curve.auroc = twice_u / (2.0 * nm * nh);
  curve.points.emplace_back(0.0, 0.0);
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = all.size(); i > 0;) {
    const double t = all[i - 1].score;
    while (i > 0 && all[i - 1].score == t) {
      (all[i - 1].is_machine ? tp : fp) += 1;
      --i;
    }
    curve.points.emplace_back(static_cast<double>(fp) / nh, static_cast<double>(tp) / nm);
  }
  return curve;
}

/// Largest TPR among curve points with FPR <= target.
inline double tpr_at_fpr(const RocCurve& curve, double fpr_target) {
  if (!(fpr_target >= 0.0 && fpr_target <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "FPR target outside [0,1]");
  double best = 0.0;
  for (const auto& [fpr, tpr] : curve.points) {
    if (fpr <= fpr_target) best = std::max(best, tpr);
  }
  return best;
}

/// (new - old) / (1 - old): share of the remaining headroom gained.
inline double relative_improvement(double new_auroc, double old_auroc) {
  if (!(old_auroc < 1.0)) throw Error(ErrorCode::kDegenerateBaseline, "baseline AUROC is already 1");
  return (new_auroc - old_auroc) / (1.0 - old_auroc);
}

// ---------------------------------------------------------------------------
// Text transforms. Words are non-punctuation tokens; sentences end at
// '.', '?' or '!' tokens.

inline std::size_t count_words(const Passage& passage, const Vocab& vocab) {
  std::size_t n = 0;
  for (TokenId id : passage.token_ids) n += lm::is_word_token(vocab.token(id)) ? 1 : 0;
  return n;
}

/// Number of sentences, counting a trailing unterminated fragment.
inline std::size_t count_sentences(const Passage& passage, const Vocab& vocab) {
  std::size_t n = 0;
  bool open = false;
  for (TokenId id : passage.token_ids) {
    if (lm::is_sentence_end_token(vocab.token(id))) {
      ++n;
      open = false;
    } else {
      open = true;
    }
  }
  return n + (open ? 1 : 0);
}

inline constexpr std::size_t kAttackMinSentenceWords = 20;

/// In each sentence with more than 20 words, swaps one uniformly chosen
/// pair of adjacent word tokens.
inline Passage decoherence_attack(const Passage& passage, const Vocab& vocab, std::uint64_t seed) {
  Passage out = passage;
  Rng rng(seed);
  const auto& ids = passage.token_ids;
  std::size_t start = 0;
  while (start < ids.size()) {
    std::size_t end = start;
    while (end < ids.size() && !lm::is_sentence_end_token(vocab.token(ids[end]))) ++end;
    std::size_t words = 0;
    std::vector<std::size_t> pairs;  // left index of adjacent word-word pairs
    for (std::size_t j = start; j < end; ++j) {
      if (!lm::is_word_token(vocab.token(ids[j]))) continue;
      ++words;
      if (j + 1 < end && lm::is_word_token(vocab.token(ids[j + 1]))) pairs.push_back(j);
    }
    if (words > kAttackMinSentenceWords && !pairs.empty()) {
      const std::size_t j = pairs[rng.below(pairs.size())];
      std::swap(out.token_ids[j], out.token_ids[j + 1]);
    }
    start = end + 1;
  }
  out.raw_text = lm::detokenize(out, vocab);
  out.meta["attack"] = "decoherence";
  return out;
}

/// Keeps tokens up to and including the target_words-th word.
inline Passage truncate_passage(const Passage& passage, const Vocab& vocab, std::size_t target_words) {
  if (target_words < 1) throw Error(ErrorCode::kInvalidArgument, "target_words must be >= 1");
  std::size_t words = 0;
  for (std::size_t j = 0; j < passage.size(); ++j) {
    if (lm::is_word_token(vocab.token(passage.token_ids[j])) && ++words == target_words) {
      if (j + 1 == passage.size()) return passage;
      Passage out = passage;
      out.token_ids.resize(j + 1);
      out.raw_text = lm::detokenize(out, vocab);
      out.meta["truncated_words"] = std::to_string(target_words);
      return out;
    }
  }
  return passage;
}

inline PairedDataset attack_dataset(const PairedDataset& ds, const Vocab& vocab, std::uint64_t seed) {
  PairedDataset out = ds;
  for (std::size_t i = 0; i < out.items.size(); ++i) {
    out.items[i].machine = decoherence_attack(ds.items[i].machine, vocab, derive_seed(seed, {0x4154u, i}));
  }
  out.meta["attack"] = "decoherence";
  return out;
}

inline PairedDataset truncate_dataset(const PairedDataset& ds, const Vocab& vocab, std::size_t target_words) {
  PairedDataset out = ds;
  for (auto& item : out.items) {
    item.human = truncate_passage(item.human, vocab, target_words);
    item.machine = truncate_passage(item.machine, vocab, target_words);
  }
  out.meta["truncate_words"] = std::to_string(target_words);
  return out;
}

// ---------------------------------------------------------------------------
// Runner

struct DetectorEntry {
  std::string name;
  DetectorPtr detector;
  std::vector<BackendPtr> backends;  // whose call counters to attribute
};

struct ItemFailure {
  std::size_t item = 0;
  bool machine = false;
  std::string message;
};

struct DetectorResult {
  std::string name;
  DetectorId id = DetectorId::kFastCurvature;
  std::vector<double> human_scores;    // NaN for failed items
  std::vector<double> machine_scores;
  std::vector<ItemFailure> failures;
  std::uint64_t calls_used = 0;      // as reported by the detector
  std::uint64_t backend_calls = 0;   // counter deltas of attributed backends
  double wall_seconds = 0.0;
  std::optional<RocCurve> roc;
  std::map<double, double> tpr_at;   // FPR target -> TPR

  std::vector<double> valid(const std::vector<double>& v) const {
    std::vector<double> out;
    for (double x : v) {
      if (!std::isnan(x)) out.push_back(x);
    }
    return out;
  }
  std::optional<double> auroc() const { return roc ? std::optional(roc->auroc) : std::nullopt; }
};

struct BenchOptions {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::vector<double> fpr_targets = {0.01, 0.1};
};

struct BenchReport {
  std::vector<DetectorResult> results;
  std::size_t items = 0;

  const DetectorResult& at(const std::string& name) const {
    for (const auto& r : results) {
      if (r.name == name) return r;
    }
    throw Error(ErrorCode::kInvalidArgument, "no detector named '" + name + "' in report");
  }
};

/// Seed for item i; side 0 is human, 1 is machine. Shared by all detectors.
inline std::uint64_t item_seed(std::uint64_t seed, std::size_t i, int side) {
  return derive_seed(seed, {static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(side)});
}

inline DetectorResult run_detector(const PairedDataset& ds, const DetectorEntry& entry, const BenchOptions& opt) {
  if (!entry.detector) throw Error(ErrorCode::kInvalidArgument, "null detector '" + entry.name + "'");
  const std::size_t n = ds.size();
  DetectorResult r;
  r.name = entry.name;
  r.id = entry.detector->id();
  r.human_scores.assign(n, std::numeric_limits<double>::quiet_NaN());
  r.machine_scores.assign(n, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::uint64_t> calls(2 * n, 0);
  std::vector<std::optional<std::string>> errors(2 * n);

  std::uint64_t before = 0;
  for (const auto& b : entry.backends) before += b->calls();

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t t = next.fetch_add(1); t < 2 * n; t = next.fetch_add(1)) {
      const std::size_t i = t / 2;
      const int side = static_cast<int>(t % 2);
      const Passage& p = side == 0 ? ds.items[i].human : ds.items[i].machine;
      try {
        const DetectorScore s = entry.detector->score(p, item_seed(opt.seed, i, side));
        (side == 0 ? r.human_scores : r.machine_scores)[i] = s.value;
        calls[t] = s.calls_used;
      } catch (const std::exception& e) {
        errors[t] = e.what();
      }
    }
  };
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t threads = std::max<std::size_t>(1, std::min(opt.threads, 2 * n));
  if (threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t k = 0; k < threads; ++k) pool.emplace_back(work);
  }
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::uint64_t after = 0;
  for (const auto& b : entry.backends) after += b->calls();
  r.backend_calls = after - before;
  for (std::size_t t = 0; t < 2 * n; ++t) {
    r.calls_used += calls[t];
    if (errors[t]) r.failures.push_back({t / 2, t % 2 == 1, *errors[t]});
  }
  const auto m = r.valid(r.machine_scores);
  const auto h = r.valid(r.human_scores);
  if (!m.empty() && !h.empty()) {
    r.roc = roc_auc(m, h);
    for (double f : opt.fpr_targets) r.tpr_at[f] = tpr_at_fpr(*r.roc, f);
  }
  return r;
}

/// Runs each detector over every passage. Per-item errors are recorded and
/// the item is left out of that detector's AUROC.
inline BenchReport run_benchmark(const PairedDataset& ds, const std::vector<DetectorEntry>& detectors,
                                 const BenchOptions& opt = {}) {
  if (ds.items.empty()) throw Error(ErrorCode::kEmptyInput, "dataset is empty");
  BenchReport report;
  report.items = ds.size();
  for (const auto& entry : detectors) report.results.push_back(run_detector(ds, entry, opt));
  return report;
}

}  // namespace fastcurv
