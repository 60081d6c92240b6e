// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The fastcurv Authors

#pragma once

// Detectors. Every detector maps a passage to a real number where larger
// means more machine-like; raw values in the conventional orientation are
// kept in DetectorScore::aux.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fastcurv/backends.hpp"
#include "fastcurv/curvature.hpp"
#include "fastcurv/distributions.hpp"
#include "fastcurv/error.hpp"
#include "fastcurv/lm.hpp"
#include "fastcurv/numeric.hpp"

namespace fastcurv {

enum class DetectorId { kFastCurvature, kLikelihood, kEntropy, kLogRank, kLrr, kDetectGpt, kNpr, kDnaGpt };

inline constexpr DetectorId kAllDetectors[] = {DetectorId::kFastCurvature, DetectorId::kLikelihood,
                                               DetectorId::kEntropy,       DetectorId::kLogRank,
                                               DetectorId::kLrr,           DetectorId::kDetectGpt,
                                               DetectorId::kNpr,           DetectorId::kDnaGpt};

inline std::string_view to_string(DetectorId id) {
  switch (id) {
    case DetectorId::kFastCurvature: return "fast_curvature";
    case DetectorId::kLikelihood: return "likelihood";
    case DetectorId::kEntropy: return "entropy";
    case DetectorId::kLogRank: return "logrank";
    case DetectorId::kLrr: return "lrr";
    case DetectorId::kDetectGpt: return "detectgpt";
    case DetectorId::kNpr: return "npr";
    case DetectorId::kDnaGpt: return "dna_gpt";
  }
  return "unknown";
}

inline DetectorId parse_detector_id(std::string_view s) {
  for (DetectorId id : kAllDetectors) {
    if (to_string(id) == s) return id;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown detector '" + std::string(s) + "'");
}

/// Stand-in value for ratios whose denominator vanishes; flagged in aux.
inline constexpr double kScoreSentinel = 1e9;

struct DetectorScore {
  DetectorId id = DetectorId::kFastCurvature;
  double value = 0.0;
  std::uint64_t calls_used = 0;
  std::map<std::string, double> aux;
};

// ---------------------------------------------------------------------------
// Distribution-only detectors

inline double mean_logprob(const Passage& passage, const PredictiveDistributions& dists) {
  detail::check_cover(passage, dists, "scoring");
  return conditional_logprob(passage, dists) / static_cast<double>(passage.size());
}

inline DetectorScore likelihood_score(const Passage& passage, const PredictiveDistributions& dists) {
  DetectorScore s{.id = DetectorId::kLikelihood, .calls_used = 1};
  s.value = mean_logprob(passage, dists);
  return s;
}

inline DetectorScore entropy_score(const Passage& passage, const PredictiveDistributions& dists) {
  detail::check_cover(passage, dists, "scoring");
  CompensatedSum h;
  for (std::size_t j = 0; j < passage.size(); ++j) h.add(row_entropy(dists.row(j)));
  const double mean = h.value() / static_cast<double>(passage.size());
  DetectorScore s{.id = DetectorId::kEntropy, .value = -mean, .calls_used = 1};
  s.aux["mean_entropy"] = mean;
  return s;
}

inline double sum_log_rank(const Passage& passage, const PredictiveDistributions& dists) {
  detail::check_cover(passage, dists, "scoring");
  CompensatedSum s;
  for (std::size_t j = 0; j < passage.size(); ++j) {
    s.add(std::log(static_cast<double>(token_rank(dists.row(j), passage.token_ids[j]))));
  }
  return s.value();
}

inline DetectorScore logrank_score(const Passage& passage, const PredictiveDistributions& dists) {
  const double mean = sum_log_rank(passage, dists) / static_cast<double>(passage.size());
  DetectorScore s{.id = DetectorId::kLogRank, .value = -mean, .calls_used = 1};
  s.aux["mean_log_rank"] = mean;
  return s;
}

inline DetectorScore lrr_score(const Passage& passage, const PredictiveDistributions& dists) {
  const double lp = conditional_logprob(passage, dists);
  const double lr = sum_log_rank(passage, dists);
  DetectorScore s{.id = DetectorId::kLrr, .calls_used = 1};
  s.aux["sum_logprob"] = lp;
  s.aux["sum_log_rank"] = lr;
  if (lr == 0.0) {
    s.value = kScoreSentinel;
    s.aux["sentinel"] = 1.0;
  } else {
    s.value = std::fabs(lp) / lr;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Perturbations

struct PerturbConfig {
  double mask_fraction = 0.15;
  std::size_t span_length = 2;
  std::size_t count = 100;
  std::uint64_t seed = 0;
  bool normalize = true;

  void check() const {
    if (!(mask_fraction > 0.0 && mask_fraction < 1.0)) throw Error(ErrorCode::kInvalidArgument, "mask_fraction must be in (0,1)");
    if (span_length < 1) throw Error(ErrorCode::kInvalidArgument, "span_length must be >= 1");
    if (count < 1) throw Error(ErrorCode::kInvalidArgument, "perturbation count must be >= 1");
  }
};

/// Next-token distribution given a history; used to refill masked spans.
using NextTokenFn = std::function<void(std::span<const TokenId> history, std::span<double> out)>;

/// Rewrites a passage, given a per-perturbation seed.
using PerturbFn = std::function<Passage(const Passage& passage, std::uint64_t seed)>;

inline NextTokenFn next_token_fn(std::shared_ptr<const lm::NgramModel> model) {
  return [model = std::move(model)](std::span<const TokenId> history, std::span<double> out) {
    model->next_token_logprobs(history, out);
  };
}

inline std::size_t span_count(std::size_t length, const PerturbConfig& config) {
  return static_cast<std::size_t>(
      std::ceil(config.mask_fraction * static_cast<double>(length) / static_cast<double>(config.span_length)));
}

/// Sorted start positions of the masked spans: n distinct slots out of
/// L - n(s-1), each shifted right by s-1 per earlier span. Every
/// non-overlapping arrangement is equally likely.
inline std::vector<std::size_t> choose_spans(std::size_t length, const PerturbConfig& config, Rng& rng) {
  config.check();
  const std::size_t s = config.span_length;
  if (static_cast<double>(length) < static_cast<double>(s) / config.mask_fraction) {
    throw Error(ErrorCode::kPassageTooShort, "passage of " + std::to_string(length) + " tokens is too short to perturb");
  }
  const std::size_t n = span_count(length, config);
  if (n * s > length) throw Error(ErrorCode::kPassageTooShort, "spans do not fit in the passage");
  const std::size_t slots = length - n * (s - 1);
  std::set<std::size_t> picked;  // Floyd's sampling without replacement
  for (std::size_t j = slots - n; j < slots; ++j) {
    const std::size_t t = rng.below(j + 1);
    if (!picked.insert(t).second) picked.insert(j);
  }
  std::vector<std::size_t> starts;
  starts.reserve(n);
  std::size_t i = 0;
  for (std::size_t slot : picked) starts.push_back(slot + (i++) * (s - 1));
  return starts;
}

/// Masks ceil(f L / s) spans and refills them left to right by sampling
/// from `model` given the current prefix.
inline Passage perturb_resample(const Passage& passage, const NextTokenFn& model, std::size_t vocab_size,
                                const PerturbConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  const auto starts = choose_spans(passage.size(), config, rng);
  Passage out;
  out.token_ids = passage.token_ids;
  out.label = passage.label;
  out.meta = passage.meta;
  std::vector<double> row(vocab_size);
  for (std::size_t start : starts) {
    for (std::size_t j = start; j < start + config.span_length; ++j) {
      model(std::span<const TokenId>(out.token_ids).subspan(0, j), row);
      out.token_ids[j] = CategoricalSampler(row).draw(rng);
    }
  }
  return out;
}

inline PerturbFn resample_perturber(NextTokenFn model, std::size_t vocab_size, PerturbConfig config) {
  return [model = std::move(model), vocab_size, config](const Passage& p, std::uint64_t seed) {
    return perturb_resample(p, model, vocab_size, config, seed);
  };
}

/// Seeds of the K perturbations for one passage; independent of order.
inline std::uint64_t perturbation_seed(std::uint64_t seed, std::size_t k) { return derive_seed(seed, {0x5045u, k}); }

inline DetectorScore detectgpt_score(const Passage& passage, const PerturbFn& perturb, ScoringBackend& scoring,
                                     const PerturbConfig& config) {
  config.check();
  if (config.count < 2) throw Error(ErrorCode::kInvalidArgument, "detectgpt needs at least two perturbations");
  const double original = conditional_logprob(passage, *scoring.score_passage(passage));
  std::vector<double> perturbed;
  perturbed.reserve(config.count);
  for (std::size_t k = 0; k < config.count; ++k) {
    const Passage p = perturb(passage, perturbation_seed(config.seed, k));
    perturbed.push_back(conditional_logprob(p, *scoring.score_passage(p)));
  }
  CompensatedSum sum;
  for (double v : perturbed) sum.add(v);
  const double mean = sum.value() / static_cast<double>(perturbed.size());
  CompensatedSum sq;
  for (double v : perturbed) sq.add((v - mean) * (v - mean));
  const double var = sq.value() / static_cast<double>(perturbed.size() - 1);

  DetectorScore s{.id = DetectorId::kDetectGpt, .calls_used = config.count + 1};
  s.aux["logprob"] = original;
  s.aux["perturbed_mean"] = mean;
  s.aux["perturbed_std"] = std::sqrt(var);
  const double numerator = original - mean;
  s.aux["numerator"] = numerator;
  if (!config.normalize) {
    s.value = numerator;
  } else if (!(var > kDegenerateVariance)) {
    s.value = 0.0;
    s.aux["degenerate"] = 1.0;
  } else {
    s.value = numerator / std::sqrt(var);
  }
  return s;
}

inline DetectorScore npr_score(const Passage& passage, const PerturbFn& perturb, ScoringBackend& scoring,
                               const PerturbConfig& config) {
  config.check();
  const double original = sum_log_rank(passage, *scoring.score_passage(passage));
  CompensatedSum sum;
  for (std::size_t k = 0; k < config.count; ++k) {
    const Passage p = perturb(passage, perturbation_seed(config.seed, k));
    sum.add(sum_log_rank(p, *scoring.score_passage(p)));
  }
  const double mean = sum.value() / static_cast<double>(config.count);
  DetectorScore s{.id = DetectorId::kNpr, .calls_used = config.count + 1};
  s.aux["sum_log_rank"] = original;
  s.aux["perturbed_mean_log_rank"] = mean;
  if (original == 0.0) {
    s.value = kScoreSentinel;
    s.aux["sentinel"] = 1.0;
  } else {
    s.value = mean / original;
  }
  return s;
}

// ---------------------------------------------------------------------------
// DNA-GPT

struct DnaGptConfig {
  double truncate_ratio = 0.5;
  std::size_t completions = 10;
  std::optional<std::size_t> max_new_tokens;  // default: the removed length
  lm::DecodingConfig decoding;                // seed is replaced per completion
  std::uint64_t seed = 0;

  void check() const {
    if (!(truncate_ratio > 0.0 && truncate_ratio < 1.0)) throw Error(ErrorCode::kInvalidArgument, "truncate_ratio must be in (0,1)");
    if (completions < 1) throw Error(ErrorCode::kInvalidArgument, "completions must be >= 1");
  }
};

namespace detail {

inline double mean_logprob_from(const Passage& passage, const PredictiveDistributions& dists, std::size_t from) {
  CompensatedSum s;
  for (std::size_t j = from; j < passage.size(); ++j) s.add(token_logprob(dists, passage, j));
  return s.value() / static_cast<double>(passage.size() - from);
}

}  // namespace detail

inline DetectorScore dna_gpt_score(const Passage& passage, ScoringBackend& generator, ScoringBackend& scoring,
                                   const DnaGptConfig& config) {
  config.check();
  if (passage.size() < 2) throw Error(ErrorCode::kPassageTooShort, "passage needs at least two tokens");
  const std::size_t cut = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(config.truncate_ratio * static_cast<double>(passage.size()))));
  const std::size_t new_tokens = config.max_new_tokens.value_or(passage.size() - cut);
  Passage prefix;
  prefix.token_ids.assign(passage.token_ids.begin(), passage.token_ids.begin() + static_cast<std::ptrdiff_t>(cut));
  prefix.raw_text.clear();

  const double original = detail::mean_logprob_from(passage, *scoring.score_passage(passage), cut);
  CompensatedSum sum;
  for (std::size_t k = 0; k < config.completions; ++k) {
    lm::DecodingConfig dec = config.decoding;
    dec.seed = derive_seed(config.seed, {0x444Eu, k});
    const Passage completion = generator.generate(prefix, new_tokens, dec);
    sum.add(detail::mean_logprob_from(completion, *scoring.score_passage(completion), cut));
  }
  const double mean = sum.value() / static_cast<double>(config.completions);
  DetectorScore s{.id = DetectorId::kDnaGpt, .value = original - mean, .calls_used = config.completions + 1};
  s.aux["continuation_logprob"] = original;
  s.aux["completion_mean_logprob"] = mean;
  s.aux["generation_calls"] = static_cast<double>(config.completions);
  return s;
}

// ---------------------------------------------------------------------------
// Detector objects

class Detector {
 public:
  virtual ~Detector() = default;
  virtual DetectorId id() const = 0;
  virtual std::string name() const { return std::string(to_string(id())); }
  /// `seed` is the per-passage seed; detectors that do not sample ignore it.
  virtual DetectorScore score(const Passage& passage, std::uint64_t seed) const = 0;
};

using DetectorPtr = std::shared_ptr<const Detector>;

/// Conditional probability curvature with either estimator.
class FastCurvatureDetector final : public Detector {
 public:
  FastCurvatureDetector(BackendPtr scoring, BackendPtr sampling, Estimator estimator = Estimator::kAnalytical,
                        DetectorConfig config = {}, std::string label = "")
      : scoring_(std::move(scoring)),
        sampling_(sampling ? std::move(sampling) : scoring_),
        estimator_(estimator),
        config_(config),
        label_(std::move(label)) {
    if (!scoring_) throw Error(ErrorCode::kInvalidArgument, "null scoring backend");
    if (sampling_->vocab() != scoring_->vocab()) {
      throw Error(ErrorCode::kVocabMismatch, "sampling and scoring backends use different vocabularies");
    }
  }

  DetectorId id() const override { return DetectorId::kFastCurvature; }
  std::string name() const override { return label_.empty() ? std::string(to_string(id())) : label_; }

  CurvatureReport report(const Passage& passage, std::uint64_t seed) const {
    const auto scoring = scoring_->score_passage(passage);
    const auto sampling = same_backend() ? scoring : sampling_->score_passage(passage);
    if (estimator_ == Estimator::kAnalytical) return curvature_analytical(passage, *sampling, *scoring);
    DetectorConfig cfg = config_;
    cfg.seed = seed;
    return curvature_sampling(passage, *sampling, *scoring, cfg);
  }

  DetectorScore score(const Passage& passage, std::uint64_t seed) const override {
    const CurvatureReport r = report(passage, seed);
    DetectorScore s{.id = id(), .value = r.value(config_.normalize), .calls_used = same_backend() ? 1u : 2u};
    s.aux["cond_logprob"] = r.cond_logprob;
    s.aux["mu_tilde"] = r.mu_tilde;
    s.aux["sigma_tilde"] = r.sigma_tilde;
    s.aux["numerator"] = r.numerator();
    if (r.degenerate) s.aux["degenerate"] = 1.0;
    return s;
  }

  bool same_backend() const noexcept { return sampling_ == scoring_; }
  const DetectorConfig& config() const noexcept { return config_; }
  Estimator estimator() const noexcept { return estimator_; }

 private:
  BackendPtr scoring_;
  BackendPtr sampling_;
  Estimator estimator_;
  DetectorConfig config_;
  std::string label_;
};

/// Likelihood, entropy, logrank or LRR from one scoring pass.
class DistributionDetector final : public Detector {
 public:
  DistributionDetector(DetectorId id, BackendPtr scoring) : id_(id), scoring_(std::move(scoring)) {
    if (id != DetectorId::kLikelihood && id != DetectorId::kEntropy && id != DetectorId::kLogRank &&
        id != DetectorId::kLrr) {
      throw Error(ErrorCode::kInvalidArgument, "not a distribution-only detector");
    }
    if (!scoring_) throw Error(ErrorCode::kInvalidArgument, "null scoring backend");
  }

  DetectorId id() const override { return id_; }

  DetectorScore score(const Passage& passage, std::uint64_t) const override {
    const auto dists = scoring_->score_passage(passage);
    DetectorScore s;
    switch (id_) {
      case DetectorId::kLikelihood: s = likelihood_score(passage, *dists); break;
      case DetectorId::kEntropy: s = entropy_score(passage, *dists); break;
      case DetectorId::kLogRank: s = logrank_score(passage, *dists); break;
      default: s = lrr_score(passage, *dists); break;
    }
    if (scoring_->capabilities().top_k_only) s.aux["approximate"] = 1.0;
    return s;
  }

 private:
  DetectorId id_;
  BackendPtr scoring_;
};

/// DetectGPT or NPR over K perturbations.
class PerturbationDetector final : public Detector {
 public:
  PerturbationDetector(DetectorId id, BackendPtr scoring, PerturbFn perturb, PerturbConfig config)
      : id_(id), scoring_(std::move(scoring)), perturb_(std::move(perturb)), config_(config) {
    if (id != DetectorId::kDetectGpt && id != DetectorId::kNpr) {
      throw Error(ErrorCode::kInvalidArgument, "not a perturbation detector");
    }
    if (!scoring_) throw Error(ErrorCode::kInvalidArgument, "null scoring backend");
    config_.check();
  }

  DetectorId id() const override { return id_; }

  DetectorScore score(const Passage& passage, std::uint64_t seed) const override {
    PerturbConfig cfg = config_;
    cfg.seed = seed;
    return id_ == DetectorId::kDetectGpt ? detectgpt_score(passage, perturb_, *scoring_, cfg)
                                         : npr_score(passage, perturb_, *scoring_, cfg);
  }

 private:
  DetectorId id_;
  BackendPtr scoring_;
  PerturbFn perturb_;
  PerturbConfig config_;
};

class DnaGptDetector final : public Detector {
 public:
  DnaGptDetector(BackendPtr generator, BackendPtr scoring, DnaGptConfig config)
      : generator_(std::move(generator)), scoring_(std::move(scoring)), config_(std::move(config)) {
    if (!generator_ || !scoring_) throw Error(ErrorCode::kInvalidArgument, "null backend");
    config_.check();
  }

  DetectorId id() const override { return DetectorId::kDnaGpt; }

  DetectorScore score(const Passage& passage, std::uint64_t seed) const override {
    DnaGptConfig cfg = config_;
    cfg.seed = seed;
    return dna_gpt_score(passage, *generator_, *scoring_, cfg);
  }

 private:
  BackendPtr generator_;
  BackendPtr scoring_;
  DnaGptConfig config_;
};

}  // namespace fastcurv
