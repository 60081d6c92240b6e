// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The fastcurv Authors

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "fastcurv/baselines.hpp"
#include "fastcurv/prose.hpp"
#include "test_util.hpp"

using namespace fastcurv;
using namespace fastcurv::testing;

namespace {

// Replaces one position with a seed-chosen token.
Passage toy_perturb(const Passage& p, std::uint64_t seed) {
  Passage q = p;
  q.token_ids[seed % p.size()] = static_cast<TokenId>((seed / 7) % 4);
  return q;
}

double sum_lp(const Passage& p, const std::vector<double>& probs) {
  double s = 0.0;
  for (TokenId t : p.token_ids) s += std::log(probs[t]);
  return s;
}

}  // namespace

TEST(Likelihood, UniformRowsGiveMinusLogV) {
  const auto d = dists_from_probs({{0.25, 0.25, 0.25, 0.25}, {0.25, 0.25, 0.25, 0.25}});
  EXPECT_NEAR(likelihood_score(passage_of({0, 3}), d).value, -1.3862943611198906, 1e-12);
}

TEST(Likelihood, MeanOfTokenLogprobs) {
  const auto d = dists_from_probs({{0.5, 0.5}, {0.75, 0.25}});
  EXPECT_NEAR(likelihood_score(passage_of({0, 1}), d).value, -1.0397207708399179, 1e-12);
}

TEST(Entropy, NegatedMeanEntropy) {
  const auto d = dists_from_probs({{0.25, 0.5, 0.25}, {0.25, 0.5, 0.25}});
  const auto s = entropy_score(passage_of({0, 2}), d);
  EXPECT_NEAR(s.value, -1.0397207708399179, 1e-12);
  EXPECT_NEAR(s.aux.at("mean_entropy"), 1.0397207708399179, 1e-12);
}

TEST(LogRank, NegatedMeanLogRank) {
  const auto d = dists_from_probs({{0.25, 0.5, 0.25}, {0.25, 0.5, 0.25}});
  EXPECT_NEAR(logrank_score(passage_of({0, 0}), d).value, -0.6931471805599453, 1e-12);
  EXPECT_NEAR(logrank_score(passage_of({1, 1}), d).value, 0.0, 1e-15);
}

TEST(Lrr, RatioOfLikelihoodToLogRank) {
  const auto d = dists_from_probs({{0.25, 0.5, 0.25}, {0.25, 0.5, 0.25}});
  const auto s = lrr_score(passage_of({0, 0}), d);
  EXPECT_NEAR(s.value, 2.0, 1e-12);
  EXPECT_EQ(s.aux.count("sentinel"), 0u);
}

TEST(Lrr, SentinelWhenEveryTokenIsTopRanked) {
  const auto d = dists_from_probs({{0.25, 0.5, 0.25}});
  const auto s = lrr_score(passage_of({1}), d);
  EXPECT_EQ(s.value, kScoreSentinel);
  EXPECT_EQ(s.aux.at("sentinel"), 1.0);
}

TEST(DetectorId, NamesRoundTrip) {
  for (DetectorId id : kAllDetectors) EXPECT_EQ(parse_detector_id(to_string(id)), id);
  EXPECT_THROW(parse_detector_id("roberta"), Error);
}

TEST(Spans, CountIsCeilOfMaskedTokensOverSpanLength) {
  PerturbConfig cfg;
  EXPECT_EQ(span_count(100, cfg), 8u);
  EXPECT_EQ(span_count(40, cfg), 3u);
  cfg.span_length = 1;
  EXPECT_EQ(span_count(100, cfg), 15u);
}

TEST(Spans, NonOverlappingAndInRange) {
  PerturbConfig cfg;
  Rng rng(4);
  std::vector<int> covered(60, 0);
  for (int t = 0; t < 2000; ++t) {
    const auto starts = choose_spans(60, cfg, rng);
    ASSERT_EQ(starts.size(), 5u);
    for (std::size_t i = 0; i < starts.size(); ++i) {
      ASSERT_LE(starts[i] + cfg.span_length, 60u);
      if (i > 0) ASSERT_GE(starts[i], starts[i - 1] + cfg.span_length);
      for (std::size_t j = 0; j < cfg.span_length; ++j) ++covered[starts[i] + j];
    }
  }
  for (int c : covered) EXPECT_GT(c, 0);
}

TEST(Spans, ShortPassageRejected) {
  PerturbConfig cfg;
  Rng rng(1);
  try {
    choose_spans(10, cfg, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPassageTooShort);
  }
}

TEST(Perturb, ChangesOnlyMaskedSpans) {
  const auto model = std::make_shared<const lm::NgramModel>(lm::train_on_text(prose::generate_documents({.seed = 2, .documents = 30})));
  const Passage p = lm::tokenize(prose::generate_documents({.seed = 99, .documents = 1})[0], model->vocab());
  PerturbConfig cfg;
  Rng rng(perturbation_seed(5, 0));
  const auto starts = choose_spans(p.size(), cfg, rng);
  std::set<std::size_t> masked;
  for (std::size_t s : starts) {
    for (std::size_t j = 0; j < cfg.span_length; ++j) masked.insert(s + j);
  }
  const Passage q = perturb_resample(p, next_token_fn(model), model->vocab_size(), cfg, perturbation_seed(5, 0));
  ASSERT_EQ(q.size(), p.size());
  std::size_t diff = 0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (!masked.count(j)) EXPECT_EQ(q.token_ids[j], p.token_ids[j]) << j;
    diff += q.token_ids[j] != p.token_ids[j] ? 1 : 0;
  }
  EXPECT_GT(diff, 0u);
  EXPECT_EQ(q.token_ids, perturb_resample(p, next_token_fn(model), model->vocab_size(), cfg, perturbation_seed(5, 0)).token_ids);
}

TEST(DetectGpt, MatchesHandComputation) {
  const std::vector<double> probs = {0.4, 0.3, 0.2, 0.1};
  auto backend = std::make_shared<TableBackend>(4, constant_rows(probs));
  const Passage p = passage_of({0, 1, 0, 2, 3, 0});
  PerturbConfig cfg;
  cfg.count = 7;
  cfg.seed = 3;
  const auto s = detectgpt_score(p, toy_perturb, *backend, cfg);
  std::vector<double> lps;
  for (std::size_t k = 0; k < 7; ++k) lps.push_back(sum_lp(toy_perturb(p, perturbation_seed(3, k)), probs));
  double mean = 0.0;
  for (double v : lps) mean += v;
  mean /= 7.0;
  double ss = 0.0;
  for (double v : lps) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / 6.0);
  EXPECT_NEAR(s.aux.at("perturbed_mean"), mean, 1e-12);
  EXPECT_NEAR(s.aux.at("perturbed_std"), sd, 1e-12);
  EXPECT_NEAR(s.value, (sum_lp(p, probs) - mean) / sd, 1e-10);
  EXPECT_EQ(s.calls_used, 8u);
  EXPECT_EQ(backend->calls(), 8u);
}

TEST(DetectGpt, UnnormalizedIsBareGap) {
  const std::vector<double> probs = {0.4, 0.3, 0.2, 0.1};
  auto backend = std::make_shared<TableBackend>(4, constant_rows(probs));
  const Passage p = passage_of({0, 1, 0, 2, 3, 0});
  PerturbConfig cfg;
  cfg.count = 5;
  cfg.normalize = false;
  const auto s = detectgpt_score(p, toy_perturb, *backend, cfg);
  EXPECT_NEAR(s.value, sum_lp(p, probs) - s.aux.at("perturbed_mean"), 1e-12);
}

TEST(DetectGpt, IdenticalPerturbationsAreDegenerate) {
  auto backend = std::make_shared<TableBackend>(4, constant_rows({0.4, 0.3, 0.2, 0.1}));
  PerturbConfig cfg;
  cfg.count = 4;
  const auto s = detectgpt_score(passage_of({0, 1, 2}), [](const Passage& q, std::uint64_t) { return q; }, *backend, cfg);
  EXPECT_EQ(s.value, 0.0);
  EXPECT_EQ(s.aux.at("degenerate"), 1.0);
}

TEST(Npr, RatioOfMeanPerturbedLogRank) {
  const std::vector<double> probs = {0.4, 0.3, 0.2, 0.1};
  auto backend = std::make_shared<TableBackend>(4, constant_rows(probs));
  const Passage p = passage_of({1, 2, 3, 1, 0});
  PerturbConfig cfg;
  cfg.count = 6;
  cfg.seed = 8;
  const auto s = npr_score(p, toy_perturb, *backend, cfg);
  // Ranks under a fixed descending row are token id + 1.
  auto lr = [](const Passage& q) {
    double t = 0.0;
    for (TokenId id : q.token_ids) t += std::log(static_cast<double>(id + 1));
    return t;
  };
  double mean = 0.0;
  for (std::size_t k = 0; k < 6; ++k) mean += lr(toy_perturb(p, perturbation_seed(8, k)));
  mean /= 6.0;
  EXPECT_NEAR(s.value, mean / lr(p), 1e-12);
  EXPECT_EQ(s.calls_used, 7u);
  EXPECT_EQ(backend->calls(), 7u);
}

TEST(Npr, SentinelOnAllTopRankedPassage) {
  auto backend = std::make_shared<TableBackend>(4, constant_rows({0.4, 0.3, 0.2, 0.1}));
  PerturbConfig cfg;
  cfg.count = 2;
  const auto s = npr_score(passage_of({0, 0, 0}), toy_perturb, *backend, cfg);
  EXPECT_EQ(s.value, kScoreSentinel);
  EXPECT_EQ(s.aux.at("sentinel"), 1.0);
}

TEST(DnaGpt, GapBetweenContinuationAndCompletions) {
  const auto model = std::make_shared<const lm::NgramModel>(lm::train_on_text(prose::generate_documents({.seed = 2, .documents = 30})));
  auto scoring = std::make_shared<LocalModelBackend>(model);
  auto generator = std::make_shared<LocalModelBackend>(model, "gen");
  const Passage p = lm::tokenize(prose::generate_documents({.seed = 50, .documents = 1})[0], model->vocab());
  DnaGptConfig cfg;
  cfg.completions = 4;
  cfg.seed = 12;
  cfg.decoding = lm::DecodingConfig::with_top_k(20);
  const auto s = dna_gpt_score(p, *generator, *scoring, cfg);
  const std::size_t cut = p.size() / 2;
  auto tail_mean = [&](const Passage& q) {
    const auto d = lm::predict_dists(*model, q);
    double t = 0.0;
    for (std::size_t j = cut; j < q.size(); ++j) t += d.row(j)[q.token_ids[j]];
    return t / static_cast<double>(q.size() - cut);
  };
  Passage prefix;
  prefix.token_ids.assign(p.token_ids.begin(), p.token_ids.begin() + static_cast<std::ptrdiff_t>(cut));
  double mean = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    lm::DecodingConfig dec = cfg.decoding;
    dec.seed = derive_seed(12, {0x444E, k});
    mean += tail_mean(lm::generate(*model, prefix, p.size() - cut, dec));
  }
  mean /= 4.0;
  EXPECT_NEAR(s.value, tail_mean(p) - mean, 1e-10);
  EXPECT_EQ(s.calls_used, 5u);
  EXPECT_EQ(scoring->calls(), 5u);
  EXPECT_EQ(generator->calls(), 0u);
}

TEST(DnaGpt, NeedsGeneratingBackend) {
  auto table = std::make_shared<TableBackend>(4, constant_rows({0.4, 0.3, 0.2, 0.1}));
  DnaGptConfig cfg;
  try {
    dna_gpt_score(passage_of({0, 1, 2, 3}), *table, *table, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnsupported);
  }
}

TEST(FastCurvatureDetector, CountsOneCallWhenModelsCoincide) {
  auto a = std::make_shared<TableBackend>(4, constant_rows({0.4, 0.3, 0.2, 0.1}), "a");
  auto b = std::make_shared<TableBackend>(4, constant_rows({0.25, 0.25, 0.25, 0.25}), "b");
  const Passage p = passage_of({0, 1, 2});
  const FastCurvatureDetector same(a, a);
  EXPECT_EQ(same.score(p, 0).calls_used, 1u);
  EXPECT_EQ(a->calls(), 1u);
  const FastCurvatureDetector cross(a, b);
  const auto s = cross.score(p, 0);
  EXPECT_EQ(s.calls_used, 2u);
  EXPECT_EQ(a->calls(), 2u);
  EXPECT_EQ(b->calls(), 1u);
  // Uniform sampling model: mu = mean of ln p over the row.
  const double mu1 = 0.25 * (std::log(0.4) + std::log(0.3) + std::log(0.2) + std::log(0.1));
  EXPECT_NEAR(s.aux.at("mu_tilde"), 3.0 * mu1, 1e-12);
}

TEST(FastCurvatureDetector, RejectsMismatchedVocabularies) {
  auto a = std::make_shared<TableBackend>(4, constant_rows({0.4, 0.3, 0.2, 0.1}));
  auto b = std::make_shared<TableBackend>(2, constant_rows({0.5, 0.5}));
  EXPECT_THROW(FastCurvatureDetector(a, b), Error);
}

TEST(PerturbationDetector, SeedDrivesPerturbations) {
  auto backend = std::make_shared<TableBackend>(4, constant_rows({0.4, 0.3, 0.2, 0.1}));
  PerturbConfig cfg;
  cfg.count = 5;
  const PerturbationDetector d(DetectorId::kDetectGpt, backend, toy_perturb, cfg);
  const Passage p = passage_of({0, 1, 2, 3, 0, 1, 2});
  EXPECT_EQ(d.score(p, 10).value, d.score(p, 10).value);
  EXPECT_NE(d.score(p, 10).value, d.score(p, 11).value);
}
