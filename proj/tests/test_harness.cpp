// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The fastcurv Authors

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "fastcurv/desk.hpp"
#include "fastcurv/harness.hpp"
#include "fastcurv/report.hpp"
#include "test_util.hpp"

using namespace fastcurv;
using namespace fastcurv::testing;

namespace {

const DeskSetup& small_desk() {
  static const DeskSetup d = build_desk({.corpus_seed = 3, .documents = 160, .held_out = 40});
  return d;
}

// Pairwise AUROC straight from the definition.
double pairwise_auroc(const std::vector<double>& m, const std::vector<double>& h) {
  double wins = 0.0;
  for (double a : m) {
    for (double b : h) wins += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
  }
  return wins / static_cast<double>(m.size() * h.size());
}

// Scores a passage by its length; fails on passages with an odd first token.
class LengthDetector final : public Detector {
 public:
  DetectorId id() const override { return DetectorId::kLikelihood; }
  DetectorScore score(const Passage& p, std::uint64_t) const override {
    if (p.token_ids.front() % 2 == 1) throw Error(ErrorCode::kInvalidArgument, "odd start");
    return {.id = id(), .value = static_cast<double>(p.size()), .calls_used = 1};
  }
};

PairedDataset toy_dataset() {
  PairedDataset ds;
  ds.decoding = "greedy";
  ds.source = "toy";
  for (TokenId s : {0u, 2u, 1u, 4u}) {
    ds.items.push_back({passage_of({s, 0, 0}), passage_of({s, 0, 0, 0, 0})});
  }
  return ds;
}

}  // namespace

TEST(Roc, SmallHandExample) {
  const std::vector<double> m{0.9, 0.4};
  const std::vector<double> h{0.5, 0.1};
  EXPECT_DOUBLE_EQ(roc_auc(m, h).auroc, 0.75);
}

TEST(Roc, TiesCountHalf) {
  const std::vector<double> m{1.0, 1.0};
  const std::vector<double> h{1.0, 0.0};
  EXPECT_DOUBLE_EQ(roc_auc(m, h).auroc, 0.75);
  const std::vector<double> same{2.0};
  EXPECT_DOUBLE_EQ(roc_auc(same, same).auroc, 0.5);
}

TEST(Roc, MatchesPairwiseCountOnRandomSets) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> m(1 + rng.below(30));
    std::vector<double> h(1 + rng.below(30));
    // Coarse values force plenty of ties.
    for (double& x : m) x = static_cast<double>(rng.below(8));
    for (double& x : h) x = static_cast<double>(rng.below(6));
    EXPECT_NEAR(roc_auc(m, h).auroc, pairwise_auroc(m, h), 1e-15);
  }
}

TEST(Roc, CurveRunsFromOriginToCorner) {
  const std::vector<double> m{3.0, 2.0, 0.5};
  const std::vector<double> h{1.0, 0.0};
  const auto c = roc_auc(m, h);
  EXPECT_EQ(c.points.front(), std::make_pair(0.0, 0.0));
  EXPECT_EQ(c.points.back(), std::make_pair(1.0, 1.0));
  for (std::size_t i = 1; i < c.points.size(); ++i) {
    EXPECT_GE(c.points[i].first, c.points[i - 1].first);
    EXPECT_GE(c.points[i].second, c.points[i - 1].second);
  }
}

TEST(Roc, RejectsNanAndEmpty) {
  const std::vector<double> ok{1.0};
  const std::vector<double> nan{std::numeric_limits<double>::quiet_NaN()};
  try {
    roc_auc(nan, ok);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFinite);
  }
  try {
    roc_auc({}, ok);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyScoreSet);
  }
}

TEST(Roc, TprAtFprTakesBestAdmissiblePoint) {
  // Thresholds descending: m 4, h 3, m 2, h 1.
  const std::vector<double> m{4.0, 2.0};
  const std::vector<double> h{3.0, 1.0};
  const auto c = roc_auc(m, h);
  EXPECT_DOUBLE_EQ(tpr_at_fpr(c, 0.0), 0.5);
  EXPECT_DOUBLE_EQ(tpr_at_fpr(c, 0.49), 0.5);
  EXPECT_DOUBLE_EQ(tpr_at_fpr(c, 0.5), 1.0);
  EXPECT_THROW(tpr_at_fpr(c, 1.5), Error);
}

TEST(RelativeImprovement, HeadroomShare) {
  EXPECT_NEAR(relative_improvement(0.9887, 0.9554), 0.74663677130044, 1e-12);
  EXPECT_DOUBLE_EQ(relative_improvement(0.5, 0.5), 0.0);
  try {
    relative_improvement(1.0, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateBaseline);
  }
}

TEST(Transforms, CountsWordsAndSentences) {
  const Vocab& v = small_desk().model->vocab();
  const Passage p = lm::tokenize("the man walked . the dog ran , then slept ? the river", v);
  EXPECT_EQ(count_words(p, v), 10u);
  EXPECT_EQ(count_sentences(p, v), 3u);
}

TEST(Transforms, AttackPreservesTokensAndSentences) {
  const auto& desk = small_desk();
  const Vocab& v = desk.model->vocab();
  std::size_t changed_total = 0;
  for (std::size_t i = 0; i < desk.human.size(); ++i) {
    const Passage& p = desk.human[i];
    const Passage a = decoherence_attack(p, v, 100 + i);
    ASSERT_EQ(a.size(), p.size());
    auto x = p.token_ids;
    auto y = a.token_ids;
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    EXPECT_EQ(x, y);
    EXPECT_EQ(count_sentences(a, v), count_sentences(p, v));
    EXPECT_EQ(count_words(a, v), count_words(p, v));

    // Walk sentences; long ones change by at most one adjacent swap, short ones not at all.
    std::size_t start = 0;
    while (start < p.size()) {
      std::size_t end = start;
      while (end < p.size() && !lm::is_sentence_end_token(v.token(p.token_ids[end]))) ++end;
      std::size_t words = 0;
      std::vector<std::size_t> diff;
      for (std::size_t j = start; j < end; ++j) {
        words += lm::is_word_token(v.token(p.token_ids[j])) ? 1 : 0;
        if (p.token_ids[j] != a.token_ids[j]) diff.push_back(j);
      }
      if (words <= kAttackMinSentenceWords) {
        EXPECT_TRUE(diff.empty());
      } else if (!diff.empty()) {
        ASSERT_EQ(diff.size(), 2u);
        EXPECT_EQ(diff[1], diff[0] + 1);
        EXPECT_EQ(a.token_ids[diff[0]], p.token_ids[diff[1]]);
        ++changed_total;
      }
      if (end < p.size()) EXPECT_EQ(a.token_ids[end], p.token_ids[end]);
      start = end + 1;
    }
  }
  EXPECT_GT(changed_total, 0u);
}

TEST(Transforms, AttackIsSeeded) {
  const auto& desk = small_desk();
  const Vocab& v = desk.model->vocab();
  const Passage& p = desk.human.front();
  EXPECT_EQ(decoherence_attack(p, v, 9).token_ids, decoherence_attack(p, v, 9).token_ids);
}

TEST(Transforms, TruncateKeepsTargetWords) {
  const Vocab& v = small_desk().model->vocab();
  const Passage p = lm::tokenize("the man walked , slowly . the dog ran", v);
  const Passage t = truncate_passage(p, v, 4);
  EXPECT_EQ(count_words(t, v), 4u);
  EXPECT_EQ(v.token(t.token_ids.back()), "slowly");
  EXPECT_EQ(truncate_passage(p, v, 100).token_ids, p.token_ids);
  EXPECT_THROW(truncate_passage(p, v, 0), Error);
}

TEST(Dataset, BuildIsDeterministicAndShaped) {
  const auto& desk = small_desk();
  LocalModelBackend b(desk.model);
  const auto a = build_dataset(desk.human, b, 10, 30, desk_decoding(4));
  const auto c = build_dataset(desk.human, b, 10, 30, desk_decoding(4));
  ASSERT_EQ(a.size(), 10u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& it = a.items[i];
    EXPECT_EQ(it.machine.token_ids, c.items[i].machine.token_ids);
    EXPECT_EQ(it.machine.size(), it.human.size());
    EXPECT_TRUE(std::equal(it.human.token_ids.begin(), it.human.token_ids.begin() + 30, it.machine.token_ids.begin()));
    EXPECT_EQ(it.human.label, Label::kHuman);
    EXPECT_EQ(it.machine.label, Label::kMachine);
  }
  EXPECT_EQ(a.decoding, "p=0.96");
}

TEST(Dataset, CorpusTooSmall) {
  const auto& desk = small_desk();
  LocalModelBackend b(desk.model);
  try {
    build_dataset(desk.human, b, desk.human.size() + 1, 30, desk_decoding());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCorpusTooSmall);
  }
}

TEST(Runner, FailuresRecordedAsNan) {
  const auto ds = toy_dataset();
  const auto r = run_detector(ds, {"len", std::make_shared<LengthDetector>(), {}}, {});
  ASSERT_EQ(r.failures.size(), 2u);
  EXPECT_EQ(r.failures[0].item, 2u);
  EXPECT_FALSE(r.failures[0].machine);
  EXPECT_TRUE(r.failures[1].machine);
  EXPECT_TRUE(std::isnan(r.human_scores[2]));
  EXPECT_TRUE(std::isnan(r.machine_scores[2]));
  EXPECT_EQ(r.calls_used, 6u);
  ASSERT_TRUE(r.roc);
  EXPECT_DOUBLE_EQ(r.roc->auroc, 1.0);
}

TEST(Runner, ThreadCountDoesNotChangeScores) {
  const auto& desk = small_desk();
  auto b = std::make_shared<LocalModelBackend>(desk.model);
  const auto ds = build_dataset(desk.human, *b, 8, 30, desk_decoding(2));
  const DetectorConfig cfg{.sample_count = 500};
  const DetectorEntry e{"s", std::make_shared<FastCurvatureDetector>(b, b, Estimator::kSampling, cfg), {b}};
  const auto one = run_detector(ds, e, {.seed = 3, .threads = 1});
  const auto four = run_detector(ds, e, {.seed = 3, .threads = 4});
  EXPECT_EQ(one.machine_scores, four.machine_scores);
  EXPECT_EQ(one.human_scores, four.human_scores);
  EXPECT_EQ(one.backend_calls, 16u);
}

TEST(Report, JsonCarriesSchemaAndScores) {
  const auto ds = toy_dataset();
  const auto rep = run_benchmark(ds, {{"len", std::make_shared<LengthDetector>(), {}}}, {});
  const auto j = report_json(ds, rep, {});
  EXPECT_EQ(j["schema_version"], kReportSchemaVersion);
  EXPECT_EQ(j["dataset"]["items"], 4);
  const auto& d = j["detectors"][0];
  EXPECT_EQ(d["name"], "len");
  EXPECT_EQ(d["failures"], 2);
  EXPECT_EQ(d["human_scores"].size(), 4u);
  EXPECT_TRUE(d["human_scores"][2].is_null());
  EXPECT_TRUE(j["timing"].contains("wall_seconds"));
}

TEST(Report, SummaryCsvHasOneRowPerDetector) {
  const auto ds = toy_dataset();
  const auto det = std::make_shared<LengthDetector>();
  const auto rep = run_benchmark(ds, {{"a", det, {}}, {"b", det, {}}}, {});
  const std::string csv = summary_csv(rep, {});
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_EQ(csv.find("time"), std::string::npos);
}

TEST(Report, DatasetJsonlRoundTrip) {
  const auto& desk = small_desk();
  LocalModelBackend b(desk.model);
  const auto ds = build_dataset(desk.human, b, 6, 30, desk_decoding(8));
  const std::string text = dataset_jsonl(ds);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 12);
  const auto back = parse_dataset_jsonl(text, desk.model->vocab());
  ASSERT_EQ(back.size(), ds.size());
  EXPECT_EQ(back.decoding, ds.decoding);
  EXPECT_EQ(back.seed, ds.seed);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(back.items[i].human.token_ids, ds.items[i].human.token_ids);
    EXPECT_EQ(back.items[i].machine.token_ids, ds.items[i].machine.token_ids);
  }
}

TEST(Report, DatasetJsonlRejectsIncompletePairs) {
  const auto& desk = small_desk();
  LocalModelBackend b(desk.model);
  const auto ds = build_dataset(desk.human, b, 2, 30, desk_decoding(8));
  std::string text = dataset_jsonl(ds);
  text.resize(text.rfind('\n', text.size() - 2) + 1);
  EXPECT_THROW(parse_dataset_jsonl(text, desk.model->vocab()), Error);
}
