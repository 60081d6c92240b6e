// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The fastcurv Authors

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>

#include "fastcurv/bytes.hpp"
#include "fastcurv/lm.hpp"
#include "fastcurv/prose.hpp"

using namespace fastcurv;
using namespace fastcurv::lm;

namespace {

const std::vector<std::string> kTiny = {
    "the cat sat on the mat .",
    "the dog sat on the log .",
    "a cat saw the dog , and the dog ran .",
};

double prob_of(const NgramModel& m, std::vector<TokenId> history, TokenId w) {
  std::vector<double> row(m.vocab_size());
  m.next_token_probs(history, row);
  return row[w];
}

// Straight from the definition, counting n-grams afresh.
double interpolated_oracle(const std::vector<std::vector<TokenId>>& docs, std::size_t V, const NgramParams& prm,
                           const std::vector<TokenId>& history, TokenId w) {
  const int avail = std::min<int>(static_cast<int>(history.size()) + 1, prm.order);
  double lam_total = 0.0;
  for (int k = 1; k <= avail; ++k) lam_total += prm.lambdas[static_cast<std::size_t>(k - 1)];
  double p = 0.0;
  for (int k = 1; k <= avail; ++k) {
    const std::vector<TokenId> ctx(history.end() - (k - 1), history.end());
    double c_hw = 0.0;
    double c_h = 0.0;
    for (const auto& d : docs) {
      for (std::size_t j = static_cast<std::size_t>(k - 1); j < d.size(); ++j) {
        if (!std::equal(ctx.begin(), ctx.end(), d.begin() + static_cast<std::ptrdiff_t>(j - (k - 1)))) continue;
        c_h += 1.0;
        c_hw += d[j] == w ? 1.0 : 0.0;
      }
    }
    p += prm.lambdas[static_cast<std::size_t>(k - 1)] / lam_total * (c_hw + prm.alpha) / (c_h + prm.alpha * static_cast<double>(V));
  }
  return p;
}

}  // namespace

TEST(Tokenizer, SplitsWordsAndPunctuation) {
  const auto t = split_tokens("The Cat's  mat, (well-worn)! 42?");
  const std::vector<std::string> want = {"the", "cat's", "mat", ",", "(", "well-worn", ")", "!", "42", "?"};
  EXPECT_EQ(t, want);
}

TEST(Tokenizer, UnknownRunsCollapse) {
  const auto t = split_tokens("caf\xc3\xa9 <unk> ##");
  const std::vector<std::string> want = {"caf", "<unk>", "<unk>", "<unk>"};
  EXPECT_EQ(t, want);
}

TEST(Tokenizer, JoinInvertsSplitOnCanonicalText) {
  const std::string text = "she said (quietly) that the boat, old as it was, would float. would it?";
  EXPECT_EQ(join_tokens(split_tokens(text)), text);
}

TEST(Tokenizer, TokenizeMapsUnknownWordsToUnk) {
  const Vocab v({"<unk>", "the", "cat", "."});
  const Passage p = tokenize("the dog .", v);
  EXPECT_EQ(p.token_ids, (std::vector<TokenId>{1, 0, 3}));
  EXPECT_EQ(p.meta.at("unk_count"), "1");
  EXPECT_THROW(tokenize("   ", v), Error);
}

TEST(Tokenizer, WordAndSentenceClasses) {
  EXPECT_TRUE(is_word_token("cat"));
  EXPECT_FALSE(is_word_token(","));
  EXPECT_TRUE(is_sentence_end_token("?"));
  EXPECT_FALSE(is_sentence_end_token(";"));
}

TEST(Vocabulary, FrequencyThenLexicographic) {
  const Vocab v = build_vocab({{"b", "a", "b", "c", "a", "d"}}, 3);
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{"<unk>", "a", "b", "c"}));
}

TEST(Ngram, MatchesDefinitionOnTinyCorpus) {
  NgramParams prm;
  prm.alpha = 0.1;
  const NgramModel m = train_on_text(kTiny, prm);
  std::vector<std::vector<TokenId>> docs;
  for (const auto& d : kTiny) docs.push_back(tokenize(d, m.vocab()).token_ids);
  const auto id = [&](const char* s) { return *m.vocab().find(s); };
  const std::vector<std::vector<TokenId>> histories = {
      {}, {id("the")}, {id("the"), id("dog")}, {id("sat"), id("on")}, {id("mat"), id(".")}, {id(","), id("cat")}};
  for (const auto& h : histories) {
    for (TokenId w = 0; w < m.vocab_size(); ++w) {
      EXPECT_NEAR(prob_of(m, h, w), interpolated_oracle(docs, m.vocab_size(), prm, h, w), 1e-14);
    }
  }
}

TEST(Ngram, OnlyLastTwoTokensMatterForTrigram) {
  const NgramModel m = train_on_text(kTiny);
  const auto id = [&](const char* s) { return *m.vocab().find(s); };
  for (TokenId w = 0; w < m.vocab_size(); ++w) {
    EXPECT_EQ(prob_of(m, {id("dog"), id("sat"), id("on")}, w), prob_of(m, {id("sat"), id("on")}, w));
  }
}

TEST(Ngram, RowsAreNormalized) {
  const NgramModel m = train_on_text(prose::generate_documents({.seed = 3, .documents = 40}));
  Rng rng(1);
  std::vector<double> row(m.vocab_size());
  for (int t = 0; t < 50; ++t) {
    std::vector<TokenId> h;
    for (std::size_t i = 0, n = rng.below(4); i < n; ++i) h.push_back(static_cast<TokenId>(rng.below(m.vocab_size())));
    m.next_token_logprobs(h, row);
    EXPECT_NEAR(row_logsumexp(row), 0.0, 1e-12);
    for (double v : row) EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(Ngram, CounterMergeEqualsJointTraining) {
  const NgramModel whole = train_on_text(kTiny);
  std::vector<std::vector<TokenId>> docs;
  for (const auto& d : kTiny) docs.push_back(tokenize(d, whole.vocab()).token_ids);
  NgramCounter a(whole.vocab_size(), 3);
  NgramCounter b(whole.vocab_size(), 3);
  a.add_document(docs[2]);
  b.add_document(docs[0]);
  b.add_document(docs[1]);
  a.merge(b);
  const NgramModel merged(whole.vocab(), a, whole.params());
  EXPECT_TRUE(merged == whole);
}

TEST(Ngram, RejectsBadParameters) {
  NgramParams prm;
  prm.alpha = 0.0;
  EXPECT_THROW(train_on_text(kTiny, prm), Error);
  prm = {};
  prm.lambdas = {0.5, 0.5};
  EXPECT_THROW(train_on_text(kTiny, prm), Error);
  EXPECT_THROW(train_on_text({"a"}), Error);
}

TEST(ModelFile, RoundTripIsExact) {
  const NgramModel m = train_on_text(kTiny);
  const std::string bytes = m.serialize();
  const NgramModel back = NgramModel::deserialize(bytes);
  EXPECT_TRUE(back == m);
  EXPECT_EQ(back.serialize(), bytes);
}

TEST(ModelFile, CorruptionDetected) {
  const std::string bytes = train_on_text(kTiny).serialize();
  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x20;
  try {
    NgramModel::deserialize(flipped);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFormatError);
  }
  EXPECT_THROW(NgramModel::deserialize(bytes.substr(0, bytes.size() - 9)), Error);
}

TEST(ModelFile, FutureVersionRejected) {
  std::string bytes = train_on_text(kTiny).serialize();
  std::string body = bytes.substr(0, bytes.size() - 4);
  body[4] = 9;  // version lives after the 4-byte magic
  ByteWriter w;
  w.raw(body);
  w.crc_trailer();
  try {
    NgramModel::deserialize(w.take());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kVersionUnsupported);
  }
}

TEST(Decoding, TopKKeepsLargest) {
  const std::vector<double> row = {std::log(0.1), std::log(0.4), std::log(0.2), std::log(0.3)};
  const auto out = apply_decoding(row, DecodingConfig::with_top_k(2));
  EXPECT_EQ(out[0], kNegInf);
  EXPECT_EQ(out[2], kNegInf);
  EXPECT_NEAR(std::exp(out[1]), 4.0 / 7.0, 1e-12);
  EXPECT_NEAR(std::exp(out[3]), 3.0 / 7.0, 1e-12);
}

TEST(Decoding, TopPKeepsCrossingToken) {
  const std::vector<double> row = {std::log(0.5), std::log(0.3), std::log(0.15), std::log(0.05)};
  const auto out = apply_decoding(row, DecodingConfig::with_top_p(0.7));
  EXPECT_NEAR(std::exp(out[0]), 0.625, 1e-12);
  EXPECT_NEAR(std::exp(out[1]), 0.375, 1e-12);
  EXPECT_EQ(out[2], kNegInf);
  EXPECT_EQ(out[3], kNegInf);
}

TEST(Decoding, TemperatureSharpens) {
  const std::vector<double> row = {std::log(0.75), std::log(0.25)};
  const auto out = apply_decoding(row, DecodingConfig::with_temperature(0.5));
  EXPECT_NEAR(std::exp(out[0]), 0.9, 1e-12);
  EXPECT_NEAR(std::exp(out[1]), 0.1, 1e-12);
}

TEST(Decoding, DescribeParseRoundTrip) {
  for (const char* s : {"pure", "k=40", "p=0.96", "T=0.8", "k=30,p=0.9,T=0.6"}) {
    EXPECT_EQ(DecodingConfig::parse(s).describe(), s);
  }
  EXPECT_EQ(DecodingConfig::parse("top_p:0.9").describe(), "p=0.9");
  EXPECT_THROW(DecodingConfig::parse("p=1.5"), Error);
  EXPECT_THROW(DecodingConfig::parse("q=3"), Error);
  EXPECT_THROW(DecodingConfig::parse("k"), Error);
}

TEST(Generate, DeterministicAndPrefixed) {
  const NgramModel m = train_on_text(prose::generate_documents({.seed = 3, .documents = 40}));
  const Passage prefix = tokenize("the old boat", m.vocab());
  const auto a = generate(m, prefix, 50, DecodingConfig::with_top_k(10, 5));
  const auto b = generate(m, prefix, 50, DecodingConfig::with_top_k(10, 5));
  const auto c = generate(m, prefix, 50, DecodingConfig::with_top_k(10, 6));
  EXPECT_EQ(a.token_ids, b.token_ids);
  EXPECT_NE(a.token_ids, c.token_ids);
  ASSERT_EQ(a.size(), prefix.size() + 50);
  EXPECT_TRUE(std::equal(prefix.token_ids.begin(), prefix.token_ids.end(), a.token_ids.begin()));
  EXPECT_EQ(a.label, Label::kMachine);
  EXPECT_THROW(generate(m, Passage{}, 5, {}), Error);
}

TEST(Generate, GreedyUnderTopKOne) {
  const NgramModel m = train_on_text(kTiny);
  const Passage prefix = tokenize("the cat", m.vocab());
  const auto g = generate(m, prefix, 3, DecodingConfig::with_top_k(1, 99));
  std::vector<TokenId> hist = prefix.token_ids;
  for (int s = 0; s < 3; ++s) {
    std::vector<double> row(m.vocab_size());
    m.next_token_probs(hist, row);
    hist.push_back(static_cast<TokenId>(std::max_element(row.begin(), row.end()) - row.begin()));
  }
  EXPECT_EQ(g.token_ids, hist);
}

TEST(Perplexity, BelowUniformOnHeldOut) {
  const auto docs = prose::generate_documents({.seed = 4, .documents = 120});
  const std::vector<std::string> train(docs.begin(), docs.end() - 20);
  const NgramModel m = train_on_text(train);
  std::vector<Passage> held;
  for (auto it = docs.end() - 20; it != docs.end(); ++it) held.push_back(tokenize(*it, m.vocab()));
  const double ppl = perplexity(m, held);
  EXPECT_GT(ppl, 1.0);
  EXPECT_LT(ppl, static_cast<double>(m.vocab_size()) / 4.0);
}

TEST(Prose, DeterministicPerSeed) {
  const auto a = prose::generate_documents({.seed = 9, .documents = 5});
  const auto b = prose::generate_documents({.seed = 9, .documents = 5});
  const auto c = prose::generate_documents({.seed = 10, .documents = 5});
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  for (const auto& d : a) {
    std::size_t words = 0;
    for (const auto& t : split_tokens(d)) words += is_word_token(t) ? 1 : 0;
    EXPECT_GE(words, 150u);
    EXPECT_EQ(join_tokens(split_tokens(d)), d);
  }
}
