// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The fastcurv Authors

#pragma once

#include <cmath>
#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "fastcurv/backends.hpp"
#include "fastcurv/distributions.hpp"
#include "fastcurv/numeric.hpp"

namespace fastcurv::testing {

// Rows given as probabilities; zero becomes -inf.
inline PredictiveDistributions dists_from_probs(const std::vector<std::vector<double>>& rows) {
  const std::size_t V = rows.front().size();
  std::vector<double> buf;
  for (const auto& r : rows) {
    for (double p : r) buf.push_back(p > 0.0 ? std::log(p) : kNegInf);
  }
  return PredictiveDistributions(rows.size(), V, std::move(buf));
}

inline Passage passage_of(std::vector<TokenId> ids) {
  Passage p;
  p.token_ids = std::move(ids);
  return p;
}

// Dirichlet-ish random rows with a controllable spread.
inline PredictiveDistributions random_dists(Rng& rng, std::size_t L, std::size_t V, double sharpness = 3.0) {
  std::vector<double> buf(L * V);
  for (std::size_t j = 0; j < L; ++j) {
    double mx = -1e300;
    for (std::size_t v = 0; v < V; ++v) {
      buf[j * V + v] = sharpness * (2.0 * rng.uniform() - 1.0);
      mx = std::max(mx, buf[j * V + v]);
    }
    double s = 0.0;
    for (std::size_t v = 0; v < V; ++v) s += std::exp(buf[j * V + v] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t v = 0; v < V; ++v) buf[j * V + v] -= lse;
  }
  return PredictiveDistributions(L, V, std::move(buf));
}

inline Passage random_passage(Rng& rng, std::size_t L, std::size_t V) {
  Passage p;
  for (std::size_t j = 0; j < L; ++j) p.token_ids.push_back(static_cast<TokenId>(rng.below(V)));
  return p;
}

inline Vocab numbered_vocab(std::size_t V) {
  std::vector<std::string> toks;
  for (std::size_t v = 0; v < V; ++v) toks.push_back("t" + std::to_string(v));
  return Vocab(std::move(toks));
}

// Backend whose rows come from a callback; counts calls like any other.
class TableBackend final : public ScoringBackend {
 public:
  using RowsFn = std::function<PredictiveDistributions(const Passage&)>;
  TableBackend(std::size_t V, RowsFn fn, std::string id = "table") : vocab_(numbered_vocab(V)), fn_(std::move(fn)), id_(std::move(id)) {}

  std::string id() const override { return id_; }
  const Vocab& vocab() const override { return vocab_; }
  Capabilities capabilities() const override { return {}; }
  DistributionsPtr score_passage(const Passage& passage) override {
    check_compatible(passage);
    return finish_call(passage, std::make_shared<const PredictiveDistributions>(fn_(passage)));
  }

 private:
  Vocab vocab_;
  RowsFn fn_;
  std::string id_;
};

// Every position gets the same row.
inline TableBackend::RowsFn constant_rows(std::vector<double> probs) {
  return [probs](const Passage& p) {
    std::vector<std::vector<double>> rows(p.size(), probs);
    return dists_from_probs(rows);
  };
}

}  // namespace fastcurv::testing
