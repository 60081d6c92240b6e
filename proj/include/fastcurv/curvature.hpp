// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The fastcurv Authors

#pragma once

/**
 * Conditional probability curvature.
 *
 * For a passage x, a sampling distribution q and a scoring distribution p
 * (one row per position, both conditioned on the true prefix x_<j):
 *
 *   d(x) = (log p(x|x) - mu) / sigma
 *
 * where mu and sigma^2 are the mean and variance of log p(x~|x) for
 * alternatives x~ whose tokens are drawn independently per position from q.
 *
 * Two estimators are provided:
 *  - curvature_sampling:   Monte Carlo over N alternative passages, sample
 *                          variance with divisor N-1.
 *  - curvature_analytical: exact enumeration of the vocabulary per position;
 *                          positions are independent so moments add.
 *
 * A total variance at or below kDegenerateVariance means the alternatives
 * carry no spread; the score is then defined as 0 and the report is flagged.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fastcurv/distributions.hpp"
#include "fastcurv/error.hpp"
#include "fastcurv/numeric.hpp"

namespace fastcurv {

inline constexpr double kDegenerateVariance = 1e-12;
inline constexpr std::size_t kDefaultSampleCount = 10'000;

enum class Estimator { kSampling, kAnalytical };

struct PositionTerms {
  double logprob = 0.0;  // log p(x_j | x_<j)
  double mu = 0.0;       // E_q[log p] at j
  double var = 0.0;      // Var_q[log p] at j
};

struct CurvatureReport {
  double score = 0.0;
  double cond_logprob = 0.0;
  double mu_tilde = 0.0;
  double sigma_tilde = 0.0;
  Estimator estimator = Estimator::kAnalytical;
  std::size_t sample_count = 0;  // sampling only
  std::uint64_t seed = 0;        // sampling only
  bool degenerate = false;
  std::vector<PositionTerms> per_position;  // analytical only

  double numerator() const noexcept { return cond_logprob - mu_tilde; }
  /// Normalized score, or the bare numerator for the normalization ablation.
  double value(bool normalize) const noexcept { return normalize ? score : numerator(); }
};

struct DetectorConfig {
  std::size_t sample_count = kDefaultSampleCount;
  std::uint64_t seed = 0;
  double threshold = 1.5;
  bool normalize = true;
};

namespace detail {

inline void check_cover(const Passage& passage, const PredictiveDistributions& dists, const char* role) {
  if (dists.length() != passage.size()) {
    throw Error(ErrorCode::kLengthMismatch, std::string(role) + " distributions cover " +
                                                std::to_string(dists.length()) + " positions, passage has " +
                                                std::to_string(passage.size()));
  }
}

inline void check_same_shape(const PredictiveDistributions& a, const PredictiveDistributions& b) {
  if (a.length() != b.length() || a.vocab_size() != b.vocab_size()) {
    throw Error(ErrorCode::kLengthMismatch, "sampling and scoring distributions differ in shape");
  }
}

inline CurvatureReport finish(CurvatureReport r, double variance) {
  if (!(variance > kDegenerateVariance)) {
    r.sigma_tilde = 0.0;
    r.score = 0.0;
    r.degenerate = true;
  } else {
    r.sigma_tilde = std::sqrt(variance);
    r.score = (r.cond_logprob - r.mu_tilde) / r.sigma_tilde;
  }
  return r;
}

inline Rng position_stream(std::uint64_t seed, std::size_t position) {
  return Rng(derive_seed(seed, {static_cast<std::uint64_t>(position)}));
}

}  // namespace detail

/// log p(x|x) = sum_j log p(x_j | x_<j).
inline double conditional_logprob(const Passage& passage, const PredictiveDistributions& scoring) {
  detail::check_cover(passage, scoring, "scoring");
  CompensatedSum s;
  for (std::size_t j = 0; j < passage.size(); ++j) s.add(token_logprob(scoring, passage, j));
  return s.value();
}

/// Draws an N x L matrix (row-major, sample-major) of alternative tokens.
/// Position j uses its own stream derive_seed(seed, {j}); sample i is the
/// i-th draw of that stream, inverted through the CDF of exp(row j).
inline std::vector<TokenId> sample_alternatives(const PredictiveDistributions& sampling, std::size_t n,
                                                std::uint64_t seed) {
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "sample count must be positive");
  const std::size_t length = sampling.length();
  std::vector<TokenId> out(n * length);
  for (std::size_t j = 0; j < length; ++j) {
    const CategoricalSampler sampler(sampling.row(j));
    Rng rng = detail::position_stream(seed, j);
    for (std::size_t i = 0; i < n; ++i) out[i * length + j] = sampler.draw(rng);
  }
  return out;
}

/// Monte Carlo estimator. Per-sample totals are accumulated position by
/// position, so memory is O(N) rather than O(N x L); the draws are the same
/// as sample_alternatives(sampling, N, seed).
inline CurvatureReport curvature_sampling(const Passage& passage, const PredictiveDistributions& sampling,
                                          const PredictiveDistributions& scoring, const DetectorConfig& config) {
  detail::check_cover(passage, sampling, "sampling");
  detail::check_cover(passage, scoring, "scoring");
  detail::check_same_shape(sampling, scoring);
  const std::size_t n = config.sample_count;
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "sampling estimator needs at least two samples");

  std::vector<double> totals(n, 0.0);
  for (std::size_t j = 0; j < passage.size(); ++j) {
    const CategoricalSampler sampler(sampling.row(j));
    const auto scoring_row = scoring.row(j);
    Rng rng = detail::position_stream(config.seed, j);
    for (std::size_t i = 0; i < n; ++i) {
      const double lp = scoring_row[sampler.draw(rng)];
      if (lp == kNegInf) {
        throw Error(ErrorCode::kZeroProbabilityToken,
                    "sampled alternative has zero probability under the scoring model", {.row = j});
      }
      totals[i] += lp;
    }
  }

  CompensatedSum sum;
  for (double t : totals) sum.add(t);
  const double mean = sum.value() / static_cast<double>(n);
  CompensatedSum sq;
  for (double t : totals) sq.add((t - mean) * (t - mean));
  const double variance = sq.value() / static_cast<double>(n - 1);

  CurvatureReport r;
  r.estimator = Estimator::kSampling;
  r.sample_count = n;
  r.seed = config.seed;
  r.cond_logprob = conditional_logprob(passage, scoring);
  r.mu_tilde = mean;
  return detail::finish(std::move(r), variance);
}

/// Exact per-position moments of log p under q.
inline PositionTerms position_moments(std::span<const double> sampling_row, std::span<const double> scoring_row,
                                      std::size_t j = 0) {
  CompensatedSum m1;
  CompensatedSum m2;
  for (std::size_t v = 0; v < sampling_row.size(); ++v) {
    const double lq = sampling_row[v];
    if (lq == kNegInf) continue;
    const double lp = scoring_row[v];
    if (lp == kNegInf) {
      throw Error(ErrorCode::kZeroProbabilityToken,
                  "sampling model puts mass on a token the scoring model rules out", {.row = j, .col = v});
    }
    const double t = std::exp(lq) * lp;
    m1.add(t);
    m2.add(t * lp);
  }
  PositionTerms out;
  out.mu = m1.value();
  out.var = std::max(0.0, m2.value() - out.mu * out.mu);
  return out;
}

inline CurvatureReport curvature_analytical(const Passage& passage, const PredictiveDistributions& sampling,
                                            const PredictiveDistributions& scoring) {
  detail::check_cover(passage, sampling, "sampling");
  detail::check_cover(passage, scoring, "scoring");
  detail::check_same_shape(sampling, scoring);

  CurvatureReport r;
  r.estimator = Estimator::kAnalytical;
  r.per_position.reserve(passage.size());
  CompensatedSum lp_sum;
  CompensatedSum mu_sum;
  CompensatedSum var_sum;
  for (std::size_t j = 0; j < passage.size(); ++j) {
    PositionTerms t = position_moments(sampling.row(j), scoring.row(j), j);
    t.logprob = token_logprob(scoring, passage, j);
    lp_sum.add(t.logprob);
    mu_sum.add(t.mu);
    var_sum.add(t.var);
    r.per_position.push_back(t);
  }
  r.cond_logprob = lp_sum.value();
  r.mu_tilde = mu_sum.value();
  return detail::finish(std::move(r), var_sum.value());
}

struct IdentityCheck {
  double numerator = 0.0;      // log p(x|x) - mu, analytical, q = p
  double decomposition = 0.0;  // sum_j (log p(x_j|x_<j) + H_j)
};

/// With one model for both roles, the curvature numerator is the sum of the
/// likelihood and entropy baselines. Returns both routes for comparison.
inline IdentityCheck likelihood_entropy_identity_check(const Passage& passage, const PredictiveDistributions& dists) {
  const CurvatureReport r = curvature_analytical(passage, dists, dists);
  CompensatedSum s;
  for (std::size_t j = 0; j < passage.size(); ++j) {
    s.add(token_logprob(dists, passage, j));
    s.add(row_entropy(dists.row(j)));
  }
  return {r.numerator(), s.value()};
}

/// Algorithm verdict: machine iff score > epsilon (strict).
inline bool classify(const CurvatureReport& report, double epsilon) noexcept { return report.score > epsilon; }

}  // namespace fastcurv
