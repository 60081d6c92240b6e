// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The fastcurv Authors

#pragma once

// Small numeric building blocks shared by every module: compensated
// summation, one-pass moments, seed streams and the categorical sampler.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <span>
#include <vector>

namespace fastcurv {

/// Neumaier-compensated running sum. Adding terms in a fixed order gives
/// bit-stable results across runs.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Welford one-pass mean/variance.
class RunningMoments {
 public:
  void add(double x) noexcept {
    ++count_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (x - mean_);
  }
  std::size_t count() const noexcept { return count_; }
  double mean() const noexcept { return mean_; }
  /// Divisor n-1; zero when fewer than two observations.
  double sample_variance() const noexcept {
    return count_ < 2 ? 0.0 : m2_ / static_cast<double>(count_ - 1);
  }
  double population_variance() const noexcept {
    return count_ == 0 ? 0.0 : m2_ / static_cast<double>(count_);
  }

 private:
  std::size_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Derives an independent child seed from a base seed and a path of stream
/// indices, e.g. derive_seed(run_seed, {item, role}). Order of the path matters.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t s = splitmix64(base);
  for (std::uint64_t p : path) s = splitmix64(s ^ splitmix64(p + 0x632BE59BD9B4E019ULL));
  return s;
}

/// The library's random stream: std::mt19937_64 (output fully specified by
/// the standard) with uniforms built from the top 53 bits, so sequences are
/// identical on every conforming platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() noexcept {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  /// Uniform integer in [0, n), n > 0, by rejection on the raw 64-bit output.
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t r;
    do {
      r = engine_();
    } while (r >= limit);
    return r % n;
  }

 private:
  std::mt19937_64 engine_;
};

/// Categorical sampling by CDF inversion over a log-probability row.
///
/// The token returned for a uniform u is the smallest index i with
/// cdf[i] > u * cdf.back(), where cdf accumulates exp(row) in index order.
/// A guide table of |row| buckets jumps close to the answer; the result is
/// the same token a binary search over the CDF would give.
class CategoricalSampler {
 public:
  explicit CategoricalSampler(std::span<const double> logprobs) {
    const std::size_t n = logprobs.size();
    cdf_.resize(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double lp = logprobs[i];
      if (lp != -std::numeric_limits<double>::infinity()) acc += std::exp(lp);
      cdf_[i] = acc;
    }
    total_ = acc;
    guide_.resize(n);
    std::size_t i = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const double threshold = total_ * static_cast<double>(k) / static_cast<double>(n);
      while (i + 1 < n && !(cdf_[i] > threshold)) ++i;
      guide_[k] = static_cast<std::uint32_t>(i);
    }
  }

  std::size_t size() const noexcept { return cdf_.size(); }

  std::uint32_t draw(double u) const noexcept {
    const double target = u * total_;
    const std::size_t n = cdf_.size();
    auto bucket = static_cast<std::size_t>(u * static_cast<double>(n));
    if (bucket >= n) bucket = n - 1;
    std::size_t i = guide_[bucket];
    while (i > 0 && cdf_[i - 1] > target) --i;
    while (i + 1 < n && !(cdf_[i] > target)) ++i;
    return static_cast<std::uint32_t>(i);
  }

  std::uint32_t draw(Rng& rng) const noexcept { return draw(rng.uniform()); }

 private:
  std::vector<double> cdf_;
  std::vector<std::uint32_t> guide_;
  double total_ = 0.0;
};

}  // namespace fastcurv
