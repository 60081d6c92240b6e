// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The fastcurv Authors

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fastcurv {

enum class ErrorCode {
  kInvalidArgument,
  kNotNormalized,
  kNonFinite,
  kIndexOutOfRange,
  kZeroProbabilityToken,
  kLengthMismatch,
  kEmptyInput,
  kCorpusTooSmall,
  kPassageTooShort,
  kBackendUnavailable,
  kVocabMismatch,
  kTokenNotInTopK,
  kFormatError,
  kVersionUnsupported,
  kAuthError,
  kRateLimited,
  kTimeout,
  kDegenerateBaseline,
  kEmptyScoreSet,
  kUnsupported,
  kIoError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kNotNormalized: return "NotNormalized";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kZeroProbabilityToken: return "ZeroProbabilityToken";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kCorpusTooSmall: return "CorpusTooSmall";
    case ErrorCode::kPassageTooShort: return "PassageTooShort";
    case ErrorCode::kBackendUnavailable: return "BackendUnavailable";
    case ErrorCode::kVocabMismatch: return "VocabMismatch";
    case ErrorCode::kTokenNotInTopK: return "TokenNotInTopK";
    case ErrorCode::kFormatError: return "FormatError";
    case ErrorCode::kVersionUnsupported: return "VersionUnsupported";
    case ErrorCode::kAuthError: return "AuthError";
    case ErrorCode::kRateLimited: return "RateLimited";
    case ErrorCode::kTimeout: return "Timeout";
    case ErrorCode::kDegenerateBaseline: return "DegenerateBaseline";
    case ErrorCode::kEmptyScoreSet: return "EmptyScoreSet";
    case ErrorCode::kUnsupported: return "Unsupported";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

/// Error carrying a machine-readable code and optional location details
/// (row/column for matrix checks, byte offset for file parsing).
class Error : public std::runtime_error {
 public:
  struct Location {
    std::optional<std::size_t> row;
    std::optional<std::size_t> col;
    std::optional<std::size_t> offset;
  };

  Error(ErrorCode code, const std::string& message, Location where = {})
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        where_(where) {}

  ErrorCode code() const noexcept { return code_; }
  const Location& where() const noexcept { return where_; }

 private:
  ErrorCode code_;
  Location where_;
};

/// Server asked us to back off; retry_after_ms is 0 when no hint was given.
class RateLimitedError : public Error {
 public:
  RateLimitedError(const std::string& message, long retry_after_ms)
      : Error(ErrorCode::kRateLimited, message), retry_after_ms_(retry_after_ms) {}
  long retry_after_ms() const noexcept { return retry_after_ms_; }

 private:
  long retry_after_ms_;
};

}  // namespace fastcurv
