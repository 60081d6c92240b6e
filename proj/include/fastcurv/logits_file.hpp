// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The fastcurv Authors

#pragma once

// Logits file: one passage and its L x V log-probability rows.
//
//   "CLGT"  u16 version  u32 V  u32 L
//   V x (u32 len, utf-8 bytes)      vocabulary
//   L x u32                         token ids
//   L x V x f64                     log-probs, row-major
//   u32 crc32                       over every preceding byte
//
// All integers and doubles are little-endian.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "fastcurv/bytes.hpp"
#include "fastcurv/distributions.hpp"
#include "fastcurv/error.hpp"

namespace fastcurv {

inline constexpr std::string_view kLogitsMagic = "CLGT";
inline constexpr std::uint16_t kLogitsVersion = 1;

struct LogitsRecord {
  Vocab vocab;
  Passage passage;
  PredictiveDistributions dists;
};

inline std::string encode_logits(const Vocab& vocab, const Passage& passage, const PredictiveDistributions& dists) {
  if (dists.length() != passage.size() || dists.vocab_size() != vocab.size()) {
    throw Error(ErrorCode::kLengthMismatch, "passage, vocabulary and distributions disagree in shape");
  }
  ByteWriter w;
  w.raw(kLogitsMagic);
  w.u16(kLogitsVersion);
  w.u32(static_cast<std::uint32_t>(vocab.size()));
  w.u32(static_cast<std::uint32_t>(passage.size()));
  for (const auto& tok : vocab.tokens()) w.str(tok);
  for (TokenId id : passage.token_ids) w.u32(id);
  for (double v : dists.data()) w.f64(v);
  w.crc_trailer();
  return w.take();
}

/// Parses and validates. Errors carry the byte offset where reading failed.
inline LogitsRecord decode_logits(std::string_view bytes) {
  {
    ByteReader head(bytes);
    if (head.raw(4, "magic") != kLogitsMagic) {
      throw Error(ErrorCode::kFormatError, "not a logits file (bad magic)", {.offset = 0});
    }
    const std::uint16_t version = head.u16("version");
    if (version != kLogitsVersion) {
      throw Error(ErrorCode::kVersionUnsupported, "logits file version " + std::to_string(version), {.offset = 4});
    }
  }
  ByteReader r(bytes);
  r.verify_crc_trailer();
  r.raw(6, "header");
  const std::uint32_t V = r.u32("vocab size");
  const std::uint32_t L = r.u32("length");
  if (V < 2) throw Error(ErrorCode::kFormatError, "vocabulary size below 2", {.offset = 6});
  // Each vocab entry needs at least 4 bytes; each row 8V bytes.
  if (static_cast<std::uint64_t>(V) * 4 > r.remaining() ||
      static_cast<std::uint64_t>(L) * (4 + 8ULL * V) > r.remaining()) {
    throw Error(ErrorCode::kFormatError, "declared shape exceeds file size", {.offset = r.offset()});
  }
  std::vector<std::string> tokens;
  tokens.reserve(V);
  for (std::uint32_t i = 0; i < V; ++i) tokens.push_back(r.str("vocab token"));
  LogitsRecord rec;
  try {
    rec.vocab = Vocab(std::move(tokens));
  } catch (const Error& e) {
    throw Error(ErrorCode::kFormatError, e.what(), {.offset = r.offset()});
  }
  rec.passage.token_ids.resize(L);
  for (auto& id : rec.passage.token_ids) {
    const std::size_t at = r.offset();
    id = r.u32("token id");
    if (id >= V) throw Error(ErrorCode::kFormatError, "token id outside vocabulary", {.offset = at});
  }
  std::vector<double> lp(static_cast<std::size_t>(L) * V);
  for (double& v : lp) v = r.f64("log-prob");
  if (r.remaining() != 0) throw Error(ErrorCode::kFormatError, "trailing bytes before checksum", {.offset = r.offset()});
  rec.dists = PredictiveDistributions(L, V, std::move(lp));
  validate(rec.dists);
  return rec;
}

inline void write_logits_file(const std::string& path, const Vocab& vocab, const Passage& passage,
                              const PredictiveDistributions& dists) {
  write_file_bytes(path, encode_logits(vocab, passage, dists));
}

inline LogitsRecord read_logits_file(const std::string& path) { return decode_logits(read_file_bytes(path)); }

}  // namespace fastcurv
