// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The fastcurv Authors

#pragma once

// The built-in small-scale setup: synthetic prose, a trigram model trained
// on most of it, and held-out documents as the human-written passages.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "fastcurv/lm.hpp"
#include "fastcurv/prose.hpp"

namespace fastcurv {

struct DeskConfig {
  std::uint64_t corpus_seed = 7;
  std::size_t documents = 4500;  // about 1.1M tokens
  std::size_t held_out = 300;
  lm::NgramParams params;
};

/// Default decoding for machine passages in the built-in setup.
inline lm::DecodingConfig desk_decoding(std::uint64_t seed = 0) { return lm::DecodingConfig::with_top_p(0.96, seed); }

struct DeskSetup {
  std::shared_ptr<const lm::NgramModel> model;
  std::vector<std::string> train_texts;
  std::vector<Passage> human;  // held-out documents, labeled human
};

inline DeskSetup build_desk(const DeskConfig& config = {}) {
  auto docs = prose::generate_documents({.seed = config.corpus_seed, .documents = config.documents});
  if (config.held_out >= docs.size()) throw Error(ErrorCode::kCorpusTooSmall, "held-out split exceeds corpus");
  DeskSetup desk;
  const auto split = docs.end() - static_cast<std::ptrdiff_t>(config.held_out);
  desk.train_texts.assign(docs.begin(), split);
  desk.model = std::make_shared<const lm::NgramModel>(lm::train_on_text(desk.train_texts, config.params));
  for (auto it = split; it != docs.end(); ++it) desk.human.push_back(lm::tokenize(*it, desk.model->vocab(), Label::kHuman));
  return desk;
}

}  // namespace fastcurv
