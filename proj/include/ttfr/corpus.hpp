// Copyright 2026 The ttfr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

namespace ttfr {

enum class CorpusStyle {
  // Template English: determiner, adjective, noun, verb, prepositional tail.
  kEnglish,
  // Pseudo-words over a fixed syllable lexicon with a sparse bigram chain;
  // shares no words with kEnglish.
  kSyllabic,
  // Same construction over a 1024-word lexicon.
  kSyllabicLarge,
};

// Deterministic synthetic text of exactly n_bytes bytes.
std::string make_toy_corpus(uint64_t seed, size_t n_bytes, CorpusStyle style);

}  // namespace ttfr
