// Copyright 2026 The ttfr Authors
// SPDX-License-Identifier: Apache-2.0

#include "ttfr/corpus.hpp"

#include <array>
#include <string_view>
#include <vector>

#include "ttfr/rng.hpp"

namespace ttfr {

namespace {

template <size_t N>
std::string_view pick(Rng& rng, const std::array<std::string_view, N>& words) {
  return words[rng.below(N)];
}

void english_sentence(Rng& rng, std::string& out) {
  static constexpr std::array<std::string_view, 5> kDet = {"the", "a", "one", "every", "that"};
  static constexpr std::array<std::string_view, 12> kAdj = {
      "small", "red", "quiet", "old", "bright", "cold", "green", "tall", "soft", "dark", "happy",
      "slow"};
  static constexpr std::array<std::string_view, 16> kNoun = {
      "cat",  "dog",   "river", "house", "bird",  "tree",   "child", "stone",
      "boat", "city",  "horse", "field", "cloud", "garden", "lamp",  "road"};
  static constexpr std::array<std::string_view, 10> kVerb = {
      "sees", "finds", "likes", "follows", "watches", "carries", "meets", "hears", "paints",
      "remembers"};
  static constexpr std::array<std::string_view, 6> kPrep = {"near", "under", "behind", "over",
                                                            "beside", "across"};
  auto noun_phrase = [&](bool capital) {
    std::string det(pick(rng, kDet));
    if (capital) det[0] = static_cast<char>(det[0] - 'a' + 'A');
    out += det;
    if (rng.below(2) == 0) {
      out += ' ';
      out += pick(rng, kAdj);
    }
    out += ' ';
    out += pick(rng, kNoun);
  };
  noun_phrase(true);
  out += ' ';
  out += pick(rng, kVerb);
  out += ' ';
  noun_phrase(false);
  if (rng.below(3) == 0) {
    out += ' ';
    out += pick(rng, kPrep);
    out += ' ';
    noun_phrase(false);
  }
  out += rng.below(5) == 0 ? ".\n" : ". ";
}

struct SyllabicLexicon {
  std::vector<std::string> words;
  std::vector<std::vector<size_t>> successors;
};

// Fixed lexicons; independent of the corpus seed.
SyllabicLexicon build_lexicon(size_t n_words, size_t n_successors, size_t max_syllables) {
  static constexpr std::string_view kOnset = "bdfgklmnprstvz";
  static constexpr std::string_view kVowel = "aeiou";
  Rng rng(0x5EED5EEDULL);
  SyllabicLexicon l;
  while (l.words.size() < n_words) {
    std::string w;
    const size_t syllables = 1 + rng.below(max_syllables);
    for (size_t s = 0; s < syllables; ++s) {
      w += kOnset[rng.below(kOnset.size())];
      w += kVowel[rng.below(kVowel.size())];
    }
    if (rng.below(3) == 0) w += kOnset[rng.below(kOnset.size())];
    bool dup = false;
    for (const auto& x : l.words) dup = dup || x == w;
    if (!dup) l.words.push_back(w);
  }
  l.successors.assign(n_words, std::vector<size_t>(n_successors));
  for (auto& s : l.successors) {
    for (auto& id : s) id = rng.below(n_words);
  }
  return l;
}

const SyllabicLexicon& syllabic_lexicon(CorpusStyle style) {
  static const SyllabicLexicon small = build_lexicon(48, 4, 3);
  static const SyllabicLexicon large = build_lexicon(1024, 4, 4);
  return style == CorpusStyle::kSyllabicLarge ? large : small;
}

void syllabic_sentence(Rng& rng, const SyllabicLexicon& lex, std::string& out) {
  size_t w = rng.below(lex.words.size());
  const size_t len = 4 + rng.below(6);
  for (size_t i = 0; i < len; ++i) {
    if (i > 0) out += ' ';
    out += lex.words[w];
    // Successors are skewed towards the first entry.
    const uint64_t r = rng.below(8);
    const size_t slot = r < 4 ? 0 : (r < 6 ? 1 : (r < 7 ? 2 : 3));
    w = lex.successors[w][slot];
  }
  out += rng.below(4) == 0 ? ";\n" : ", ";
}

}  // namespace

std::string make_toy_corpus(uint64_t seed, size_t n_bytes, CorpusStyle style) {
  Rng rng(seed);
  std::string out;
  out.reserve(n_bytes + 128);
  while (out.size() < n_bytes) {
    if (style == CorpusStyle::kEnglish) {
      english_sentence(rng, out);
    } else {
      syllabic_sentence(rng, syllabic_lexicon(style), out);
    }
  }
  out.resize(n_bytes);
  return out;
}

}  // namespace ttfr
