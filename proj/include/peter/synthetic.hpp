// Copyright 2026 The PETER Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Generated gazetteer corpus for desk-scale end-to-end runs. Entity mentions
// come from a fixed lexicon of one- to three-token terms whose head words
// carry clinical suffixes; sentences place them after context cues such as
// "diagnosed with" or "history of", mixed with entity-free sentences.

#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "peter/corpus.hpp"
#include "peter/rng.hpp"

namespace peter {

struct GazetteerOptions {
  std::size_t sentences = 5000;
  std::size_t lexicon_size = 200;
  std::uint64_t seed = 2021;
  std::string entity_type = "disease";
  /// Share of sentences that contain no entity.
  double empty_share = 0.25;
};

namespace detail {

inline std::string pick(SplitMix64& rng, const std::vector<std::string>& v) {
  return v[rng.below(v.size())];
}

inline std::string make_word(SplitMix64& rng, std::size_t syllables, const std::string& suffix) {
  static const std::vector<std::string> onset{"b", "c", "d", "f", "g", "h", "l", "m", "n", "p",
                                              "r", "s", "t", "v", "pr", "tr", "st", "gl", "cr", "ph"};
  static const std::vector<std::string> vowel{"a", "e", "i", "o", "u", "ae", "ou"};
  std::string w;
  for (std::size_t i = 0; i < syllables; ++i) w += pick(rng, onset) + pick(rng, vowel);
  return w + suffix;
}

}  // namespace detail

/// Lexicon terms, each a list of tokens.
inline std::vector<std::vector<std::string>> gazetteer_lexicon(const GazetteerOptions& opt) {
  SplitMix64 rng(derive_seed(opt.seed, 11));
  static const std::vector<std::string> suffixes{"itis", "oma", "osis", "emia", "pathy", "algia", "ectasia"};
  static const std::vector<std::string> modifiers{"familial", "hereditary", "congenital", "idiopathic",
                                                  "juvenile"};
  static const std::vector<std::string> heads{"syndrome", "disease", "disorder", "deficiency"};
  std::set<std::string> seen;
  std::vector<std::vector<std::string>> lex;
  while (lex.size() < opt.lexicon_size) {
    std::vector<std::string> term;
    const auto shape = rng.below(10);
    if (shape < 2) term.push_back(detail::pick(rng, modifiers));
    term.push_back(detail::make_word(rng, 2 + rng.below(2), detail::pick(rng, suffixes)));
    if (shape >= 7) term.push_back(detail::pick(rng, heads));
    std::string key;
    for (const auto& t : term) key += t + " ";
    if (seen.insert(key).second) lex.push_back(std::move(term));
  }
  return lex;
}

/// Builds the tagged corpus (IOB2, one entity type, default ids).
inline Corpus gazetteer_corpus(const GazetteerOptions& opt = {}) {
  const auto lexicon = gazetteer_lexicon(opt);
  SplitMix64 rng(opt.seed);

  std::vector<std::string> fillers;
  {
    SplitMix64 wr(derive_seed(opt.seed, 12));
    static const std::vector<std::string> endings{"er", "ing", "ed", "ly", "ment", "al", "ure", "ion"};
    std::set<std::string> seen;
    while (fillers.size() < 300) {
      auto w = detail::make_word(wr, 1 + wr.below(2), detail::pick(wr, endings));
      if (seen.insert(w).second) fillers.push_back(w);
    }
  }
  static const std::vector<std::string> function_words{"the", "a", "of", "and", "in", "was", "with", "for",
                                                       "to", "on", "after", "during"};
  static const std::vector<std::vector<std::string>> cues{
      {"diagnosed", "with"}, {"history", "of"},  {"suffering", "from"}, {"treated", "for"},
      {"signs", "of"},       {"evidence", "of"}, {"presented", "with"}, {"affected", "by"},
      {"risk", "of"},        {"cases", "of"}};
  static const std::vector<std::string> openers{"The", "A", "This", "Our", "One", "Each"};
  static const std::vector<std::string> subjects{"patient", "child", "cohort", "study", "woman", "man",
                                                 "family", "report"};

  Corpus corpus;
  corpus.schema = TagSchema::iob2();
  corpus.entity_type = opt.entity_type;

  auto add_fillers = [&](Sentence& s, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      s.tokens.push_back(rng.below(3) == 0 ? detail::pick(rng, function_words) : detail::pick(rng, fillers));
      s.tags->push_back("O");
    }
  };
  auto add_words = [&](Sentence& s, const std::vector<std::string>& words) {
    for (const auto& w : words) {
      s.tokens.push_back(w);
      s.tags->push_back("O");
    }
  };
  auto add_entity = [&](Sentence& s) {
    const auto& term = lexicon[rng.below(lexicon.size())];
    for (std::size_t i = 0; i < term.size(); ++i) {
      s.tokens.push_back(term[i]);
      s.tags->push_back(i == 0 ? "B" : "I");
    }
  };

  for (std::size_t n = 0; n < opt.sentences; ++n) {
    Sentence s;
    s.id = default_sentence_id(n);
    s.tags.emplace();
    add_words(s, {detail::pick(rng, openers), detail::pick(rng, subjects)});
    if (rng.uniform() < opt.empty_share) {
      add_fillers(s, 4 + rng.below(8));
    } else {
      const std::size_t mentions = 1 + (rng.below(4) == 0 ? 1 : 0);
      for (std::size_t m = 0; m < mentions; ++m) {
        add_fillers(s, rng.below(3));
        if (m > 0) add_words(s, {"and"});
        add_words(s, rng.below(8) == 0 ? std::vector<std::string>{"was"} : cues[rng.below(cues.size())]);
        add_entity(s);
      }
      add_fillers(s, 1 + rng.below(5));
    }
    s.tokens.push_back(".");
    s.tags->push_back("O");
    corpus.sentences.push_back(std::move(s));
  }
  return corpus;
}

}  // namespace peter
