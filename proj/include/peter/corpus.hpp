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

#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "peter/error.hpp"
#include "peter/rng.hpp"
#include "peter/schema.hpp"

namespace peter {

/// A list of sentences sharing one schema and one entity type.
struct Corpus {
  std::vector<Sentence> sentences;
  TagSchema schema = TagSchema::iob2();
  std::string entity_type = "entity";

  std::size_t size() const { return sentences.size(); }
  bool empty() const { return sentences.empty(); }

  bool tagged() const {
    return std::all_of(sentences.begin(), sentences.end(),
                       [](const Sentence& s) { return s.tagged(); });
  }

  std::size_t token_count() const {
    std::size_t n = 0;
    for (const auto& s : sentences) n += s.size();
    return n;
  }

  /// Same sentences, schema and type, tags dropped.
  Corpus untagged() const {
    Corpus c = *this;
    for (auto& s : c.sentences) s.tags.reset();
    return c;
  }

  Corpus with_sentences(std::vector<Sentence> s) const {
    Corpus c{std::move(s), schema, entity_type};
    return c;
  }

  /// Enforces unique ids, non-empty sentences and tag membership.
  void check() const {
    std::unordered_set<std::string> ids;
    for (const auto& s : sentences) {
      if (!ids.insert(s.id).second) throw Error("duplicate sentence id '" + s.id + "'");
      check_sentence(s, schema);
    }
  }

  friend bool operator==(const Corpus& a, const Corpus& b) {
    return a.sentences == b.sentences && a.schema == b.schema && a.entity_type == b.entity_type;
  }
};

/// Id given to the i-th block of a file that carries no explicit id line.
inline std::string default_sentence_id(std::size_t index) { return "s" + std::to_string(index); }

struct ConllOptions {
  /// When false, blocks whose lines all have a single column load as
  /// untagged sentences.
  bool require_tags = true;
  /// Rewrite orphan inside tags instead of rejecting the sentence.
  bool repair = false;
};

namespace detail {

inline const std::string kIdPrefix = "# id = ";

inline std::vector<std::string> split_columns(const std::string& line) {
  std::vector<std::string> cols;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) cols.push_back(line.substr(i, j - i));
    i = j;
  }
  return cols;
}

inline bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\t'; });
}

}  // namespace detail

/// Parses CoNLL-style columns: token first, tag last, blank line between
/// sentences. A `# id = <id>` line before a block names the sentence.
/// CRLF line endings are accepted.
inline Corpus parse_conll(std::istream& in, const std::string& source, const TagSchema& schema,
                          const std::string& entity_type, const ConllOptions& opts = {}) {
  Corpus corpus;
  corpus.schema = schema;
  corpus.entity_type = entity_type;

  Sentence cur;
  std::optional<std::string> pending_id;
  std::size_t block_start = 0;
  int block_cols = 0;  // 0 unknown, 1 token-only, 2 tagged
  std::unordered_set<std::string> ids;

  auto flush = [&](std::size_t line_no) {
    if (cur.tokens.empty()) {
      if (pending_id)
        throw ParseError(source, line_no, "empty sentence block after id '" + *pending_id + "'");
      return;
    }
    cur.id = pending_id ? *pending_id : default_sentence_id(corpus.sentences.size());
    if (!ids.insert(cur.id).second)
      throw ParseError(source, block_start, "duplicate sentence id '" + cur.id + "'");
    if (cur.tags) {
      try {
        cur = validate_tags(cur, schema, opts.repair);
      } catch (const TagError& e) {
        throw ParseError(source, block_start, e.what());
      }
    }
    corpus.sentences.push_back(std::move(cur));
    cur = Sentence{};
    pending_id.reset();
    block_cols = 0;
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::is_blank(line)) {
      flush(line_no);
      continue;
    }
    if (cur.tokens.empty() && line.rfind(detail::kIdPrefix, 0) == 0) {
      if (pending_id) throw ParseError(source, line_no, "two id lines for one sentence");
      pending_id = line.substr(detail::kIdPrefix.size());
      if (pending_id->empty()) throw ParseError(source, line_no, "empty sentence id");
      continue;
    }
    auto cols = detail::split_columns(line);
    const int kind = cols.size() >= 2 ? 2 : 1;
    if (kind == 1 && opts.require_tags)
      throw ParseError(source, line_no, "expected at least 2 columns (token and tag), found 1");
    if (block_cols != 0 && kind != block_cols)
      throw ParseError(source, line_no, "column count differs from the rest of the sentence");
    if (cur.tokens.empty()) block_start = line_no;
    block_cols = kind;
    cur.tokens.push_back(cols.front());
    if (kind == 2) {
      if (!schema.index_of(cols.back()))
        throw ParseError(source, line_no,
                         "unknown tag '" + cols.back() + "' for schema " + schema.name());
      if (!cur.tags) cur.tags.emplace();
      cur.tags->push_back(cols.back());
    }
  }
  flush(line_no + 1);
  return corpus;
}

inline Corpus read_conll(const std::string& path, const TagSchema& schema,
                         const std::string& entity_type, const ConllOptions& opts = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path, 0, "cannot open file");
  return parse_conll(in, path, schema, entity_type, opts);
}

/// Writes LF-terminated lines, token TAB tag, with a blank line after every
/// sentence. Ids are written only when they differ from the positional
/// default, so plain files round-trip byte for byte.
inline void write_conll(std::ostream& out, const Corpus& corpus) {
  for (std::size_t i = 0; i < corpus.sentences.size(); ++i) {
    const Sentence& s = corpus.sentences[i];
    if (s.id != default_sentence_id(i)) out << detail::kIdPrefix << s.id << '\n';
    for (std::size_t j = 0; j < s.tokens.size(); ++j) {
      out << s.tokens[j];
      if (s.tags) out << '\t' << (*s.tags)[j];
      out << '\n';
    }
    out << '\n';
  }
}

inline std::string to_conll(const Corpus& corpus) {
  std::ostringstream os;
  write_conll(os, corpus);
  return os.str();
}

struct KShotSpec {
  std::size_t k = 0;
  std::uint64_t seed = 0;
};

struct KShotSplit {
  Corpus sample;
  Corpus rest;
  /// Set when k exceeded the corpus size and the whole corpus was returned.
  bool exhausted = false;
};

/// Draws min(k, n) distinct sentences uniformly without replacement with a
/// partial Fisher-Yates over the positions 0..n-1 driven by
/// SplitMix64(seed): for i in 0..m-1, swap(pos[i], pos[i + below(n - i)]).
/// Both halves keep the corpus order.
inline KShotSplit split_k_shot(const Corpus& corpus, const KShotSpec& spec) {
  const std::size_t n = corpus.size();
  const std::size_t m = std::min(spec.k, n);
  std::vector<std::size_t> pos(n);
  std::iota(pos.begin(), pos.end(), std::size_t{0});
  SplitMix64 rng(spec.seed);
  for (std::size_t i = 0; i < m; ++i) std::swap(pos[i], pos[i + rng.below(n - i)]);

  std::vector<char> picked(n, 0);
  for (std::size_t i = 0; i < m; ++i) picked[pos[i]] = 1;
  KShotSplit out{corpus.with_sentences({}), corpus.with_sentences({}), spec.k > n};
  for (std::size_t i = 0; i < n; ++i)
    (picked[i] ? out.sample : out.rest).sentences.push_back(corpus.sentences[i]);
  return out;
}

inline Corpus sample_k_shot(const Corpus& corpus, const KShotSpec& spec) {
  if (!corpus.tagged()) throw Error("k-shot sampling needs a tagged corpus");
  return split_k_shot(corpus, spec).sample;
}

struct CorpusStats {
  std::size_t sentences = 0;
  std::size_t tokens = 0;
  std::size_t entities = 0;
  /// One count per schema label, in label order.
  std::vector<std::pair<std::string, std::size_t>> label_counts;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["sentences"] = sentences;
    j["tokens"] = tokens;
    j["entities"] = entities;
    nlohmann::ordered_json labels = nlohmann::ordered_json::object();
    for (const auto& [l, c] : label_counts) labels[l] = c;
    j["labels"] = labels;
    return j;
  }
};

inline CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats st;
  std::vector<std::size_t> counts(corpus.schema.size(), 0);
  for (const auto& s : corpus.sentences) {
    if (!s.tags) throw Error("corpus statistics need tags (sentence '" + s.id + "')");
    ++st.sentences;
    st.tokens += s.size();
    for (const auto& t : *s.tags) ++counts[corpus.schema.require_index(t)];
    st.entities += tag_spans(*s.tags, corpus.schema).size();
  }
  for (std::size_t i = 0; i < counts.size(); ++i)
    st.label_counts.emplace_back(corpus.schema.labels()[i], counts[i]);
  return st;
}

}  // namespace peter
