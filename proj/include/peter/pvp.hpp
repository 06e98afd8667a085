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

// Pattern-verbalizer pairs and per-token cloze expansion.
//
// A pattern template is plain text with four placeholders:
//
//   {x}      the sentence, tokens joined by single spaces
//   {t}      the target token, verbatim
//   {etype}  the corpus entity type ("disease", "gene", ...)
//   {mask}   the mask token; exactly once
//
// Rendering tokenizes the template on whitespace and splits placeholders
// out of the chunk they sit in, so `"{t}"` yields the three tokens `"`,
// `young`, `"` while the rendered text keeps `"young"` intact.

#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"
#include "peter/error.hpp"
#include "peter/schema.hpp"

namespace peter {

inline constexpr std::string_view kMaskToken = "[MASK]";

enum class Slot { Sentence, Target, EntityType, Mask };

class Pattern {
 public:
  /// A literal run of text or a placeholder.
  using Piece = std::variant<std::string, Slot>;
  /// Pieces of one whitespace-delimited chunk of the template.
  using Chunk = std::vector<Piece>;

  Pattern(std::string id, std::string tmpl) : id_(std::move(id)), template_(std::move(tmpl)) {
    parse();
  }

  const std::string& id() const { return id_; }
  const std::string& template_text() const { return template_; }
  const std::vector<Chunk>& chunks() const { return chunks_; }

 private:
  void parse() {
    std::size_t masks = 0, xs = 0, ts = 0;
    std::size_t i = 0;
    const std::string& s = template_;
    while (i < s.size()) {
      while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
      if (i >= s.size()) break;
      Chunk chunk;
      std::string lit;
      while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) {
        if (s[i] == '{') {
          auto close = s.find('}', i);
          if (close == std::string::npos)
            throw ConfigError("pattern '" + id_ + "': unterminated placeholder");
          std::string name = s.substr(i + 1, close - i - 1);
          Slot slot;
          if (name == "x") slot = Slot::Sentence, ++xs;
          else if (name == "t") slot = Slot::Target, ++ts;
          else if (name == "etype") slot = Slot::EntityType;
          else if (name == "mask") slot = Slot::Mask, ++masks;
          else throw ConfigError("pattern '" + id_ + "': unknown placeholder {" + name + "}");
          if (!lit.empty()) chunk.emplace_back(std::exchange(lit, {}));
          chunk.emplace_back(slot);
          i = close + 1;
        } else {
          lit += s[i++];
        }
      }
      if (!lit.empty()) chunk.emplace_back(std::move(lit));
      chunks_.push_back(std::move(chunk));
    }
    if (masks != 1)
      throw ConfigError("pattern '" + id_ + "': template must contain exactly one {mask}, found " +
                        std::to_string(masks));
    if (xs == 0 || ts == 0)
      throw ConfigError("pattern '" + id_ + "': template must contain {x} and {t}");
  }

  std::string id_;
  std::string template_;
  std::vector<Chunk> chunks_;
};

/// Label -> single vocabulary token, total over a schema and injective.
class Verbalizer {
 public:
  Verbalizer(const TagSchema& schema, const std::vector<std::pair<std::string, std::string>>& map) {
    words_.resize(schema.size());
    std::vector<char> seen(schema.size(), 0);
    for (const auto& [label, word] : map) {
      auto idx = schema.index_of(label);
      if (!idx) throw ConfigError("verbalizer maps unknown label '" + label + "'");
      if (seen[*idx]) throw ConfigError("verbalizer maps label '" + label + "' twice");
      if (word.empty() || std::any_of(word.begin(), word.end(), [](unsigned char c) { return std::isspace(c); }))
        throw ConfigError("verbalizer word for '" + label + "' must be a single non-empty token");
      seen[*idx] = 1;
      words_[*idx] = word;
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
      if (!seen[i]) throw ConfigError("verbalizer has no word for label '" + schema.labels()[i] + "'");
    for (std::size_t i = 0; i < words_.size(); ++i)
      for (std::size_t j = i + 1; j < words_.size(); ++j)
        if (words_[i] == words_[j])
          throw ConfigError("verbalizer is not injective: '" + words_[i] + "' used twice");
  }

  /// {B: beginning, I: inside, O: outside}, restricted to the schema.
  static Verbalizer standard(const TagSchema& schema) {
    std::vector<std::pair<std::string, std::string>> m;
    for (const auto& l : schema.labels())
      m.emplace_back(l, l == "B" ? "beginning" : l == "I" ? "inside" : "outside");
    return Verbalizer(schema, m);
  }

  /// Candidate words in label order.
  const std::vector<std::string>& words() const { return words_; }
  const std::string& word(std::size_t label) const { return words_.at(label); }

 private:
  std::vector<std::string> words_;
};

struct Pvp {
  Pattern pattern;
  Verbalizer verbalizer;

  const std::string& id() const { return pattern.id(); }
};

inline constexpr std::string_view kP1Template =
    "{x} In the sentence above, the word \"{t}\" refers to the {mask} of a {etype} entity.";
inline constexpr std::string_view kP2Template =
    "{x} Question: In the passage above, which part of a {etype} entity does the word \"{t}\" "
    "refers to? Answer: {mask}.";

inline Pvp builtin_pvp(std::string_view id, const TagSchema& schema) {
  if (id == "p1") return Pvp{Pattern("p1", std::string(kP1Template)), Verbalizer::standard(schema)};
  if (id == "p2") return Pvp{Pattern("p2", std::string(kP2Template)), Verbalizer::standard(schema)};
  throw ConfigError("no built-in pattern named '" + std::string(id) + "'");
}

/// Both built-in patterns with the standard verbalizer. The entity type is
/// bound at render time.
inline std::vector<Pvp> builtin_pvps(const TagSchema& schema) {
  return {builtin_pvp("p1", schema), builtin_pvp("p2", schema)};
}

/// Template text with {etype} bound, e.g. "... of a disease entity.".
inline std::string bind_entity_type(const Pattern& pattern, const std::string& entity_type) {
  std::string s = pattern.template_text();
  for (std::size_t at; (at = s.find("{etype}")) != std::string::npos;) s.replace(at, 7, entity_type);
  return s;
}

/// Reads {"id": ..., "template": ..., "verbalizer": {label: word, ...}}.
inline Pvp pvp_from_json(const nlohmann::json& j, const TagSchema& schema) {
  if (!j.is_object() || !j.contains("id") || !j.contains("template"))
    throw ConfigError("pattern definition needs 'id' and 'template'");
  Pattern p(j.at("id").get<std::string>(), j.at("template").get<std::string>());
  if (!j.contains("verbalizer")) return Pvp{std::move(p), Verbalizer::standard(schema)};
  std::vector<std::pair<std::string, std::string>> m;
  for (const auto& [k, v] : j.at("verbalizer").items()) {
    if (!v.is_string()) throw ConfigError("verbalizer word for '" + k + "' is not a string");
    m.emplace_back(k, v.get<std::string>());
  }
  return Pvp{std::move(p), Verbalizer(schema, m)};
}

inline nlohmann::ordered_json pvp_to_json(const Pvp& pvp, const TagSchema& schema) {
  nlohmann::ordered_json j;
  j["id"] = pvp.id();
  j["template"] = pvp.pattern.template_text();
  nlohmann::ordered_json v = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < schema.size(); ++i) v[schema.labels()[i]] = pvp.verbalizer.word(i);
  j["verbalizer"] = v;
  return j;
}

/// `p1`, `p2`, or a path to a JSON pattern file.
inline Pvp resolve_pvp(const std::string& spec, const TagSchema& schema) {
  if (spec == "p1" || spec == "p2") return builtin_pvp(spec, schema);
  std::ifstream in(spec);
  if (!in) throw ConfigError("cannot open pattern file '" + spec + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("pattern file '" + spec + "': " + e.what());
  }
  try {
    return pvp_from_json(j, schema);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("pattern file '" + spec + "': " + e.what());
  }
}

/// One cloze question for token `token_index` of a sentence.
struct ClozeExample {
  std::string text;
  std::vector<std::string> rendered_tokens;
  std::size_t mask_index = 0;
  std::string sentence_id;
  std::size_t token_index = 0;
  /// Position of the quoted target ({t}) in rendered_tokens.
  std::size_t quote_index = 0;
  /// Position of the target inside the rendered sentence portion, absent
  /// when truncation removed it.
  std::optional<std::size_t> context_index;
  std::optional<std::string> gold_label;

  friend bool operator==(const ClozeExample&, const ClozeExample&) = default;
};

/// Renders the cloze question for one token. With `max_tokens` > 0, tokens
/// are dropped from the left of the sentence portion until the rendered
/// sequence fits; the pattern text, quoted target and mask always survive.
inline ClozeExample render(const Pattern& pattern, const Sentence& sentence, std::size_t token_index,
                           const std::string& entity_type, std::size_t max_tokens = 0) {
  if (token_index >= sentence.size())
    throw Error("token index " + std::to_string(token_index) + " out of range for sentence '" +
                sentence.id + "' of length " + std::to_string(sentence.size()));

  std::vector<std::string> etype_words;
  {
    std::istringstream is(entity_type);
    for (std::string w; is >> w;) etype_words.push_back(w);
  }

  std::size_t fixed = 0, x_slots = 0;
  for (const auto& chunk : pattern.chunks())
    for (const auto& piece : chunk) {
      if (std::holds_alternative<std::string>(piece)) { ++fixed; continue; }
      switch (std::get<Slot>(piece)) {
        case Slot::Sentence: ++x_slots; break;
        case Slot::EntityType: fixed += etype_words.size(); break;
        default: ++fixed;
      }
    }
  std::size_t drop = 0;
  const std::size_t full = fixed + x_slots * sentence.size();
  if (max_tokens > 0 && full > max_tokens)
    drop = std::min(sentence.size(), (full - max_tokens + x_slots - 1) / x_slots);

  ClozeExample ex;
  ex.sentence_id = sentence.id;
  ex.token_index = token_index;
  if (sentence.tags) ex.gold_label = (*sentence.tags)[token_index];

  bool quote_seen = false;
  bool context_seen = false;
  bool first_chunk = true;
  for (const auto& chunk : pattern.chunks()) {
    std::string chunk_text;
    for (const auto& piece : chunk) {
      if (const auto* lit = std::get_if<std::string>(&piece)) {
        chunk_text += *lit;
        ex.rendered_tokens.push_back(*lit);
        continue;
      }
      switch (std::get<Slot>(piece)) {
        case Slot::Sentence:
          for (std::size_t i = drop; i < sentence.size(); ++i) {
            if (i > drop) chunk_text += ' ';
            chunk_text += sentence.tokens[i];
            if (i == token_index && !context_seen) {
              ex.context_index = ex.rendered_tokens.size();
              context_seen = true;
            }
            ex.rendered_tokens.push_back(sentence.tokens[i]);
          }
          break;
        case Slot::Target:
          if (!quote_seen) {
            ex.quote_index = ex.rendered_tokens.size();
            quote_seen = true;
          }
          chunk_text += sentence.tokens[token_index];
          ex.rendered_tokens.push_back(sentence.tokens[token_index]);
          break;
        case Slot::EntityType:
          for (std::size_t i = 0; i < etype_words.size(); ++i) {
            if (i) chunk_text += ' ';
            chunk_text += etype_words[i];
            ex.rendered_tokens.push_back(etype_words[i]);
          }
          break;
        case Slot::Mask:
          chunk_text += kMaskToken;
          ex.mask_index = ex.rendered_tokens.size();
          ex.rendered_tokens.emplace_back(kMaskToken);
          break;
      }
    }
    if (chunk_text.empty()) continue;
    if (!first_chunk) ex.text += ' ';
    ex.text += chunk_text;
    first_chunk = false;
  }
  return ex;
}

/// One cloze example per token, in token order.
inline std::vector<ClozeExample> expand(const Pattern& pattern, const Sentence& sentence,
                                        const std::string& entity_type, std::size_t max_tokens = 0) {
  if (sentence.tokens.empty()) throw Error("cannot expand empty sentence '" + sentence.id + "'");
  std::vector<ClozeExample> out;
  out.reserve(sentence.size());
  for (std::size_t i = 0; i < sentence.size(); ++i)
    out.push_back(render(pattern, sentence, i, entity_type, max_tokens));
  return out;
}

inline nlohmann::ordered_json cloze_to_json(const ClozeExample& ex, const std::string& pattern_id) {
  nlohmann::ordered_json j;
  j["pattern"] = pattern_id;
  j["sentence_id"] = ex.sentence_id;
  j["token_index"] = ex.token_index;
  j["text"] = ex.text;
  j["rendered_tokens"] = ex.rendered_tokens;
  j["mask_index"] = ex.mask_index;
  if (ex.gold_label) j["gold_label"] = *ex.gold_label;
  else j["gold_label"] = nullptr;
  return j;
}

}  // namespace peter
