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

// Tag schemas, sentences and the IOB2/IO span logic shared by the corpus
// reader, the evaluator and the predictor.

#pragma once

#include <algorithm>
#include <cctype>
#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "peter/error.hpp"

namespace peter {

enum class SchemeKind { IO, IOB2 };

enum class TagRole { Begin, Inside, Outside };

/// Label inventory for a single entity type. IOB2 yields {B, I, O}, IO
/// yields {I, O}. The order is the label order used everywhere else
/// (verbalizer candidates, probability columns, argmax tie-breaking).
class TagSchema {
 public:
  static TagSchema iob2() { return TagSchema(SchemeKind::IOB2, {"B", "I", "O"}); }
  static TagSchema io() { return TagSchema(SchemeKind::IO, {"I", "O"}); }

  static TagSchema parse(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "iob2" || lower == "bio") return iob2();
    if (lower == "io") return io();
    throw ConfigError("unsupported tag schema '" + std::string(name) + "' (expected io or iob2)");
  }

  SchemeKind kind() const { return kind_; }
  std::string name() const { return kind_ == SchemeKind::IOB2 ? "IOB2" : "IO"; }
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }

  std::optional<std::size_t> index_of(std::string_view label) const {
    for (std::size_t i = 0; i < labels_.size(); ++i)
      if (labels_[i] == label) return i;
    return std::nullopt;
  }

  std::size_t require_index(std::string_view label) const {
    if (auto i = index_of(label)) return *i;
    throw TagError("unknown tag '" + std::string(label) + "' for schema " + name());
  }

  TagRole role(std::size_t index) const {
    const std::string& l = labels_.at(index);
    if (l == "O") return TagRole::Outside;
    if (l == "B") return TagRole::Begin;
    return TagRole::Inside;
  }

  TagRole role(std::string_view label) const { return role(require_index(label)); }

  std::size_t outside_index() const { return labels_.size() - 1; }

  friend bool operator==(const TagSchema& a, const TagSchema& b) { return a.kind_ == b.kind_; }

 private:
  TagSchema(SchemeKind kind, std::vector<std::string> labels)
      : kind_(kind), labels_(std::move(labels)) {}

  SchemeKind kind_;
  std::vector<std::string> labels_;
};

/// A pre-tokenized sentence, optionally tagged.
struct Sentence {
  std::string id;
  std::vector<std::string> tokens;
  std::optional<std::vector<std::string>> tags;

  std::size_t size() const { return tokens.size(); }
  bool tagged() const { return tags.has_value(); }

  friend bool operator==(const Sentence&, const Sentence&) = default;
};

/// Checks the structural invariants (non-empty, no empty token, tag count,
/// tag membership). Sequence validity is `validate_tags`' job.
inline void check_sentence(const Sentence& s, const TagSchema& schema) {
  if (s.tokens.empty()) throw Error("sentence '" + s.id + "' has no tokens");
  for (const auto& t : s.tokens)
    if (t.empty()) throw Error("sentence '" + s.id + "' contains an empty token");
  if (!s.tags) return;
  if (s.tags->size() != s.tokens.size())
    throw TagError("sentence '" + s.id + "' has " + std::to_string(s.tags->size()) +
                   " tags for " + std::to_string(s.tokens.size()) + " tokens");
  for (const auto& t : *s.tags) schema.require_index(t);
}

/// Index of the first tag that breaks the schema, if any. Under IOB2 an
/// inside tag must follow a begin or inside tag; IO has no constraints.
inline std::optional<std::size_t> first_invalid_tag(std::span<const std::string> tags,
                                                    const TagSchema& schema) {
  if (schema.kind() == SchemeKind::IO) {
    for (std::size_t i = 0; i < tags.size(); ++i)
      if (!schema.index_of(tags[i])) return i;
    return std::nullopt;
  }
  TagRole prev = TagRole::Outside;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    auto idx = schema.index_of(tags[i]);
    if (!idx) return i;
    TagRole r = schema.role(*idx);
    if (r == TagRole::Inside && prev == TagRole::Outside) return i;
    prev = r;
  }
  return std::nullopt;
}

/// Rewrites every orphan inside tag (one not preceded by B or I) to B.
inline std::vector<std::string> repair_tags(std::span<const std::string> tags,
                                            const TagSchema& schema) {
  std::vector<std::string> out(tags.begin(), tags.end());
  if (schema.kind() != SchemeKind::IOB2) return out;
  TagRole prev = TagRole::Outside;
  for (auto& t : out) {
    TagRole r = schema.role(t);
    if (r == TagRole::Inside && prev == TagRole::Outside) {
      t = "B";
      r = TagRole::Begin;
    }
    prev = r;
  }
  return out;
}

/// Returns the sentence unchanged when its tags are valid. Otherwise throws
/// TagError, or with `repair` returns a copy with orphan I tags turned into B.
inline Sentence validate_tags(const Sentence& sentence, const TagSchema& schema, bool repair) {
  if (!sentence.tags) throw TagError("sentence '" + sentence.id + "' has no tags to validate");
  for (const auto& t : *sentence.tags) schema.require_index(t);
  auto bad = first_invalid_tag(*sentence.tags, schema);
  if (!bad) return sentence;
  if (!repair)
    throw TagError("sentence '" + sentence.id + "': tag '" + (*sentence.tags)[*bad] +
                   "' at position " + std::to_string(*bad) + " does not continue an entity");
  Sentence fixed = sentence;
  fixed.tags = repair_tags(*sentence.tags, schema);
  return fixed;
}

/// An entity mention; `start` and `end` are inclusive token indices.
struct EntitySpan {
  std::string sentence_id;
  std::size_t start = 0;
  std::size_t end = 0;
  std::string type;

  friend auto operator<=>(const EntitySpan&, const EntitySpan&) = default;
};

/// Token-index spans of a tag sequence. IOB2: maximal B I* runs. IO: maximal
/// I runs. Throws TagError on a schema-invalid sequence.
inline std::vector<std::pair<std::size_t, std::size_t>> tag_spans(std::span<const std::string> tags,
                                                                   const TagSchema& schema) {
  if (auto bad = first_invalid_tag(tags, schema))
    throw TagError("invalid " + schema.name() + " sequence at position " + std::to_string(*bad) +
                   " ('" + std::string(tags[*bad]) + "')");
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  std::optional<std::size_t> open;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    TagRole r = schema.role(tags[i]);
    if (open && r != TagRole::Inside) {
      spans.emplace_back(*open, i - 1);
      open.reset();
    }
    if (!open && r != TagRole::Outside) open = i;
  }
  if (open) spans.emplace_back(*open, tags.size() - 1);
  return spans;
}

inline std::vector<EntitySpan> extract_spans(const Sentence& sentence, const TagSchema& schema,
                                             const std::string& entity_type) {
  if (!sentence.tags) throw TagError("sentence '" + sentence.id + "' has no tags");
  std::vector<EntitySpan> out;
  for (auto [b, e] : tag_spans(*sentence.tags, schema))
    out.push_back(EntitySpan{sentence.id, b, e, entity_type});
  return out;
}

/// Inverse of `tag_spans` for non-overlapping spans. Under IO, adjacent
/// spans merge on decode, so the round trip only holds for IOB2.
inline std::vector<std::string> encode_spans(std::span<const std::pair<std::size_t, std::size_t>> spans,
                                             std::size_t length, const TagSchema& schema) {
  std::vector<std::string> tags(length, "O");
  for (auto [b, e] : spans) {
    if (b > e || e >= length) throw TagError("span out of range");
    for (std::size_t i = b; i <= e; ++i) {
      if (tags[i] != "O") throw TagError("overlapping spans");
      tags[i] = "I";
    }
    if (schema.kind() == SchemeKind::IOB2) tags[b] = "B";
  }
  return tags;
}

}  // namespace peter
