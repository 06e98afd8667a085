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

// Random inputs and brute-force reference implementations shared by the
// unit tests and the acceptance binary. The references deliberately avoid
// the library's span code.

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "peter/peter.hpp"

namespace peter::testing {

inline std::vector<std::string> random_iob2(std::mt19937_64& rng, std::size_t length) {
  std::vector<std::string> tags;
  std::uniform_int_distribution<int> pick(0, 2);
  for (std::size_t i = 0; i < length; ++i) {
    int r = pick(rng);
    // An I is only allowed to continue a span.
    if (r == 1 && (tags.empty() || tags.back() == "O")) r = 0;
    tags.push_back(r == 0 ? "B" : r == 1 ? "I" : "O");
  }
  return tags;
}

/// Any tag string from {B, I, O}, valid or not.
inline std::vector<std::string> random_raw_tags(std::mt19937_64& rng, std::size_t length) {
  static const char* kTags[] = {"B", "I", "O"};
  std::uniform_int_distribution<int> pick(0, 2);
  std::vector<std::string> tags;
  for (std::size_t i = 0; i < length; ++i) tags.emplace_back(kTags[pick(rng)]);
  return tags;
}

inline std::string random_word(std::mt19937_64& rng) {
  static const std::vector<std::string> kWords{"the", "patient", "had", "acute", "renal", "failure", "and",
                                               "a", "young", "boy", ".", ",", "with", "BRCA1", "mutation",
                                               "of", "colorectal", "cancer", "in", "SARS-CoV-2"};
  return kWords[std::uniform_int_distribution<std::size_t>(0, kWords.size() - 1)(rng)];
}

inline Sentence random_sentence(std::mt19937_64& rng, std::size_t length, const std::string& id, bool tagged = true) {
  Sentence s;
  s.id = id;
  for (std::size_t i = 0; i < length; ++i) s.tokens.push_back(random_word(rng));
  if (tagged) s.tags = random_iob2(rng, length);
  return s;
}

inline Corpus random_corpus(std::mt19937_64& rng, std::size_t max_sentences, std::size_t max_length,
                            const std::string& etype = "disease") {
  Corpus c;
  c.entity_type = etype;
  const std::size_t n = std::uniform_int_distribution<std::size_t>(1, max_sentences)(rng);
  for (std::size_t i = 0; i < n; ++i)
    c.sentences.push_back(
        random_sentence(rng, std::uniform_int_distribution<std::size_t>(1, max_length)(rng), default_sentence_id(i)));
  return c;
}

/// Every (start, end) with tags[start] = B, I through end and no I after.
inline std::vector<std::pair<std::size_t, std::size_t>> brute_force_spans(const std::vector<std::string>& tags) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  const std::size_t n = tags.size();
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t e = s; e < n; ++e) {
      if (tags[s] != "B") continue;
      bool inner = true;
      for (std::size_t j = s + 1; j <= e; ++j) inner = inner && tags[j] == "I";
      if (inner && (e + 1 == n || tags[e + 1] != "I")) out.emplace_back(s, e);
    }
  return out;
}

struct BruteForcePrf {
  double precision, recall, f1;
  std::size_t gold, pred, correct;
};

inline BruteForcePrf brute_force_prf(const Corpus& gold, const Corpus& pred) {
  using Key = std::tuple<std::string, std::size_t, std::size_t>;
  std::set<Key> g, p;
  for (const auto& s : gold.sentences)
    for (auto [a, b] : brute_force_spans(*s.tags)) g.emplace(s.id, a, b);
  for (const auto& s : pred.sentences)
    for (auto [a, b] : brute_force_spans(*s.tags)) p.emplace(s.id, a, b);
  std::size_t c = 0;
  for (const auto& k : p) c += g.count(k);
  BruteForcePrf r{0, 0, 0, g.size(), p.size(), c};
  if (!p.empty()) r.precision = double(c) / double(p.size());
  if (!g.empty()) r.recall = double(c) / double(g.size());
  if (r.precision + r.recall > 0) r.f1 = 2 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

/// Gold sentences with a perturbed copy of the tags, same ids and lengths.
inline Corpus perturb(std::mt19937_64& rng, const Corpus& gold) {
  Corpus pred = gold;
  for (auto& s : pred.sentences)
    if (std::bernoulli_distribution(0.7)(rng)) s.tags = random_iob2(rng, s.size());
  return pred;
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    auto base = std::filesystem::temp_directory_path();
    std::random_device rd;
    for (;;) {
      path_ = base / ("peter-test-" + std::to_string(rd()));
      if (std::filesystem::create_directory(path_)) break;
    }
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct CommandResult {
  int exit_code;
  std::string output;
};

/// Runs a shell command, capturing stdout and stderr together.
inline CommandResult run_command(const std::string& cmd) {
  CommandResult r{-1, {}};
  FILE* f = ::popen((cmd + " 2>&1").c_str(), "r");
  if (!f) return r;
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, f)) > 0;) r.output.append(buf, n);
  const int status = ::pclose(f);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

}  // namespace peter::testing
