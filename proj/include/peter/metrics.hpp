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

// Exact-match, micro-averaged entity span scoring.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "peter/corpus.hpp"
#include "peter/error.hpp"
#include "peter/schema.hpp"

namespace peter {

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  /// Gold span count.
  std::size_t support = 0;
  std::size_t predicted = 0;
  std::size_t correct = 0;

  friend bool operator==(const Prf&, const Prf&) = default;
};

/// P = correct / predicted, R = correct / gold, F1 = 2PR / (P + R); every
/// empty denominator yields 0.
inline Prf prf_from_counts(std::size_t correct, std::size_t predicted, std::size_t gold) {
  Prf r;
  r.correct = correct;
  r.predicted = predicted;
  r.support = gold;
  r.precision = predicted ? static_cast<double>(correct) / static_cast<double>(predicted) : 0.0;
  r.recall = gold ? static_cast<double>(correct) / static_cast<double>(gold) : 0.0;
  const double s = r.precision + r.recall;
  r.f1 = s > 0.0 ? 2.0 * r.precision * r.recall / s : 0.0;
  return r;
}

/// Scores `pred` against `gold`. Sentences are matched by position and must
/// agree on id and token count; the first disagreement is reported.
inline Prf span_prf(const Corpus& gold, const Corpus& pred) {
  if (gold.size() != pred.size())
    throw AlignmentError("gold has " + std::to_string(gold.size()) + " sentences, prediction has " +
                         std::to_string(pred.size()));
  std::size_t correct = 0, n_pred = 0, n_gold = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const Sentence& g = gold.sentences[i];
    const Sentence& p = pred.sentences[i];
    if (g.id != p.id)
      throw AlignmentError("sentence " + std::to_string(i) + ": gold id '" + g.id + "' vs predicted id '" +
                           p.id + "'");
    if (g.size() != p.size())
      throw AlignmentError("sentence '" + g.id + "': " + std::to_string(g.size()) + " gold tokens vs " +
                           std::to_string(p.size()) + " predicted");
    auto gs = extract_spans(g, gold.schema, gold.entity_type);
    auto ps = extract_spans(p, pred.schema, pred.entity_type);
    n_gold += gs.size();
    n_pred += ps.size();
    // Both lists come out sorted by start, so a merge finds the matches.
    std::size_t a = 0, b = 0;
    while (a < gs.size() && b < ps.size()) {
      if (gs[a] == ps[b]) {
        ++correct, ++a, ++b;
      } else if (gs[a] < ps[b]) {
        ++a;
      } else {
        ++b;
      }
    }
  }
  return prf_from_counts(correct, n_pred, n_gold);
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Mean and standard deviation; population (divide by n) unless `sample`.
inline MeanStd mean_std(std::span<const double> xs, bool sample = false) {
  MeanStd r;
  if (xs.empty()) return r;
  double sum = 0.0;
  for (double x : xs) sum += x;
  r.mean = sum / static_cast<double>(xs.size());
  if (xs.size() < 2) return r;
  double ss = 0.0;
  for (double x : xs) ss += (x - r.mean) * (x - r.mean);
  r.std = std::sqrt(ss / static_cast<double>(sample ? xs.size() - 1 : xs.size()));
  return r;
}

inline nlohmann::ordered_json prf_to_json(const Prf& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
          {"support", m.support}, {"predicted", m.predicted}, {"correct", m.correct}};
}

}  // namespace peter
