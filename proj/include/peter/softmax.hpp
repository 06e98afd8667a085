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
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "peter/error.hpp"

namespace peter {

/// Raw mask-position scores, one per verbalizer candidate.
using LogitVector = std::vector<double>;

/// Probabilities over the label set, in label order.
using LabelDistribution = std::vector<double>;

/// Softmax over the candidate scores only. The maximum is subtracted
/// before exponentiation, so any finite input is safe.
inline LabelDistribution restricted_softmax(std::span<const double> logits) {
  if (logits.empty()) throw Error("restricted_softmax: empty logit vector");
  double m = logits[0];
  for (double z : logits) {
    if (!std::isfinite(z)) throw Error("restricted_softmax: non-finite logit");
    m = std::max(m, z);
  }
  LabelDistribution p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += (p[i] = std::exp(logits[i] - m));
  for (double& v : p) v /= sum;
  return p;
}

/// log-softmax with the same stabilization.
inline std::vector<double> log_softmax(std::span<const double> logits) {
  double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - m);
  const double lse = m + std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

/// Index of the largest value; the lowest index wins ties.
inline std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

/// Cross-entropy of a (possibly soft) target against softmax(logits).
inline double cross_entropy(std::span<const double> logits, std::span<const double> target) {
  auto lp = log_softmax(logits);
  double loss = 0.0;
  for (std::size_t i = 0; i < lp.size(); ++i)
    if (target[i] != 0.0) loss -= target[i] * lp[i];
  return loss;
}

}  // namespace peter
