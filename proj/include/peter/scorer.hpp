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
#include <cctype>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "peter/error.hpp"
#include "peter/linear_model.hpp"
#include "peter/pvp.hpp"
#include "peter/softmax.hpp"

namespace peter {

/// One mask-position scoring query. Candidates are the verbalizer words in
/// label order; the target position travels in `example`.
struct ScoreRequest {
  const ClozeExample& example;
  std::span<const std::string> candidates;
};

struct LabeledCloze {
  ClozeExample example;
  std::size_t gold = 0;
};

/// A masked-LM stand-in: raw logits at the mask for a fixed candidate set.
class Scorer {
 public:
  virtual ~Scorer() = default;

  /// Fixes the candidate vocabulary. Fails if a candidate is unusable.
  virtual void prepare(std::span<const std::string> candidates) = 0;

  virtual LogitVector score(const ScoreRequest& request) = 0;

  /// Minimizes mean -log q(gold | x, t) and returns the final training loss.
  virtual double train(const std::vector<LabeledCloze>& examples, const TrainConfig& config) = 0;

  /// Model state (built-in) or an opaque checkpoint handle (external).
  virtual nlohmann::ordered_json save() = 0;

  /// Concurrent requests the scorer accepts.
  virtual std::size_t capacity() const { return 1; }
};

using ScorerFactory = std::function<std::unique_ptr<Scorer>()>;

namespace detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline std::string suffix3(const std::string& s) { return s.size() <= 3 ? s : s.substr(s.size() - 3); }

inline void token_features(std::vector<std::string>& out, const std::string& prefix, const std::string& tok) {
  out.push_back(prefix + ".w=" + tok);
  out.push_back(prefix + ".lw=" + lower(tok));
  out.push_back(prefix + ".s3=" + lower(suffix3(tok)));
}

inline const std::string& token_at(std::span<const std::string> toks, std::ptrdiff_t i) {
  static const std::string kBos = "<s>", kEos = "</s>";
  if (i < 0) return kBos;
  if (static_cast<std::size_t>(i) >= toks.size()) return kEos;
  return toks[static_cast<std::size_t>(i)];
}

inline std::string offset_name(char tag, std::ptrdiff_t d) {
  return std::string(1, tag) + (d > 0 ? "+" : "") + std::to_string(d);
}

}  // namespace detail

/// Features of token `pos` and of its neighbours within `window`, by
/// relative offset. Shared by the cloze featurizer and the token classifier.
inline void window_features(std::vector<std::string>& out, std::span<const std::string> toks,
                            std::size_t pos, std::size_t window, char tag) {
  const auto p = static_cast<std::ptrdiff_t>(pos);
  const auto w = static_cast<std::ptrdiff_t>(window);
  for (std::ptrdiff_t d = -w; d <= w; ++d)
    if (d != 0) detail::token_features(out, detail::offset_name(tag, d), detail::token_at(toks, p + d));
}

/// Sparse features for the built-in scorer: a bias, the target token
/// (identity, lowercase, 3-char suffix), the same for every token within
/// `window` of the target in the rendered sentence, and identity features
/// for tokens within `window` of the mask. window = 0 leaves the bias and
/// the target token.
inline FeatureVector baseline_featurize(const ClozeExample& ex, std::size_t window) {
  std::vector<std::string> names{"bias"};
  const std::span<const std::string> toks(ex.rendered_tokens);
  detail::token_features(names, "t", toks[ex.quote_index]);
  if (window > 0) {
    if (ex.context_index) window_features(names, toks, *ex.context_index, window, 'c');
    else names.push_back("c.truncated");
    const auto m = static_cast<std::ptrdiff_t>(ex.mask_index);
    const auto w = static_cast<std::ptrdiff_t>(window);
    for (std::ptrdiff_t d = -w; d <= w; ++d)
      if (d != 0) names.push_back(detail::offset_name('m', d) + ".w=" + detail::token_at(toks, m + d));
  }
  return make_features(std::move(names));
}

/// Linear maximum-entropy scorer over `baseline_featurize` features.
class BaselineScorer : public Scorer {
 public:
  explicit BaselineScorer(std::size_t window = 2) : window_(window) {}

  void prepare(std::span<const std::string> candidates) override {
    if (candidates.empty()) throw Error("scorer needs at least one candidate");
    candidates_.assign(candidates.begin(), candidates.end());
    model_ = LinearModel(candidates_.size());
  }

  LogitVector score(const ScoreRequest& request) override {
    check_candidates(request.candidates);
    return model_.logits(baseline_featurize(request.example, window_));
  }

  double train(const std::vector<LabeledCloze>& examples, const TrainConfig& config) override {
    if (candidates_.empty()) throw Error("scorer not prepared");
    if (examples.empty()) throw Error("cannot train a scorer on zero examples");
    std::vector<TrainingExample> data;
    data.reserve(examples.size());
    for (const auto& e : examples) {
      if (e.gold >= candidates_.size()) throw Error("gold label index out of range");
      data.push_back({baseline_featurize(e.example, window_), one_hot(e.gold, candidates_.size())});
    }
    losses_ = train_linear(model_, data, config);
    return losses_.back();
  }

  nlohmann::ordered_json save() override {
    return {{"kind", "builtin-scorer"}, {"window", window_}, {"candidates", candidates_},
            {"model", model_.to_json()}};
  }

  static BaselineScorer load(const nlohmann::json& j) {
    BaselineScorer s(j.at("window").get<std::size_t>());
    s.candidates_ = j.at("candidates").get<std::vector<std::string>>();
    s.model_ = LinearModel::from_json(j.at("model"));
    return s;
  }

  std::size_t window() const { return window_; }
  const LinearModel& model() const { return model_; }
  LinearModel& model() { return model_; }
  /// Mean loss after each epoch of the last `train` call.
  const std::vector<double>& epoch_losses() const { return losses_; }

 private:
  void check_candidates(std::span<const std::string> candidates) const {
    if (candidates_.empty()) throw Error("scorer not prepared");
    for (const auto& c : candidates)
      if (std::find(candidates_.begin(), candidates_.end(), c) == candidates_.end())
        throw Error("candidate '" + c + "' is not in the scorer vocabulary");
    if (!std::equal(candidates.begin(), candidates.end(), candidates_.begin(), candidates_.end()))
      throw Error("candidate order differs from the prepared vocabulary");
  }

  std::size_t window_;
  std::vector<std::string> candidates_;
  LinearModel model_;
  std::vector<double> losses_;
};

}  // namespace peter
