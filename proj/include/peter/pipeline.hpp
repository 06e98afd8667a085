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

// Few-shot training pipeline:
//
//   1. expand every labeled sentence into one cloze example per token,
//   2. train one scorer per pattern-verbalizer pair on those examples,
//   3. label an unlabeled pool with the mean of the per-PVP restricted
//      softmax distributions,
//   4. distill the soft-labeled pool into a token classifier,
//
// followed by prediction and span scoring on a test corpus.

#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "peter/bridge.hpp"
#include "peter/corpus.hpp"
#include "peter/error.hpp"
#include "peter/linear_model.hpp"
#include "peter/metrics.hpp"
#include "peter/pvp.hpp"
#include "peter/rng.hpp"
#include "peter/scorer.hpp"
#include "peter/softmax.hpp"

namespace peter {

enum class Aggregation { Uniform };

struct PipelineConfig {
  std::vector<Pvp> pvps;
  /// Shot count; selects the epoch count from the schedule.
  std::size_t shots = 0;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::map<std::size_t, std::size_t> epoch_schedule{{10, 10}, {25, 7}, {50, 5}, {100, 5}};
  /// Replaces the schedule when set.
  std::optional<std::size_t> epochs_override;
  std::size_t unlabeled_cap = 10000;
  Aggregation aggregation = Aggregation::Uniform;
  std::size_t distill_epochs = 3;
  double distill_temperature = 1.0;
  std::size_t max_sequence_tokens = 128;

  std::size_t scorer_window = 2;
  std::size_t classifier_window = 2;
  TrainConfig scorer_train{1, 0.5, 1, 0.0, 0};
  TrainConfig classifier_train{1, 0.05, 1, 0.0, 0};

  std::size_t epochs_for_shots() const {
    if (epochs_override) return *epochs_override;
    auto it = epoch_schedule.find(shots);
    if (it == epoch_schedule.end())
      throw ConfigError("no epoch count for " + std::to_string(shots) +
                        " shots; add it to the schedule or set an override");
    return it->second;
  }

  void check() const {
    if (pvps.empty()) throw ConfigError("at least one pattern is required");
    if (unlabeled_cap < 1) throw ConfigError("unlabeled cap must be at least 1");
    if (distill_epochs < 1) throw ConfigError("distillation needs at least one epoch");
    if (!(distill_temperature > 0.0)) throw ConfigError("distillation temperature must be positive");
    epochs_for_shots();
  }

  nlohmann::ordered_json to_json(const TagSchema& schema) const {
    nlohmann::ordered_json j;
    nlohmann::ordered_json p = nlohmann::ordered_json::array();
    for (const auto& v : pvps) p.push_back(pvp_to_json(v, schema));
    j["pvps"] = p;
    j["shots"] = shots;
    j["seeds"] = seeds;
    nlohmann::ordered_json sched = nlohmann::ordered_json::object();
    for (auto [k, e] : epoch_schedule) sched[std::to_string(k)] = e;
    j["epoch_schedule"] = sched;
    j["epochs_override"] = epochs_override ? nlohmann::ordered_json(*epochs_override) : nullptr;
    j["unlabeled_cap"] = unlabeled_cap;
    j["aggregation"] = "uniform";
    j["distill_epochs"] = distill_epochs;
    j["distill_temperature"] = distill_temperature;
    j["max_sequence_tokens"] = max_sequence_tokens;
    j["scorer_window"] = scorer_window;
    j["classifier_window"] = classifier_window;
    j["scorer_train"] = scorer_train.to_json();
    j["classifier_train"] = classifier_train.to_json();
    return j;
  }

  static PipelineConfig from_json(const nlohmann::json& j, const TagSchema& schema) {
    PipelineConfig c;
    for (const auto& p : j.at("pvps")) c.pvps.push_back(pvp_from_json(p, schema));
    c.shots = j.value("shots", c.shots);
    c.seeds = j.value("seeds", c.seeds);
    if (j.contains("epoch_schedule")) {
      c.epoch_schedule.clear();
      for (const auto& [k, v] : j["epoch_schedule"].items())
        c.epoch_schedule[std::stoul(k)] = v.get<std::size_t>();
    }
    if (j.contains("epochs_override") && !j["epochs_override"].is_null())
      c.epochs_override = j["epochs_override"].get<std::size_t>();
    c.unlabeled_cap = j.value("unlabeled_cap", c.unlabeled_cap);
    if (j.value("aggregation", std::string("uniform")) != "uniform")
      throw ConfigError("unsupported aggregation '" + j["aggregation"].get<std::string>() + "'");
    c.distill_epochs = j.value("distill_epochs", c.distill_epochs);
    c.distill_temperature = j.value("distill_temperature", c.distill_temperature);
    c.max_sequence_tokens = j.value("max_sequence_tokens", c.max_sequence_tokens);
    c.scorer_window = j.value("scorer_window", c.scorer_window);
    c.classifier_window = j.value("classifier_window", c.classifier_window);
    if (j.contains("scorer_train")) c.scorer_train = TrainConfig::from_json(j["scorer_train"]);
    if (j.contains("classifier_train")) c.classifier_train = TrainConfig::from_json(j["classifier_train"]);
    return c;
  }
};

// Salts for the independent random streams derived from one run seed.
inline constexpr std::uint64_t kSaltUnlabeledShuffle = 1;
inline constexpr std::uint64_t kSaltDistill = 2;
inline constexpr std::uint64_t kSaltScorer = 100;

/// Cloze examples for every token of every sentence, with gold indices.
inline std::vector<LabeledCloze> labeled_cloze_examples(const Corpus& train, const Pvp& pvp,
                                                        std::size_t max_tokens) {
  std::vector<LabeledCloze> out;
  out.reserve(train.token_count());
  for (const auto& s : train.sentences) {
    if (!s.tags) throw Error("training sentence '" + s.id + "' has no tags");
    for (auto& ex : expand(pvp.pattern, s, train.entity_type, max_tokens)) {
      const std::size_t gold = train.schema.require_index(*ex.gold_label);
      out.push_back(LabeledCloze{std::move(ex), gold});
    }
  }
  return out;
}

/// Trains one fresh scorer per PVP, in PVP order.
inline std::vector<std::unique_ptr<Scorer>> train_pvp_models(const Corpus& train, const PipelineConfig& config,
                                                             const ScorerFactory& factory,
                                                             std::uint64_t seed) {
  if (!train.tagged()) throw Error("training corpus must be tagged");
  if (train.empty()) throw Error("training corpus is empty");
  if (config.pvps.empty()) throw ConfigError("at least one pattern is required");
  std::vector<std::unique_ptr<Scorer>> scorers;
  for (std::size_t i = 0; i < config.pvps.size(); ++i) {
    const Pvp& pvp = config.pvps[i];
    try {
      auto scorer = factory();
      scorer->prepare(pvp.verbalizer.words());
      TrainConfig tc = config.scorer_train;
      tc.epochs = config.epochs_for_shots();
      tc.seed = derive_seed(seed, kSaltScorer + i);
      scorer->train(labeled_cloze_examples(train, pvp, config.max_sequence_tokens), tc);
      scorers.push_back(std::move(scorer));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw Error("pattern '" + pvp.id() + "': " + e.what());
    }
  }
  return scorers;
}

struct SoftSentence {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<LabelDistribution> labels;

  friend bool operator==(const SoftSentence&, const SoftSentence&) = default;
};

struct SoftLabeledDataset {
  TagSchema schema = TagSchema::iob2();
  std::string entity_type;
  std::vector<SoftSentence> sentences;

  std::size_t size() const { return sentences.size(); }
  bool empty() const { return sentences.empty(); }
};

/// Per-token distribution of one scorer for one sentence.
inline std::vector<LabelDistribution> pvp_distributions(Scorer& scorer, const Pvp& pvp, const Sentence& s,
                                                        const std::string& entity_type,
                                                        std::size_t max_tokens) {
  std::vector<LabelDistribution> out;
  out.reserve(s.size());
  const auto& words = pvp.verbalizer.words();
  for (const auto& ex : expand(pvp.pattern, s, entity_type, max_tokens))
    out.push_back(restricted_softmax(scorer.score(ScoreRequest{ex, words})));
  return out;
}

/// Soft-labels the first `unlabeled_cap` sentences of `unlabeled` with the
/// arithmetic mean of the scorers' distributions. Scorers pair with
/// `config.pvps` by position.
inline SoftLabeledDataset soft_label(const Corpus& unlabeled, std::span<const std::unique_ptr<Scorer>> scorers,
                                     const PipelineConfig& config) {
  if (scorers.empty()) throw ConfigError("soft labeling needs at least one scorer");
  if (scorers.size() != config.pvps.size())
    throw ConfigError("got " + std::to_string(scorers.size()) + " scorers for " +
                      std::to_string(config.pvps.size()) + " patterns");
  SoftLabeledDataset out{unlabeled.schema, unlabeled.entity_type, {}};
  const std::size_t n = std::min(config.unlabeled_cap, unlabeled.size());
  const std::size_t K = unlabeled.schema.size();
  out.sentences.reserve(n);
  for (std::size_t si = 0; si < n; ++si) {
    const Sentence& s = unlabeled.sentences[si];
    SoftSentence soft{s.id, s.tokens, std::vector<LabelDistribution>(s.size(), LabelDistribution(K, 0.0))};
    for (std::size_t p = 0; p < scorers.size(); ++p) {
      std::vector<LabelDistribution> dist;
      try {
        dist = pvp_distributions(*scorers[p], config.pvps[p], s, unlabeled.entity_type,
                                 config.max_sequence_tokens);
      } catch (const std::exception& e) {
        throw StageError("soft_label", "pattern '" + config.pvps[p].id() + "' failed on sentence '" + s.id +
                                           "' after " + std::to_string(si) + " of " + std::to_string(n) +
                                           " sentences: " + e.what());
      }
      for (std::size_t t = 0; t < s.size(); ++t)
        for (std::size_t k = 0; k < K; ++k) soft.labels[t][k] += dist[t][k];
    }
    if (scorers.size() > 1) {
      const double inv = 1.0 / static_cast<double>(scorers.size());
      for (auto& d : soft.labels) {
        double sum = 0.0;
        for (double& v : d) sum += (v *= inv);
        for (double& v : d) v /= sum;
      }
    }
    out.sentences.push_back(std::move(soft));
  }
  return out;
}

namespace detail {

inline std::string shortest(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace detail

/// Token TAB p(label_0) TAB ... per line, blank line between sentences,
/// `# id = ` line before each sentence. Probabilities print in shortest
/// round-trip form.
inline void write_soft_labels(std::ostream& out, const SoftLabeledDataset& ds) {
  out << "# labels =";
  for (const auto& l : ds.schema.labels()) out << ' ' << l;
  out << '\n';
  for (const auto& s : ds.sentences) {
    out << "# id = " << s.id << '\n';
    for (std::size_t t = 0; t < s.tokens.size(); ++t) {
      out << s.tokens[t];
      for (double p : s.labels[t]) out << '\t' << detail::shortest(p);
      out << '\n';
    }
    out << '\n';
  }
}

inline SoftLabeledDataset read_soft_labels(std::istream& in, const TagSchema& schema, const std::string& entity_type) {
  SoftLabeledDataset ds{schema, entity_type, {}};
  std::string line;
  SoftSentence cur;
  std::size_t line_no = 0;
  auto flush = [&] {
    if (!cur.tokens.empty()) ds.sentences.push_back(std::move(cur));
    cur = SoftSentence{};
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) { flush(); continue; }
    if (line.rfind("# labels =", 0) == 0) continue;
    if (line.rfind("# id = ", 0) == 0) { cur.id = line.substr(7); continue; }
    auto cols = detail::split_columns(line);
    if (cols.size() != schema.size() + 1)
      throw ParseError("soft_labels", line_no, "expected token and " + std::to_string(schema.size()) +
                                                    " probabilities");
    cur.tokens.push_back(cols[0]);
    LabelDistribution d;
    for (std::size_t k = 1; k < cols.size(); ++k) d.push_back(std::stod(cols[k]));
    cur.labels.push_back(std::move(d));
  }
  flush();
  return ds;
}

/// Token-level model trained from soft targets and used for prediction.
class TokenClassifier {
 public:
  virtual ~TokenClassifier() = default;
  virtual void prepare(const TagSchema& schema) = 0;
  /// Minimizes mean cross-entropy against the soft targets; returns the
  /// final mean loss.
  virtual double train(const SoftLabeledDataset& data, const TrainConfig& config) = 0;
  virtual std::vector<LabelDistribution> predict_proba(const Sentence& sentence) = 0;
  virtual nlohmann::ordered_json save() = 0;
};

using ClassifierFactory = std::function<std::unique_ptr<TokenClassifier>()>;

/// Bias, token identity/lowercase/suffix, and the same for neighbours
/// within `window`.
inline FeatureVector token_featurize(std::span<const std::string> tokens, std::size_t i, std::size_t window) {
  std::vector<std::string> names{"bias"};
  detail::token_features(names, "t", tokens[i]);
  window_features(names, tokens, i, window, 'c');
  return make_features(std::move(names));
}

class LinearTokenClassifier : public TokenClassifier {
 public:
  explicit LinearTokenClassifier(std::size_t window = 2) : window_(window) {}

  void prepare(const TagSchema& schema) override { model_ = LinearModel(schema.size()); }

  double train(const SoftLabeledDataset& data, const TrainConfig& config) override {
    std::vector<TrainingExample> ex;
    for (const auto& s : data.sentences)
      for (std::size_t t = 0; t < s.tokens.size(); ++t)
        ex.push_back({token_featurize(s.tokens, t, window_), s.labels[t]});
    losses_ = train_linear(model_, ex, config);
    return losses_.back();
  }

  std::vector<LabelDistribution> predict_proba(const Sentence& s) override {
    std::vector<LabelDistribution> out;
    for (std::size_t t = 0; t < s.size(); ++t)
      out.push_back(restricted_softmax(model_.logits(token_featurize(s.tokens, t, window_))));
    return out;
  }

  nlohmann::ordered_json save() override {
    return {{"kind", "builtin-classifier"}, {"window", window_}, {"model", model_.to_json()}};
  }

  const std::vector<double>& epoch_losses() const { return losses_; }
  const LinearModel& model() const { return model_; }

 private:
  std::size_t window_;
  LinearModel model_;
  std::vector<double> losses_;
};

/// Final classifier delegated to a bridge: each token becomes a request
/// whose rendered_tokens are the sentence, mask_index the token position and
/// candidates the label names; training examples carry soft "target"s.
class BridgeTokenClassifier : public TokenClassifier {
 public:
  explicit BridgeTokenClassifier(std::unique_ptr<LineChannel> channel) : client_(std::move(channel)) {}

  void prepare(const TagSchema& schema) override {
    labels_ = schema.labels();
    auto h = client_.handshake(labels_);
    if (!h.accepted) throw ProtocolError("vocabulary", "bridge rejected the label set");
  }

  double train(const SoftLabeledDataset& data, const TrainConfig& config) override {
    nlohmann::ordered_json batch = nlohmann::ordered_json::array();
    for (const auto& s : data.sentences)
      for (std::size_t t = 0; t < s.tokens.size(); ++t) {
        auto j = request(s.id, s.tokens, t);
        j["target"] = s.labels[t];
        batch.push_back(std::move(j));
      }
    auto r = client_.call("train", {{"config", config.to_json()}, {"examples", batch}});
    if (!r.contains("loss") || !r["loss"].is_number())
      throw ProtocolError("malformed_reply", "train reply has no loss");
    return r["loss"].get<double>();
  }

  std::vector<LabelDistribution> predict_proba(const Sentence& s) override {
    std::vector<LabelDistribution> out;
    for (std::size_t t = 0; t < s.size(); ++t)
      out.push_back(restricted_softmax(parse_logits(client_.call("score", request(s.id, s.tokens, t)),
                                                    labels_.size())));
    return out;
  }

  nlohmann::ordered_json save() override {
    auto r = client_.call("save");
    return {{"kind", "bridge-checkpoint"}, {"address", client_.address()}, {"handle", r.value("handle", nlohmann::json())}};
  }

 private:
  nlohmann::ordered_json request(const std::string& id, const std::vector<std::string>& tokens, std::size_t t) {
    nlohmann::ordered_json j;
    j["rendered_tokens"] = tokens;
    j["mask_index"] = t;
    j["candidates"] = labels_;
    j["target_position"] = {{"sentence_id", id}, {"token_index", t}};
    return j;
  }

  BridgeClient client_;
  std::vector<std::string> labels_;
};

/// Sharpens or flattens a distribution: p_k^(1/T), renormalized.
inline LabelDistribution apply_temperature(const LabelDistribution& p, double temperature) {
  if (temperature == 1.0) return p;
  LabelDistribution q(p.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) sum += (q[k] = std::pow(p[k], 1.0 / temperature));
  for (double& v : q) v /= sum;
  return q;
}

inline std::unique_ptr<TokenClassifier> distill(const SoftLabeledDataset& soft, const PipelineConfig& config,
                                                const ClassifierFactory& factory, std::uint64_t seed) {
  if (soft.empty()) throw Error("cannot distill from an empty soft-labeled dataset");
  SoftLabeledDataset targets = soft;
  if (config.distill_temperature != 1.0)
    for (auto& s : targets.sentences)
      for (auto& d : s.labels) d = apply_temperature(d, config.distill_temperature);
  auto clf = factory();
  clf->prepare(soft.schema);
  TrainConfig tc = config.classifier_train;
  tc.epochs = config.distill_epochs;
  tc.seed = derive_seed(seed, kSaltDistill);
  clf->train(targets, tc);
  return clf;
}

/// Argmax label per token (lowest index on ties), then IOB2 repair.
inline Corpus predict(TokenClassifier& classifier, const Corpus& sentences) {
  Corpus out = sentences.with_sentences({});
  out.sentences.reserve(sentences.size());
  for (const auto& s : sentences.sentences) {
    auto probs = classifier.predict_proba(s);
    std::vector<std::string> tags;
    tags.reserve(s.size());
    for (const auto& p : probs) tags.push_back(sentences.schema.labels()[argmax(p)]);
    Sentence p{s.id, s.tokens, repair_tags(tags, sentences.schema)};
    out.sentences.push_back(std::move(p));
  }
  return out;
}

/// Writes `content` to `path` through a temporary file and a rename.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

struct PipelineResult {
  Prf metrics;
  Corpus predictions;
  std::size_t unlabeled_used = 0;
};

struct PipelineComponents {
  ScorerFactory scorer_factory;
  ClassifierFactory classifier_factory;
};

inline PipelineComponents builtin_components(const PipelineConfig& config) {
  const std::size_t sw = config.scorer_window, cw = config.classifier_window;
  return {[sw] { return std::make_unique<BaselineScorer>(sw); },
          [cw] { return std::make_unique<LinearTokenClassifier>(cw); }};
}

/// Runs every stage for one seed and scores `test`. When `run_dir` is given
/// the stage artifacts land there as they are produced:
///   config.json, models/pvp-<id>.json, soft_labels.tsv, final_model.json,
///   predictions.conll, report.json
inline PipelineResult run_pipeline(const Corpus& train, const Corpus& unlabeled, const Corpus& test,
                                   const PipelineConfig& config, std::uint64_t seed,
                                   const PipelineComponents& components,
                                   const std::optional<std::filesystem::path>& run_dir = std::nullopt) {
  namespace fs = std::filesystem;
  config.check();
  if (train.empty()) throw ConfigError("no training sentences (k = 0); few-shot training needs k >= 1");
  if (!(train.schema == unlabeled.schema && train.schema == test.schema) ||
      train.entity_type != unlabeled.entity_type || train.entity_type != test.entity_type)
    throw ConfigError("train, unlabeled and test corpora must share schema and entity type");
  if (unlabeled.empty()) throw ConfigError("unlabeled pool is empty");

  auto save = [&](const std::string& rel, const std::string& content) {
    if (run_dir) write_file_atomic(*run_dir / rel, content);
  };
  auto stage = [&](const std::string& name, auto&& fn) -> decltype(fn()) {
    try {
      return fn();
    } catch (const StageError&) {
      throw;
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
  };

  nlohmann::ordered_json cfg = config.to_json(train.schema);
  cfg["seed"] = seed;
  cfg["entity_type"] = train.entity_type;
  cfg["schema"] = train.schema.name();
  save("config.json", cfg.dump(2) + "\n");

  auto scorers = stage("train_pvp_models", [&] {
    return train_pvp_models(train, config, components.scorer_factory, seed);
  });
  for (std::size_t i = 0; i < scorers.size(); ++i)
    save("models/pvp-" + config.pvps[i].id() + ".json", scorers[i]->save().dump() + "\n");

  // Shuffle before capping so the first-N cut is an unbiased sample.
  Corpus pool = unlabeled.untagged();
  if (pool.size() > config.unlabeled_cap) {
    SplitMix64 rng(derive_seed(seed, kSaltUnlabeledShuffle));
    rng.shuffle(pool.sentences);
  }
  auto soft = stage("soft_label", [&] { return soft_label(pool, scorers, config); });
  if (run_dir) {
    std::ostringstream os;
    write_soft_labels(os, soft);
    save("soft_labels.tsv", os.str());
  }

  auto clf = stage("distill", [&] { return distill(soft, config, components.classifier_factory, seed); });
  save("final_model.json", clf->save().dump() + "\n");

  PipelineResult result;
  result.unlabeled_used = soft.size();
  result.predictions = stage("predict", [&] { return predict(*clf, test.untagged()); });
  save("predictions.conll", to_conll(result.predictions));
  result.metrics = stage("evaluate", [&] { return span_prf(test, result.predictions); });

  nlohmann::ordered_json rep;
  rep["seed"] = seed;
  rep["shots"] = config.shots;
  rep["train_sentences"] = train.size();
  rep["unlabeled_used"] = result.unlabeled_used;
  rep["test"] = prf_to_json(result.metrics);
  save("report.json", rep.dump(2) + "\n");
  return result;
}

}  // namespace peter
