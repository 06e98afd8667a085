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

// Multinomial logistic regression (maximum entropy) over sparse string
// features. Used both as the built-in cloze scorer and as the built-in
// final token classifier; the two differ only in how features are built.
//
// Objective for one example with feature vector x and target distribution
// t over K labels, logits z = W^T x:
//
//   L = -sum_k t_k log softmax(z)_k + (l2 / 2) ||W_touched||^2
//   dL/dW[f][k] = x_f (softmax(z)_k - t_k) + l2 W[f][k]
//
// The L2 term only applies to rows of features present in the batch.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "peter/error.hpp"
#include "peter/rng.hpp"
#include "peter/softmax.hpp"

namespace peter {

struct Feature {
  std::string name;
  double value = 1.0;

  friend bool operator==(const Feature&, const Feature&) = default;
};

/// Sorted by name with duplicates merged (values summed), so a multiset of
/// names becomes name -> count.
using FeatureVector = std::vector<Feature>;

inline FeatureVector make_features(std::vector<std::string> names) {
  std::sort(names.begin(), names.end());
  FeatureVector out;
  for (auto& n : names) {
    if (!out.empty() && out.back().name == n) out.back().value += 1.0;
    else out.push_back(Feature{std::move(n), 1.0});
  }
  return out;
}

struct TrainConfig {
  std::size_t epochs = 1;
  double learning_rate = 0.1;
  /// 0 means full batch.
  std::size_t batch_size = 1;
  double l2 = 0.0;
  /// Seeds the per-epoch shuffle; unused in full-batch mode.
  std::uint64_t seed = 0;

  nlohmann::ordered_json to_json() const {
    return {{"epochs", epochs}, {"learning_rate", learning_rate}, {"batch_size", batch_size},
            {"l2", l2}, {"seed", seed}};
  }

  static TrainConfig from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.epochs = j.value("epochs", c.epochs);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.l2 = j.value("l2", c.l2);
    c.seed = j.value("seed", c.seed);
    return c;
  }
};

struct TrainingExample {
  FeatureVector features;
  /// Target distribution over labels (one-hot for hard labels).
  std::vector<double> target;
};

inline std::vector<double> one_hot(std::size_t label, std::size_t size) {
  std::vector<double> t(size, 0.0);
  t.at(label) = 1.0;
  return t;
}

class LinearModel {
 public:
  explicit LinearModel(std::size_t num_labels = 1) : num_labels_(num_labels) {
    if (num_labels == 0) throw Error("linear model needs at least one label");
  }

  std::size_t num_labels() const { return num_labels_; }
  std::size_t num_features() const { return names_.size(); }

  /// Logits for a feature vector; unseen features contribute nothing.
  std::vector<double> logits(const FeatureVector& x) const {
    std::vector<double> z(num_labels_, 0.0);
    for (const auto& f : x) {
      auto it = index_.find(f.name);
      if (it == index_.end()) continue;
      const double* row = &w_[it->second * num_labels_];
      for (std::size_t k = 0; k < num_labels_; ++k) z[k] += f.value * row[k];
    }
    return z;
  }

  /// Row index for a feature, creating a zero row if needed.
  std::size_t intern(const std::string& name) {
    auto [it, inserted] = index_.try_emplace(name, names_.size());
    if (inserted) {
      names_.push_back(name);
      w_.resize(w_.size() + num_labels_, 0.0);
    }
    return it->second;
  }

  double& weight(std::size_t row, std::size_t label) { return w_[row * num_labels_ + label]; }
  double weight(std::size_t row, std::size_t label) const { return w_[row * num_labels_ + label]; }

  std::optional<std::size_t> find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// Features sorted by name; doubles print as their shortest round-trip
  /// representation, so equal models serialize to equal bytes.
  nlohmann::ordered_json to_json() const {
    std::vector<std::size_t> order(names_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return names_[a] < names_[b]; });
    nlohmann::ordered_json feats = nlohmann::ordered_json::array();
    for (auto r : order) {
      std::vector<double> row(w_.begin() + r * num_labels_, w_.begin() + (r + 1) * num_labels_);
      feats.push_back({names_[r], row});
    }
    return {{"labels", num_labels_}, {"features", feats}};
  }

  static LinearModel from_json(const nlohmann::json& j) {
    LinearModel m(j.at("labels").get<std::size_t>());
    for (const auto& entry : j.at("features")) {
      auto row = m.intern(entry.at(0).get<std::string>());
      const auto& ws = entry.at(1);
      if (ws.size() != m.num_labels_) throw Error("model row has wrong width");
      for (std::size_t k = 0; k < m.num_labels_; ++k) {
        double v = ws.at(k).get<double>();
        if (!std::isfinite(v)) throw Error("non-finite weight in model");
        m.weight(row, k) = v;
      }
    }
    return m;
  }

 private:
  std::size_t num_labels_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::string> names_;
  std::vector<double> w_;
};

namespace detail {

struct CompiledExample {
  std::vector<std::pair<std::size_t, double>> features;
  const std::vector<double>* target;
};

inline void compiled_logits(const LinearModel& m, const CompiledExample& ex, std::vector<double>& z) {
  std::fill(z.begin(), z.end(), 0.0);
  for (auto [row, v] : ex.features)
    for (std::size_t k = 0; k < z.size(); ++k) z[k] += v * m.weight(row, k);
}

}  // namespace detail

/// Mean cross-entropy of the model on a dataset (no L2 term).
inline double mean_loss(const LinearModel& model, const std::vector<TrainingExample>& data) {
  if (data.empty()) return 0.0;
  double total = 0.0;
  for (const auto& ex : data) total += cross_entropy(model.logits(ex.features), ex.target);
  return total / static_cast<double>(data.size());
}

/// Mini-batch gradient descent. Batches follow a fresh SplitMix64 shuffle
/// per epoch seeded from (config.seed, epoch); full-batch mode keeps data
/// order. Returns the mean training loss after each epoch.
inline std::vector<double> train_linear(LinearModel& model, const std::vector<TrainingExample>& data,
                                        const TrainConfig& cfg) {
  if (data.empty()) throw Error("cannot train on an empty example list");
  if (cfg.epochs == 0) throw ConfigError("epochs must be at least 1");
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  const std::size_t K = model.num_labels();

  std::vector<detail::CompiledExample> compiled;
  compiled.reserve(data.size());
  for (const auto& ex : data) {
    if (ex.target.size() != K) throw Error("target width does not match the label count");
    detail::CompiledExample c{{}, &ex.target};
    c.features.reserve(ex.features.size());
    for (const auto& f : ex.features) c.features.emplace_back(model.intern(f.name), f.value);
    compiled.push_back(std::move(c));
  }

  const std::size_t n = compiled.size();
  const std::size_t batch = (cfg.batch_size == 0 || cfg.batch_size >= n) ? n : cfg.batch_size;
  std::vector<std::size_t> order(n);
  std::vector<double> z(K), grad_rows;
  std::vector<std::size_t> touched;
  std::vector<std::ptrdiff_t> slot(model.num_features(), -1);
  std::vector<double> losses;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (batch < n) {
      SplitMix64 rng(derive_seed(cfg.seed, epoch));
      rng.shuffle(order);
    }
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t stop = std::min(n, start + batch);
      const double scale = 1.0 / static_cast<double>(stop - start);
      touched.clear();
      grad_rows.clear();
      for (std::size_t b = start; b < stop; ++b) {
        const auto& ex = compiled[order[b]];
        detail::compiled_logits(model, ex, z);
        auto p = restricted_softmax(z);
        for (std::size_t k = 0; k < K; ++k) p[k] = (p[k] - (*ex.target)[k]) * scale;
        for (auto [row, v] : ex.features) {
          if (slot[row] < 0) {
            slot[row] = static_cast<std::ptrdiff_t>(touched.size());
            touched.push_back(row);
            grad_rows.resize(grad_rows.size() + K, 0.0);
          }
          double* g = &grad_rows[static_cast<std::size_t>(slot[row]) * K];
          for (std::size_t k = 0; k < K; ++k) g[k] += v * p[k];
        }
      }
      for (std::size_t i = 0; i < touched.size(); ++i) {
        const std::size_t row = touched[i];
        for (std::size_t k = 0; k < K; ++k) {
          double& w = model.weight(row, k);
          w -= cfg.learning_rate * (grad_rows[i * K + k] + cfg.l2 * w);
        }
        slot[row] = -1;
      }
    }
    double total = 0.0;
    for (const auto& ex : compiled) {
      detail::compiled_logits(model, ex, z);
      total += cross_entropy(z, *ex.target);
    }
    losses.push_back(total / static_cast<double>(n));
  }
  return losses;
}

/// Analytic gradient of the single-example objective, keyed by feature
/// name, one entry per label.
inline std::map<std::string, std::vector<double>> analytic_gradient(const LinearModel& model,
                                                                    const TrainingExample& ex,
                                                                    double l2 = 0.0) {
  const std::size_t K = model.num_labels();
  auto p = restricted_softmax(model.logits(ex.features));
  std::map<std::string, std::vector<double>> g;
  for (const auto& f : ex.features) {
    auto& row = g[f.name];
    row.assign(K, 0.0);
    auto r = model.find(f.name);
    for (std::size_t k = 0; k < K; ++k)
      row[k] = f.value * (p[k] - ex.target[k]) + (r ? l2 * model.weight(*r, k) : 0.0);
  }
  return g;
}

inline double example_objective(const LinearModel& model, const TrainingExample& ex, double l2) {
  double loss = cross_entropy(model.logits(ex.features), ex.target);
  if (l2 > 0.0)
    for (const auto& f : ex.features)
      if (auto r = model.find(f.name))
        for (std::size_t k = 0; k < model.num_labels(); ++k)
          loss += 0.5 * l2 * model.weight(*r, k) * model.weight(*r, k);
  return loss;
}

/// Largest relative error between the analytic gradient and central finite
/// differences over every weight of the example's features:
///   |a - n| / max(|a|, |n|, 1e-6).
/// Features the model has not seen are interned on a copy first.
inline double gradient_check(const LinearModel& model, const TrainingExample& ex, double epsilon,
                             double l2 = 0.0) {
  if (!(epsilon > 0.0)) throw ConfigError("gradient check epsilon must be positive");
  LinearModel m = model;
  for (const auto& f : ex.features) m.intern(f.name);
  auto analytic = analytic_gradient(m, ex, l2);
  double worst = 0.0;
  for (const auto& [name, row] : analytic) {
    const std::size_t r = *m.find(name);
    for (std::size_t k = 0; k < m.num_labels(); ++k) {
      const double saved = m.weight(r, k);
      m.weight(r, k) = saved + epsilon;
      const double up = example_objective(m, ex, l2);
      m.weight(r, k) = saved - epsilon;
      const double down = example_objective(m, ex, l2);
      m.weight(r, k) = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double denom = std::max({std::abs(row[k]), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(row[k] - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace peter
