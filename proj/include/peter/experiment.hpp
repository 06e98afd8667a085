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

// Multi-seed k-shot protocol: for every (shots, seed) cell, sample the
// training sentences, run the pipeline and score the whole test set; then
// summarize each shot count as mean and standard deviation over seeds.
// There is no development split and nothing is tuned on the test set.

#pragma once

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "peter/corpus.hpp"
#include "peter/metrics.hpp"
#include "peter/pipeline.hpp"

namespace peter {

/// FNV-1a 64-bit, as 16 lowercase hex digits.
inline std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct ProtocolConfig {
  std::vector<std::size_t> shots{10, 25, 50, 100};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::size_t workers = 1;
  /// Divide by n - 1 instead of n.
  bool sample_std = false;
  PipelineConfig pipeline;
};

struct CellResult {
  std::size_t shots = 0;
  std::uint64_t seed = 0;
  std::size_t train_sentences = 0;
  std::size_t train_mentions = 0;
  std::optional<Prf> metrics;
  std::string error;

  bool ok() const { return metrics.has_value(); }
};

struct ShotSummary {
  std::size_t shots = 0;
  std::size_t completed = 0;
  MeanStd precision, recall, f1;
  double mean_train_mentions = 0.0;
};

struct ProtocolReport {
  std::vector<CellResult> cells;
  std::vector<ShotSummary> summaries;
  std::string fingerprint;
  bool sample_std = false;

  bool all_ok() const {
    return std::all_of(cells.begin(), cells.end(), [](const CellResult& c) { return c.ok(); });
  }

  const ShotSummary* summary(std::size_t shots) const {
    for (const auto& s : summaries)
      if (s.shots == shots) return &s;
    return nullptr;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["fingerprint"] = fingerprint;
    j["std"] = sample_std ? "sample" : "population";
    nlohmann::ordered_json cs = nlohmann::ordered_json::array();
    for (const auto& c : cells) {
      nlohmann::ordered_json cj;
      cj["shots"] = c.shots;
      cj["seed"] = c.seed;
      cj["train_sentences"] = c.train_sentences;
      cj["train_mentions"] = c.train_mentions;
      if (c.metrics) cj["metrics"] = prf_to_json(*c.metrics);
      else cj["error"] = c.error;
      cs.push_back(cj);
    }
    j["cells"] = cs;
    nlohmann::ordered_json ss = nlohmann::ordered_json::array();
    for (const auto& s : summaries) {
      auto ms = [](const MeanStd& m) { return nlohmann::ordered_json{{"mean", m.mean}, {"std", m.std}}; };
      ss.push_back({{"shots", s.shots},
                    {"completed", s.completed},
                    {"mean_train_mentions", s.mean_train_mentions},
                    {"precision", ms(s.precision)},
                    {"recall", ms(s.recall)},
                    {"f1", ms(s.f1)}});
    }
    j["summary"] = ss;
    return j;
  }

  /// Aligned text table: one row per shot count with mean ± std, then the
  /// per-seed rows.
  std::string table() const {
    std::ostringstream os;
    char line[256];
    auto pm = [](const MeanStd& m) {
      char b[48];
      std::snprintf(b, sizeof b, "%.4f ± %.4f", m.mean, m.std);
      return std::string(b);
    };
    std::snprintf(line, sizeof line, "%-6s %-8s %-18s %-18s %-18s\n", "Shots", "Mentions", "Precision", "Recall",
                  "F1");
    os << line;
    for (const auto& s : summaries) {
      std::snprintf(line, sizeof line, "%-6zu %-8.1f %-19s %-19s %-19s\n", s.shots, s.mean_train_mentions,
                    pm(s.precision).c_str(), pm(s.recall).c_str(), pm(s.f1).c_str());
      os << line;
    }
    os << "\n";
    std::snprintf(line, sizeof line, "%-6s %-6s %-10s %-10s %-10s %s\n", "Shots", "Seed", "Precision", "Recall", "F1",
                  "Support");
    os << line;
    for (const auto& c : cells) {
      if (c.metrics) {
        std::snprintf(line, sizeof line, "%-6zu %-6llu %-10.4f %-10.4f %-10.4f %zu\n", c.shots,
                      static_cast<unsigned long long>(c.seed), c.metrics->precision, c.metrics->recall,
                      c.metrics->f1, c.metrics->support);
      } else {
        std::snprintf(line, sizeof line, "%-6zu %-6llu FAILED: ", c.shots, static_cast<unsigned long long>(c.seed));
      }
      os << line;
      if (!c.metrics) os << c.error << "\n";
    }
    return os.str();
  }

  /// "shots,seed,precision,recall,f1" rows for plotting F1 against shots.
  std::string curve_csv() const {
    std::ostringstream os;
    os << "shots,seed,precision,recall,f1\n";
    for (const auto& c : cells) {
      if (!c.metrics) continue;
      os << c.shots << ',' << c.seed << ',' << detail::shortest(c.metrics->precision) << ','
         << detail::shortest(c.metrics->recall) << ',' << detail::shortest(c.metrics->f1) << '\n';
    }
    return os.str();
  }
};

/// Aggregates cells into per-shot summaries; shot order follows first
/// appearance, failed cells are left out of the statistics.
inline std::vector<ShotSummary> summarize(const std::vector<CellResult>& cells, bool sample_std) {
  std::vector<ShotSummary> out;
  std::vector<std::size_t> order;
  std::map<std::size_t, std::vector<const CellResult*>> by_shot;
  for (const auto& c : cells) {
    if (!by_shot.count(c.shots)) order.push_back(c.shots);
    by_shot[c.shots].push_back(&c);
  }
  for (auto k : order) {
    std::vector<double> p, r, f, m;
    for (const auto* c : by_shot[k]) {
      m.push_back(static_cast<double>(c->train_mentions));
      if (!c->metrics) continue;
      p.push_back(c->metrics->precision);
      r.push_back(c->metrics->recall);
      f.push_back(c->metrics->f1);
    }
    ShotSummary s;
    s.shots = k;
    s.completed = f.size();
    s.precision = mean_std(p, sample_std);
    s.recall = mean_std(r, sample_std);
    s.f1 = mean_std(f, sample_std);
    s.mean_train_mentions = mean_std(m).mean;
    out.push_back(s);
  }
  return out;
}

using ComponentsFactory = std::function<PipelineComponents(const PipelineConfig&)>;

/// Runs every (shots, seed) cell. `unlabeled` defaults to the untagged
/// remainder of the training pool after sampling. Cells run on up to
/// `workers` threads and are reported in (shots, seed) input order.
inline ProtocolReport run_protocol(const Corpus& train_pool, const std::optional<Corpus>& unlabeled,
                                   const Corpus& test, const ProtocolConfig& config,
                                   const ComponentsFactory& components = builtin_components,
                                   const std::optional<std::filesystem::path>& run_dir = std::nullopt) {
  if (config.shots.empty() || config.seeds.empty()) throw ConfigError("need at least one shot count and one seed");
  ProtocolReport report;
  report.sample_std = config.sample_std;
  {
    nlohmann::ordered_json fp = config.pipeline.to_json(train_pool.schema);
    fp["shots"] = config.shots;
    fp["seeds"] = config.seeds;
    fp["entity_type"] = train_pool.entity_type;
    fp["schema"] = train_pool.schema.name();
    report.fingerprint = fnv1a_hex(fp.dump());
  }
  for (auto k : config.shots)
    for (auto s : config.seeds) report.cells.push_back(CellResult{k, s, 0, 0, std::nullopt, {}});

  auto run_cell = [&](CellResult& cell) {
    try {
      auto split = split_k_shot(train_pool, KShotSpec{cell.shots, cell.seed});
      cell.train_sentences = split.sample.size();
      cell.train_mentions = corpus_stats(split.sample).entities;
      PipelineConfig pc = config.pipeline;
      pc.shots = cell.shots;
      std::optional<std::filesystem::path> dir;
      if (run_dir) dir = *run_dir / ("k" + std::to_string(cell.shots)) / ("seed" + std::to_string(cell.seed));
      const Corpus& pool = unlabeled ? *unlabeled : split.rest;
      auto result = run_pipeline(split.sample, pool, test, pc, cell.seed, components(pc), dir);
      cell.metrics = result.metrics;
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(config.workers, report.cells.size()));
  if (workers == 1) {
    for (auto& c : report.cells) run_cell(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next++) < report.cells.size();) run_cell(report.cells[i]);
      });
    for (auto& t : pool) t.join();
  }
  report.summaries = summarize(report.cells, config.sample_std);
  return report;
}

/// Tags each test token with the tag it carried most often in `train`
/// (lowest label index on ties), O when unseen; then IOB2 repair.
inline Corpus majority_tag_baseline(const Corpus& train, const Corpus& test) {
  std::map<std::string, std::vector<std::size_t>> counts;
  for (const auto& s : train.sentences)
    for (std::size_t i = 0; i < s.size(); ++i) {
      auto& c = counts[s.tokens[i]];
      c.resize(train.schema.size(), 0);
      ++c[train.schema.require_index((*s.tags)[i])];
    }
  Corpus out = test.with_sentences({});
  for (const auto& s : test.sentences) {
    std::vector<std::string> tags;
    for (const auto& tok : s.tokens) {
      auto it = counts.find(tok);
      if (it == counts.end()) {
        tags.push_back(test.schema.labels()[test.schema.outside_index()]);
        continue;
      }
      std::size_t best = 0;
      for (std::size_t k = 1; k < it->second.size(); ++k)
        if (it->second[k] > it->second[best]) best = k;
      tags.push_back(test.schema.labels()[best]);
    }
    out.sentences.push_back(Sentence{s.id, s.tokens, repair_tags(tags, test.schema)});
  }
  return out;
}

/// Every token tagged outside.
inline Corpus all_outside_baseline(const Corpus& test) {
  Corpus out = test.with_sentences({});
  const std::string& o = test.schema.labels()[test.schema.outside_index()];
  for (const auto& s : test.sentences)
    out.sentences.push_back(Sentence{s.id, s.tokens, std::vector<std::string>(s.size(), o)});
  return out;
}

}  // namespace peter
