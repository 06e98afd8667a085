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

// Acceptance suite: one PASS/FAIL line per criterion, built-in scorer only.
// Exits non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "support/fixtures.hpp"

using namespace peter;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void criterion(const char* name, double time_limit_s, const std::function<Outcome()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (time_limit_s > 0 && secs >= time_limit_s) {
    o.pass = false;
    o.detail += "; over the " + std::to_string(static_cast<int>(time_limit_s)) + " s limit";
  }
  if (!o.pass) ++failures;
  std::printf("%s  %-28s %7.2fs  %s\n", o.pass ? "PASS" : "FAIL", name, secs, o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

/// Returns log(p) so that restricted_softmax recovers p.
class FixedScorer : public Scorer {
 public:
  explicit FixedScorer(LabelDistribution p) : p_(std::move(p)) {}
  void prepare(std::span<const std::string>) override {}
  LogitVector score(const ScoreRequest&) override {
    LogitVector z;
    for (double v : p_) z.push_back(std::log(v));
    return z;
  }
  double train(const std::vector<LabeledCloze>&, const TrainConfig&) override { return 0.0; }
  nlohmann::ordered_json save() override { return {}; }

 private:
  LabelDistribution p_;
};

Outcome expansion_cardinality() {
  std::mt19937_64 rng(1001);
  const auto pvps = builtin_pvps(TagSchema::iob2());
  std::size_t violations = 0, examples = 0;
  for (int i = 0; i < 1000; ++i) {
    auto s = testing::random_sentence(rng, std::uniform_int_distribution<std::size_t>(1, 60)(rng), "s");
    for (const auto& pvp : pvps) {
      auto exs = expand(pvp.pattern, s, "disease");
      examples += exs.size();
      if (exs.size() != s.size()) ++violations;
      for (std::size_t t = 0; t < exs.size(); ++t) {
        const auto masks = std::count(exs[t].rendered_tokens.begin(), exs[t].rendered_tokens.end(), kMaskToken);
        if (masks != 1 || exs[t].token_index != t) ++violations;
      }
    }
  }
  return {violations == 0, std::to_string(examples) + " examples, " + std::to_string(violations) + " violations"};
}

Outcome softmax_suite() {
  std::mt19937_64 rng(1002);
  std::uniform_real_distribution<double> big(-1e4, 1e4), small(-10, 10);
  std::uniform_int_distribution<int> len(1, 10);
  double worst_sum = 0, worst_shift = 0;
  std::size_t argmax_changes = 0;
  for (int i = 0; i < 10000; ++i) {
    std::vector<double> z(len(rng));
    for (auto& v : z) v = i % 2 ? big(rng) : small(rng);
    const double c = big(rng);
    std::vector<double> zc = z;
    for (auto& v : zc) v += c;
    auto p = restricted_softmax(z), q = restricted_softmax(zc);
    double sum = 0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      sum += p[k];
      worst_shift = std::max(worst_shift, std::abs(p[k] - q[k]));
    }
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
    if (argmax(p) != argmax(z)) ++argmax_changes;
  }
  return {worst_sum <= 1e-9 && worst_shift <= 1e-9 && argmax_changes == 0,
          fmt("max |sum-1| %.2e, max shift diff %.2e, argmax changes %.0f", worst_sum, worst_shift,
              static_cast<double>(argmax_changes))};
}

Outcome gradient_check_suite() {
  std::mt19937_64 rng(1003);
  const auto pvp = builtin_pvp("p1", TagSchema::iob2());
  std::normal_distribution<double> w(0.0, 0.5);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    // Random scorer: features seen on a random sentence, random weights.
    auto s = testing::random_sentence(rng, std::uniform_int_distribution<std::size_t>(1, 15)(rng), "s");
    auto exs = expand(pvp.pattern, s, "disease");
    LinearModel m(3);
    for (const auto& ex : exs)
      for (const auto& f : baseline_featurize(ex, 2)) {
        auto r = m.intern(f.name);
        for (std::size_t k = 0; k < 3; ++k) m.weight(r, k) = w(rng);
      }
    const auto& ex = exs[std::uniform_int_distribution<std::size_t>(0, exs.size() - 1)(rng)];
    TrainingExample te{baseline_featurize(ex, 2), one_hot(TagSchema::iob2().require_index(*ex.gold_label), 3)};
    worst = std::max(worst, gradient_check(m, te, 1e-5, trial % 2 ? 0.0 : 1e-3));
  }
  return {worst < 1e-4, fmt("max relative error %.3e over 100 models", worst)};
}

Outcome span_oracle() {
  std::mt19937_64 rng(1004);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    auto gold = testing::random_corpus(rng, 10, 20);
    auto pred = testing::perturb(rng, gold);
    for (const auto& s : gold.sentences) {
      auto spans = extract_spans(s, gold.schema, gold.entity_type);
      auto ref = testing::brute_force_spans(*s.tags);
      bool same = spans.size() == ref.size();
      for (std::size_t i = 0; same && i < spans.size(); ++i)
        same = spans[i].start == ref[i].first && spans[i].end == ref[i].second && spans[i].sentence_id == s.id;
      if (!same) ++mismatches;
    }
    auto m = span_prf(gold, pred);
    auto o = testing::brute_force_prf(gold, pred);
    if (m.precision != o.precision || m.recall != o.recall || m.f1 != o.f1 || m.support != o.gold) ++mismatches;
  }
  return {mismatches == 0, "1000 corpora, " + std::to_string(mismatches) + " mismatches"};
}

Outcome round_trips() {
  std::mt19937_64 rng(1005);
  std::size_t conll = 0, spans = 0, repair = 0;
  const auto schema = TagSchema::iob2();
  for (int trial = 0; trial < 1000; ++trial) {
    auto c = testing::random_corpus(rng, 10, 20);
    if (trial % 4 == 0) c.sentences.back().id = "named-" + std::to_string(trial);
    const std::string text = to_conll(c);
    std::istringstream in(text);
    auto back = parse_conll(in, "rt", schema, c.entity_type);
    if (!(back == c) || to_conll(back) != text) ++conll;
    for (const auto& s : c.sentences)
      if (encode_spans(tag_spans(*s.tags, schema), s.size(), schema) != *s.tags) ++spans;
    auto raw = testing::random_raw_tags(rng, static_cast<std::size_t>(trial % 21));
    auto once = repair_tags(raw, schema);
    if (repair_tags(once, schema) != once || first_invalid_tag(once, schema)) ++repair;
  }
  return {conll + spans + repair == 0, "failures: conll " + std::to_string(conll) + ", spans " + std::to_string(spans) +
                                           ", repair " + std::to_string(repair)};
}

Outcome aggregation() {
  const auto schema = TagSchema::iob2();
  const auto pvps = builtin_pvps(schema);
  PipelineConfig cfg;
  cfg.shots = 10;

  // Single pattern: soft labels are the scorer's own distributions.
  auto corpus = gazetteer_corpus(GazetteerOptions{15000, 200, 4242, "disease", 0.25});
  Corpus train = corpus.with_sentences({corpus.sentences.begin(), corpus.sentences.begin() + 25});
  Corpus pool = corpus.untagged();
  cfg.pvps = {pvps[0]};
  auto scorers = train_pvp_models(train, cfg, [] { return std::make_unique<BaselineScorer>(); }, 1);
  auto soft = soft_label(pool, scorers, cfg);
  std::size_t single_diff = 0;
  for (std::size_t i = 0; i < 200; ++i)
    if (soft.sentences[i].labels != pvp_distributions(*scorers[0], pvps[0], pool.sentences[i], "disease", 128))
      ++single_diff;
  const bool cap_ok = soft.size() == 10000 && soft.sentences.back().id == pool.sentences[9999].id;

  // Two patterns: uniform mean against hand-computed values.
  cfg.pvps = pvps;
  std::vector<std::unique_ptr<Scorer>> two;
  two.push_back(std::make_unique<FixedScorer>(LabelDistribution{0.6, 0.3, 0.1}));
  two.push_back(std::make_unique<FixedScorer>(LabelDistribution{0.2, 0.5, 0.3}));
  Corpus few = pool.with_sentences({pool.sentences.begin(), pool.sentences.begin() + 20});
  auto mean = soft_label(few, two, cfg);
  const double hand[3] = {0.4, 0.4, 0.2};
  double worst = 0;
  for (const auto& s : mean.sentences)
    for (const auto& d : s.labels)
      for (std::size_t k = 0; k < 3; ++k) worst = std::max(worst, std::abs(d[k] - hand[k]));

  return {single_diff == 0 && worst <= 1e-12 && cap_ok,
          "single-pattern diffs " + std::to_string(single_diff) + fmt(", two-pattern max error %.1e", worst) +
              ", labeled " + std::to_string(soft.size()) + " of " + std::to_string(pool.size())};
}

ProtocolReport synthetic_report;
bool synthetic_ran = false;

Outcome synthetic_end_to_end() {
  auto corpus = gazetteer_corpus();
  Corpus pool = corpus.with_sentences({corpus.sentences.begin(), corpus.sentences.begin() + 4000});
  Corpus test = corpus.with_sentences({corpus.sentences.begin() + 4000, corpus.sentences.end()});
  ProtocolConfig pc;
  pc.pipeline.pvps = builtin_pvps(corpus.schema);
  synthetic_report = run_protocol(pool, std::nullopt, test, pc);
  synthetic_ran = true;
  if (!synthetic_report.all_ok()) return {false, "a cell failed"};

  std::vector<double> majority;
  for (auto seed : pc.seeds) {
    auto sample = sample_k_shot(pool, {25, seed});
    majority.push_back(span_prf(test, majority_tag_baseline(sample, test)).f1);
  }
  const double majority_f1 = mean_std(majority).mean;
  const double all_o_f1 = span_prf(test, all_outside_baseline(test)).f1;
  const auto* k25 = synthetic_report.summary(25);
  bool monotone = true;
  std::string curve;
  for (std::size_t i = 0; i < synthetic_report.summaries.size(); ++i) {
    const auto& s = synthetic_report.summaries[i];
    curve += fmt(" k%.0f=%.3f±%.3f", static_cast<double>(s.shots), s.f1.mean, s.f1.std);
    if (i > 0) {
      const auto& prev = synthetic_report.summaries[i - 1];
      if (s.f1.mean < prev.f1.mean - std::max(prev.f1.std, s.f1.std)) monotone = false;
    }
  }
  const bool pass = k25->f1.mean >= 0.60 && k25->f1.mean > all_o_f1 && k25->f1.mean > majority_f1 && monotone;
  return {pass, fmt("k=25 F1 %.4f (all-O %.4f, majority %.4f);", k25->f1.mean, all_o_f1, majority_f1) + curve +
                    (monotone ? "" : " (not monotone)")};
}

Outcome determinism() {
  testing::TempDir dir;
  auto corpus = gazetteer_corpus();
  testing::write_text(dir / "train.conll",
                      to_conll(corpus.with_sentences({corpus.sentences.begin(), corpus.sentences.begin() + 4000})));
  testing::write_text(dir / "test.conll",
                      to_conll(corpus.with_sentences({corpus.sentences.begin() + 4000, corpus.sentences.end()})));
  const std::string cli = PETER_CLI;
  const std::string d = dir.path().string();
  auto first = testing::run_command(cli + " run-experiment --k 10,25 --seeds 1,2,3 --scorer builtin --train '" + d +
                                    "/train.conll' --test '" + d + "/test.conll' --out '" + d + "/a'");
  if (first.exit_code != 0) return {false, "first run exited " + std::to_string(first.exit_code) + ": " + first.output};
  std::string last;
  for (const char* out : {"b", "c"}) {
    auto r = testing::run_command(cli + " run-experiment --manifest '" + d + "/a/manifest.json' --out '" + d + "/" +
                                  out + "'");
    if (r.exit_code != 0) return {false, "manifest run exited " + std::to_string(r.exit_code) + ": " + r.output};
  }
  const std::string ra = testing::read_text(dir / "a/report.json");
  const std::string rb = testing::read_text(dir / "b/report.json");
  const std::string rc = testing::read_text(dir / "c/report.json");
  const bool same = !ra.empty() && ra == rb && rb == rc &&
                    testing::read_text(dir / "b/report.txt") == testing::read_text(dir / "c/report.txt") &&
                    testing::read_text(dir / "b/curve.csv") == testing::read_text(dir / "c/curve.csv");
  return {same, "report digest fnv1a64:" + fnv1a_hex(rb) + (same ? " on all runs" : " differs between runs")};
}

Outcome report_statistics() {
  // Per-seed values with hand-computed population mean and std.
  struct Case {
    std::vector<double> f1;
    double mean, std;
  };
  const std::vector<Case> cases{
      {{0.2, 0.2, 0.2}, 0.2, 0.0},
      {{0.0, 0.2, 0.4}, 0.2, 0.16329931618554522},  // sqrt(0.08 / 3)
      {{0.5, 0.75, 1.0}, 0.75, 0.20412414523193151},  // sqrt(0.125 / 3)
      {{0.61, 0.65}, 0.63, 0.02},
  };
  double worst = 0;
  for (const auto& c : cases) {
    std::vector<CellResult> cells;
    for (std::size_t i = 0; i < c.f1.size(); ++i) {
      CellResult cell;
      cell.shots = 25;
      cell.seed = i + 1;
      cell.metrics = Prf{c.f1[i], c.f1[i], c.f1[i], 1, 1, 1};
      cells.push_back(cell);
    }
    auto s = summarize(cells, false).at(0);
    for (const MeanStd* m : {&s.precision, &s.recall, &s.f1})
      worst = std::max({worst, std::abs(m->mean - c.mean), std::abs(m->std - c.std)});
  }
  // The synthetic run's summaries against a direct recomputation.
  if (synthetic_ran) {
    for (const auto& s : synthetic_report.summaries) {
      std::vector<double> f;
      for (const auto& c : synthetic_report.cells)
        if (c.shots == s.shots) f.push_back(c.metrics->f1);
      double mean = 0, ss = 0;
      for (double v : f) mean += v;
      mean /= static_cast<double>(f.size());
      for (double v : f) ss += (v - mean) * (v - mean);
      const double sd = std::sqrt(ss / static_cast<double>(f.size()));
      worst = std::max({worst, std::abs(s.f1.mean - mean), std::abs(s.f1.std - sd)});
    }
  }
  return {worst <= 1e-12, fmt("max deviation %.1e", worst)};
}

}  // namespace

int main() {
  criterion("expansion-cardinality", 5, expansion_cardinality);
  criterion("restricted-softmax", 5, softmax_suite);
  criterion("gradient-check", 30, gradient_check_suite);
  criterion("span-eval-oracle", 0, span_oracle);
  criterion("round-trips", 0, round_trips);
  criterion("aggregation", 0, aggregation);
  criterion("synthetic-end-to-end", 600, synthetic_end_to_end);
  criterion("protocol-determinism", 0, determinism);
  criterion("report-statistics", 0, report_statistics);
  std::printf("%s: %d failing\n", failures ? "FAILED" : "ALL PASSED", failures);
  return failures ? 1 : 0;
}
