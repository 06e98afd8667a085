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

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>

#include "support/fixtures.hpp"

namespace peter {
namespace {

CellResult cell(std::size_t k, std::uint64_t seed, double p, double r, double f) {
  CellResult c;
  c.shots = k;
  c.seed = seed;
  c.train_mentions = 10 * seed;
  c.metrics = Prf{p, r, f, 100, 100, 50};
  return c;
}

TEST(Summarize, HandComputedMeanStd) {
  std::vector<CellResult> cells{cell(10, 1, 0.5, 0.1, 0.0), cell(10, 2, 0.7, 0.3, 0.2), cell(10, 3, 0.9, 0.2, 0.4),
                                cell(25, 1, 0.2, 0.2, 0.2), cell(25, 2, 0.2, 0.2, 0.2), cell(25, 3, 0.2, 0.2, 0.2)};
  auto s = summarize(cells, false);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].shots, 10u);
  EXPECT_NEAR(s[0].f1.mean, 0.2, 1e-12);
  EXPECT_NEAR(s[0].f1.std, std::sqrt(((0.0 - 0.2) * (0.0 - 0.2) + 0.0 + (0.4 - 0.2) * (0.4 - 0.2)) / 3.0), 1e-12);
  EXPECT_NEAR(s[0].precision.mean, 0.7, 1e-12);
  EXPECT_NEAR(s[0].recall.mean, 0.2, 1e-12);
  EXPECT_NEAR(s[0].mean_train_mentions, 20.0, 1e-12);
  EXPECT_NEAR(s[1].f1.std, 0.0, 1e-12);
}

TEST(Summarize, FailedCellsExcluded) {
  std::vector<CellResult> cells{cell(10, 1, 0.5, 0.5, 0.5), cell(10, 2, 0.7, 0.7, 0.7)};
  cells[1].metrics.reset();
  cells[1].error = "boom";
  auto s = summarize(cells, false);
  EXPECT_EQ(s[0].completed, 1u);
  EXPECT_NEAR(s[0].f1.mean, 0.5, 1e-15);
}

TEST(ProtocolReport, TableAndCurve) {
  ProtocolReport r;
  r.cells = {cell(10, 1, 0.5, 0.25, 0.125), cell(10, 2, 0.5, 0.25, 0.125)};
  r.cells[1].metrics.reset();
  r.cells[1].error = "bridge gone";
  r.summaries = summarize(r.cells, false);
  EXPECT_FALSE(r.all_ok());
  EXPECT_EQ(r.curve_csv(), "shots,seed,precision,recall,f1\n10,1,0.5,0.25,0.125\n");
  const auto t = r.table();
  EXPECT_NE(t.find("0.5000 ± 0.0000"), std::string::npos);
  EXPECT_NE(t.find("FAILED: bridge gone"), std::string::npos);
  auto j = r.to_json();
  EXPECT_EQ(j["cells"][1]["error"], "bridge gone");
  EXPECT_EQ(j["std"], "population");
}

struct Fixture {
  Corpus pool, test;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    auto corpus = gazetteer_corpus(GazetteerOptions{900, 200, 2021, "disease", 0.25});
    return Fixture{corpus.with_sentences({corpus.sentences.begin(), corpus.sentences.begin() + 700}),
                   corpus.with_sentences({corpus.sentences.begin() + 700, corpus.sentences.end()})};
  }();
  return f;
}

ProtocolConfig small_protocol() {
  ProtocolConfig pc;
  pc.pipeline.pvps = builtin_pvps(TagSchema::iob2());
  pc.pipeline.unlabeled_cap = 200;
  return pc;
}

TEST(RunProtocol, DefaultGridHasTwelveCells) {
  auto pc = small_protocol();
  std::atomic<int> pipelines{0};
  ComponentsFactory counting = [&](const PipelineConfig& c) {
    ++pipelines;
    return builtin_components(c);
  };
  auto report = run_protocol(fixture().pool, std::nullopt, fixture().test, pc, counting);
  EXPECT_EQ(report.cells.size(), 12u);
  EXPECT_EQ(pipelines.load(), 12);
  EXPECT_TRUE(report.all_ok());
  ASSERT_EQ(report.summaries.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(report.summaries[i].completed, 3u);
  EXPECT_EQ(report.cells[0].train_sentences, 10u);
  EXPECT_EQ(report.cells[11].train_sentences, 100u);
}

TEST(RunProtocol, WorkersDoNotChangeResults) {
  auto pc = small_protocol();
  pc.shots = {10, 25};
  auto serial = run_protocol(fixture().pool, std::nullopt, fixture().test, pc);
  pc.workers = 3;
  auto parallel = run_protocol(fixture().pool, std::nullopt, fixture().test, pc);
  EXPECT_EQ(serial.to_json().dump(), parallel.to_json().dump());
}

TEST(RunProtocol, FailedCellsAreRecorded) {
  auto pc = small_protocol();
  pc.shots = {10, 12};
  pc.seeds = {1};
  testing::TempDir dir;
  auto report = run_protocol(fixture().pool, std::nullopt, fixture().test, pc, builtin_components, dir.path());
  EXPECT_TRUE(report.cells[0].ok());
  EXPECT_FALSE(report.cells[1].ok());
  EXPECT_NE(report.cells[1].error.find("no epoch count for 12 shots"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir / "k10/seed1/report.json"));
}

TEST(RunProtocol, RejectsEmptyGrid) {
  auto pc = small_protocol();
  pc.seeds.clear();
  EXPECT_THROW(run_protocol(fixture().pool, std::nullopt, fixture().test, pc), ConfigError);
}

TEST(Baselines, AllOutsideScoresZero) {
  auto m = span_prf(fixture().test, all_outside_baseline(fixture().test));
  EXPECT_EQ(m.f1, 0.0);
  EXPECT_EQ(m.predicted, 0u);
}

TEST(Baselines, MajorityTagUsesTrainingCounts) {
  Corpus train;
  train.sentences.push_back(Sentence{"s0", {"flu", "and", "flu"}, {{"B", "O", "B"}}});
  train.sentences.push_back(Sentence{"s1", {"flu", "virus"}, {{"O", "O"}}});
  Corpus test;
  test.sentences.push_back(Sentence{"s0", {"flu", "unseen", "flu"}, {{"B", "O", "B"}}});
  auto pred = majority_tag_baseline(train, test);
  EXPECT_EQ(*pred.sentences[0].tags, (std::vector<std::string>{"B", "O", "B"}));
}

TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
  EXPECT_EQ(fnv1a_hex("foobar"), "85944171f73967e8");
}

}  // namespace
}  // namespace peter
