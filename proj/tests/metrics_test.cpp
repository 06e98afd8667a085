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

#include <cmath>

#include "support/fixtures.hpp"

namespace peter {
namespace {

Corpus corpus_of(std::vector<std::vector<std::string>> tag_rows) {
  Corpus c;
  for (std::size_t i = 0; i < tag_rows.size(); ++i)
    c.sentences.push_back(
        Sentence{default_sentence_id(i), std::vector<std::string>(tag_rows[i].size(), "w"), tag_rows[i]});
  return c;
}

TEST(SpanPrf, IdentityIsPerfect) {
  auto g = corpus_of({{"B", "I", "O", "B"}, {"O"}});
  auto m = span_prf(g, g);
  EXPECT_EQ(m.precision, 1.0);
  EXPECT_EQ(m.recall, 1.0);
  EXPECT_EQ(m.f1, 1.0);
  EXPECT_EQ(m.support, 2u);
}

TEST(SpanPrf, HalfRightExample) {
  auto g = corpus_of({{"B", "I", "O", "B", "O"}});
  auto p = corpus_of({{"B", "I", "O", "O", "B"}});
  auto m = span_prf(g, p);
  EXPECT_EQ(m.precision, 0.5);
  EXPECT_EQ(m.recall, 0.5);
  EXPECT_EQ(m.f1, 0.5);
}

TEST(SpanPrf, BoundaryMismatchIsWrong) {
  auto m = span_prf(corpus_of({{"B", "I", "O"}}), corpus_of({{"B", "O", "O"}}));
  EXPECT_EQ(m.correct, 0u);
  EXPECT_EQ(m.f1, 0.0);
}

TEST(SpanPrf, EmptyPredictionConvention) {
  auto m = span_prf(corpus_of({{"B", "O"}}), corpus_of({{"O", "O"}}));
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_EQ(m.recall, 0.0);
  EXPECT_EQ(m.f1, 0.0);
  EXPECT_EQ(m.support, 1u);
  auto none = span_prf(corpus_of({{"O"}}), corpus_of({{"O"}}));
  EXPECT_EQ(none.f1, 0.0);
}

TEST(SpanPrf, AlignmentErrorsNameSentence) {
  auto g = corpus_of({{"O"}, {"O", "O"}});
  auto p = corpus_of({{"O"}, {"O"}});
  try {
    span_prf(g, p);
    FAIL();
  } catch (const AlignmentError& e) {
    EXPECT_NE(std::string(e.what()).find("'s1'"), std::string::npos);
  }
  auto renamed = g;
  renamed.sentences[0].id = "other";
  EXPECT_THROW(span_prf(g, renamed), AlignmentError);
  EXPECT_THROW(span_prf(g, corpus_of({{"O"}})), AlignmentError);
}

TEST(SpanPrf, MatchesBruteForceOracle) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    auto gold = testing::random_corpus(rng, 10, 20);
    auto pred = testing::perturb(rng, gold);
    auto m = span_prf(gold, pred);
    auto o = testing::brute_force_prf(gold, pred);
    ASSERT_EQ(m.correct, o.correct);
    ASSERT_EQ(m.predicted, o.pred);
    ASSERT_EQ(m.support, o.gold);
    ASSERT_EQ(m.precision, o.precision);
    ASSERT_EQ(m.recall, o.recall);
    ASSERT_EQ(m.f1, o.f1);
  }
}

TEST(SpanPrf, SwapExchangesPrecisionAndRecall) {
  std::mt19937_64 rng(78);
  for (int trial = 0; trial < 300; ++trial) {
    auto gold = testing::random_corpus(rng, 10, 20);
    auto pred = testing::perturb(rng, gold);
    auto a = span_prf(gold, pred), b = span_prf(pred, gold);
    EXPECT_EQ(a.precision, b.recall);
    EXPECT_EQ(a.recall, b.precision);
    EXPECT_DOUBLE_EQ(a.f1, b.f1);
  }
}

TEST(SpanPrf, SentenceOrderIrrelevant) {
  std::mt19937_64 rng(79);
  for (int trial = 0; trial < 200; ++trial) {
    auto gold = testing::random_corpus(rng, 10, 20);
    auto pred = testing::perturb(rng, gold);
    auto before = span_prf(gold, pred);
    std::vector<std::size_t> order(gold.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    Corpus g2 = gold.with_sentences({}), p2 = pred.with_sentences({});
    for (auto i : order) {
      g2.sentences.push_back(gold.sentences[i]);
      p2.sentences.push_back(pred.sentences[i]);
    }
    EXPECT_EQ(span_prf(g2, p2), before);
  }
}

TEST(MeanStd, PopulationAndSample) {
  auto same = mean_std(std::vector<double>{0.2, 0.2, 0.2});
  EXPECT_NEAR(same.mean, 0.2, 1e-15);
  EXPECT_NEAR(same.std, 0.0, 1e-12);
  auto spread = mean_std(std::vector<double>{0.0, 0.2, 0.4});
  EXPECT_NEAR(spread.mean, 0.2, 1e-15);
  EXPECT_NEAR(spread.std, std::sqrt(0.08 / 3.0), 1e-15);
  EXPECT_NEAR(spread.std, 0.163299, 1e-6);
  EXPECT_NEAR(mean_std(std::vector<double>{0.0, 0.2, 0.4}, true).std, 0.2, 1e-15);
  auto empty = mean_std(std::vector<double>{});
  EXPECT_EQ(empty.mean, 0.0);
}

}  // namespace
}  // namespace peter
