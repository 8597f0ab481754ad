/* Copyright 2026 The oosguard Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <gtest/gtest.h>

#include "oosguard/featurizer.h"
#include "oosguard/metrics.h"
#include "tests/unit/test_util.h"

namespace oosguard {
namespace {

std::vector<ScoredLabel> make_items(const std::vector<double>& scores,
                                    const std::vector<bool>& oos) {
  std::vector<ScoredLabel> items(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    items[i].score = scores[i];
    items[i].is_oos = oos[i];
  }
  return items;
}

// Random items; tie-heavy instances draw scores from a handful of values.
std::vector<ScoredLabel> random_items(CounterRng& rng, std::size_t n, bool ties) {
  std::vector<ScoredLabel> items(n);
  const std::uint64_t levels = 1 + rng.below(8);
  for (auto& it : items) {
    it.score = ties ? static_cast<double>(rng.below(levels)) : rng.normal();
    it.is_oos = rng.below(3) == 0;
  }
  items[0].is_oos = true;
  items[n - 1].is_oos = false;
  return items;
}

// Average precision by threshold enumeration, written independently of the
// library: for each distinct score (descending) count positives and
// predictions at or above it.
double oracle_ap(const std::vector<ScoredLabel>& items) {
  std::vector<double> thresholds;
  std::size_t positives = 0;
  for (const auto& it : items) {
    thresholds.push_back(it.score);
    positives += it.is_oos;
  }
  std::sort(thresholds.rbegin(), thresholds.rend());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  double sum = 0.0;
  std::size_t previous = 0;
  for (double t : thresholds) {
    std::size_t tp = 0, predicted = 0;
    for (const auto& it : items) {
      if (it.score >= t) {
        ++predicted;
        tp += it.is_oos;
      }
    }
    if (tp > previous) {
      sum += static_cast<double>(tp - previous) * static_cast<double>(tp) /
             static_cast<double>(predicted);
    }
    previous = tp;
  }
  return sum / static_cast<double>(positives);
}

// Pairwise Mann-Whitney with doubled integer credit.
double oracle_auroc(const std::vector<ScoredLabel>& items) {
  std::uint64_t twice = 0, pos = 0, neg = 0;
  for (const auto& a : items) {
    if (a.is_oos) ++pos; else ++neg;
    if (!a.is_oos) continue;
    for (const auto& b : items) {
      if (b.is_oos) continue;
      twice += a.score > b.score ? 2 : (a.score == b.score ? 1 : 0);
    }
  }
  return static_cast<double>(twice) /
         (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

TEST(AuprTest, PerfectRanking) {
  EXPECT_EQ(aupr_oos(make_items({5, 4, 3, 1, 0}, {true, true, true, false, false})), 1.0);
}

TEST(AuprTest, HandComputedExample) {
  // Thresholds 0.9 (P=1, R=1/2) and 0.7 (P=2/3, R=1): AP = (1 + 2/3) / 2.
  const auto items = make_items({0.9, 0.8, 0.7, 0.1}, {true, false, true, false});
  EXPECT_DOUBLE_EQ(aupr_oos(items), 5.0 / 6.0);
  EXPECT_NEAR(aupr_oos(items), 0.8333, 1e-4);
}

TEST(AuprTest, SingleOosRankedLast) {
  std::vector<double> scores;
  std::vector<bool> oos;
  for (int i = 0; i < 10; ++i) {
    scores.push_back(10.0 - i);
    oos.push_back(i == 9);
  }
  EXPECT_DOUBLE_EQ(aupr_oos(make_items(scores, oos)), 0.1);
}

TEST(AuprTest, TieBlocksAreOrderIndependent) {
  // One block of four with two positives: precision 1/2 at recall 1.
  EXPECT_EQ(aupr_oos(make_items({1, 1, 1, 1}, {true, false, true, false})), 0.5);
  EXPECT_EQ(aupr_oos(make_items({1, 1, 1, 1}, {false, true, false, true})), 0.5);
}

TEST(AuprTest, NeedsAPositive) {
  EXPECT_THROW(aupr_oos(make_items({1, 2}, {false, false})), DataError);
}

TEST(AurocTest, Examples) {
  EXPECT_EQ(auroc(make_items({3, 2, 1}, {true, false, false})), 1.0);
  EXPECT_EQ(auroc(make_items({2, 2, 2, 2}, {true, false, true, false})), 0.5);
  EXPECT_EQ(auroc(make_items({0.9, 0.8, 0.7, 0.1}, {true, false, true, false})), 0.75);
  EXPECT_THROW(auroc(make_items({1, 2}, {true, true})), DataError);
  EXPECT_THROW(auroc(make_items({1, 2}, {false, false})), DataError);
}

TEST(IntentAccuracyTest, Examples) {
  std::vector<ScoredLabel> items(10);
  for (std::size_t i = 0; i < 10; ++i) {
    items[i].true_intent = static_cast<ClassIndex>(i % 3);
    items[i].predicted_intent = static_cast<ClassIndex>(i == 4 ? 0 : i % 3);
  }
  EXPECT_DOUBLE_EQ(intent_accuracy(items), 0.9);
  ScoredLabel oos;
  oos.is_oos = true;
  items.push_back(oos);
  EXPECT_DOUBLE_EQ(intent_accuracy(items), 0.9);
  for (auto& it : items) it.predicted_intent = it.true_intent;
  EXPECT_EQ(intent_accuracy(items), 1.0);

  std::vector<ScoredLabel> balanced(4);
  for (std::size_t i = 0; i < 4; ++i) {
    balanced[i].true_intent = static_cast<ClassIndex>(i % 2);
    balanced[i].predicted_intent = 0;
  }
  EXPECT_EQ(intent_accuracy(balanced), 0.5);
  EXPECT_THROW(intent_accuracy(std::vector<ScoredLabel>{oos}), DataError);
}

TEST(BruteForceCurveTest, TwoItems) {
  const auto curve = brute_force_pr_curve(make_items({0.2, 0.8}, {false, true}));
  ASSERT_EQ(curve.size(), 2u);
  EXPECT_EQ(curve[0].threshold, 0.8);
  EXPECT_EQ(curve[0].precision, 1.0);
  EXPECT_EQ(curve[0].recall, 1.0);
  EXPECT_EQ(curve[1].threshold, 0.2);
  EXPECT_EQ(curve[1].precision, 0.5);
  EXPECT_EQ(curve[1].recall, 1.0);
}

TEST(BruteForceCurveTest, OrderInvariant) {
  CounterRng rng(1, RngStream::kTest);
  auto items = random_items(rng, 200, true);
  const auto curve = brute_force_pr_curve(items);
  for (int k = 0; k < 5; ++k) {
    rng.shuffle(std::span<ScoredLabel>(items));
    const auto again = brute_force_pr_curve(items);
    ASSERT_EQ(again.size(), curve.size());
    for (std::size_t i = 0; i < curve.size(); ++i) {
      EXPECT_EQ(again[i].threshold, curve[i].threshold);
      EXPECT_EQ(again[i].precision, curve[i].precision);
      EXPECT_EQ(again[i].recall, curve[i].recall);
    }
  }
}

TEST(MetricOracleTest, ExactAgreementOnRandomInstances) {
  for (std::uint64_t trial = 0; trial < 60; ++trial) {
    CounterRng rng(trial, RngStream::kTest, 2);
    const std::size_t n = 2 + rng.below(999);
    const auto items = random_items(rng, n, trial % 2 == 0);
    const double ap = aupr_oos(items);
    EXPECT_EQ(ap, oracle_ap(items)) << "trial " << trial;
    std::size_t positives = 0;
    for (const auto& it : items) positives += it.is_oos;
    EXPECT_EQ(ap, average_precision(brute_force_pr_curve(items), positives));
    EXPECT_EQ(auroc(items), oracle_auroc(items)) << "trial " << trial;
  }
}

TEST(MetricPropertyTest, StrictlyMonotoneTransformInvariance) {
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    CounterRng rng(trial, RngStream::kTest, 3);
    auto items = random_items(rng, 2 + rng.below(300), trial % 2 == 0);
    const double ap = aupr_oos(items);
    const double roc = auroc(items);
    const double a = rng.uniform(0.1, 3.0);
    const double b = rng.uniform(-5.0, 5.0);
    for (auto& it : items) it.score = a * it.score * it.score * it.score + b;
    EXPECT_EQ(aupr_oos(items), ap);
    EXPECT_EQ(auroc(items), roc);
  }
}

TEST(MetricPropertyTest, AurocSymmetry) {
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    CounterRng rng(trial, RngStream::kTest, 4);
    auto items = random_items(rng, 2 + rng.below(300), trial % 2 == 0);
    const double roc = auroc(items);
    for (auto& it : items) {
      it.is_oos = !it.is_oos;
      it.score = -it.score;
    }
    EXPECT_EQ(auroc(items), roc);
  }
}

TEST(MetricPropertyTest, AurocEqualsTrapezoidalRocWithoutTies) {
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    CounterRng rng(trial, RngStream::kTest, 5);
    auto items = random_items(rng, 2 + rng.below(500), false);
    std::sort(items.begin(), items.end(),
              [](const ScoredLabel& x, const ScoredLabel& y) { return x.score > y.score; });
    double pos = 0, neg = 0;
    for (const auto& it : items) (it.is_oos ? pos : neg) += 1;
    double tpr = 0, fpr = 0, area = 0;
    for (const auto& it : items) {
      if (it.is_oos) {
        tpr += 1 / pos;
      } else {
        area += (1 / neg) * tpr;
        fpr += 1 / neg;
      }
    }
    EXPECT_NEAR(auroc(items), area, 1e-12);
  }
}

TEST(DispersionTest, Examples) {
  EXPECT_EQ(dispersion(Matrix(5, 3, 2.5)), 0.0);
  const std::size_t d = 768;
  Matrix x(2 * d, d);
  const double s = std::sqrt(static_cast<double>(d));
  for (std::size_t k = 0; k < d; ++k) {
    x(2 * k, k) = s;
    x(2 * k + 1, k) = -s;
  }
  EXPECT_NEAR(dispersion(x), 768.0, 1e-9);
  EXPECT_THROW(dispersion(Matrix(1, 3)), DataError);
}

TEST(DispersionTest, NonNegativeAndTranslationInvariant) {
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    CounterRng rng(trial, RngStream::kTest, 6);
    const std::size_t n = 2 + rng.below(50);
    const std::size_t d = 1 + rng.below(20);
    Matrix x = testing::random_matrix(rng, n, d, rng.uniform(0.1, 5));
    const double before = dispersion(x);
    EXPECT_GE(before, 0.0);
    const auto shift = testing::random_vector(rng, d, 10.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < d; ++k) x(i, k) += shift[k];
    }
    EXPECT_NEAR(dispersion(x), before, 1e-9 * std::max(1.0, before));
  }
}

FittedScorer toy_scorer(const Matrix& means) {
  ClassStatistics stats{means, Matrix::identity(2), Matrix::identity(2), 0.0};
  return FittedScorer({FeaturizerKind::kPassthrough, 2, 0}, identity_encoder(2), stats,
                      {"a", "b"});
}

TEST(EvaluateTest, DegenerateScorerGivesHalfAuroc) {
  const FittedScorer scorer = toy_scorer(Matrix(2, 2));
  EmbeddingSet test;
  test.features = Matrix{{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  test.labels = {0, kOosLabel, 1, kOosLabel};
  test.label_names = {"a", "b"};
  EXPECT_EQ(evaluate(scorer, test, std::nullopt).auroc, 0.5);
}

TEST(EvaluateTest, ToyFixtureMatchesHandComputation) {
  const FittedScorer scorer = toy_scorer(Matrix{{0, 0}, {10, 0}});
  EmbeddingSet test;
  test.features = Matrix{{1, 0}, {9, 0}, {4, 0}, {5, 5}, {0, 3}};
  test.labels = {0, 1, 1, kOosLabel, kOosLabel};
  test.label_names = {"a", "b"};
  // d_min: 1, 1, 4 (nearest a, wrong), sqrt(50), 3.
  const EvaluationReport r = evaluate(scorer, test, 2.0);
  EXPECT_DOUBLE_EQ(r.aupr_oos, 5.0 / 6.0);
  EXPECT_DOUBLE_EQ(r.auroc, 5.0 / 6.0);
  EXPECT_DOUBLE_EQ(r.intent_accuracy, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.dispersion, 98.0 / 9.0);
  EXPECT_EQ(r.n_is, 3u);
  EXPECT_EQ(r.n_oos, 2u);
  EXPECT_EQ(r.tau_used, 2.0);
}

TEST(EvaluateTest, NeedsBothKinds) {
  const FittedScorer scorer = toy_scorer(Matrix{{0, 0}, {10, 0}});
  EmbeddingSet test;
  test.features = Matrix{{1, 0}, {9, 0}};
  test.labels = {0, 1};
  test.label_names = {"a", "b"};
  EXPECT_THROW(evaluate(scorer, test, std::nullopt), DataError);
}

TEST(EvaluateTest, ThreadCountDoesNotChangeResults) {
  CounterRng rng(7, RngStream::kTest);
  const FittedScorer scorer = toy_scorer(Matrix{{0, 0}, {3, 0}});
  EmbeddingSet test;
  test.features = testing::random_matrix(rng, 700, 2, 3.0);
  for (std::size_t i = 0; i < 700; ++i) {
    test.labels.push_back(i % 4 == 0 ? kOosLabel : static_cast<ClassIndex>(i % 2));
  }
  test.label_names = {"a", "b"};
  const auto one = evaluate(scorer, test, std::nullopt, 1).to_json();
  const auto many = evaluate(scorer, test, std::nullopt, 4).to_json();
  EXPECT_EQ(one, many);
}

TEST(ReportTest, JsonKeysAndRoundTrip) {
  EvaluationReport r;
  r.aupr_oos = 0.75;
  r.auroc = 0.8;
  r.intent_accuracy = 0.9;
  r.dispersion = 12.5;
  r.n_is = 10;
  r.n_oos = 4;
  const nlohmann::json doc = r.to_json();
  std::vector<std::string> keys;
  for (const auto& [k, v] : doc.items()) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  EXPECT_EQ(keys, (std::vector<std::string>{"aupr_oos", "auroc", "dispersion",
                                            "intent_accuracy", "n_is", "n_oos", "tau"}));
  EXPECT_TRUE(doc["tau"].is_null());
  const auto back = EvaluationReport::from_json(nlohmann::json::parse(doc.dump()));
  EXPECT_EQ(back.to_json(), doc);
  r.tau_used = 1.5;
  EXPECT_EQ(EvaluationReport::from_json(r.to_json()).tau_used, 1.5);
  EXPECT_NE(r.to_text().find("auroc=0.8\n"), std::string::npos) << r.to_text();
}

}  // namespace
}  // namespace oosguard
