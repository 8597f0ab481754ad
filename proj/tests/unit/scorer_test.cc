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
#include <limits>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "oosguard/featurizer.h"
#include "oosguard/scorer.h"
#include "oosguard/stats.h"
#include "tests/unit/test_util.h"

namespace oosguard {
namespace {

using testing::random_matrix;
using testing::random_spd;
using testing::random_vector;

FittedScorer make_scorer(const Matrix& means, const Matrix& precision,
                         Featurizer featurizer = {FeaturizerKind::kPassthrough, 0, 0}) {
  ClassStatistics stats;
  stats.means = means;
  stats.covariance = Matrix::identity(means.cols());
  stats.precision = precision;
  std::vector<std::string> labels;
  for (std::size_t j = 0; j < means.rows(); ++j) labels.push_back("c" + std::to_string(j));
  featurizer.dim = means.cols();
  return FittedScorer(featurizer, identity_encoder(means.cols()), stats, labels);
}

TEST(ScoreTest, QueryAtACentroid) {
  CounterRng rng(1, RngStream::kTest);
  const Matrix means = random_matrix(rng, 5, 4, 3.0);
  const FittedScorer scorer = make_scorer(means, random_spd(rng, 4, 0.5));
  const ScoreResult r = scorer.score_embedding(means.row(3));
  EXPECT_EQ(r.d_min, 0.0);
  EXPECT_EQ(r.c_min, 3);
}

TEST(ScoreTest, EuclideanGeometry) {
  const FittedScorer scorer = make_scorer(Matrix{{0, 0}, {10, 0}}, Matrix::identity(2));
  const std::vector<double> q = {1, 0};
  const ScoreResult r = scorer.score_embedding(q, true);
  EXPECT_EQ(r.d_min, 1.0);
  EXPECT_EQ(r.c_min, 0);
  EXPECT_EQ(r.per_class_distances, (std::vector<double>{1.0, 9.0}));
  EXPECT_TRUE(scorer.score_embedding(q).per_class_distances.empty());
}

TEST(ScoreTest, TieGoesToLowerIndex) {
  const FittedScorer scorer =
      make_scorer(Matrix{{9, 0}, {4, 0}, {-2, 0}}, Matrix::identity(2));
  const std::vector<double> q = {1, 0};
  const ScoreResult r = scorer.score_embedding(q);
  EXPECT_EQ(r.d_min, 3.0);
  EXPECT_EQ(r.c_min, 1);
}

TEST(ScoreTest, DimensionMismatch) {
  const FittedScorer scorer = make_scorer(Matrix{{0, 0}, {1, 1}}, Matrix::identity(2));
  EXPECT_THROW(scorer.score_embedding(std::vector<double>{1, 2, 3}), DataError);
  EXPECT_THROW(scorer.score_features(std::vector<double>{1}), DataError);
}

TEST(ScoreTest, TextNeedsAHashingFeaturizer) {
  const FittedScorer passthrough =
      make_scorer(Matrix{{0, 0}, {1, 1}}, Matrix::identity(2));
  try {
    passthrough.score_text("hello");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_STREQ(e.what(), "text scoring unavailable");
  }
  const Featurizer bow{FeaturizerKind::kHashedBow, 8, 0};
  const FittedScorer hashed = make_scorer(Matrix(2, 8), Matrix::identity(8), bow);
  const ScoreResult r = hashed.score_text("play music");
  EXPECT_NEAR(r.d_min, 1.0, 1e-12);  // unit-norm feature vs zero means
}

TEST(ScoreTest, MatchesBruteForceArgmin) {
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    CounterRng rng(trial, RngStream::kTest, 1);
    const std::size_t d = 1 + rng.below(8);
    const std::size_t c = 2 + rng.below(6);
    const Matrix means = random_matrix(rng, c, d, 2.0);
    const Matrix precision = regularized_inverse(random_spd(rng, d, 0.3), 0.0).precision;
    const FittedScorer scorer = make_scorer(means, precision);
    for (int k = 0; k < 20; ++k) {
      const auto q = random_vector(rng, d, 3.0);
      const ScoreResult r = scorer.score_embedding(q, true);
      std::vector<double> brute(c);
      for (std::size_t j = 0; j < c; ++j) brute[j] = mahalanobis(q, means.row(j), precision);
      const auto best = static_cast<ClassIndex>(
          std::min_element(brute.begin(), brute.end()) - brute.begin());
      EXPECT_EQ(r.c_min, best);
      EXPECT_EQ(r.d_min, r.per_class_distances[r.c_min]);
      EXPECT_EQ(r.d_min, *std::min_element(r.per_class_distances.begin(),
                                           r.per_class_distances.end()));
      for (std::size_t j = 0; j < c; ++j) {
        EXPECT_NEAR(r.per_class_distances[j], brute[j], 1e-9 * std::max(1.0, brute[j]));
      }
    }
  }
}

TEST(ScoreTest, ClassPermutationRelabels) {
  CounterRng rng(2, RngStream::kTest);
  const std::size_t c = 6;
  const std::size_t d = 5;
  const Matrix means = random_matrix(rng, c, d, 2.0);
  const Matrix precision = regularized_inverse(random_spd(rng, d), 0.0).precision;
  std::vector<std::size_t> perm(c);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(std::span<std::size_t>(perm));
  Matrix permuted(c, d);
  for (std::size_t j = 0; j < c; ++j) {
    std::copy(means.row(perm[j]).begin(), means.row(perm[j]).end(),
              permuted.row(j).begin());
  }
  const FittedScorer a = make_scorer(means, precision);
  const FittedScorer b = make_scorer(permuted, precision);
  for (int k = 0; k < 200; ++k) {
    const auto q = random_vector(rng, d, 3.0);
    const ScoreResult ra = a.score_embedding(q);
    const ScoreResult rb = b.score_embedding(q);
    EXPECT_EQ(ra.d_min, rb.d_min);
    EXPECT_EQ(static_cast<std::size_t>(ra.c_min), perm[rb.c_min]);
  }
}

TEST(DecideTest, Examples) {
  ScoreResult r;
  r.d_min = 0.0;
  r.c_min = 2;
  EXPECT_EQ(decide(r, 0.0).verdict, Verdict::kInScope);
  EXPECT_EQ(decide(r, 5.0).intent, 2);
  r.d_min = 0.1;
  const Decision oos = decide(r, 0.0);
  EXPECT_EQ(oos.verdict, Verdict::kOutOfScope);
  EXPECT_FALSE(oos.intent.has_value());
  EXPECT_EQ(oos.score, 0.1);
  r.d_min = 1.25;
  EXPECT_EQ(decide(r, 1.25).verdict, Verdict::kInScope);
}

TEST(DecideTest, MonotoneInTau) {
  for (std::uint64_t trial = 0; trial < 1000; ++trial) {
    CounterRng rng(trial, RngStream::kTest, 3);
    ScoreResult r;
    r.d_min = rng.below(4) == 0 ? 0.0 : rng.uniform(0, 10);
    const double t1 = rng.uniform(0, 10);
    const double t2 = t1 + rng.uniform(0, 5);
    if (decide(r, t1).verdict == Verdict::kInScope) {
      EXPECT_EQ(decide(r, t2).verdict, Verdict::kInScope);
    }
    EXPECT_EQ(decide(r, std::numeric_limits<double>::infinity()).verdict,
              Verdict::kInScope);
    EXPECT_EQ(decide(r, 0.0).verdict,
              r.d_min == 0.0 ? Verdict::kInScope : Verdict::kOutOfScope);
  }
}

TEST(ThresholdPolicyTest, Parse) {
  EXPECT_EQ(ThresholdPolicy::parse("f1-oos").kind, ThresholdPolicy::Kind::kOosF1);
  const ThresholdPolicy p = ThresholdPolicy::parse("is-recall@0.9");
  EXPECT_EQ(p.kind, ThresholdPolicy::Kind::kInScopeRecall);
  EXPECT_EQ(p.recall, 0.9);
  EXPECT_EQ(p.to_string(), "is-recall@0.9");
  for (const char* bad : {"is-recal@0.9", "is-recall@0", "is-recall@1.5", "f1", ""}) {
    try {
      ThresholdPolicy::parse(bad);
      FAIL() << bad;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find("f1-oos"), std::string::npos);
    }
  }
}

TEST(CalibrateTest, FullRecallIsMax) {
  CounterRng rng(4, RngStream::kTest);
  const auto d = random_vector(rng, 50, 1.0);
  std::vector<double> abs_d;
  for (double v : d) abs_d.push_back(std::abs(v));
  EXPECT_EQ(calibrate_threshold(abs_d, {}, ThresholdPolicy::parse("is-recall@1")),
            *std::max_element(abs_d.begin(), abs_d.end()));
}

TEST(CalibrateTest, InterpolatedQuantile) {
  std::vector<double> d(100);
  std::iota(d.begin(), d.end(), 1.0);
  CounterRng rng(5, RngStream::kTest);
  rng.shuffle(std::span<double>(d));
  // h = 0.95 * 99 = 94.05 -> 95 + 0.05 * (96 - 95)
  EXPECT_NEAR(calibrate_threshold(d, {}, ThresholdPolicy::parse("is-recall@0.95")),
              95.05, 1e-12);
}

TEST(CalibrateTest, RecallNeedsTwentySamples) {
  const std::vector<double> d(19, 1.0);
  EXPECT_THROW(calibrate_threshold(d, {}, ThresholdPolicy{}), DataError);
}

TEST(CalibrateTest, SeparableF1PicksGapMidpoint) {
  const std::vector<double> is = {0.5, 1.0, 2.0};
  const std::vector<double> oos = {3.0, 4.5};
  EXPECT_EQ(calibrate_threshold(is, oos, ThresholdPolicy::parse("f1-oos")), 2.5);
  EXPECT_THROW(calibrate_threshold(is, {}, ThresholdPolicy::parse("f1-oos")), DataError);
}

TEST(CalibrateTest, F1MatchesExhaustiveSearch) {
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    CounterRng rng(trial, RngStream::kTest, 6);
    std::vector<double> is(1 + rng.below(30));
    std::vector<double> oos(1 + rng.below(30));
    for (double& v : is) v = std::round(rng.uniform(0, 6) * 4) / 4;
    for (double& v : oos) v = std::round(rng.uniform(2, 8) * 4) / 4;
    std::vector<double> all = is;
    all.insert(all.end(), oos.begin(), oos.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    if (all.size() < 2) continue;
    auto f1_at = [&](double tau) {
      double tp = 0, fp = 0;
      for (double v : oos) tp += v > tau;
      for (double v : is) fp += v > tau;
      return tp == 0 ? 0.0 : 2 * tp / (tp + fp + static_cast<double>(oos.size()));
    };
    double best = -1, best_tau = 0;
    for (std::size_t i = 0; i + 1 < all.size(); ++i) {
      const double tau = 0.5 * (all[i] + all[i + 1]);
      if (f1_at(tau) > best) {
        best = f1_at(tau);
        best_tau = tau;
      }
    }
    EXPECT_EQ(calibrate_threshold(is, oos, ThresholdPolicy::parse("f1-oos")), best_tau);
  }
}

TEST(FittedScorerTest, RejectsInconsistentParts) {
  EXPECT_THROW(make_scorer(Matrix{{0, 0}, {1, 1}}, Matrix::identity(3)), Error);
  FittedScorer scorer = make_scorer(Matrix{{0, 0}, {1, 1}}, Matrix::identity(2));
  EXPECT_THROW(scorer.set_threshold(-1.0), ConfigError);
  scorer.set_threshold(2.0);
  EXPECT_EQ(scorer.threshold(), 2.0);
}

}  // namespace
}  // namespace oosguard
