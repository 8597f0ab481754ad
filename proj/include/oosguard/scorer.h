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

#ifndef OOSGUARD_SCORER_H_
#define OOSGUARD_SCORER_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "oosguard/error.h"
#include "oosguard/featurizer.h"
#include "oosguard/linalg.h"
#include "oosguard/nn.h"
#include "oosguard/stats.h"

namespace oosguard {

struct ScoreResult {
  double d_min = 0.0;
  ClassIndex c_min = 0;
  std::vector<double> per_class_distances;  // filled on request only
};

enum class Verdict { kInScope, kOutOfScope };

struct Decision {
  Verdict verdict = Verdict::kOutOfScope;
  std::optional<ClassIndex> intent;  // set iff in scope
  double score = 0.0;
  double threshold = 0.0;
};

// Deployed model: frozen encoder plus class statistics. The softmax and
// autoencoder heads are not part of it. Immutable once shared; every const
// member is safe to call concurrently.
class FittedScorer {
 public:
  FittedScorer(Featurizer featurizer, DenseNetwork encoder,
               ClassStatistics statistics, std::vector<std::string> labels,
               std::optional<double> threshold = std::nullopt);

  const Featurizer& featurizer() const { return featurizer_; }
  const DenseNetwork& encoder() const { return encoder_; }
  const ClassStatistics& statistics() const { return statistics_; }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::optional<double>& threshold() const { return threshold_; }
  void set_threshold(std::optional<double> tau);

  std::size_t feature_dim() const { return encoder_.input_dim(); }
  std::size_t embedding_dim() const { return statistics_.dim(); }
  std::size_t class_count() const { return statistics_.class_count(); }

  // Distances to every class mean for an embedding already in the scoring
  // space. Ties in the argmin go to the lowest class index.
  ScoreResult score_embedding(std::span<const double> embedding,
                              bool keep_distances = false) const;
  // Encodes feature-space input first.
  ScoreResult score_features(std::span<const double> features,
                             bool keep_distances = false) const;
  // Featurizes text, then encodes. Throws ConfigError("text scoring
  // unavailable") for a passthrough featurizer.
  ScoreResult score_text(std::string_view text, bool keep_distances = false) const;

  Matrix encode(const Matrix& features) const;

 private:
  Featurizer featurizer_;
  DenseNetwork encoder_;
  ClassStatistics statistics_;
  std::vector<std::string> labels_;
  std::optional<double> threshold_;
  // Upper-triangular U with precision = U^T U, so d_j = |U s - U mu_j|.
  Matrix whitener_;
  Matrix whitened_means_;
};

// In scope iff d_min <= tau (the boundary is in scope).
Decision decide(const ScoreResult& result, double tau);

struct ThresholdPolicy {
  enum class Kind { kInScopeRecall, kOosF1 };
  Kind kind = Kind::kInScopeRecall;
  double recall = 0.95;  // kInScopeRecall only

  // "is-recall@<r>" with r in (0, 1], or "f1-oos".
  static ThresholdPolicy parse(std::string_view text);
  std::string to_string() const;
};

inline constexpr std::size_t kMinRecallCalibrationSamples = 20;

// is-recall@r: linear-interpolated r-quantile of the in-scope distances.
// f1-oos: the midpoint between consecutive distinct sorted distances that
// maximizes OOS F1 (predict OOS iff d > tau); ties go to the smaller tau.
double calibrate_threshold(std::span<const double> in_scope_distances,
                           std::span<const double> oos_distances,
                           const ThresholdPolicy& policy);

// Linear-interpolated quantile of unsorted values, q in [0, 1].
double linear_quantile(std::vector<double> values, double q);

}  // namespace oosguard

#endif  // OOSGUARD_SCORER_H_
