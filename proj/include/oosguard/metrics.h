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

#ifndef OOSGUARD_METRICS_H_
#define OOSGUARD_METRICS_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oosguard/dataset.h"
#include "oosguard/error.h"
#include "oosguard/linalg.h"
#include "oosguard/scorer.h"

namespace oosguard {

// One evaluated example. Higher scores are more OOS-like; OOS is the
// positive class.
struct ScoredLabel {
  double score = 0.0;
  bool is_oos = false;
  std::optional<ClassIndex> true_intent;
  std::optional<ClassIndex> predicted_intent;
};

struct EvaluationReport {
  double aupr_oos = 0.0;
  double auroc = 0.0;
  double intent_accuracy = 0.0;
  double dispersion = 0.0;
  std::size_t n_is = 0;
  std::size_t n_oos = 0;
  std::optional<double> tau_used;

  // Keys: aupr_oos, auroc, intent_accuracy, dispersion, n_is, n_oos, tau.
  nlohmann::json to_json() const;
  static EvaluationReport from_json(const nlohmann::json& doc);
  // One key=value pair per line, same keys as to_json().
  std::string to_text() const;
};

// Average precision with OOS as positive. Items are ranked by descending
// score; tied scores form one block, and each block contributes
// (positives in block / total positives) * precision after the block.
double aupr_oos(std::span<const ScoredLabel> items);

// Mann-Whitney estimate: fraction of (OOS, in-scope) pairs where the OOS
// item scores higher, ties counting one half.
double auroc(std::span<const ScoredLabel> items);

// Exact-match rate over in-scope items only.
double intent_accuracy(std::span<const ScoredLabel> items);

// Trace of the global covariance (1/N) of the rows.
double dispersion(const Matrix& embeddings);

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::size_t true_positives = 0;
  std::size_t predicted_positives = 0;
};

// Precision and recall at every distinct score t (predict OOS iff score >= t),
// by exhaustive counting, sorted by descending threshold. Reference
// implementation for aupr_oos; quadratic in the item count.
std::vector<PrPoint> brute_force_pr_curve(std::span<const ScoredLabel> items);

// Step-wise area under a curve from brute_force_pr_curve.
double average_precision(std::span<const PrPoint> curve, std::size_t positives);

// Scores every example with the scorer and assembles all metrics. d_min is
// the OOS score; predicted intents are c_min regardless of tau. Dispersion is
// measured over the encoded in-scope examples. threads == 0 picks
// evaluation_threads().
EvaluationReport evaluate(const FittedScorer& scorer, const EmbeddingSet& test,
                          std::optional<double> tau, std::size_t threads = 0);

// Scored items for every row of the set, in row order.
std::vector<ScoredLabel> score_dataset(const FittedScorer& scorer,
                                       const EmbeddingSet& data,
                                       std::size_t threads = 0);

// OOSGUARD_THREADS if set to a positive integer, else hardware concurrency
// (at least 1).
std::size_t evaluation_threads();

}  // namespace oosguard

#endif  // OOSGUARD_METRICS_H_
