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

#include "oosguard/scorer.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace oosguard {

FittedScorer::FittedScorer(Featurizer featurizer, DenseNetwork encoder,
                           ClassStatistics statistics,
                           std::vector<std::string> labels,
                           std::optional<double> threshold)
    : featurizer_(featurizer),
      encoder_(std::move(encoder)),
      statistics_(std::move(statistics)),
      labels_(std::move(labels)) {
  const std::size_t d = statistics_.dim();
  if (encoder_.output_dim() != d) {
    throw DataError("encoder output dim " + std::to_string(encoder_.output_dim()) +
                    " differs from statistics dim " + std::to_string(d));
  }
  if (featurizer_.kind == FeaturizerKind::kHashedBow &&
      featurizer_.dim != encoder_.input_dim()) {
    throw DataError("featurizer dim differs from encoder input dim");
  }
  if (labels_.size() != statistics_.class_count()) {
    throw DataError("label map has " + std::to_string(labels_.size()) +
                    " entries for " + std::to_string(statistics_.class_count()) +
                    " classes");
  }
  if (statistics_.precision.rows() != d || statistics_.precision.cols() != d) {
    throw DataError("precision matrix has the wrong shape");
  }
  set_threshold(threshold);

  auto lower = cholesky(statistics_.precision);
  if (!lower) throw NumericError("precision matrix is not positive definite");
  whitener_ = transpose(*lower);
  whitened_means_ = Matrix(statistics_.class_count(), d);
  for (std::size_t j = 0; j < statistics_.class_count(); ++j) {
    const auto w = matvec(whitener_, statistics_.means.row(j));
    std::copy(w.begin(), w.end(), whitened_means_.row(j).begin());
  }
}

void FittedScorer::set_threshold(std::optional<double> tau) {
  if (tau && !(*tau >= 0.0)) throw ConfigError("threshold must be >= 0");
  threshold_ = tau;
}

ScoreResult FittedScorer::score_embedding(std::span<const double> embedding,
                                          bool keep_distances) const {
  const std::size_t d = embedding_dim();
  if (embedding.size() != d) {
    throw DataError("embedding dim " + std::to_string(embedding.size()) +
                    " differs from model dim " + std::to_string(d));
  }
  const auto w = matvec(whitener_, embedding);
  ScoreResult result;
  result.d_min = INFINITY;
  if (keep_distances) result.per_class_distances.reserve(class_count());
  for (std::size_t j = 0; j < class_count(); ++j) {
    const auto mu = whitened_means_.row(j);
    double q = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double diff = w[k] - mu[k];
      q += diff * diff;
    }
    const double dist = std::sqrt(q);
    if (keep_distances) result.per_class_distances.push_back(dist);
    if (dist < result.d_min) {
      result.d_min = dist;
      result.c_min = static_cast<ClassIndex>(j);
    }
  }
  if (!std::isfinite(result.d_min)) {
    throw NumericError("non-finite Mahalanobis distance");
  }
  return result;
}

ScoreResult FittedScorer::score_features(std::span<const double> features,
                                         bool keep_distances) const {
  if (features.size() != feature_dim()) {
    throw DataError("feature dim " + std::to_string(features.size()) +
                    " differs from encoder input dim " +
                    std::to_string(feature_dim()));
  }
  return score_embedding(oosguard::encode(encoder_, features), keep_distances);
}

ScoreResult FittedScorer::score_text(std::string_view text,
                                     bool keep_distances) const {
  return score_features(featurize(featurizer_, text), keep_distances);
}

Matrix FittedScorer::encode(const Matrix& features) const {
  return oosguard::encode(encoder_, features);
}

Decision decide(const ScoreResult& result, double tau) {
  Decision decision;
  decision.score = result.d_min;
  decision.threshold = tau;
  if (result.d_min <= tau) {
    decision.verdict = Verdict::kInScope;
    decision.intent = result.c_min;
  }
  return decision;
}

ThresholdPolicy ThresholdPolicy::parse(std::string_view text) {
  constexpr std::string_view kRecallPrefix = "is-recall@";
  const std::string valid = "valid policies: is-recall@<r> with 0 < r <= 1, f1-oos";
  if (text == "f1-oos") return {Kind::kOosF1, 0.0};
  if (text.starts_with(kRecallPrefix)) {
    const auto number = text.substr(kRecallPrefix.size());
    double r = 0.0;
    const auto [end, ec] =
        std::from_chars(number.data(), number.data() + number.size(), r);
    if (ec == std::errc() && end == number.data() + number.size() && r > 0.0 &&
        r <= 1.0) {
      return {Kind::kInScopeRecall, r};
    }
  }
  throw ConfigError("unknown threshold policy '" + std::string(text) + "'; " +
                    valid);
}

std::string ThresholdPolicy::to_string() const {
  if (kind == Kind::kOosF1) return "f1-oos";
  std::ostringstream out;
  out << "is-recall@" << recall;
  return out.str();
}

double linear_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DataError("quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double calibrate_threshold(std::span<const double> in_scope_distances,
                           std::span<const double> oos_distances,
                           const ThresholdPolicy& policy) {
  if (policy.kind == ThresholdPolicy::Kind::kInScopeRecall) {
    if (in_scope_distances.size() < kMinRecallCalibrationSamples) {
      throw DataError("is-recall calibration needs at least " +
                      std::to_string(kMinRecallCalibrationSamples) +
                      " in-scope validation examples, got " +
                      std::to_string(in_scope_distances.size()));
    }
    return linear_quantile({in_scope_distances.begin(), in_scope_distances.end()},
                           policy.recall);
  }

  if (in_scope_distances.empty() || oos_distances.empty()) {
    throw DataError("f1-oos calibration needs both in-scope and OOS examples");
  }
  struct Item {
    double d;
    bool oos;
  };
  std::vector<Item> items;
  for (double d : in_scope_distances) items.push_back({d, false});
  for (double d : oos_distances) items.push_back({d, true});
  std::sort(items.begin(), items.end(),
            [](const Item& a, const Item& b) { return a.d < b.d; });
  const auto total_oos = static_cast<double>(oos_distances.size());

  // Sweep tau upward; after consuming all items with d <= tau, items above
  // tau are predicted OOS.
  double best_f1 = -1.0;
  double best_tau = 0.0;
  double oos_below = 0.0;
  double is_below = 0.0;
  const auto n_all = static_cast<double>(items.size());
  for (std::size_t i = 0; i + 1 < items.size(); ++i) {
    (items[i].oos ? oos_below : is_below) += 1.0;
    if (items[i].d == items[i + 1].d) continue;
    const double tau = 0.5 * (items[i].d + items[i + 1].d);
    const double tp = total_oos - oos_below;
    const double predicted = n_all - oos_below - is_below;
    const double f1 = tp == 0.0 ? 0.0 : 2.0 * tp / (predicted + total_oos);
    if (f1 > best_f1) {
      best_f1 = f1;
      best_tau = tau;
    }
  }
  if (best_f1 < 0.0) {
    throw DataError("f1-oos calibration needs at least two distinct distances");
  }
  return best_tau;
}

}  // namespace oosguard
