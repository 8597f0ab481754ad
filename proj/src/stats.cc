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

#include "oosguard/stats.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace oosguard {
namespace {

void check_labels(const Matrix& embeddings, std::span<const ClassIndex> labels,
                  std::size_t class_count) {
  if (labels.size() != embeddings.rows()) {
    throw DataError("got " + std::to_string(labels.size()) + " labels for " +
                    std::to_string(embeddings.rows()) + " embeddings");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= class_count) {
      throw DataError("label " + std::to_string(labels[i]) + " at row " +
                      std::to_string(i) + " is outside 0.." +
                      std::to_string(class_count - 1));
    }
  }
}

}  // namespace

Matrix class_means(const Matrix& embeddings, std::span<const ClassIndex> labels,
                   std::size_t class_count) {
  check_labels(embeddings, labels, class_count);
  const std::size_t d = embeddings.cols();
  Matrix means(class_count, d);
  std::vector<std::size_t> counts(class_count, 0);
  for (std::size_t i = 0; i < embeddings.rows(); ++i) {
    const auto c = static_cast<std::size_t>(labels[i]);
    ++counts[c];
    auto acc = means.row(c);
    const auto x = embeddings.row(i);
    for (std::size_t k = 0; k < d; ++k) acc[k] += x[k];
  }
  for (std::size_t c = 0; c < class_count; ++c) {
    if (counts[c] == 0) {
      throw DataError("class " + std::to_string(c) + " has no samples");
    }
    for (double& v : means.row(c)) v /= static_cast<double>(counts[c]);
  }
  return means;
}

Matrix shared_covariance(const Matrix& embeddings,
                         std::span<const ClassIndex> labels, const Matrix& means,
                         CovarianceMode mode,
                         CovarianceNormalization normalization) {
  const std::size_t n = embeddings.rows();
  const std::size_t d = embeddings.cols();
  if (n < 2) throw DataError("covariance needs at least 2 samples");

  Matrix centers;
  if (mode == CovarianceMode::kGlobalCentered) {
    centers = Matrix(1, d);
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = embeddings.row(i);
      for (std::size_t k = 0; k < d; ++k) centers(0, k) += x[k];
    }
    for (double& v : centers.values()) v /= static_cast<double>(n);
  } else {
    check_labels(embeddings, labels, means.rows());
    if (means.cols() != d) throw DataError("means dimension differs from data");
  }

  Matrix sigma(d, d);
  std::vector<double> r(d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = embeddings.row(i);
    const auto mu = mode == CovarianceMode::kGlobalCentered
                        ? centers.row(0)
                        : means.row(static_cast<std::size_t>(labels[i]));
    for (std::size_t k = 0; k < d; ++k) r[k] = x[k] - mu[k];
    for (std::size_t a = 0; a < d; ++a) {
      const double ra = r[a];
      if (ra == 0.0) continue;
      auto row = sigma.row(a);
      for (std::size_t b = a; b < d; ++b) row[b] += ra * r[b];
    }
  }
  const double denom = normalization == CovarianceNormalization::kUnbiased
                           ? static_cast<double>(n - 1)
                           : static_cast<double>(n);
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a; b < d; ++b) {
      const double v = sigma(a, b) / denom;
      sigma(a, b) = v;
      sigma(b, a) = v;
    }
  }
  return sigma;
}

RegularizedInverse regularized_inverse(const Matrix& sigma, double ridge) {
  if (sigma.rows() != sigma.cols() || sigma.rows() == 0) {
    throw DataError("regularized_inverse: covariance must be square and non-empty");
  }
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) {
    throw ConfigError("ridge must be a finite value >= 0");
  }
  const std::size_t d = sigma.rows();
  double scale = 0.0;
  for (double v : sigma.values()) {
    if (!std::isfinite(v)) throw NumericError("covariance has non-finite entries");
    scale = std::max(scale, std::abs(v));
  }
  if (max_asymmetry(sigma) > 1e-9 * std::max(scale, 1.0)) {
    throw NumericError("covariance is not symmetric");
  }

  double lambda = ridge;
  if (lambda == 0.0) {
    const double mean_variance = trace(sigma) / static_cast<double>(d);
    lambda = mean_variance > 0.0 ? kAutoRidgeScale * mean_variance
                                 : kAutoRidgeFloor;
  }
  for (int attempt = 0; attempt < 3; ++attempt, lambda *= 100.0) {
    Matrix shifted = sigma;
    for (std::size_t i = 0; i < d; ++i) shifted(i, i) += lambda;
    if (auto lower = cholesky(shifted)) {
      return {inverse_from_cholesky(*lower), lambda};
    }
  }
  throw NumericError("covariance is not positive definite even with ridge " +
                     std::to_string(lambda / 100.0));
}

double mahalanobis(std::span<const double> s, std::span<const double> mu,
                   const Matrix& precision) {
  const std::size_t d = s.size();
  if (mu.size() != d || precision.rows() != d || precision.cols() != d) {
    throw DataError("mahalanobis: dimension mismatch");
  }
  std::vector<double> diff(d);
  for (std::size_t k = 0; k < d; ++k) diff[k] = s[k] - mu[k];
  double q = 0.0;
  for (std::size_t a = 0; a < d; ++a) q += diff[a] * dot(precision.row(a), diff);
  if (q < 0.0) {
    if (q < -kNegativeFormTolerance) {
      throw NumericError("precision matrix is not positive semi-definite");
    }
    q = 0.0;
  }
  return std::sqrt(q);
}

ClassStatistics fit_class_statistics(const Matrix& embeddings,
                                     std::span<const ClassIndex> labels,
                                     std::size_t class_count,
                                     const CovarianceOptions& options) {
  if (class_count < 2) throw DataError("class statistics need at least 2 classes");
  ClassStatistics stats;
  stats.means = class_means(embeddings, labels, class_count);
  stats.covariance = shared_covariance(embeddings, labels, stats.means,
                                       options.mode, options.normalization);
  auto inv = regularized_inverse(stats.covariance, options.ridge);
  stats.precision = std::move(inv.precision);
  stats.ridge_used = inv.ridge_used;
  return stats;
}

}  // namespace oosguard
