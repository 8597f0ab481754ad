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

#ifndef OOSGUARD_STATS_H_
#define OOSGUARD_STATS_H_

#include <cstddef>
#include <span>

#include "oosguard/error.h"
#include "oosguard/linalg.h"

namespace oosguard {

enum class CovarianceMode {
  kClassCentered,   // pooled within-class scatter around each class mean
  kGlobalCentered,  // scatter around the single global mean
};

enum class CovarianceNormalization {
  kMaximumLikelihood,  // divide by N
  kUnbiased,           // divide by N - 1
};

// Ridge multiplier used when the caller passes ridge == 0:
// lambda = kAutoRidgeScale * trace(sigma) / d.
inline constexpr double kAutoRidgeScale = 1e-6;
// Used instead when trace(sigma) == 0 (every sample sits on its class mean).
inline constexpr double kAutoRidgeFloor = 1e-6;
// Quadratic forms in (-kNegativeFormTolerance, 0) are rounding noise.
inline constexpr double kNegativeFormTolerance = 1e-9;

struct CovarianceOptions {
  CovarianceMode mode = CovarianceMode::kClassCentered;
  CovarianceNormalization normalization =
      CovarianceNormalization::kMaximumLikelihood;
  double ridge = 0.0;  // 0 selects the automatic ridge

  bool operator==(const CovarianceOptions&) const = default;
};

// Deployed scoring state: per-class means, one shared covariance and its
// regularized inverse.
struct ClassStatistics {
  Matrix means;       // C x d, row j is the mean of class j
  Matrix covariance;  // d x d
  Matrix precision;   // (covariance + ridge_used * I)^{-1}
  double ridge_used = 0.0;

  std::size_t class_count() const { return means.rows(); }
  std::size_t dim() const { return means.cols(); }
};

// Row j is the arithmetic mean of rows whose label is j. Throws DataError for
// an empty class (naming it), out-of-range labels or length mismatch.
Matrix class_means(const Matrix& embeddings, std::span<const ClassIndex> labels,
                   std::size_t class_count);

// Shared covariance of all rows. Class-centered mode subtracts each row's
// class mean; global-centered mode subtracts the mean of all rows (means is
// ignored). The result is exactly symmetric.
Matrix shared_covariance(const Matrix& embeddings,
                         std::span<const ClassIndex> labels, const Matrix& means,
                         CovarianceMode mode,
                         CovarianceNormalization normalization =
                             CovarianceNormalization::kMaximumLikelihood);

struct RegularizedInverse {
  Matrix precision;
  double ridge_used = 0.0;
};

// (sigma + lambda I)^{-1} through a Cholesky factorization. lambda is ridge
// when positive, otherwise the automatic ridge. If the factorization fails,
// lambda is multiplied by 100 up to two times before NumericError.
RegularizedInverse regularized_inverse(const Matrix& sigma, double ridge);

// sqrt((s - mu)^T P (s - mu)).
double mahalanobis(std::span<const double> s, std::span<const double> mu,
                   const Matrix& precision);

ClassStatistics fit_class_statistics(const Matrix& embeddings,
                                     std::span<const ClassIndex> labels,
                                     std::size_t class_count,
                                     const CovarianceOptions& options = {});

}  // namespace oosguard

#endif  // OOSGUARD_STATS_H_
