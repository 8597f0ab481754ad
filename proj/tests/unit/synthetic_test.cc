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
#include <vector>

#include <gtest/gtest.h>

#include "oosguard/synthetic.h"

namespace oosguard {
namespace {

double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

std::size_t nearest_mean(const Matrix& means, std::span<const double> x) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < means.rows(); ++j) {
    const double d = distance(means.row(j), x);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

SyntheticSpec small_spec(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.classes = 5;
  spec.dim = 8;
  spec.samples_per_class = 40;
  spec.seed = seed;
  return spec;
}

TEST(SyntheticTest, Deterministic) {
  const EmbeddingBundle a = synthesize(small_spec(3));
  const EmbeddingBundle b = synthesize(small_spec(3));
  EXPECT_EQ(a.train.features, b.train.features);
  EXPECT_EQ(a.test.features, b.test.features);
  EXPECT_EQ(a.validation.labels, b.validation.labels);
  EXPECT_EQ(a.provenance, b.provenance);
  EXPECT_NE(synthesize(small_spec(4)).train.features, a.train.features);
}

TEST(SyntheticTest, ShapesAndCounts) {
  const EmbeddingBundle b = synthesize(small_spec(1));
  EXPECT_EQ(b.train.size(), 5u * 32u);
  EXPECT_EQ(b.validation.size(), 5u * 4u + 40u);
  EXPECT_EQ(b.test.size(), 5u * 4u + 40u);
  EXPECT_EQ(b.train.oos_count(), 0u);
  EXPECT_EQ(b.validation.oos_count(), 40u);
  EXPECT_EQ(b.test.oos_count(), 40u);
  EXPECT_EQ(b.train.label_names.size(), 5u);
  EXPECT_EQ(b.train.label_names[0], "intent_00");
  EXPECT_EQ(b.train.features.cols(), 8u);
}

TEST(SyntheticTest, RadiusMatchesChiSquaredQuantile) {
  // For two degrees of freedom the chi-squared CDF is 1 - exp(-x / 2).
  SyntheticSpec spec = small_spec(0);
  spec.dim = 2;
  spec.sigma = 0.5;
  EXPECT_NEAR(synthetic_geometry(spec).in_cluster_radius,
              0.5 * std::sqrt(-2.0 * std::log(0.001)), 1e-10);
}

TEST(SyntheticTest, ShellPointsLieOutsideEveryCluster) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SyntheticSpec spec = small_spec(seed);
    const SyntheticGeometry geo = synthetic_geometry(spec);
    const EmbeddingBundle b = synthesize(spec);
    for (const EmbeddingSet* set : {&b.validation, &b.test}) {
      for (std::size_t i = 0; i < set->size(); ++i) {
        if (set->labels[i] != kOosLabel) continue;
        const auto x = set->features.row(i);
        const double r = distance(x, geo.center);
        EXPECT_GT(r, geo.max_mean_radius + geo.in_cluster_radius);
        EXPECT_LE(r, geo.max_mean_radius + kShellThickness * geo.in_cluster_radius + 1e-9);
        for (std::size_t j = 0; j < spec.classes; ++j) {
          EXPECT_GT(distance(x, geo.means.row(j)), geo.in_cluster_radius);
        }
      }
    }
  }
}

TEST(SyntheticTest, MeansSitAtPlacementScale) {
  SyntheticSpec spec = small_spec(2);
  spec.placement_scale = 7.0;
  const SyntheticGeometry geo = synthetic_geometry(spec);
  const EmbeddingBundle b = synthesize(spec);
  std::vector<double> origin(spec.dim, 0.0);
  for (std::size_t j = 0; j < spec.classes; ++j) {
    EXPECT_NEAR(distance(geo.means.row(j), origin), 7.0, 1e-9);
  }
  // Empirical coverage of the 99.9% ball over all in-scope samples.
  std::size_t inside = 0, total = 0;
  for (const EmbeddingSet* set : {&b.train, &b.validation, &b.test}) {
    for (std::size_t i = 0; i < set->size(); ++i) {
      if (set->labels[i] == kOosLabel) continue;
      ++total;
      inside += distance(set->features.row(i),
                         geo.means.row(static_cast<std::size_t>(set->labels[i]))) <=
                geo.in_cluster_radius;
    }
  }
  EXPECT_GE(inside, total - 2);
}

TEST(SyntheticTest, VanishingSigmaIsPerfectlySeparable) {
  SyntheticSpec spec = small_spec(6);
  spec.sigma = 1e-6;
  const SyntheticGeometry geo = synthetic_geometry(spec);
  const EmbeddingBundle b = synthesize(spec);
  for (const EmbeddingSet* set : {&b.train, &b.test}) {
    for (std::size_t i = 0; i < set->size(); ++i) {
      if (set->labels[i] == kOosLabel) continue;
      EXPECT_EQ(static_cast<ClassIndex>(nearest_mean(geo.means, set->features.row(i))),
                set->labels[i]);
    }
  }
}

TEST(SyntheticTest, OtherOosModes) {
  SyntheticSpec box = small_spec(7);
  box.oos_mode = OosMode::kUniformBox;
  box.oos_count = 30;
  const EmbeddingBundle b = synthesize(box);
  EXPECT_EQ(b.validation.oos_count() + b.test.oos_count(), 30u);
  std::vector<double> lo(box.dim, INFINITY), hi(box.dim, -INFINITY);
  for (const EmbeddingSet* set : {&b.train, &b.validation, &b.test}) {
    for (std::size_t i = 0; i < set->size(); ++i) {
      if (set->labels[i] == kOosLabel) continue;
      for (std::size_t k = 0; k < box.dim; ++k) {
        lo[k] = std::min(lo[k], set->features(i, k));
        hi[k] = std::max(hi[k], set->features(i, k));
      }
    }
  }
  for (const EmbeddingSet* set : {&b.validation, &b.test}) {
    for (std::size_t i = 0; i < set->size(); ++i) {
      if (set->labels[i] != kOosLabel) continue;
      for (std::size_t k = 0; k < box.dim; ++k) {
        const double mid = 0.5 * (lo[k] + hi[k]);
        const double half = 0.75 * (hi[k] - lo[k]);
        EXPECT_GE(set->features(i, k), mid - half);
        EXPECT_LT(set->features(i, k), mid + half);
      }
    }
  }

  SyntheticSpec held = small_spec(7);
  held.oos_mode = OosMode::kHeldOutClusters;
  const EmbeddingBundle h = synthesize(held);
  EXPECT_EQ(h.test.oos_count(), 40u);
  EXPECT_EQ(parse_oos_mode(oos_mode_name(OosMode::kHeldOutClusters)),
            OosMode::kHeldOutClusters);
  EXPECT_THROW(parse_oos_mode("sideways"), ConfigError);
}

TEST(SyntheticTest, InvalidSpecs) {
  SyntheticSpec spec = small_spec(0);
  spec.classes = 1;
  EXPECT_THROW(synthesize(spec), ConfigError);
  spec = small_spec(0);
  spec.sigma = 0.0;
  EXPECT_THROW(synthesize(spec), ConfigError);
  spec = small_spec(0);
  spec.dim = 0;
  EXPECT_THROW(synthesize(spec), ConfigError);
}

}  // namespace
}  // namespace oosguard
