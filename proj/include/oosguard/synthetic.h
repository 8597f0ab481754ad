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

#ifndef OOSGUARD_SYNTHETIC_H_
#define OOSGUARD_SYNTHETIC_H_

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "oosguard/dataset.h"
#include "oosguard/linalg.h"
#include "oosguard/splits.h"

namespace oosguard {

enum class OosMode {
  kShell,            // points on a shell outside every cluster's 99.9% ball
  kUniformBox,       // uniform over the in-scope bounding box scaled by 1.5
  kHeldOutClusters,  // extra Gaussian clusters never seen in training
};

std::string_view oos_mode_name(OosMode mode);
OosMode parse_oos_mode(std::string_view name);

// Gaussian-cluster benchmark: class means lie at distance placement_scale
// from the origin along seeded uniform directions; samples are
// mean + sigma * N(0, I).
struct SyntheticSpec {
  std::size_t classes = 10;
  std::size_t dim = 32;
  std::size_t samples_per_class = 200;
  double sigma = 1.0;
  double placement_scale = 4.0;
  OosMode oos_mode = OosMode::kShell;
  std::size_t oos_count = 0;  // 0 -> 2 * samples_per_class
  std::uint64_t seed = 0;
  SplitRatios ratios;

  void validate() const;
  std::size_t effective_oos_count() const;
};

// Shell OOS radii are drawn from
// [max_mean_radius + r999, max_mean_radius + kShellThickness * r999],
// exclusive at the inner end.
inline constexpr double kShellThickness = 1.5;

struct SyntheticGeometry {
  Matrix means;                   // classes x dim
  double max_mean_radius = 0.0;   // max |mean_j - center|
  double in_cluster_radius = 0.0; // 99.9% quantile of |x - mean_j|
  std::vector<double> center;     // centroid of the class means
};

SyntheticGeometry synthetic_geometry(const SyntheticSpec& spec);

// Train holds only in-scope samples; OOS samples alternate between
// validation and test. Deterministic given the SyntheticSpec.
EmbeddingBundle synthesize(const SyntheticSpec& spec);

}  // namespace oosguard

#endif  // OOSGUARD_SYNTHETIC_H_
