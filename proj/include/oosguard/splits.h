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

#ifndef OOSGUARD_SPLITS_H_
#define OOSGUARD_SPLITS_H_

#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oosguard/dataset.h"
#include "oosguard/error.h"

namespace oosguard {

// In-scope train/validation/test proportions, applied per intent.
struct SplitRatios {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;

  void validate() const;
};

// Per-class allocation: train = round(n * train), validation =
// round(n * validation), test = the remainder.
struct SplitCounts {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
};
SplitCounts allocate(std::size_t n, const SplitRatios& ratios);

// Label-level outcome of a split procedure, independent of the payload type.
struct SplitPlan {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
  // Source label index -> new dense label, kOosLabel, or kDroppedLabel.
  std::vector<ClassIndex> relabel;
  std::vector<std::string> in_scope_labels;  // new label map, sorted
  std::vector<std::string> oos_labels;       // sorted
  nlohmann::json provenance;
};

inline constexpr double kInScopeCoverage = 0.75;
// Relabel marker for labels removed from every split.
inline constexpr ClassIndex kDroppedLabel = -2;

// Shuffles the label set with the seed and takes labels in that order until
// they cover at least `coverage` of all labeled examples; these are in
// scope. The remaining labels become OOS and are split alternately into
// validation and test (validation first) after a seeded shuffle. In-scope
// examples are split per label by `ratios`. Exact duplicates (by content
// hash) are dropped first, keeping the first occurrence.
SplitPlan plan_stackoverflow_split(std::span<const ClassIndex> labels,
                                   const std::vector<std::string>& label_names,
                                   std::span<const std::uint64_t> hashes,
                                   std::uint64_t seed,
                                   const SplitRatios& ratios = {},
                                   double coverage = kInScopeCoverage);

// The named labels become OOS (validation/test only, no stratification).
// In-scope labels with fewer than min_per_class examples are dropped.
SplitPlan plan_oos_domain_split(std::span<const ClassIndex> labels,
                                const std::vector<std::string>& label_names,
                                std::span<const std::uint64_t> hashes,
                                const std::set<std::string>& oos_labels,
                                std::size_t min_per_class, std::uint64_t seed,
                                const SplitRatios& ratios = {});

TextBundle stackoverflow_style_split(const TextSet& data, std::uint64_t seed,
                                     const SplitRatios& ratios = {},
                                     double coverage = kInScopeCoverage);
EmbeddingBundle stackoverflow_style_split(const EmbeddingSet& data,
                                          std::uint64_t seed,
                                          const SplitRatios& ratios = {},
                                          double coverage = kInScopeCoverage);

TextBundle oos_domain_split(const TextSet& data,
                            const std::set<std::string>& oos_labels,
                            std::size_t min_per_class, std::uint64_t seed,
                            const SplitRatios& ratios = {});
EmbeddingBundle oos_domain_split(const EmbeddingSet& data,
                                 const std::set<std::string>& oos_labels,
                                 std::size_t min_per_class, std::uint64_t seed,
                                 const SplitRatios& ratios = {});

// Throws DataError if train holds an OOS example or any content hash occurs
// in two splits.
void verify_bundle(const TextBundle& bundle);
void verify_bundle(const EmbeddingBundle& bundle);

}  // namespace oosguard

#endif  // OOSGUARD_SPLITS_H_
