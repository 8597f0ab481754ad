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

#include "oosguard/splits.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_set>

#include "oosguard/random.h"

namespace oosguard {
namespace {

using json = nlohmann::json;

// Substreams of RngStream::kSplit.
constexpr std::uint64_t kLabelOrderStream = 0;
constexpr std::uint64_t kOosStream = 1;
constexpr std::uint64_t kClassStreamBase = 1000;

void check_inputs(std::span<const ClassIndex> labels,
                  const std::vector<std::string>& label_names,
                  std::span<const std::uint64_t> hashes) {
  if (labels.size() != hashes.size()) {
    throw DataError("split: label and hash counts differ");
  }
  for (ClassIndex l : labels) {
    if (l != kOosLabel &&
        (l < 0 || static_cast<std::size_t>(l) >= label_names.size())) {
      throw DataError("split: label index " + std::to_string(l) +
                      " has no name");
    }
  }
}

// Rows that survive exact-duplicate removal.
std::vector<std::size_t> unique_rows(std::span<const std::uint64_t> hashes) {
  std::unordered_set<std::uint64_t> seen;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < hashes.size(); ++i) {
    if (seen.insert(hashes[i]).second) rows.push_back(i);
  }
  return rows;
}

// Fills plan.train/validation/test from the in-scope and OOS row pools.
void assign_rows(SplitPlan& plan, std::span<const ClassIndex> labels,
                 std::span<const std::size_t> rows, std::uint64_t seed,
                 const SplitRatios& ratios) {
  std::map<ClassIndex, std::vector<std::size_t>> by_class;
  std::vector<std::size_t> oos_rows;
  for (std::size_t r : rows) {
    const ClassIndex source = labels[r];
    const ClassIndex target =
        source == kOosLabel ? kOosLabel
                            : plan.relabel[static_cast<std::size_t>(source)];
    if (target == kDroppedLabel) continue;
    if (target == kOosLabel) {
      oos_rows.push_back(r);
    } else {
      by_class[target].push_back(r);
    }
  }

  json per_class = json::object();
  for (auto& [cls, members] : by_class) {
    CounterRng rng(seed, RngStream::kSplit,
                   kClassStreamBase + static_cast<std::uint64_t>(cls));
    rng.shuffle(std::span<std::size_t>(members));
    const SplitCounts counts = allocate(members.size(), ratios);
    auto it = members.begin();
    auto take = [&](std::vector<std::size_t>& dst, std::size_t n) {
      dst.insert(dst.end(), it, it + static_cast<std::ptrdiff_t>(n));
      it += static_cast<std::ptrdiff_t>(n);
    };
    take(plan.train, counts.train);
    take(plan.validation, counts.validation);
    take(plan.test, counts.test);
    per_class[plan.in_scope_labels[static_cast<std::size_t>(cls)]] = {
        counts.train, counts.validation, counts.test};
  }

  CounterRng rng(seed, RngStream::kSplit, kOosStream);
  rng.shuffle(std::span<std::size_t>(oos_rows));
  std::size_t oos_val = 0;
  std::size_t oos_test = 0;
  for (std::size_t i = 0; i < oos_rows.size(); ++i) {
    if (i % 2 == 0) {
      plan.validation.push_back(oos_rows[i]);
      ++oos_val;
    } else {
      plan.test.push_back(oos_rows[i]);
      ++oos_test;
    }
  }

  plan.provenance["per_class_counts"] = per_class;
  plan.provenance["counts"] = {
      {"train", plan.train.size()},
      {"validation", plan.validation.size()},
      {"test", plan.test.size()},
      {"validation_oos", oos_val},
      {"test_oos", oos_test},
  };
}

void finish_relabel(SplitPlan& plan, const std::vector<std::string>& label_names,
                    const std::set<std::string>& in_scope) {
  plan.in_scope_labels.assign(in_scope.begin(), in_scope.end());
  plan.relabel.assign(label_names.size(), kDroppedLabel);
  for (std::size_t i = 0; i < label_names.size(); ++i) {
    const auto it = std::find(plan.in_scope_labels.begin(),
                              plan.in_scope_labels.end(), label_names[i]);
    if (it != plan.in_scope_labels.end()) {
      plan.relabel[i] =
          static_cast<ClassIndex>(std::distance(plan.in_scope_labels.begin(), it));
    } else if (std::binary_search(plan.oos_labels.begin(), plan.oos_labels.end(),
                                  label_names[i])) {
      plan.relabel[i] = kOosLabel;
    }
  }
}

json ratios_json(const SplitRatios& r) {
  return {{"train", r.train}, {"validation", r.validation}, {"test", r.test}};
}

template <typename Set>
Set materialize(const Set& data, std::span<const std::size_t> rows,
                const SplitPlan& plan) {
  Set out = select_rows(data, rows);
  for (auto& l : out.labels) {
    if (l != kOosLabel) l = plan.relabel[static_cast<std::size_t>(l)];
  }
  out.label_names = plan.in_scope_labels;
  return out;
}

template <typename Set>
std::vector<std::uint64_t> hashes_of(const Set& data) {
  std::vector<std::uint64_t> h(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) h[i] = content_hash(data, i);
  return h;
}

template <typename Set>
DatasetBundle<Set> bundle_from_plan(const Set& data, SplitPlan plan) {
  DatasetBundle<Set> bundle;
  bundle.train = materialize(data, plan.train, plan);
  bundle.validation = materialize(data, plan.validation, plan);
  bundle.test = materialize(data, plan.test, plan);
  bundle.provenance = std::move(plan.provenance);
  return bundle;
}

template <typename Set>
void verify_impl(const DatasetBundle<Set>& bundle) {
  if (bundle.train.oos_count() != 0) {
    throw DataError("train split contains OOS examples");
  }
  std::unordered_set<std::uint64_t> seen_train;
  std::unordered_set<std::uint64_t> seen_val;
  for (std::size_t i = 0; i < bundle.train.size(); ++i) {
    seen_train.insert(content_hash(bundle.train, i));
  }
  for (std::size_t i = 0; i < bundle.validation.size(); ++i) {
    const auto h = content_hash(bundle.validation, i);
    if (seen_train.contains(h)) throw DataError("example leaks between train and validation");
    seen_val.insert(h);
  }
  for (std::size_t i = 0; i < bundle.test.size(); ++i) {
    const auto h = content_hash(bundle.test, i);
    if (seen_train.contains(h) || seen_val.contains(h)) {
      throw DataError("example leaks into test");
    }
  }
}

}  // namespace

void SplitRatios::validate() const {
  const double sum = train + validation + test;
  if (!(train > 0.0) || validation < 0.0 || test < 0.0 ||
      std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("split ratios must be non-negative, train > 0, and sum to 1");
  }
}

SplitCounts allocate(std::size_t n, const SplitRatios& ratios) {
  SplitCounts c;
  const auto nd = static_cast<double>(n);
  c.train = std::min(n, static_cast<std::size_t>(std::llround(nd * ratios.train)));
  c.validation = std::min(
      n - c.train, static_cast<std::size_t>(std::llround(nd * ratios.validation)));
  c.test = n - c.train - c.validation;
  return c;
}

SplitPlan plan_stackoverflow_split(std::span<const ClassIndex> labels,
                                   const std::vector<std::string>& label_names,
                                   std::span<const std::uint64_t> hashes,
                                   std::uint64_t seed, const SplitRatios& ratios,
                                   double coverage) {
  ratios.validate();
  check_inputs(labels, label_names, hashes);
  if (!(coverage > 0.0 && coverage < 1.0)) {
    throw ConfigError("in-scope coverage must lie in (0, 1)");
  }
  const auto rows = unique_rows(hashes);
  std::vector<std::size_t> counts(label_names.size(), 0);
  std::size_t labeled = 0;
  for (std::size_t r : rows) {
    if (labels[r] == kOosLabel) continue;
    ++counts[static_cast<std::size_t>(labels[r])];
    ++labeled;
  }
  std::vector<std::size_t> present;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] > 0) present.push_back(i);
  }
  if (present.size() < 2) {
    throw DataError("stackoverflow-style split needs at least 2 distinct labels");
  }

  CounterRng rng(seed, RngStream::kSplit, kLabelOrderStream);
  rng.shuffle(std::span<std::size_t>(present));
  std::set<std::string> in_scope;
  std::vector<std::string> selection_order;
  std::size_t covered = 0;
  std::size_t taken = 0;
  const double needed = coverage * static_cast<double>(labeled);
  while (taken < present.size() && static_cast<double>(covered) < needed) {
    const std::size_t l = present[taken++];
    covered += counts[l];
    in_scope.insert(label_names[l]);
    selection_order.push_back(label_names[l]);
  }
  if (taken == present.size()) {
    throw DataError("every label is needed to reach the in-scope coverage; "
                    "no OOS labels remain");
  }

  SplitPlan plan;
  for (std::size_t i = taken; i < present.size(); ++i) {
    plan.oos_labels.push_back(label_names[present[i]]);
  }
  std::sort(plan.oos_labels.begin(), plan.oos_labels.end());
  finish_relabel(plan, label_names, in_scope);
  assign_rows(plan, labels, rows, seed, ratios);

  auto& p = plan.provenance;
  p["procedure"] = "stackoverflow-style";
  p["seed"] = seed;
  p["coverage_threshold"] = coverage;
  p["is_coverage"] = static_cast<double>(covered) / static_cast<double>(labeled);
  p["is_selection_order"] = selection_order;
  p["is_labels"] = plan.in_scope_labels;
  p["oos_labels"] = plan.oos_labels;
  p["ratios"] = ratios_json(ratios);
  p["duplicates_removed"] = hashes.size() - rows.size();
  return plan;
}

SplitPlan plan_oos_domain_split(std::span<const ClassIndex> labels,
                                const std::vector<std::string>& label_names,
                                std::span<const std::uint64_t> hashes,
                                const std::set<std::string>& oos_labels,
                                std::size_t min_per_class, std::uint64_t seed,
                                const SplitRatios& ratios) {
  ratios.validate();
  check_inputs(labels, label_names, hashes);
  if (oos_labels.empty()) throw ConfigError("no OOS labels designated");
  const auto rows = unique_rows(hashes);
  std::map<std::string, std::size_t> counts;
  for (std::size_t r : rows) {
    if (labels[r] != kOosLabel) {
      ++counts[label_names[static_cast<std::size_t>(labels[r])]];
    }
  }
  for (const auto& name : oos_labels) {
    if (!counts.contains(name)) {
      throw DataError("designated OOS label '" + name + "' does not occur in the data");
    }
  }
  std::set<std::string> in_scope;
  std::vector<std::string> dropped;
  for (const auto& [name, n] : counts) {
    if (oos_labels.contains(name)) continue;
    if (n < min_per_class) {
      dropped.push_back(name);
    } else {
      in_scope.insert(name);
    }
  }
  if (in_scope.empty()) {
    throw DataError("no in-scope labels remain after designating OOS labels");
  }

  SplitPlan plan;
  plan.oos_labels.assign(oos_labels.begin(), oos_labels.end());
  finish_relabel(plan, label_names, in_scope);
  assign_rows(plan, labels, rows, seed, ratios);

  auto& p = plan.provenance;
  p["procedure"] = "oos-domain";
  p["seed"] = seed;
  p["min_per_class"] = min_per_class;
  p["is_labels"] = plan.in_scope_labels;
  p["oos_labels"] = plan.oos_labels;
  p["dropped_labels"] = dropped;
  p["ratios"] = ratios_json(ratios);
  p["duplicates_removed"] = hashes.size() - rows.size();
  return plan;
}

TextBundle stackoverflow_style_split(const TextSet& data, std::uint64_t seed,
                                     const SplitRatios& ratios, double coverage) {
  return bundle_from_plan(
      data, plan_stackoverflow_split(data.labels, data.label_names,
                                     hashes_of(data), seed, ratios, coverage));
}

EmbeddingBundle stackoverflow_style_split(const EmbeddingSet& data,
                                          std::uint64_t seed,
                                          const SplitRatios& ratios,
                                          double coverage) {
  return bundle_from_plan(
      data, plan_stackoverflow_split(data.labels, data.label_names,
                                     hashes_of(data), seed, ratios, coverage));
}

TextBundle oos_domain_split(const TextSet& data,
                            const std::set<std::string>& oos_labels,
                            std::size_t min_per_class, std::uint64_t seed,
                            const SplitRatios& ratios) {
  return bundle_from_plan(
      data, plan_oos_domain_split(data.labels, data.label_names, hashes_of(data),
                                  oos_labels, min_per_class, seed, ratios));
}

EmbeddingBundle oos_domain_split(const EmbeddingSet& data,
                                 const std::set<std::string>& oos_labels,
                                 std::size_t min_per_class, std::uint64_t seed,
                                 const SplitRatios& ratios) {
  return bundle_from_plan(
      data, plan_oos_domain_split(data.labels, data.label_names, hashes_of(data),
                                  oos_labels, min_per_class, seed, ratios));
}

void verify_bundle(const TextBundle& bundle) { verify_impl(bundle); }
void verify_bundle(const EmbeddingBundle& bundle) { verify_impl(bundle); }

}  // namespace oosguard
