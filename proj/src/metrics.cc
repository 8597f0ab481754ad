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

#include "oosguard/metrics.h"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <numeric>
#include <thread>

namespace oosguard {
namespace {

using json = nlohmann::json;

std::size_t count_oos(std::span<const ScoredLabel> items) {
  return static_cast<std::size_t>(std::count_if(
      items.begin(), items.end(), [](const ScoredLabel& s) { return s.is_oos; }));
}

// Indices sorted by descending score.
std::vector<std::size_t> rank_descending(std::span<const ScoredLabel> items) {
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return items[a].score > items[b].score;
  });
  return order;
}

}  // namespace

double aupr_oos(std::span<const ScoredLabel> items) {
  const std::size_t positives = count_oos(items);
  if (positives == 0) throw DataError("AUPR needs at least one OOS item");
  const auto order = rank_descending(items);
  double sum = 0.0;
  std::size_t tp = 0;
  std::size_t seen = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double score = items[order[i]].score;
    std::size_t block_tp = 0;
    for (; i < order.size() && items[order[i]].score == score; ++i) {
      ++seen;
      if (items[order[i]].is_oos) ++block_tp;
    }
    tp += block_tp;
    if (block_tp > 0) {
      sum += static_cast<double>(block_tp) * static_cast<double>(tp) /
             static_cast<double>(seen);
    }
  }
  return sum / static_cast<double>(positives);
}

double auroc(std::span<const ScoredLabel> items) {
  const std::size_t positives = count_oos(items);
  const std::size_t negatives = items.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw DataError("AUROC needs both OOS and in-scope items");
  }
  // Ascending sweep; counts are doubled so half credit stays integral.
  auto order = rank_descending(items);
  std::reverse(order.begin(), order.end());
  std::uint64_t twice_concordant = 0;
  std::uint64_t negatives_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double score = items[order[i]].score;
    std::uint64_t block_pos = 0;
    std::uint64_t block_neg = 0;
    for (; i < order.size() && items[order[i]].score == score; ++i) {
      (items[order[i]].is_oos ? block_pos : block_neg) += 1;
    }
    twice_concordant += 2 * block_pos * negatives_below + block_pos * block_neg;
    negatives_below += block_neg;
  }
  return static_cast<double>(twice_concordant) /
         (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

double intent_accuracy(std::span<const ScoredLabel> items) {
  std::size_t total = 0;
  std::size_t correct = 0;
  for (const auto& item : items) {
    if (item.is_oos) continue;
    if (!item.true_intent || !item.predicted_intent) {
      throw DataError("in-scope item lacks a true or predicted intent");
    }
    ++total;
    if (*item.true_intent == *item.predicted_intent) ++correct;
  }
  if (total == 0) throw DataError("intent accuracy needs in-scope items");
  return static_cast<double>(correct) / static_cast<double>(total);
}

double dispersion(const Matrix& embeddings) {
  const std::size_t n = embeddings.rows();
  const std::size_t d = embeddings.cols();
  if (n < 2) throw DataError("dispersion needs at least 2 embeddings");
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = embeddings.row(i);
    for (std::size_t k = 0; k < d; ++k) mean[k] += x[k];
  }
  for (double& m : mean) m /= static_cast<double>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = embeddings.row(i);
    for (std::size_t k = 0; k < d; ++k) {
      const double r = x[k] - mean[k];
      total += r * r;
    }
  }
  return total / static_cast<double>(n);
}

std::vector<PrPoint> brute_force_pr_curve(std::span<const ScoredLabel> items) {
  const std::size_t positives = count_oos(items);
  if (positives == 0) throw DataError("PR curve needs at least one OOS item");
  std::vector<double> thresholds;
  for (const auto& it : items) thresholds.push_back(it.score);
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());
  std::vector<PrPoint> curve;
  curve.reserve(thresholds.size());
  for (double t : thresholds) {
    PrPoint p;
    p.threshold = t;
    for (const auto& it : items) {
      if (it.score >= t) {
        ++p.predicted_positives;
        if (it.is_oos) ++p.true_positives;
      }
    }
    p.precision = static_cast<double>(p.true_positives) /
                  static_cast<double>(p.predicted_positives);
    p.recall = static_cast<double>(p.true_positives) / static_cast<double>(positives);
    curve.push_back(p);
  }
  return curve;
}

double average_precision(std::span<const PrPoint> curve, std::size_t positives) {
  if (positives == 0) throw DataError("average precision needs positives");
  double sum = 0.0;
  std::size_t previous_tp = 0;
  for (const auto& p : curve) {
    const std::size_t gained = p.true_positives - previous_tp;
    if (gained > 0) {
      sum += static_cast<double>(gained) * static_cast<double>(p.true_positives) /
             static_cast<double>(p.predicted_positives);
    }
    previous_tp = p.true_positives;
  }
  return sum / static_cast<double>(positives);
}

std::size_t evaluation_threads() {
  if (const char* env = std::getenv("OOSGUARD_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<ScoredLabel> score_dataset(const FittedScorer& scorer,
                                       const EmbeddingSet& data,
                                       std::size_t threads) {
  if (data.dim() != scorer.feature_dim()) {
    throw DataError("data dim " + std::to_string(data.dim()) +
                    " differs from model input dim " +
                    std::to_string(scorer.feature_dim()));
  }
  const Matrix encoded = scorer.encode(data.features);
  std::vector<ScoredLabel> items(data.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const ScoreResult r = scorer.score_embedding(encoded.row(i));
      ScoredLabel& item = items[i];
      item.score = r.d_min;
      item.is_oos = data.labels[i] == kOosLabel;
      item.predicted_intent = r.c_min;
      if (!item.is_oos) item.true_intent = data.labels[i];
    }
  };
  if (threads == 0) threads = evaluation_threads();
  threads = std::max<std::size_t>(1, std::min(threads, data.size() / 64 + 1));
  if (threads == 1) {
    work(0, data.size());
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (data.size() + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t begin = t * chunk;
      const std::size_t end = std::min(data.size(), begin + chunk);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
  }
  return items;
}

EvaluationReport evaluate(const FittedScorer& scorer, const EmbeddingSet& test,
                          std::optional<double> tau, std::size_t threads) {
  const auto items = score_dataset(scorer, test, threads);
  EvaluationReport report;
  report.n_oos = count_oos(items);
  report.n_is = items.size() - report.n_oos;
  if (report.n_oos == 0) {
    throw DataError("test set has no OOS examples; AUPR/AUROC are undefined");
  }
  if (report.n_is == 0) throw DataError("test set has no in-scope examples");
  report.aupr_oos = aupr_oos(items);
  report.auroc = auroc(items);
  report.intent_accuracy = intent_accuracy(items);
  const EmbeddingSet in_scope = in_scope_subset(test);
  report.dispersion =
      in_scope.size() >= 2 ? dispersion(scorer.encode(in_scope.features)) : 0.0;
  report.tau_used = tau;
  return report;
}

json EvaluationReport::to_json() const {
  return {
      {"aupr_oos", aupr_oos},
      {"auroc", auroc},
      {"intent_accuracy", intent_accuracy},
      {"dispersion", dispersion},
      {"n_is", n_is},
      {"n_oos", n_oos},
      {"tau", tau_used ? json(*tau_used) : json(nullptr)},
  };
}

EvaluationReport EvaluationReport::from_json(const json& doc) {
  EvaluationReport r;
  r.aupr_oos = doc.at("aupr_oos").get<double>();
  r.auroc = doc.at("auroc").get<double>();
  r.intent_accuracy = doc.at("intent_accuracy").get<double>();
  r.dispersion = doc.at("dispersion").get<double>();
  r.n_is = doc.at("n_is").get<std::size_t>();
  r.n_oos = doc.at("n_oos").get<std::size_t>();
  if (!doc.at("tau").is_null()) r.tau_used = doc.at("tau").get<double>();
  return r;
}

std::string EvaluationReport::to_text() const {
  auto number = [](double v) {
    char buf[32];
    const auto result = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, result.ptr);
  };
  std::string out;
  out += "aupr_oos=" + number(aupr_oos) + "\n";
  out += "auroc=" + number(auroc) + "\n";
  out += "intent_accuracy=" + number(intent_accuracy) + "\n";
  out += "dispersion=" + number(dispersion) + "\n";
  out += "n_is=" + std::to_string(n_is) + "\n";
  out += "n_oos=" + std::to_string(n_oos) + "\n";
  out += "tau=" + (tau_used ? number(*tau_used) : std::string("none")) + "\n";
  return out;
}

}  // namespace oosguard
