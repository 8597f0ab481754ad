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

#include "oosguard/synthetic.h"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <boost/math/distributions/chi_squared.hpp>

#include "oosguard/random.h"

namespace oosguard {
namespace {

using json = nlohmann::json;

// Substreams of RngStream::kSynthetic.
constexpr std::uint64_t kMeansStream = 0;
constexpr std::uint64_t kOosStream = 1;
constexpr std::uint64_t kHeldOutMeansStream = 2;
constexpr std::uint64_t kClassStreamBase = 1000;

std::vector<double> random_direction(std::size_t dim, CounterRng& rng) {
  std::vector<double> v(dim);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (double& x : v) {
      x = rng.normal();
      norm2 += x * x;
    }
  } while (norm2 == 0.0);
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& x : v) x *= inv;
  return v;
}

Matrix draw_means(std::size_t count, std::size_t dim, double scale,
                  CounterRng& rng) {
  Matrix means(count, dim);
  for (std::size_t j = 0; j < count; ++j) {
    const auto u = random_direction(dim, rng);
    for (std::size_t k = 0; k < dim; ++k) means(j, k) = scale * u[k];
  }
  return means;
}

void fill_cluster(Matrix& out, std::size_t first_row, std::size_t n,
                  std::span<const double> mean, double sigma, CounterRng& rng) {
  for (std::size_t i = 0; i < n; ++i) {
    auto row = out.row(first_row + i);
    for (std::size_t k = 0; k < mean.size(); ++k) {
      row[k] = mean[k] + sigma * rng.normal();
    }
  }
}

}  // namespace

std::string_view oos_mode_name(OosMode mode) {
  switch (mode) {
    case OosMode::kShell:
      return "shell";
    case OosMode::kUniformBox:
      return "uniform-box";
    case OosMode::kHeldOutClusters:
      return "held-out-clusters";
  }
  return "shell";
}

OosMode parse_oos_mode(std::string_view name) {
  if (name == "shell") return OosMode::kShell;
  if (name == "uniform-box") return OosMode::kUniformBox;
  if (name == "held-out-clusters") return OosMode::kHeldOutClusters;
  throw ConfigError("unknown OOS mode '" + std::string(name) +
                    "' (expected shell, uniform-box or held-out-clusters)");
}

void SyntheticSpec::validate() const {
  if (classes < 2) throw ConfigError("synthetic data needs at least 2 classes");
  if (dim == 0) throw ConfigError("synthetic dim must be positive");
  if (samples_per_class < 1) throw ConfigError("samples_per_class must be >= 1");
  if (!(sigma > 0.0)) throw ConfigError("sigma must be > 0");
  if (!(placement_scale >= 0.0)) throw ConfigError("placement_scale must be >= 0");
  ratios.validate();
}

std::size_t SyntheticSpec::effective_oos_count() const {
  return oos_count == 0 ? 2 * samples_per_class : oos_count;
}

SyntheticGeometry synthetic_geometry(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticGeometry g;
  CounterRng rng(spec.seed, RngStream::kSynthetic, kMeansStream);
  g.means = draw_means(spec.classes, spec.dim, spec.placement_scale, rng);
  g.center.assign(spec.dim, 0.0);
  for (std::size_t j = 0; j < spec.classes; ++j) {
    for (std::size_t k = 0; k < spec.dim; ++k) g.center[k] += g.means(j, k);
  }
  for (double& c : g.center) c /= static_cast<double>(spec.classes);
  for (std::size_t j = 0; j < spec.classes; ++j) {
    double r2 = 0.0;
    for (std::size_t k = 0; k < spec.dim; ++k) {
      const double d = g.means(j, k) - g.center[k];
      r2 += d * d;
    }
    g.max_mean_radius = std::max(g.max_mean_radius, std::sqrt(r2));
  }
  const boost::math::chi_squared chi2(static_cast<double>(spec.dim));
  g.in_cluster_radius = spec.sigma * std::sqrt(boost::math::quantile(chi2, 0.999));
  return g;
}

EmbeddingBundle synthesize(const SyntheticSpec& spec) {
  const SyntheticGeometry geo = synthetic_geometry(spec);
  const std::size_t n_is = spec.classes * spec.samples_per_class;
  const std::size_t n_oos = spec.effective_oos_count();

  EmbeddingSet all;
  all.features = Matrix(n_is + n_oos, spec.dim);
  all.labels.reserve(n_is + n_oos);
  for (std::size_t j = 0; j < spec.classes; ++j) {
    char name[32];
    std::snprintf(name, sizeof(name), "intent_%02zu", j);
    all.label_names.emplace_back(name);
    CounterRng rng(spec.seed, RngStream::kSynthetic, kClassStreamBase + j);
    fill_cluster(all.features, j * spec.samples_per_class, spec.samples_per_class,
                 geo.means.row(j), spec.sigma, rng);
    all.labels.insert(all.labels.end(), spec.samples_per_class,
                      static_cast<ClassIndex>(j));
  }

  CounterRng rng(spec.seed, RngStream::kSynthetic, kOosStream);
  switch (spec.oos_mode) {
    case OosMode::kShell: {
      const double inner = geo.max_mean_radius + geo.in_cluster_radius;
      const double outer = geo.max_mean_radius + kShellThickness * geo.in_cluster_radius;
      for (std::size_t i = 0; i < n_oos; ++i) {
        const auto u = random_direction(spec.dim, rng);
        const double radius = outer - (outer - inner) * rng.uniform();  // (inner, outer]
        auto row = all.features.row(n_is + i);
        for (std::size_t k = 0; k < spec.dim; ++k) row[k] = geo.center[k] + radius * u[k];
      }
      break;
    }
    case OosMode::kUniformBox: {
      std::vector<double> lo(spec.dim, INFINITY);
      std::vector<double> hi(spec.dim, -INFINITY);
      for (std::size_t i = 0; i < n_is; ++i) {
        const auto row = all.features.row(i);
        for (std::size_t k = 0; k < spec.dim; ++k) {
          lo[k] = std::min(lo[k], row[k]);
          hi[k] = std::max(hi[k], row[k]);
        }
      }
      for (std::size_t i = 0; i < n_oos; ++i) {
        auto row = all.features.row(n_is + i);
        for (std::size_t k = 0; k < spec.dim; ++k) {
          const double mid = 0.5 * (lo[k] + hi[k]);
          const double half = 0.75 * (hi[k] - lo[k]);
          row[k] = rng.uniform(mid - half, mid + half);
        }
      }
      break;
    }
    case OosMode::kHeldOutClusters: {
      const std::size_t held_out = std::max<std::size_t>(1, spec.classes / 5);
      CounterRng mean_rng(spec.seed, RngStream::kSynthetic, kHeldOutMeansStream);
      const Matrix extra = draw_means(held_out, spec.dim, spec.placement_scale, mean_rng);
      for (std::size_t i = 0; i < n_oos; ++i) {
        fill_cluster(all.features, n_is + i, 1, extra.row(i % held_out), spec.sigma, rng);
      }
      break;
    }
  }
  all.labels.insert(all.labels.end(), n_oos, kOosLabel);

  // Cluster samples are i.i.d., so the first allocate().train samples of each
  // class go to train, the next to validation, the rest to test.
  std::vector<std::size_t> train, validation, test;
  const SplitCounts counts = allocate(spec.samples_per_class, spec.ratios);
  for (std::size_t j = 0; j < spec.classes; ++j) {
    const std::size_t base = j * spec.samples_per_class;
    for (std::size_t i = 0; i < spec.samples_per_class; ++i) {
      auto& dst = i < counts.train                      ? train
                  : i < counts.train + counts.validation ? validation
                                                          : test;
      dst.push_back(base + i);
    }
  }
  for (std::size_t i = 0; i < n_oos; ++i) {
    (i % 2 == 0 ? validation : test).push_back(n_is + i);
  }

  EmbeddingBundle bundle;
  bundle.train = select_rows(all, train);
  bundle.validation = select_rows(all, validation);
  bundle.test = select_rows(all, test);
  bundle.provenance = {
      {"procedure", "synthetic"},
      {"seed", spec.seed},
      {"classes", spec.classes},
      {"dim", spec.dim},
      {"samples_per_class", spec.samples_per_class},
      {"sigma", spec.sigma},
      {"placement_scale", spec.placement_scale},
      {"oos_mode", oos_mode_name(spec.oos_mode)},
      {"oos_count", n_oos},
      {"ratios",
       {{"train", spec.ratios.train},
        {"validation", spec.ratios.validation},
        {"test", spec.ratios.test}}},
      {"in_cluster_radius_999", geo.in_cluster_radius},
      {"max_mean_radius", geo.max_mean_radius},
      {"is_labels", all.label_names},
      {"counts",
       {{"train", bundle.train.size()},
        {"validation", bundle.validation.size()},
        {"test", bundle.test.size()},
        {"validation_oos", bundle.validation.oos_count()},
        {"test_oos", bundle.test.oos_count()}}},
  };
  return bundle;
}

}  // namespace oosguard
