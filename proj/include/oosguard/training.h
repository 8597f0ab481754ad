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

#ifndef OOSGUARD_TRAINING_H_
#define OOSGUARD_TRAINING_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "oosguard/dataset.h"
#include "oosguard/featurizer.h"
#include "oosguard/metrics.h"
#include "oosguard/nn.h"
#include "oosguard/scorer.h"
#include "oosguard/stats.h"

namespace oosguard {

// Hidden widths of the autoencoder head between the d-wide ends.
inline const std::vector<std::size_t> kDefaultAutoencoderHidden = {512, 64, 16,
                                                                   64, 512};
// Candidate weights for the reconstruction term in a sweep.
inline const std::vector<double> kDefaultAlphaGrid = {0.01, 0.1, 0.2, 0.5, 0.9};

struct TrainConfig {
  double alpha = 0.1;
  std::uint64_t seed = 0;
  std::size_t batch_size = 64;
  std::size_t epochs = 20;
  OptimizerSettings optimizer;
  Featurizer featurizer{FeaturizerKind::kPassthrough, 32, 0};
  EncoderConfig encoder{32, {64}, 32};
  std::vector<std::size_t> autoencoder_hidden = kDefaultAutoencoderHidden;
  // False trains without an autoencoder head at all; alpha must then be 0.
  bool use_autoencoder = true;
  CovarianceOptions covariance;

  // Encoder output width d at both ends of the hidden list.
  std::vector<std::size_t> autoencoder_dims() const;
  // Throws ConfigError.
  void validate() const;

  nlohmann::json to_json() const;
  // Missing keys keep the values of base (the defaults when omitted).
  static TrainConfig from_json(const nlohmann::json& doc);
  static TrainConfig from_json(const nlohmann::json& doc, const TrainConfig& base);

  bool operator==(const TrainConfig&) const = default;
};

// Named hyperparameter sets: "synthetic", "clinc150", "stackoverflow",
// "mtop", "car-assistant". All use alpha = 0.1.
TrainConfig preset(std::string_view name);
std::vector<std::string> preset_names();

// Reads a JSON config file. An optional "preset" key selects the base.
TrainConfig load_train_config(const std::filesystem::path& path);

// Per-epoch means over training examples.
struct EpochLog {
  double cross_entropy = 0.0;
  double reconstruction = 0.0;  // 0 without an autoencoder head
  double total = 0.0;

  bool operator==(const EpochLog&) const = default;
};

struct JointModel {
  TrainConfig config;
  std::vector<std::string> labels;
  DenseNetwork encoder;
  DenseNetwork softmax_head;  // d -> C, single linear layer
  DenseNetwork autoencoder;   // empty when config.use_autoencoder is false
  std::vector<EpochLog> log;

  std::size_t class_count() const { return labels.size(); }
  bool has_autoencoder() const { return autoencoder.layer_count() > 0; }
  bool operator==(const JointModel&) const = default;
};

// Freshly initialized networks for the given input width and label set.
JointModel init_joint_model(const TrainConfig& config, std::size_t input_dim,
                            std::vector<std::string> labels);

struct JointGradients {
  double cross_entropy = 0.0;
  double reconstruction = 0.0;
  double total = 0.0;
  GradientSet encoder;
  GradientSet softmax_head;
  GradientSet autoencoder;  // empty when there is no autoencoder head
};

// Losses and parameter gradients of the joint objective for one batch. One
// encoder pass feeds both heads; the encoder gradient sums the softmax path
// and both reconstruction paths (through the head and as the MSE target).
// With alpha == 0 the reconstruction loss is still reported but contributes
// no gradient.
JointGradients joint_gradients(const JointModel& model, const Matrix& inputs,
                               std::span<const ClassIndex> labels);

// Trains on in-scope examples only; an OOS label is a DataError, a non-finite
// loss a NumericError naming the epoch and batch.
JointModel train(const TrainConfig& config, const EmbeddingSet& train_set);

// Text data is featurized with config.featurizer first.
EmbeddingSet featurize_set(const Featurizer& featurizer, const TextSet& texts);

// Drops both heads and fits class statistics on the encoded training set.
FittedScorer fit_statistics(const JointModel& model, const EmbeddingSet& train_set);

struct SweepEntry {
  double alpha = 0.0;
  EvaluationReport validation;
  EpochLog final_epoch;
};

struct SweepResult {
  double best_alpha = 0.0;
  TrainConfig best_config;
  std::vector<SweepEntry> entries;  // grid order

  nlohmann::json to_json() const;
};

// Trains one model per alpha and picks the best validation AUPR; ties go to
// the smaller alpha. threads == 0 picks evaluation_threads().
SweepResult sweep_alpha(const TrainConfig& base, std::span<const double> grid,
                        const EmbeddingSet& train_set,
                        const EmbeddingSet& validation_set,
                        std::size_t threads = 0);

// Finite-difference check of joint_gradients over every parameter of all
// three networks on a seeded random batch. Biases are first redrawn as
// kGradCheckBiasJitter * N(0, 1).
inline constexpr double kGradCheckBiasJitter = 0.1;
double grad_check_joint(JointModel model, std::uint64_t seed,
                        std::size_t batch_size = 6);

}  // namespace oosguard

#endif  // OOSGUARD_TRAINING_H_
