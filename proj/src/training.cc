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

#include "oosguard/training.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <thread>

#include "oosguard/random.h"

namespace oosguard {
namespace {

using json = nlohmann::json;

std::string_view covariance_mode_name(CovarianceMode mode) {
  return mode == CovarianceMode::kClassCentered ? "class-centered"
                                                : "global-centered";
}

CovarianceMode parse_covariance_mode(std::string_view name) {
  if (name == "class-centered") return CovarianceMode::kClassCentered;
  if (name == "global-centered") return CovarianceMode::kGlobalCentered;
  throw ConfigError("unknown covariance mode '" + std::string(name) +
                    "' (valid: class-centered, global-centered)");
}

std::string_view normalization_name(CovarianceNormalization n) {
  return n == CovarianceNormalization::kMaximumLikelihood ? "n" : "n-1";
}

CovarianceNormalization parse_normalization(std::string_view name) {
  if (name == "n") return CovarianceNormalization::kMaximumLikelihood;
  if (name == "n-1") return CovarianceNormalization::kUnbiased;
  throw ConfigError("unknown covariance normalization '" + std::string(name) +
                    "' (valid: n, n-1)");
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(m.row(rows[i]).begin(), m.row(rows[i]).end(), out.row(i).begin());
  }
  return out;
}

}  // namespace

std::vector<std::size_t> TrainConfig::autoencoder_dims() const {
  std::vector<std::size_t> dims;
  dims.push_back(encoder.embedding_dim);
  dims.insert(dims.end(), autoencoder_hidden.begin(), autoencoder_hidden.end());
  dims.push_back(encoder.embedding_dim);
  return dims;
}

void TrainConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ConfigError("alpha must lie in [0, 1], got " + std::to_string(alpha));
  }
  if (!use_autoencoder && alpha != 0.0) {
    throw ConfigError("alpha must be 0 when the autoencoder head is disabled");
  }
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (!(optimizer.learning_rate > 0.0) || !std::isfinite(optimizer.learning_rate)) {
    throw ConfigError("learning_rate must be positive");
  }
  if (encoder.embedding_dim == 0 || encoder.input_dim == 0) {
    throw ConfigError("encoder dims must be positive");
  }
  for (std::size_t h : encoder.hidden_dims) {
    if (h == 0) throw ConfigError("encoder hidden dims must be positive");
  }
  for (std::size_t h : autoencoder_hidden) {
    if (h == 0) throw ConfigError("autoencoder hidden dims must be positive");
  }
  if (featurizer.dim == 0) throw ConfigError("featurizer dim must be positive");
  if (covariance.ridge < 0.0) throw ConfigError("ridge must be non-negative");
}

json TrainConfig::to_json() const {
  return {
      {"alpha", alpha},
      {"seed", seed},
      {"batch_size", batch_size},
      {"epochs", epochs},
      {"optimizer", std::string(optimizer_name(optimizer.kind))},
      {"learning_rate", optimizer.learning_rate},
      {"beta1", optimizer.beta1},
      {"beta2", optimizer.beta2},
      {"epsilon", optimizer.epsilon},
      {"featurizer",
       {{"kind", std::string(featurizer_kind_name(featurizer.kind))},
        {"dim", featurizer.dim},
        {"seed", featurizer.seed}}},
      {"encoder",
       {{"input_dim", encoder.input_dim},
        {"hidden_dims", encoder.hidden_dims},
        {"embedding_dim", encoder.embedding_dim}}},
      {"autoencoder_hidden", autoencoder_hidden},
      {"use_autoencoder", use_autoencoder},
      {"covariance",
       {{"mode", std::string(covariance_mode_name(covariance.mode))},
        {"normalization", std::string(normalization_name(covariance.normalization))},
        {"ridge", covariance.ridge}}},
  };
}

TrainConfig TrainConfig::from_json(const json& doc) {
  return from_json(doc, TrainConfig{});
}

TrainConfig TrainConfig::from_json(const json& doc, const TrainConfig& base) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  TrainConfig c = base;
  try {
    auto take = [&](const json& obj, const char* key, auto& field) {
      if (obj.contains(key)) field = obj.at(key).get<std::decay_t<decltype(field)>>();
    };
    take(doc, "alpha", c.alpha);
    take(doc, "seed", c.seed);
    take(doc, "batch_size", c.batch_size);
    take(doc, "epochs", c.epochs);
    if (doc.contains("optimizer")) {
      c.optimizer.kind = parse_optimizer(doc.at("optimizer").get<std::string>());
    }
    take(doc, "learning_rate", c.optimizer.learning_rate);
    take(doc, "beta1", c.optimizer.beta1);
    take(doc, "beta2", c.optimizer.beta2);
    take(doc, "epsilon", c.optimizer.epsilon);
    if (doc.contains("featurizer")) {
      const json& f = doc.at("featurizer");
      if (f.contains("kind")) {
        c.featurizer.kind = parse_featurizer_kind(f.at("kind").get<std::string>());
      }
      take(f, "dim", c.featurizer.dim);
      take(f, "seed", c.featurizer.seed);
    }
    if (doc.contains("encoder")) {
      const json& e = doc.at("encoder");
      take(e, "input_dim", c.encoder.input_dim);
      take(e, "hidden_dims", c.encoder.hidden_dims);
      take(e, "embedding_dim", c.encoder.embedding_dim);
    }
    take(doc, "autoencoder_hidden", c.autoencoder_hidden);
    take(doc, "use_autoencoder", c.use_autoencoder);
    if (doc.contains("covariance")) {
      const json& v = doc.at("covariance");
      if (v.contains("mode")) {
        c.covariance.mode = parse_covariance_mode(v.at("mode").get<std::string>());
      }
      if (v.contains("normalization")) {
        c.covariance.normalization =
            parse_normalization(v.at("normalization").get<std::string>());
      }
      take(v, "ridge", c.covariance.ridge);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainConfig preset(std::string_view name) {
  TrainConfig c;
  if (name == "synthetic") return c;
  c.featurizer = Featurizer{FeaturizerKind::kHashedBow, kDefaultFeatureDim, 0};
  c.encoder = EncoderConfig{};
  if (name == "clinc150") {
    c.optimizer.learning_rate = 1e-4;
    c.batch_size = 256;
    c.epochs = 15;
  } else if (name == "stackoverflow") {
    c.optimizer.learning_rate = 5e-5;
    c.batch_size = 1024;
    c.epochs = 6;
  } else if (name == "mtop") {
    c.optimizer.learning_rate = 2.25e-5;
    c.batch_size = 128;
    c.epochs = 10;
  } else if (name == "car-assistant") {
    c.optimizer.learning_rate = 2.25e-5;
    c.batch_size = 1024;
    c.epochs = 7;
  } else {
    std::string valid;
    for (const auto& n : preset_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw ConfigError("unknown preset '" + std::string(name) + "' (valid: " +
                      valid + ")");
  }
  return c;
}

std::vector<std::string> preset_names() {
  return {"synthetic", "clinc150", "stackoverflow", "mtop", "car-assistant"};
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  TrainConfig base;
  if (doc.is_object() && doc.contains("preset")) {
    if (!doc.at("preset").is_string()) throw ConfigError("preset must be a string");
    base = preset(doc.at("preset").get<std::string>());
  }
  return TrainConfig::from_json(doc, base);
}

JointModel init_joint_model(const TrainConfig& config, std::size_t input_dim,
                            std::vector<std::string> labels) {
  if (labels.size() < 2) throw DataError("training needs at least 2 intents");
  JointModel model;
  model.config = config;
  model.config.encoder.input_dim = input_dim;
  if (model.config.featurizer.kind == FeaturizerKind::kPassthrough) {
    model.config.featurizer.dim = input_dim;
  } else if (model.config.featurizer.dim != input_dim) {
    throw ConfigError("featurizer dim " + std::to_string(config.featurizer.dim) +
                      " differs from data dim " + std::to_string(input_dim));
  }
  model.config.validate();
  model.labels = std::move(labels);
  const std::size_t d = model.config.encoder.embedding_dim;
  model.encoder = make_encoder(model.config.encoder, config.seed);
  CounterRng head_rng(config.seed, RngStream::kSoftmaxInit);
  model.softmax_head = DenseNetwork::glorot({d, model.labels.size()}, head_rng);
  if (model.config.use_autoencoder) {
    CounterRng ae_rng(config.seed, RngStream::kAutoencoderInit);
    model.autoencoder = DenseNetwork::glorot(model.config.autoencoder_dims(), ae_rng);
  }
  return model;
}

JointGradients joint_gradients(const JointModel& model, const Matrix& inputs,
                               std::span<const ClassIndex> labels) {
  const double alpha = model.config.alpha;
  JointGradients out;
  const ForwardTrace enc = forward(model.encoder, inputs);
  const ForwardTrace head = forward(model.softmax_head, enc.output);
  LossAndGradient ce = softmax_cross_entropy(head.output, labels);
  out.cross_entropy = ce.loss;
  ce.gradient *= 1.0 - alpha;
  BackwardResult head_back = backward(model.softmax_head, head, ce.gradient);
  out.softmax_head = std::move(head_back.gradients);
  Matrix embedding_grad = std::move(head_back.input_gradient);

  if (model.has_autoencoder()) {
    const ForwardTrace ae = forward(model.autoencoder, enc.output);
    LossAndGradient mse = mse_reconstruction(enc.output, ae.output);
    out.reconstruction = mse.loss;
    if (alpha > 0.0) {
      mse.gradient *= alpha;
      BackwardResult ae_back = backward(model.autoencoder, ae, mse.gradient);
      out.autoencoder = std::move(ae_back.gradients);
      embedding_grad += ae_back.input_gradient;
      mse.gradient *= -1.0;
      embedding_grad += mse.gradient;
    } else {
      out.autoencoder = GradientSet::zeros_like(model.autoencoder);
    }
  }
  out.total = joint_loss(out.cross_entropy, out.reconstruction, alpha);
  out.encoder = backward(model.encoder, enc, embedding_grad).gradients;
  return out;
}

JointModel train(const TrainConfig& config, const EmbeddingSet& train_set) {
  config.validate();
  if (train_set.size() == 0) throw DataError("training set is empty");
  const std::size_t classes = train_set.label_names.size();
  for (std::size_t i = 0; i < train_set.size(); ++i) {
    const ClassIndex y = train_set.labels[i];
    if (y == kOosLabel) {
      throw DataError("training set contains an OOS example at row " +
                      std::to_string(i));
    }
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw DataError("label " + std::to_string(y) + " at row " +
                      std::to_string(i) + " is out of range");
    }
  }
  JointModel model = init_joint_model(config, train_set.dim(), train_set.label_names);
  const TrainConfig& cfg = model.config;
  OptimizerState enc_state = OptimizerState::for_network(model.encoder, cfg.optimizer);
  OptimizerState head_state =
      OptimizerState::for_network(model.softmax_head, cfg.optimizer);
  OptimizerState ae_state;
  if (model.has_autoencoder()) {
    ae_state = OptimizerState::for_network(model.autoencoder, cfg.optimizer);
  }

  const std::size_t n = train_set.size();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    CounterRng rng(cfg.seed, RngStream::kShuffle, epoch);
    const std::vector<std::size_t> order = permutation(n, rng);
    EpochLog log;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      const std::span<const std::size_t> rows(order.data() + start, end - start);
      const Matrix inputs = gather_rows(train_set.features, rows);
      std::vector<ClassIndex> labels(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) labels[i] = train_set.labels[rows[i]];

      const JointGradients g = joint_gradients(model, inputs, labels);
      if (!std::isfinite(g.total)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch + 1) +
                           " batch " + std::to_string(batch_index + 1));
      }
      const double weight = static_cast<double>(rows.size()) / static_cast<double>(n);
      log.cross_entropy += weight * g.cross_entropy;
      log.reconstruction += weight * g.reconstruction;
      log.total += weight * g.total;

      optimizer_step(model.encoder, g.encoder, enc_state);
      optimizer_step(model.softmax_head, g.softmax_head, head_state);
      if (model.has_autoencoder() && cfg.alpha > 0.0) {
        optimizer_step(model.autoencoder, g.autoencoder, ae_state);
      }
    }
    model.log.push_back(log);
  }
  return model;
}

EmbeddingSet featurize_set(const Featurizer& featurizer, const TextSet& texts) {
  EmbeddingSet out;
  out.features = featurize_batch(featurizer, texts.texts);
  out.labels = texts.labels;
  out.label_names = texts.label_names;
  return out;
}

FittedScorer fit_statistics(const JointModel& model, const EmbeddingSet& train_set) {
  if (train_set.dim() != model.encoder.input_dim()) {
    throw DataError("data dim " + std::to_string(train_set.dim()) +
                    " differs from encoder input dim " +
                    std::to_string(model.encoder.input_dim()));
  }
  if (train_set.label_names != model.labels) {
    throw DataError("training label map differs from the model's label map");
  }
  const Matrix embeddings = encode(model.encoder, train_set.features);
  ClassStatistics stats = fit_class_statistics(embeddings, train_set.labels,
                                               model.class_count(),
                                               model.config.covariance);
  return FittedScorer(model.config.featurizer, model.encoder, std::move(stats),
                      model.labels);
}

json SweepResult::to_json() const {
  json entries_doc = json::array();
  for (const auto& e : entries) {
    entries_doc.push_back({{"alpha", e.alpha},
                           {"validation", e.validation.to_json()},
                           {"final_loss",
                            {{"cross_entropy", e.final_epoch.cross_entropy},
                             {"reconstruction", e.final_epoch.reconstruction},
                             {"total", e.final_epoch.total}}}});
  }
  return {{"best_alpha", best_alpha}, {"entries", entries_doc}};
}

SweepResult sweep_alpha(const TrainConfig& base, std::span<const double> grid,
                        const EmbeddingSet& train_set,
                        const EmbeddingSet& validation_set, std::size_t threads) {
  if (grid.empty()) throw ConfigError("alpha grid is empty");
  if (validation_set.oos_count() == 0 ||
      validation_set.oos_count() == validation_set.size()) {
    throw DataError("validation set needs both in-scope and OOS examples");
  }
  for (double a : grid) {
    TrainConfig c = base;
    c.alpha = a;
    c.validate();
  }
  const EmbeddingSet validation = remap_labels(validation_set, train_set.label_names);
  std::vector<SweepEntry> entries(grid.size());
  std::vector<std::exception_ptr> errors(grid.size());
  auto run = [&](std::size_t k) {
    try {
      TrainConfig c = base;
      c.alpha = grid[k];
      const JointModel model = train(c, train_set);
      const FittedScorer scorer = fit_statistics(model, train_set);
      entries[k].alpha = grid[k];
      entries[k].validation = evaluate(scorer, validation, std::nullopt, 1);
      entries[k].final_epoch = model.log.back();
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };
  if (threads == 0) threads = evaluation_threads();
  threads = std::min(threads, grid.size());
  if (threads <= 1) {
    for (std::size_t k = 0; k < grid.size(); ++k) run(k);
  } else {
    std::mutex mu;
    std::size_t next = 0;
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (;;) {
          std::size_t k;
          {
            std::lock_guard lock(mu);
            if (next == grid.size()) return;
            k = next++;
          }
          run(k);
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  SweepResult result;
  std::size_t best = 0;
  for (std::size_t k = 1; k < entries.size(); ++k) {
    const double a = entries[k].validation.aupr_oos;
    const double b = entries[best].validation.aupr_oos;
    if (a > b || (a == b && entries[k].alpha < entries[best].alpha)) best = k;
  }
  result.best_alpha = entries[best].alpha;
  result.best_config = base;
  result.best_config.alpha = result.best_alpha;
  result.entries = std::move(entries);
  return result;
}

double grad_check_joint(JointModel model, std::uint64_t seed,
                        std::size_t batch_size) {
  CounterRng rng(seed, RngStream::kTest);
  Matrix inputs(batch_size, model.encoder.input_dim());
  for (double& v : inputs.values()) v = rng.normal();
  std::vector<ClassIndex> labels(batch_size);
  for (auto& y : labels) {
    y = static_cast<ClassIndex>(rng.below(model.class_count()));
  }
  GradCheckTarget target;
  for (DenseNetwork* net : {&model.encoder, &model.softmax_head, &model.autoencoder}) {
    const auto views = parameter_views(*net);
    for (std::size_t v = 0; v < views.size(); ++v) {
      // Blocks alternate weights, bias.
      if (v % 2 == 1) {
        for (double& b : views[v]) b = kGradCheckBiasJitter * rng.normal();
      }
      target.parameters.push_back(views[v]);
    }
  }
  target.loss = [&] { return joint_gradients(model, inputs, labels).total; };
  target.gradient = [&] {
    const JointGradients g = joint_gradients(model, inputs, labels);
    std::vector<std::vector<double>> flat;
    for (const GradientSet* set : {&g.encoder, &g.softmax_head, &g.autoencoder}) {
      for (auto& block : flatten(*set)) flat.push_back(std::move(block));
    }
    return flat;
  };
  return grad_check(target);
}

}  // namespace oosguard
