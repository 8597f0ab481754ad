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

// Command-line front end: train, calibrate, eval, split, synth, score, serve,
// sweep.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "oosguard/artifact.h"
#include "oosguard/dataset.h"
#include "oosguard/error.h"
#include "oosguard/featurizer.h"
#include "oosguard/metrics.h"
#include "oosguard/scorer.h"
#include "oosguard/service.h"
#include "oosguard/splits.h"
#include "oosguard/synthetic.h"
#include "oosguard/training.h"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace oosguard {
namespace {

enum class Format { kEmb, kJsonl };

Format format_of(const fs::path& path) {
  if (path.extension() == ".emb") return Format::kEmb;
  if (path.extension() == ".jsonl") return Format::kJsonl;
  throw ConfigError("cannot tell the format of " + path.string() +
                    " (expected .emb or .jsonl)");
}

// A directory stands for its <split>.emb or <split>.jsonl member.
fs::path resolve_split(const fs::path& data, const std::string& split) {
  if (!fs::is_directory(data)) {
    if (!fs::exists(data)) throw DataError("no such data file: " + data.string());
    return data;
  }
  for (const char* ext : {".emb", ".jsonl"}) {
    const fs::path candidate = data / (split + ext);
    if (fs::exists(candidate)) return candidate;
  }
  throw DataError("directory " + data.string() + " has no " + split +
                  ".emb or " + split + ".jsonl");
}

std::string hash_hex(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

// Loads a split in the model's feature space with the model's label map.
EmbeddingSet load_features(const fs::path& path, const Featurizer& featurizer,
                           const std::vector<std::string>* labels) {
  EmbeddingSet set;
  if (format_of(path) == Format::kEmb) {
    set = read_emb(path);
  } else {
    if (!featurizer.accepts_text()) {
      throw ConfigError("text data needs a hashed-bow featurizer; " +
                        path.string() + " is JSONL");
    }
    set = featurize_set(featurizer, read_jsonl_dataset(path));
  }
  if (labels != nullptr) set = remap_labels(std::move(set), *labels);
  return set;
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    try {
      std::size_t used = 0;
      grid.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("invalid alpha grid entry '" + item + "'");
    }
  }
  return grid;
}

void write_bundle(const fs::path& dir, const EmbeddingBundle& bundle) {
  fs::create_directories(dir);
  write_emb(dir / "train.emb", bundle.train);
  write_emb(dir / "validation.emb", bundle.validation);
  write_emb(dir / "test.emb", bundle.test);
  write_file_atomically(dir / "provenance.json", bundle.provenance.dump(2) + "\n");
}

void write_bundle(const fs::path& dir, const TextBundle& bundle) {
  fs::create_directories(dir);
  write_jsonl_dataset(dir / "train.jsonl", bundle.train);
  write_jsonl_dataset(dir / "validation.jsonl", bundle.validation);
  write_jsonl_dataset(dir / "test.jsonl", bundle.test);
  write_file_atomically(dir / "provenance.json", bundle.provenance.dump(2) + "\n");
}

struct CommonTrainFlags {
  std::string config;
  std::string data;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
};

TrainConfig resolve_config(const CommonTrainFlags& flags) {
  TrainConfig config =
      flags.config.empty() ? preset("synthetic") : load_train_config(flags.config);
  if (flags.seed) config.seed = *flags.seed;
  if (flags.alpha) config.alpha = *flags.alpha;
  config.validate();
  return config;
}

int run_train(const CommonTrainFlags& flags, const std::string& out) {
  const TrainConfig config = resolve_config(flags);
  const fs::path train_path = resolve_split(flags.data, "train");
  const EmbeddingSet train_set = load_features(train_path, config.featurizer, nullptr);
  const JointModel model = train(config, train_set);
  std::printf("%5s %14s %14s %14s\n", "epoch", "cross_entropy", "reconstruction",
              "total");
  for (std::size_t e = 0; e < model.log.size(); ++e) {
    std::printf("%5zu %14.8f %14.8f %14.8f\n", e + 1, model.log[e].cross_entropy,
                model.log[e].reconstruction, model.log[e].total);
  }
  ModelArtifact artifact{fit_statistics(model, train_set), json::object()};
  artifact.provenance = {{"config", model.config.to_json()},
                         {"seed", model.config.seed},
                         {"train_data", train_path.string()},
                         {"train_hash", hash_hex(train_path)},
                         {"train_examples", train_set.size()}};
  save_artifact(out, artifact);
  std::printf("wrote %s (%zu intents, ridge %.6g)\n", out.c_str(),
              artifact.scorer.class_count(),
              artifact.scorer.statistics().ridge_used);
  return 0;
}

int run_calibrate(const std::string& model_path, const std::string& data,
                  const std::string& policy_text, const std::string& out) {
  const ThresholdPolicy policy = ThresholdPolicy::parse(policy_text);
  ModelArtifact artifact = load_artifact(model_path);
  const fs::path path = resolve_split(data, "validation");
  const EmbeddingSet validation =
      load_features(path, artifact.scorer.featurizer(), &artifact.scorer.labels());
  const auto items = score_dataset(artifact.scorer, validation);
  std::vector<double> in_scope;
  std::vector<double> oos;
  for (const auto& item : items) (item.is_oos ? oos : in_scope).push_back(item.score);
  const double tau = calibrate_threshold(in_scope, oos, policy);
  artifact.scorer.set_threshold(tau);
  artifact.provenance["calibration"] = {{"policy", policy.to_string()},
                                        {"data", path.string()},
                                        {"data_hash", hash_hex(path)},
                                        {"tau", tau}};
  save_artifact(out.empty() ? model_path : out, artifact);
  std::size_t accepted = 0;
  for (double d : in_scope) accepted += d <= tau ? 1 : 0;
  std::printf("tau=%.17g\n", tau);
  if (!in_scope.empty()) {
    std::printf("in_scope_recall=%.6f\n",
                static_cast<double>(accepted) / static_cast<double>(in_scope.size()));
  }
  return 0;
}

int run_eval(const std::string& model_path, const std::string& data,
             std::optional<double> tau, const std::string& format,
             const std::string& out) {
  const ModelArtifact artifact = load_artifact(model_path);
  const fs::path path = resolve_split(data, "test");
  const EmbeddingSet test =
      load_features(path, artifact.scorer.featurizer(), &artifact.scorer.labels());
  if (!tau) tau = artifact.scorer.threshold();
  const EvaluationReport report = evaluate(artifact.scorer, test, tau);
  const std::string doc = report.to_json().dump(2);
  if (format == "json" || format == "both") std::cout << doc << '\n';
  if (format == "text" || format == "both") std::cout << report.to_text();
  if (!out.empty()) write_file_atomically(out, doc + "\n");
  return 0;
}

int run_score(const std::string& model_path, const std::string& text,
              const std::string& embedding, const std::string& data,
              std::optional<double> tau) {
  ModelArtifact artifact = load_artifact(model_path);
  if (tau) artifact.scorer.set_threshold(*tau);
  if (!artifact.scorer.threshold()) {
    throw ConfigError("model has no threshold; pass --tau or run calibrate");
  }
  const FittedScorer& scorer = artifact.scorer;
  if (!text.empty()) {
    std::cout << handle_request(scorer, json{{"text", text}}).dump() << '\n';
  } else if (!embedding.empty()) {
    std::cout << handle_request(scorer, json{{"embedding", embedding}}).dump() << '\n';
  } else {
    const EmbeddingSet set = load_features(data, scorer.featurizer(), nullptr);
    for (std::size_t i = 0; i < set.size(); ++i) {
      const auto row = set.features.row(i);
      const json request = {{"id", i},
                            {"embedding", std::vector<double>(row.begin(), row.end())}};
      std::cout << handle_request(scorer, request).dump() << '\n';
    }
  }
  return 0;
}

TcpServer* g_server = nullptr;

void handle_signal(int) {
  if (g_server != nullptr) g_server->stop();
}

int run_serve(const std::string& model_path, const std::string& addr, bool stdio) {
  auto artifact = load_artifact(model_path);
  if (!artifact.scorer.threshold()) {
    throw ConfigError("model has no threshold; run calibrate first");
  }
  auto scorer = std::make_shared<const FittedScorer>(std::move(artifact.scorer));
  if (stdio) {
    serve_stream(*scorer, std::cin, std::cout);
    return 0;
  }
  TcpServer server(scorer, Address::parse(addr));
  g_server = &server;
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  std::printf("listening on port %u\n", static_cast<unsigned>(server.port()));
  std::fflush(stdout);
  server.run();
  g_server = nullptr;
  return 0;
}

int run_sweep(const CommonTrainFlags& flags, const std::string& grid_text,
              const std::string& out) {
  const TrainConfig config = resolve_config(flags);
  const std::vector<double> grid =
      grid_text.empty() ? kDefaultAlphaGrid : parse_grid(grid_text);
  const EmbeddingSet train_set =
      load_features(resolve_split(flags.data, "train"), config.featurizer, nullptr);
  const EmbeddingSet validation =
      load_features(resolve_split(flags.data, "validation"), config.featurizer,
                    &train_set.label_names);
  const SweepResult result = sweep_alpha(config, grid, train_set, validation);
  std::printf("%8s %10s %10s %10s\n", "alpha", "aupr_oos", "auroc", "accuracy");
  for (const auto& e : result.entries) {
    std::printf("%8.4g %10.6f %10.6f %10.6f\n", e.alpha, e.validation.aupr_oos,
                e.validation.auroc, e.validation.intent_accuracy);
  }
  std::printf("best_alpha=%g\n", result.best_alpha);
  if (!out.empty()) write_file_atomically(out, result.to_json().dump(2) + "\n");
  return 0;
}

int run_split(const std::string& data, const std::string& out,
              const std::string& procedure, std::uint64_t seed,
              const std::string& oos_labels_text, std::size_t min_per_class) {
  const fs::path path(data);
  if (procedure != "stackoverflow" && procedure != "oos-domain") {
    throw ConfigError("unknown procedure '" + procedure +
                      "' (valid: stackoverflow, oos-domain)");
  }
  std::set<std::string> oos_labels;
  std::stringstream in(oos_labels_text);
  for (std::string item; std::getline(in, item, ',');) {
    if (!item.empty()) oos_labels.insert(item);
  }
  if (procedure == "oos-domain" && oos_labels.empty()) {
    throw ConfigError("oos-domain needs --oos-labels");
  }
  if (!fs::exists(path)) throw DataError("no such data file: " + data);
  if (format_of(path) == Format::kJsonl) {
    const TextSet set = read_jsonl_dataset(path);
    const TextBundle bundle =
        procedure == "stackoverflow"
            ? stackoverflow_style_split(set, seed)
            : oos_domain_split(set, oos_labels, min_per_class, seed);
    write_bundle(out, bundle);
    std::printf("train=%zu validation=%zu test=%zu\n", bundle.train.size(),
                bundle.validation.size(), bundle.test.size());
  } else {
    const EmbeddingSet set = read_emb(path);
    const EmbeddingBundle bundle =
        procedure == "stackoverflow"
            ? stackoverflow_style_split(set, seed)
            : oos_domain_split(set, oos_labels, min_per_class, seed);
    write_bundle(out, bundle);
    std::printf("train=%zu validation=%zu test=%zu\n", bundle.train.size(),
                bundle.validation.size(), bundle.test.size());
  }
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"Out-of-scope intent detection with Mahalanobis scoring"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  CommonTrainFlags train_flags;
  std::string out;
  std::string model;
  std::string data;
  std::string policy = "is-recall@0.95";
  std::string format = "json";
  std::string grid;
  std::string addr = "127.0.0.1:7878";
  std::string text;
  std::string embedding;
  std::string procedure = "stackoverflow";
  std::string oos_labels;
  std::string oos_mode = "shell";
  std::size_t min_per_class = 10;
  std::uint64_t seed = 0;
  std::optional<double> tau;
  bool stdio = false;
  SyntheticSpec spec;

  auto* train_cmd = app.add_subcommand("train", "Train a model and fit class statistics");
  train_cmd->add_option("--config", train_flags.config, "JSON config file");
  train_cmd->add_option("--data", train_flags.data, "Training file or split directory")
      ->required();
  train_cmd->add_option("--out", out, "Model file to write")->required();
  train_cmd->add_option("--seed", train_flags.seed, "Override the config seed");
  train_cmd->add_option("--alpha", train_flags.alpha, "Override the reconstruction weight");

  auto* calibrate_cmd = app.add_subcommand("calibrate", "Set the OOS threshold");
  calibrate_cmd->add_option("--model", model, "Model file")->required();
  calibrate_cmd->add_option("--data", data, "Validation file or split directory")
      ->required();
  calibrate_cmd->add_option("--policy", policy, "is-recall@<r> or f1-oos");
  calibrate_cmd->add_option("--out", out, "Write here instead of in place");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate on a test set");
  eval_cmd->add_option("--model", model, "Model file")->required();
  eval_cmd->add_option("--data", data, "Test file or split directory")->required();
  eval_cmd->add_option("--tau", tau, "Override the model threshold");
  eval_cmd->add_option("--format", format, "json, text or both")
      ->check(CLI::IsMember({"json", "text", "both"}));
  eval_cmd->add_option("--out", out, "Also write the JSON report here");

  auto* split_cmd = app.add_subcommand("split", "Build train/validation/test splits");
  split_cmd->add_option("--data", data, "Labeled .jsonl or .emb file")->required();
  split_cmd->add_option("--out", out, "Output directory")->required();
  split_cmd->add_option("--procedure", procedure, "stackoverflow or oos-domain");
  split_cmd->add_option("--seed", seed, "Shuffle seed");
  split_cmd->add_option("--oos-labels", oos_labels, "Comma-separated OOS labels");
  split_cmd->add_option("--min-per-class", min_per_class,
                        "Drop in-scope intents with fewer examples");

  auto* synth_cmd = app.add_subcommand("synth", "Generate the Gaussian-cluster benchmark");
  synth_cmd->add_option("--out", out, "Output directory")->required();
  synth_cmd->add_option("--seed", spec.seed, "Generator seed");
  synth_cmd->add_option("--classes", spec.classes, "Number of intents");
  synth_cmd->add_option("--dim", spec.dim, "Embedding dimension");
  synth_cmd->add_option("--samples-per-class", spec.samples_per_class,
                        "Samples per intent");
  synth_cmd->add_option("--sigma", spec.sigma, "Cluster standard deviation");
  synth_cmd->add_option("--scale", spec.placement_scale, "Distance of means from the origin");
  synth_cmd->add_option("--oos-mode", oos_mode, "shell, uniform-box or held-out-clusters");
  synth_cmd->add_option("--oos-count", spec.oos_count, "OOS samples (0: 2 per class sample)");

  auto* score_cmd = app.add_subcommand("score", "Score queries once");
  score_cmd->add_option("--model", model, "Model file")->required();
  auto* text_opt = score_cmd->add_option("--text", text, "Query text");
  auto* emb_opt = score_cmd->add_option("--embedding", embedding,
                                        "Base64 EMB1 record in feature space");
  auto* data_opt = score_cmd->add_option("--data", data, "Score every row of a file");
  text_opt->excludes(emb_opt)->excludes(data_opt);
  emb_opt->excludes(data_opt);
  score_cmd->add_option("--tau", tau, "Override the model threshold");

  auto* serve_cmd = app.add_subcommand("serve", "Serve newline-delimited JSON requests");
  serve_cmd->add_option("--model", model, "Model file")->required();
  serve_cmd->add_option("--addr", addr, "host:port (port 0 picks one)");
  serve_cmd->add_flag("--stdio", stdio, "Read standard input instead of a socket");

  auto* sweep_cmd = app.add_subcommand("sweep", "Grid search over the reconstruction weight");
  sweep_cmd->add_option("--config", train_flags.config, "JSON config file");
  sweep_cmd->add_option("--data", train_flags.data, "Split directory")->required();
  sweep_cmd->add_option("--grid", grid, "Comma-separated alphas");
  sweep_cmd->add_option("--seed", train_flags.seed, "Override the config seed");
  sweep_cmd->add_option("--out", out, "Write the sweep report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  if (*train_cmd) return run_train(train_flags, out);
  if (*calibrate_cmd) return run_calibrate(model, data, policy, out);
  if (*eval_cmd) return run_eval(model, data, tau, format, out);
  if (*split_cmd) {
    return run_split(data, out, procedure, seed, oos_labels, min_per_class);
  }
  if (*synth_cmd) {
    spec.oos_mode = parse_oos_mode(oos_mode);
    const EmbeddingBundle bundle = synthesize(spec);
    write_bundle(out, bundle);
    std::printf("train=%zu validation=%zu test=%zu\n", bundle.train.size(),
                bundle.validation.size(), bundle.test.size());
    return 0;
  }
  if (*score_cmd) {
    if (text.empty() && embedding.empty() && data.empty()) {
      throw ConfigError("score needs --text, --embedding or --data");
    }
    return run_score(model, text, embedding, data, tau);
  }
  if (*serve_cmd) return run_serve(model, addr, stdio);
  if (*sweep_cmd) return run_sweep(train_flags, grid, out);
  return 2;
}

}  // namespace
}  // namespace oosguard

int main(int argc, char** argv) {
  try {
    return oosguard::run(argc, argv);
  } catch (const oosguard::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
