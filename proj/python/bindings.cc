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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oosguard/artifact.h"
#include "oosguard/dataset.h"
#include "oosguard/error.h"
#include "oosguard/featurizer.h"
#include "oosguard/metrics.h"
#include "oosguard/scorer.h"
#include "oosguard/service.h"
#include "oosguard/stats.h"
#include "oosguard/synthetic.h"
#include "oosguard/training.h"

namespace py = pybind11;
using json = nlohmann::json;

namespace oosguard {
namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using LabelArray = py::array_t<ClassIndex, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const DoubleArray& a) {
  if (a.ndim() == 1) {
    return Matrix(1, a.shape(0), std::vector<double>(a.data(), a.data() + a.size()));
  }
  if (a.ndim() != 2) throw ConfigError("expected a 1-D or 2-D array");
  return Matrix(a.shape(0), a.shape(1),
                std::vector<double>(a.data(), a.data() + a.size()));
}

std::vector<double> to_vector(const DoubleArray& a) {
  if (a.ndim() != 1) throw ConfigError("expected a 1-D array");
  return {a.data(), a.data() + a.size()};
}

std::vector<ClassIndex> to_labels(const LabelArray& a) {
  return {a.data(), a.data() + a.size()};
}

py::array_t<double> to_array(const Matrix& m) {
  py::array_t<double> out({m.rows(), m.cols()});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

py::array_t<double> to_array(const std::vector<double>& v) {
  py::array_t<double> out(v.size());
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::array_t<ClassIndex> to_array(const std::vector<ClassIndex>& v) {
  py::array_t<ClassIndex> out(v.size());
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

EmbeddingSet make_set(const DoubleArray& features, const LabelArray& labels,
                      std::vector<std::string> names) {
  EmbeddingSet set;
  set.features = to_matrix(features);
  set.labels = to_labels(labels);
  set.label_names = std::move(names);
  if (set.labels.size() != set.features.rows()) {
    throw DataError("features and labels differ in length");
  }
  return set;
}

py::dict set_to_dict(const EmbeddingSet& set) {
  py::dict d;
  d["features"] = to_array(set.features);
  d["labels"] = to_array(set.labels);
  d["label_names"] = set.label_names;
  return d;
}

std::vector<ScoredLabel> to_items(const DoubleArray& scores,
                                  const py::array_t<bool>& is_oos) {
  const auto s = to_vector(scores);
  if (static_cast<std::size_t>(is_oos.size()) != s.size()) {
    throw DataError("scores and flags differ in length");
  }
  std::vector<ScoredLabel> items(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    items[i].score = s[i];
    items[i].is_oos = is_oos.data()[i];
  }
  return items;
}

py::dict score_to_dict(const ScoreResult& r) {
  py::dict d;
  d["d_min"] = r.d_min;
  d["c_min"] = r.c_min;
  d["distances"] = to_array(r.per_class_distances);
  return d;
}

}  // namespace
}  // namespace oosguard

PYBIND11_MODULE(_core, m) {
  using namespace oosguard;
  m.doc() = "Mahalanobis-distance intent scoring with out-of-scope rejection";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.attr("OOS_LABEL") = kOosLabel;

  m.def("class_means", [](const DoubleArray& x, const LabelArray& y, std::size_t c) {
    return to_array(class_means(to_matrix(x), to_labels(y), c));
  }, py::arg("embeddings"), py::arg("labels"), py::arg("class_count"));
  m.def("shared_covariance", [](const DoubleArray& x, const LabelArray& y,
                                const DoubleArray& means, bool class_centered) {
    return to_array(shared_covariance(
        to_matrix(x), to_labels(y), to_matrix(means),
        class_centered ? CovarianceMode::kClassCentered
                       : CovarianceMode::kGlobalCentered));
  }, py::arg("embeddings"), py::arg("labels"), py::arg("means"),
     py::arg("class_centered") = true);
  m.def("regularized_inverse", [](const DoubleArray& sigma, double ridge) {
    const RegularizedInverse r = regularized_inverse(to_matrix(sigma), ridge);
    return py::make_tuple(to_array(r.precision), r.ridge_used);
  }, py::arg("sigma"), py::arg("ridge") = 0.0);
  m.def("mahalanobis", [](const DoubleArray& s, const DoubleArray& mu,
                          const DoubleArray& precision) {
    return mahalanobis(to_vector(s), to_vector(mu), to_matrix(precision));
  }, py::arg("s"), py::arg("mu"), py::arg("precision"));

  m.def("tokenize", &tokenize, py::arg("text"));
  m.def("featurize", [](const std::string& text, std::size_t dim, std::uint64_t seed) {
    return to_array(featurize(Featurizer{FeaturizerKind::kHashedBow, dim, seed}, text));
  }, py::arg("text"), py::arg("dim") = kDefaultFeatureDim, py::arg("seed") = 0);

  m.def("aupr_oos", [](const DoubleArray& scores, const py::array_t<bool>& is_oos) {
    return aupr_oos(to_items(scores, is_oos));
  }, py::arg("scores"), py::arg("is_oos"));
  m.def("auroc", [](const DoubleArray& scores, const py::array_t<bool>& is_oos) {
    return auroc(to_items(scores, is_oos));
  }, py::arg("scores"), py::arg("is_oos"));
  m.def("dispersion", [](const DoubleArray& x) { return dispersion(to_matrix(x)); },
        py::arg("embeddings"));

  m.def("synthesize", [](std::size_t classes, std::size_t dim,
                         std::size_t samples_per_class, double sigma,
                         const std::string& oos_mode, std::uint64_t seed) {
    SyntheticSpec spec;
    spec.classes = classes;
    spec.dim = dim;
    spec.samples_per_class = samples_per_class;
    spec.sigma = sigma;
    spec.oos_mode = parse_oos_mode(oos_mode);
    spec.seed = seed;
    const EmbeddingBundle b = synthesize(spec);
    py::dict d;
    d["train"] = set_to_dict(b.train);
    d["validation"] = set_to_dict(b.validation);
    d["test"] = set_to_dict(b.test);
    d["provenance"] = b.provenance.dump();
    return d;
  }, py::arg("classes") = 10, py::arg("dim") = 32, py::arg("samples_per_class") = 200,
     py::arg("sigma") = 1.0, py::arg("oos_mode") = "shell", py::arg("seed") = 0);

  m.def("read_emb", [](const std::filesystem::path& p) { return set_to_dict(read_emb(p)); },
        py::arg("path"));
  m.def("write_emb", [](const std::filesystem::path& p, const DoubleArray& x,
                        const LabelArray& y, std::vector<std::string> names) {
    write_emb(p, make_set(x, y, std::move(names)));
  }, py::arg("path"), py::arg("features"), py::arg("labels"), py::arg("label_names"));

  py::class_<FittedScorer>(m, "Scorer")
      .def_property_readonly("labels", &FittedScorer::labels)
      .def_property_readonly("threshold", &FittedScorer::threshold)
      .def_property_readonly("feature_dim", &FittedScorer::feature_dim)
      .def_property_readonly("embedding_dim", &FittedScorer::embedding_dim)
      .def_property_readonly("means",
                             [](const FittedScorer& s) { return to_array(s.statistics().means); })
      .def_property_readonly("precision", [](const FittedScorer& s) {
        return to_array(s.statistics().precision);
      })
      .def("set_threshold", &FittedScorer::set_threshold, py::arg("tau"))
      .def("encode", [](const FittedScorer& s, const DoubleArray& x) {
        return to_array(s.encode(to_matrix(x)));
      }, py::arg("features"))
      .def("score", [](const FittedScorer& s, const DoubleArray& features) {
        return score_to_dict(s.score_features(to_vector(features), true));
      }, py::arg("features"))
      .def("score_text", [](const FittedScorer& s, const std::string& text) {
        return score_to_dict(s.score_text(text, true));
      }, py::arg("text"))
      .def("calibrate", [](FittedScorer& s, const DoubleArray& x, const LabelArray& y,
                           const std::string& policy) {
        EmbeddingSet set = make_set(x, y, s.labels());
        std::vector<double> in_scope;
        std::vector<double> oos;
        for (const auto& item : score_dataset(s, set)) {
          (item.is_oos ? oos : in_scope).push_back(item.score);
        }
        const double tau =
            calibrate_threshold(in_scope, oos, ThresholdPolicy::parse(policy));
        s.set_threshold(tau);
        return tau;
      }, py::arg("features"), py::arg("labels"), py::arg("policy") = "is-recall@0.95")
      .def("evaluate", [](const FittedScorer& s, const DoubleArray& x,
                          const LabelArray& y) {
        const EvaluationReport r =
            evaluate(s, make_set(x, y, s.labels()), s.threshold());
        return r.to_json().dump();
      }, py::arg("features"), py::arg("labels"))
      .def("handle_request", [](const FittedScorer& s, const std::string& line) {
        return handle_line(s, line);
      }, py::arg("line"))
      .def("save", [](const FittedScorer& s, const std::filesystem::path& p) {
        save_artifact(p, ModelArtifact{s, json::object()});
      }, py::arg("path"));

  m.def("load_scorer", [](const std::filesystem::path& p) {
    return load_artifact(p).scorer;
  }, py::arg("path"));

  m.def("train", [](const DoubleArray& x, const LabelArray& y,
                    std::vector<std::string> names, const std::string& config_json) {
    const TrainConfig config = TrainConfig::from_json(
        config_json.empty() ? json::object() : json::parse(config_json));
    const EmbeddingSet set = make_set(x, y, std::move(names));
    JointModel model;
    {
      py::gil_scoped_release release;
      model = train(config, set);
    }
    py::list log;
    for (const auto& e : model.log) {
      log.append(py::make_tuple(e.cross_entropy, e.reconstruction, e.total));
    }
    return py::make_tuple(fit_statistics(model, set), log);
  }, py::arg("features"), py::arg("labels"), py::arg("label_names"),
     py::arg("config_json") = "",
     "Trains the joint model and returns (scorer, per-epoch (ce, ae, total)).");
}
