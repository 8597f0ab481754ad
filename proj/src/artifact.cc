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

#include "oosguard/artifact.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <string>

#include "oosguard/dataset.h"

namespace oosguard {
namespace {

using json = nlohmann::json;

constexpr char kMagic[4] = {'O', 'O', 'S', 'M'};

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_doubles(std::vector<unsigned char>& out, std::span<const double> values) {
  for (double v : values) put_u64(out, std::bit_cast<std::uint64_t>(v));
}

class Reader {
 public:
  explicit Reader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

  std::uint64_t u(int width) {
    need(width);
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += width;
    return v;
  }

  std::span<const unsigned char> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  void doubles(std::span<double> out) {
    for (double& v : out) {
      v = std::bit_cast<double>(u(8));
      if (!std::isfinite(v)) throw DataError("model file holds a non-finite value");
    }
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DataError("model file is truncated");
  }
  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 0;
};

std::string activation_name(Activation a) {
  return a == Activation::kRelu ? "relu" : "linear";
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "linear") return Activation::kLinear;
  throw DataError("model file names unknown activation '" + name + "'");
}

}  // namespace

std::vector<unsigned char> encode_artifact(const ModelArtifact& artifact) {
  const FittedScorer& s = artifact.scorer;
  const DenseNetwork& enc = s.encoder();
  json header = {
      {"featurizer",
       {{"kind", std::string(featurizer_kind_name(s.featurizer().kind))},
        {"dim", s.featurizer().dim},
        {"seed", s.featurizer().seed}}},
      {"encoder",
       {{"layer_dims", enc.layer_dims()},
        {"hidden_activation", activation_name(enc.hidden_activation())},
        {"output_activation", activation_name(enc.output_activation())}}},
      {"classes", s.class_count()},
      {"embedding_dim", s.embedding_dim()},
      {"ridge_used", s.statistics().ridge_used},
      {"labels", s.labels()},
      {"tau", s.threshold() ? json(*s.threshold()) : json(nullptr)},
      {"provenance", artifact.provenance},
  };
  const std::string text = header.dump();
  std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kArtifactVersion);
  put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& layer : enc.layers()) {
    put_doubles(out, layer.weights.values());
    put_doubles(out, layer.bias);
  }
  put_doubles(out, s.statistics().means.values());
  put_doubles(out, s.statistics().covariance.values());
  put_doubles(out, s.statistics().precision.values());
  return out;
}

ModelArtifact decode_artifact(std::span<const unsigned char> bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw VersionError("not a model file (bad magic)");
  }
  Reader in(bytes);
  in.take(4);
  const auto version = static_cast<std::uint32_t>(in.u(4));
  if (version != kArtifactVersion) {
    throw VersionError("model file version " + std::to_string(version) +
                       " is not supported (expected " +
                       std::to_string(kArtifactVersion) + ")");
  }
  const std::uint64_t header_len = in.u(8);
  const auto header_bytes = in.take(header_len);
  json header;
  try {
    header = json::parse(header_bytes.begin(), header_bytes.end());
  } catch (const json::exception& e) {
    throw DataError(std::string("model header is not valid JSON: ") + e.what());
  }
  try {
    Featurizer featurizer;
    featurizer.kind =
        parse_featurizer_kind(header.at("featurizer").at("kind").get<std::string>());
    featurizer.dim = header.at("featurizer").at("dim").get<std::size_t>();
    featurizer.seed = header.at("featurizer").at("seed").get<std::uint64_t>();
    const json& e = header.at("encoder");
    DenseNetwork encoder(e.at("layer_dims").get<std::vector<std::size_t>>(),
                         parse_activation(e.at("hidden_activation").get<std::string>()),
                         parse_activation(e.at("output_activation").get<std::string>()));
    for (auto& layer : encoder.layers()) {
      in.doubles(layer.weights.values());
      in.doubles(layer.bias);
    }
    const auto classes = header.at("classes").get<std::size_t>();
    const auto d = header.at("embedding_dim").get<std::size_t>();
    ClassStatistics stats;
    stats.means = Matrix(classes, d);
    stats.covariance = Matrix(d, d);
    stats.precision = Matrix(d, d);
    in.doubles(stats.means.values());
    in.doubles(stats.covariance.values());
    in.doubles(stats.precision.values());
    stats.ridge_used = header.at("ridge_used").get<double>();
    if (!in.done()) throw DataError("model file has trailing bytes");
    std::optional<double> tau;
    if (!header.at("tau").is_null()) tau = header.at("tau").get<double>();
    ModelArtifact artifact{
        FittedScorer(featurizer, std::move(encoder), std::move(stats),
                     header.at("labels").get<std::vector<std::string>>(), tau),
        header.value("provenance", json::object())};
    return artifact;
  } catch (const json::exception& e) {
    throw DataError(std::string("model header is malformed: ") + e.what());
  }
}

void save_artifact(const std::filesystem::path& path, const ModelArtifact& artifact) {
  const auto bytes = encode_artifact(artifact);
  write_file_atomically(path, bytes);
}

ModelArtifact load_artifact(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_artifact(bytes);
  } catch (const VersionError& e) {
    throw VersionError(path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace oosguard
