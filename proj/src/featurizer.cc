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

#include "oosguard/featurizer.h"

#include <cmath>

#include "oosguard/error.h"
#include "oosguard/random.h"

namespace oosguard {
namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

bool is_token_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z') || c >= 0x80;
}

}  // namespace

std::string_view featurizer_kind_name(FeaturizerKind kind) {
  return kind == FeaturizerKind::kHashedBow ? "hashed-bow" : "passthrough";
}

FeaturizerKind parse_featurizer_kind(std::string_view name) {
  if (name == "hashed-bow") return FeaturizerKind::kHashedBow;
  if (name == "passthrough") return FeaturizerKind::kPassthrough;
  throw ConfigError("unknown featurizer kind '" + std::string(name) +
                    "' (expected hashed-bow or passthrough)");
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_token_byte(c)) {
      current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a')
                                             : ch);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t seed) {
  std::uint64_t h = kFnvOffset ^ splitmix64(seed);
  for (unsigned char b : bytes) {
    h ^= b;
    h *= kFnvPrime;
  }
  return h;
}

std::uint64_t fnv1a64(std::string_view text, std::uint64_t seed) {
  return fnv1a64(std::span<const unsigned char>(
                     reinterpret_cast<const unsigned char*>(text.data()),
                     text.size()),
                 seed);
}

std::vector<double> featurize(const Featurizer& featurizer, std::string_view text) {
  if (!featurizer.accepts_text()) throw ConfigError("text scoring unavailable");
  if (featurizer.dim == 0) throw ConfigError("featurizer dim must be positive");
  std::vector<double> v(featurizer.dim, 0.0);
  for (const auto& token : tokenize(text)) {
    const std::uint64_t h = fnv1a64(token, featurizer.seed);
    const std::uint64_t sign_bits = splitmix64(h);
    const double sign = (sign_bits >> 63) != 0 ? -1.0 : 1.0;
    v[h % featurizer.dim] += sign;
  }
  double norm2 = 0.0;
  for (double x : v) norm2 += x * x;
  if (norm2 > 0.0) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& x : v) x *= inv;
  }
  return v;
}

Matrix featurize_batch(const Featurizer& featurizer,
                       std::span<const std::string> texts) {
  Matrix out(texts.size(), featurizer.dim);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto row = featurize(featurizer, texts[i]);
    std::copy(row.begin(), row.end(), out.row(i).begin());
  }
  return out;
}

std::vector<std::size_t> EncoderConfig::layer_dims() const {
  std::vector<std::size_t> dims;
  dims.push_back(input_dim);
  dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
  dims.push_back(embedding_dim);
  return dims;
}

DenseNetwork make_encoder(const EncoderConfig& config, std::uint64_t seed) {
  CounterRng rng(seed, RngStream::kEncoderInit);
  return DenseNetwork::glorot(config.layer_dims(), rng);
}

DenseNetwork identity_encoder(std::size_t dim) {
  DenseNetwork net({dim, dim});
  net.layers()[0].weights = Matrix::identity(dim);
  return net;
}

Matrix encode(const DenseNetwork& encoder, const Matrix& features) {
  return predict(encoder, features);
}

std::vector<double> encode(const DenseNetwork& encoder,
                           std::span<const double> features) {
  Matrix row(1, features.size(),
             std::vector<double>(features.begin(), features.end()));
  const Matrix out = predict(encoder, row);
  const auto v = out.row(0);
  return {v.begin(), v.end()};
}

}  // namespace oosguard
