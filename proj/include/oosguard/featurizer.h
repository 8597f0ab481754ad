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

#ifndef OOSGUARD_FEATURIZER_H_
#define OOSGUARD_FEATURIZER_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "oosguard/linalg.h"
#include "oosguard/nn.h"

namespace oosguard {

enum class FeaturizerKind {
  kHashedBow,    // signed hashed bag of words over normalized tokens
  kPassthrough,  // inputs are precomputed sentence embeddings
};

std::string_view featurizer_kind_name(FeaturizerKind kind);
FeaturizerKind parse_featurizer_kind(std::string_view name);

inline constexpr std::size_t kDefaultFeatureDim = 1024;

struct Featurizer {
  FeaturizerKind kind = FeaturizerKind::kHashedBow;
  std::size_t dim = kDefaultFeatureDim;
  std::uint64_t seed = 0;

  bool accepts_text() const { return kind == FeaturizerKind::kHashedBow; }
  bool operator==(const Featurizer&) const = default;
};

// ASCII letters are lowercased; tokens are maximal runs of ASCII
// alphanumerics or non-ASCII bytes (so UTF-8 words stay whole).
std::vector<std::string> tokenize(std::string_view text);

// 64-bit FNV-1a, seeded by folding the seed into the offset basis.
std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t seed = 0);
std::uint64_t fnv1a64(std::string_view text, std::uint64_t seed = 0);

// Hashed bag of words: each token adds +1 or -1 (by an independent hash bit)
// to bucket hash % dim; the result is L2-normalized unless it is all zeros.
// Throws ConfigError for a passthrough featurizer.
std::vector<double> featurize(const Featurizer& featurizer, std::string_view text);
Matrix featurize_batch(const Featurizer& featurizer,
                       std::span<const std::string> texts);

// Trainable projection from feature space to the embedding space that the
// scorer works in. layer dims: input_dim, hidden_dims..., embedding_dim.
struct EncoderConfig {
  std::size_t input_dim = kDefaultFeatureDim;
  std::vector<std::size_t> hidden_dims = {256, 128};
  std::size_t embedding_dim = 64;

  std::vector<std::size_t> layer_dims() const;
  bool operator==(const EncoderConfig&) const = default;
};

DenseNetwork make_encoder(const EncoderConfig& config, std::uint64_t seed);

// Single linear layer with identity weights.
DenseNetwork identity_encoder(std::size_t dim);

// Row-wise forward pass through the encoder.
Matrix encode(const DenseNetwork& encoder, const Matrix& features);
std::vector<double> encode(const DenseNetwork& encoder,
                           std::span<const double> features);

}  // namespace oosguard

#endif  // OOSGUARD_FEATURIZER_H_
