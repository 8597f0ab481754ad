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

#ifndef OOSGUARD_DATASET_H_
#define OOSGUARD_DATASET_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oosguard/error.h"
#include "oosguard/linalg.h"

namespace oosguard {

// Label string reserved for out-of-scope examples in text datasets.
inline constexpr std::string_view kOosLabelName = "oos";

// Embedding-typed examples. labels[i] indexes label_names or is kOosLabel.
struct EmbeddingSet {
  Matrix features;
  std::vector<ClassIndex> labels;
  std::vector<std::string> label_names;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }
  std::size_t oos_count() const;
};

struct TextSet {
  std::vector<std::string> texts;
  std::vector<ClassIndex> labels;
  std::vector<std::string> label_names;

  std::size_t size() const { return labels.size(); }
  std::size_t oos_count() const;
};

template <typename Set>
struct DatasetBundle {
  Set train;
  Set validation;
  Set test;
  nlohmann::json provenance;
};

using EmbeddingBundle = DatasetBundle<EmbeddingSet>;
using TextBundle = DatasetBundle<TextSet>;

// JSONL: one {"text": ..., "label": ...} object per line. The label map is the
// sorted set of distinct labels other than "oos", which maps to kOosLabel.
// Blank lines are skipped.
TextSet read_jsonl_dataset(const std::filesystem::path& path);
void write_jsonl_dataset(const std::filesystem::path& path, const TextSet& set);

// EMB1 binary layout, all integers little-endian:
//   [0,4)  "EMB1"   [4,8) u32 version = 1   [8,12) u32 dim   [12,20) u64 count
//   count records of: u32 label (0xFFFFFFFF = OOS), dim x IEEE-754 binary32.
// Label names live in the sidecar <path>.labels.json as {"0": "name", ...}.
inline constexpr std::uint32_t kEmbVersion = 1;
inline constexpr std::uint32_t kEmbOosSentinel = 0xFFFFFFFFu;

std::filesystem::path emb_sidecar_path(const std::filesystem::path& path);

// Payload values are narrowed to binary32; non-finite results are rejected.
void write_emb(const std::filesystem::path& path, const EmbeddingSet& set);
// Without a sidecar, labels are named by their decimal index.
EmbeddingSet read_emb(const std::filesystem::path& path);

std::vector<unsigned char> encode_emb(const EmbeddingSet& set);
EmbeddingSet decode_emb(std::span<const unsigned char> bytes);

// A bare record (u32 label + dim floats) as used inside EMB1.
std::vector<unsigned char> encode_emb_record(std::span<const double> values,
                                             ClassIndex label = kOosLabel);
// Accepts either a bare record of 4 + 4*dim bytes or a complete EMB1 stream
// holding exactly one record.
std::vector<double> decode_emb_record(std::span<const unsigned char> bytes,
                                      std::size_t dim);

// Stable content hashes used for leakage checks and deduplication.
std::uint64_t content_hash(const TextSet& set, std::size_t i);
std::uint64_t content_hash(const EmbeddingSet& set, std::size_t i);

// Re-indexes labels onto target_names by name. Unknown names are a DataError.
EmbeddingSet remap_labels(EmbeddingSet set,
                          const std::vector<std::string>& target_names);
TextSet remap_labels(TextSet set, const std::vector<std::string>& target_names);

// Only the in-scope examples, or only the OOS ones.
EmbeddingSet in_scope_subset(const EmbeddingSet& set);

// Rows selected by index, labels kept.
EmbeddingSet select_rows(const EmbeddingSet& set,
                         std::span<const std::size_t> rows);
TextSet select_rows(const TextSet& set, std::span<const std::size_t> rows);

// Writes to a sibling temporary and renames over path.
void write_file_atomically(const std::filesystem::path& path,
                           std::span<const unsigned char> bytes);
void write_file_atomically(const std::filesystem::path& path,
                           std::string_view text);
std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path);

}  // namespace oosguard

#endif  // OOSGUARD_DATASET_H_
