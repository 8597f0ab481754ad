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

#include "oosguard/dataset.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cctype>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string_view>
#include <unistd.h>

#include "oosguard/featurizer.h"

namespace oosguard {
namespace {

using json = nlohmann::json;

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

template <typename T>
void put_le(std::vector<unsigned char>& out, T value) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<unsigned char>((bits >> (8 * i)) & 0xFF));
  }
}

template <typename T>
T get_le(std::span<const unsigned char> bytes, std::size_t offset) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bits |= static_cast<U>(bytes[offset + i]) << (8 * i);
  }
  return std::bit_cast<T>(bits);
}

constexpr std::size_t kEmbHeaderSize = 20;

std::uint32_t encode_label(ClassIndex label) {
  return label == kOosLabel ? kEmbOosSentinel : static_cast<std::uint32_t>(label);
}

void append_record(std::vector<unsigned char>& out, std::span<const double> values,
                   ClassIndex label, std::size_t record) {
  put_le<std::uint32_t>(out, encode_label(label));
  for (double v : values) {
    const auto f = static_cast<float>(v);
    if (!std::isfinite(f)) {
      throw NumericError("non-finite value in EMB1 record " +
                         std::to_string(record));
    }
    put_le<float>(out, f);
  }
}

std::vector<std::string> read_sidecar(const std::filesystem::path& path,
                                      std::size_t min_count) {
  std::vector<std::string> names;
  const auto sidecar = emb_sidecar_path(path);
  if (std::filesystem::exists(sidecar)) {
    std::ifstream in(sidecar);
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw DataError("malformed label sidecar " + sidecar.string() + ": " +
                      e.what());
    }
    if (doc.is_array()) {
      names = doc.get<std::vector<std::string>>();
    } else if (doc.is_object()) {
      std::map<std::size_t, std::string> by_index;
      for (const auto& [key, value] : doc.items()) {
        std::size_t idx = 0;
        try {
          idx = std::stoul(key);
        } catch (const std::exception&) {
          throw DataError("label sidecar key '" + key + "' is not an index");
        }
        by_index[idx] = value.get<std::string>();
      }
      for (const auto& [idx, name] : by_index) {
        if (idx != names.size()) {
          throw DataError("label sidecar indices are not dense at " +
                          std::to_string(idx));
        }
        names.push_back(name);
      }
    } else {
      throw DataError("label sidecar must be a JSON object or array");
    }
  }
  while (names.size() < min_count) names.push_back(std::to_string(names.size()));
  return names;
}

template <typename Set>
Set remap_impl(Set set, const std::vector<std::string>& target_names) {
  std::map<std::string, ClassIndex> index;
  for (std::size_t i = 0; i < target_names.size(); ++i) {
    index[target_names[i]] = static_cast<ClassIndex>(i);
  }
  for (auto& label : set.labels) {
    if (label == kOosLabel) continue;
    const auto& name = set.label_names.at(static_cast<std::size_t>(label));
    const auto it = index.find(name);
    if (it == index.end()) {
      throw DataError("label '" + name + "' is not known to the model");
    }
    label = it->second;
  }
  set.label_names = target_names;
  return set;
}

}  // namespace

std::size_t EmbeddingSet::oos_count() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), kOosLabel));
}

std::size_t TextSet::oos_count() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), kOosLabel));
}

TextSet read_jsonl_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path.string());
  std::vector<std::string> texts;
  std::vector<std::string> raw_labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(),
                    [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception&) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": line is not valid JSON");
    }
    for (const char* field : {"text", "label"}) {
      if (!obj.is_object() || !obj.contains(field) || !obj[field].is_string()) {
        throw DataError(path.string() + ":" + std::to_string(line_no) +
                        ": line " + std::to_string(line_no) +
                        " is missing string field \"" + field + "\"");
      }
    }
    texts.push_back(obj["text"].get<std::string>());
    raw_labels.push_back(obj["label"].get<std::string>());
  }
  if (texts.empty()) throw DataError("dataset " + path.string() + " is empty");

  std::set<std::string> distinct(raw_labels.begin(), raw_labels.end());
  distinct.erase(std::string(kOosLabelName));
  TextSet set;
  set.label_names.assign(distinct.begin(), distinct.end());
  std::map<std::string, ClassIndex> index;
  for (std::size_t i = 0; i < set.label_names.size(); ++i) {
    index[set.label_names[i]] = static_cast<ClassIndex>(i);
  }
  set.texts = std::move(texts);
  set.labels.reserve(raw_labels.size());
  for (const auto& l : raw_labels) {
    set.labels.push_back(l == kOosLabelName ? kOosLabel : index.at(l));
  }
  return set;
}

void write_jsonl_dataset(const std::filesystem::path& path, const TextSet& set) {
  std::ostringstream out;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const ClassIndex l = set.labels[i];
    const std::string label = l == kOosLabel
                                  ? std::string(kOosLabelName)
                                  : set.label_names.at(static_cast<std::size_t>(l));
    out << json{{"text", set.texts[i]}, {"label", label}}.dump() << '\n';
  }
  write_file_atomically(path, out.str());
}

std::filesystem::path emb_sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".labels.json");
}

std::vector<unsigned char> encode_emb(const EmbeddingSet& set) {
  if (set.features.rows() != set.labels.size()) {
    throw DataError("EMB1: label count differs from row count");
  }
  if (set.dim() == 0) throw DataError("EMB1: dim must be positive");
  std::vector<unsigned char> out;
  out.reserve(kEmbHeaderSize + set.size() * (4 + 4 * set.dim()));
  for (char c : std::string_view("EMB1")) out.push_back(static_cast<unsigned char>(c));
  put_le<std::uint32_t>(out, kEmbVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(set.dim()));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(set.size()));
  for (std::size_t i = 0; i < set.size(); ++i) {
    append_record(out, set.features.row(i), set.labels[i], i);
  }
  return out;
}

EmbeddingSet decode_emb(std::span<const unsigned char> bytes) {
  if (bytes.size() < kEmbHeaderSize) throw DataError("EMB1: truncated header");
  if (std::memcmp(bytes.data(), "EMB1", 4) != 0) {
    throw VersionError("EMB1: bad magic '" +
                       std::string(reinterpret_cast<const char*>(bytes.data()), 4) +
                       "' (unsupported version)");
  }
  const auto version = get_le<std::uint32_t>(bytes, 4);
  if (version != kEmbVersion) {
    throw VersionError("EMB1: unsupported version " + std::to_string(version));
  }
  const auto dim = get_le<std::uint32_t>(bytes, 8);
  const auto count = get_le<std::uint64_t>(bytes, 12);
  if (dim == 0) throw DataError("EMB1: dim must be positive");
  const std::uint64_t record_size = 4 + 4ULL * dim;
  if ((bytes.size() - kEmbHeaderSize) / record_size < count ||
      bytes.size() - kEmbHeaderSize != count * record_size) {
    throw DataError("EMB1: payload holds " +
                    std::to_string(bytes.size() - kEmbHeaderSize) +
                    " bytes, expected " + std::to_string(count * record_size) +
                    " (truncated or trailing data)");
  }
  EmbeddingSet set;
  set.features = Matrix(count, dim);
  set.labels.reserve(count);
  std::uint32_t max_label = 0;
  bool any_label = false;
  std::size_t offset = kEmbHeaderSize;
  for (std::uint64_t r = 0; r < count; ++r) {
    const auto label = get_le<std::uint32_t>(bytes, offset);
    offset += 4;
    if (label == kEmbOosSentinel) {
      set.labels.push_back(kOosLabel);
    } else {
      if (label > static_cast<std::uint32_t>(INT32_MAX)) {
        throw DataError("EMB1: label out of range in record " + std::to_string(r));
      }
      set.labels.push_back(static_cast<ClassIndex>(label));
      max_label = std::max(max_label, label);
      any_label = true;
    }
    auto row = set.features.row(r);
    for (std::uint32_t k = 0; k < dim; ++k, offset += 4) {
      const float f = get_le<float>(bytes, offset);
      if (!std::isfinite(f)) {
        throw DataError("EMB1: non-finite value in record " + std::to_string(r));
      }
      row[k] = f;
    }
  }
  const std::size_t named = any_label ? max_label + 1 : 0;
  for (std::size_t i = 0; i < named; ++i) set.label_names.push_back(std::to_string(i));
  return set;
}

void write_emb(const std::filesystem::path& path, const EmbeddingSet& set) {
  const auto bytes = encode_emb(set);
  json sidecar = json::object();
  for (std::size_t i = 0; i < set.label_names.size(); ++i) {
    sidecar[std::to_string(i)] = set.label_names[i];
  }
  write_file_atomically(path, bytes);
  write_file_atomically(emb_sidecar_path(path), sidecar.dump(2) + "\n");
}

EmbeddingSet read_emb(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw DataError("cannot open embedding file " + path.string());
  }
  EmbeddingSet set = decode_emb(read_file_bytes(path));
  set.label_names = read_sidecar(path, set.label_names.size());
  return set;
}

std::vector<unsigned char> encode_emb_record(std::span<const double> values,
                                             ClassIndex label) {
  std::vector<unsigned char> out;
  append_record(out, values, label, 0);
  return out;
}

std::vector<double> decode_emb_record(std::span<const unsigned char> bytes,
                                      std::size_t dim) {
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), "EMB1", 4) == 0) {
    EmbeddingSet set = decode_emb(bytes);
    if (set.size() != 1) throw DataError("expected exactly one EMB1 record");
    if (set.dim() != dim) {
      throw DataError("embedding dim " + std::to_string(set.dim()) +
                      " differs from model dim " + std::to_string(dim));
    }
    const auto row = set.features.row(0);
    return {row.begin(), row.end()};
  }
  if (bytes.size() != 4 + 4 * dim) {
    throw DataError("embedding record holds " + std::to_string(bytes.size()) +
                    " bytes, expected " + std::to_string(4 + 4 * dim));
  }
  std::vector<double> values(dim);
  for (std::size_t k = 0; k < dim; ++k) {
    const float f = get_le<float>(bytes, 4 + 4 * k);
    if (!std::isfinite(f)) throw DataError("non-finite value in embedding record");
    values[k] = f;
  }
  return values;
}

std::uint64_t content_hash(const TextSet& set, std::size_t i) {
  return fnv1a64(set.texts[i]);
}

std::uint64_t content_hash(const EmbeddingSet& set, std::size_t i) {
  const auto row = set.features.row(i);
  return fnv1a64(std::span<const unsigned char>(
      reinterpret_cast<const unsigned char*>(row.data()), row.size_bytes()));
}

EmbeddingSet remap_labels(EmbeddingSet set,
                          const std::vector<std::string>& target_names) {
  return remap_impl(std::move(set), target_names);
}

TextSet remap_labels(TextSet set, const std::vector<std::string>& target_names) {
  return remap_impl(std::move(set), target_names);
}

EmbeddingSet select_rows(const EmbeddingSet& set,
                         std::span<const std::size_t> rows) {
  EmbeddingSet out;
  out.label_names = set.label_names;
  out.features = Matrix(rows.size(), set.dim());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = set.features.row(rows[i]);
    std::copy(src.begin(), src.end(), out.features.row(i).begin());
    out.labels.push_back(set.labels[rows[i]]);
  }
  return out;
}

TextSet select_rows(const TextSet& set, std::span<const std::size_t> rows) {
  TextSet out;
  out.label_names = set.label_names;
  for (std::size_t r : rows) {
    out.texts.push_back(set.texts[r]);
    out.labels.push_back(set.labels[r]);
  }
  return out;
}

EmbeddingSet in_scope_subset(const EmbeddingSet& set) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (set.labels[i] != kOosLabel) rows.push_back(i);
  }
  return select_rows(set, rows);
}

void write_file_atomically(const std::filesystem::path& path,
                           std::span<const unsigned char> bytes) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw DataError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw DataError("cannot rename onto " + path.string() + ": " + ec.message());
  }
}

void write_file_atomically(const std::filesystem::path& path,
                           std::string_view text) {
  write_file_atomically(
      path, std::span<const unsigned char>(
                reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace oosguard
