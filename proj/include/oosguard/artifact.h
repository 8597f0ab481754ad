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

#ifndef OOSGUARD_ARTIFACT_H_
#define OOSGUARD_ARTIFACT_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "oosguard/scorer.h"

namespace oosguard {

// Model file layout, integers little-endian:
//   [0,4) "OOSM"   [4,8) u32 version   [8,16) u64 header length H
//   [16,16+H) UTF-8 JSON header   then binary64 payload: encoder weights and
//   biases layer by layer, class means, covariance, precision.
inline constexpr std::uint32_t kArtifactVersion = 1;

struct ModelArtifact {
  FittedScorer scorer;
  // Training config, seed and dataset hashes; free-form.
  nlohmann::json provenance = nlohmann::json::object();
};

std::vector<unsigned char> encode_artifact(const ModelArtifact& artifact);
// VersionError on a wrong magic or version, DataError on any other defect.
ModelArtifact decode_artifact(std::span<const unsigned char> bytes);

// Atomic: writes a temporary sibling, then renames.
void save_artifact(const std::filesystem::path& path, const ModelArtifact& artifact);
ModelArtifact load_artifact(const std::filesystem::path& path);

}  // namespace oosguard

#endif  // OOSGUARD_ARTIFACT_H_
