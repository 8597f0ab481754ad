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

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "oosguard/artifact.h"
#include "oosguard/dataset.h"
#include "oosguard/synthetic.h"
#include "oosguard/training.h"
#include "tests/unit/test_util.h"

namespace oosguard {
namespace {

struct Trained {
  ModelArtifact artifact;
  EmbeddingBundle data;
};

Trained trained_artifact() {
  SyntheticSpec spec;
  spec.classes = 3;
  spec.dim = 5;
  spec.samples_per_class = 25;
  spec.seed = 4;
  EmbeddingBundle data = synthesize(spec);
  TrainConfig c;
  c.featurizer = {FeaturizerKind::kPassthrough, 5, 0};
  c.encoder = {5, {7}, 4};
  c.autoencoder_hidden = {6, 2, 6};
  c.epochs = 3;
  FittedScorer scorer = fit_statistics(train(c, data.train), data.train);
  scorer.set_threshold(1.75);
  return Trained{ModelArtifact{std::move(scorer), {{"seed", 4}, {"config", c.to_json()}}},
                 std::move(data)};
}

std::uint32_t read_u32(const std::vector<unsigned char>& b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | static_cast<std::uint32_t>(b[at + 1]) << 8 |
         static_cast<std::uint32_t>(b[at + 2]) << 16 | static_cast<std::uint32_t>(b[at + 3]) << 24;
}

TEST(ArtifactTest, RoundTripScoresExactly) {
  const Trained t = trained_artifact();
  testing::TempDir dir("artifact");
  save_artifact(dir / "m.oosm", t.artifact);
  const ModelArtifact back = load_artifact(dir / "m.oosm");
  const FittedScorer& a = t.artifact.scorer;
  const FittedScorer& b = back.scorer;
  EXPECT_EQ(b.labels(), a.labels());
  EXPECT_EQ(b.threshold(), a.threshold());
  EXPECT_EQ(b.encoder(), a.encoder());
  EXPECT_EQ(b.statistics().means, a.statistics().means);
  EXPECT_EQ(b.statistics().precision, a.statistics().precision);
  EXPECT_EQ(b.statistics().ridge_used, a.statistics().ridge_used);
  EXPECT_EQ(back.provenance, t.artifact.provenance);
  for (std::size_t i = 0; i < t.data.test.size(); ++i) {
    const auto row = t.data.test.features.row(i);
    const ScoreResult x = a.score_features(row);
    const ScoreResult y = b.score_features(row);
    EXPECT_EQ(x.d_min, y.d_min);
    EXPECT_EQ(x.c_min, y.c_min);
  }
  EXPECT_EQ(encode_artifact(back), encode_artifact(t.artifact));
}

TEST(ArtifactTest, LayoutAndHeader) {
  const Trained t = trained_artifact();
  const auto bytes = encode_artifact(t.artifact);
  ASSERT_GT(bytes.size(), 16u);
  EXPECT_EQ(std::memcmp(bytes.data(), "OOSM", 4), 0);
  EXPECT_EQ(read_u32(bytes, 4), kArtifactVersion);
  const std::uint64_t header_len =
      read_u32(bytes, 8) | static_cast<std::uint64_t>(read_u32(bytes, 12)) << 32;
  const auto header = nlohmann::json::parse(bytes.begin() + 16,
                                            bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
  EXPECT_EQ(header["labels"], nlohmann::json(t.artifact.scorer.labels()));
  EXPECT_EQ(header["tau"], 1.75);
  EXPECT_EQ(header["embedding_dim"], 4);
  // Payload: encoder (5*7 + 7 + 7*4 + 4) + means 3*4 + covariance and precision 4*4 each.
  const std::size_t doubles = 5 * 7 + 7 + 7 * 4 + 4 + 3 * 4 + 2 * 16;
  EXPECT_EQ(bytes.size(), 16 + header_len + 8 * doubles);
}

TEST(ArtifactTest, UnsetThresholdSurvives) {
  Trained t = trained_artifact();
  t.artifact.scorer.set_threshold(std::nullopt);
  const ModelArtifact back = decode_artifact(encode_artifact(t.artifact));
  EXPECT_FALSE(back.scorer.threshold().has_value());
}

TEST(ArtifactTest, WrongMagicOrVersion) {
  const auto bytes = encode_artifact(trained_artifact().artifact);
  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(decode_artifact(magic), VersionError);
  auto version = bytes;
  version[4] = 2;
  EXPECT_THROW(decode_artifact(version), VersionError);
}

TEST(ArtifactTest, TruncationAndCorruption) {
  const auto bytes = encode_artifact(trained_artifact().artifact);
  for (std::size_t cut : {std::size_t{3}, std::size_t{12}, std::size_t{40}, bytes.size() - 8,
                          bytes.size() - 1}) {
    const std::vector<unsigned char> shorter(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    EXPECT_THROW(decode_artifact(shorter), DataError) << cut;
  }
  auto longer = bytes;
  longer.push_back(0);
  EXPECT_THROW(decode_artifact(longer), DataError);
  auto bad_header = bytes;
  bad_header[16] = '!';
  EXPECT_THROW(decode_artifact(bad_header), DataError);
}

TEST(ArtifactTest, LoadErrorsNameThePath) {
  testing::TempDir dir("artifact2");
  try {
    load_artifact(dir / "absent.oosm");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("absent.oosm"), std::string::npos) << e.what();
  }
  std::ofstream(dir / "junk.oosm") << "OOSM";
  EXPECT_THROW(load_artifact(dir / "junk.oosm"), DataError);
}

TEST(ArtifactTest, HashedFeaturizerScoresTextAfterReload) {
  Featurizer bow{FeaturizerKind::kHashedBow, 16, 9};
  ClassStatistics stats;
  stats.means = Matrix(2, 16);
  stats.means(1, 3) = 1.0;
  stats.covariance = Matrix::identity(16);
  stats.precision = Matrix::identity(16);
  ModelArtifact art{FittedScorer(bow, identity_encoder(16), stats, {"x", "y"}, 0.5), {}};
  const ModelArtifact back = decode_artifact(encode_artifact(art));
  EXPECT_EQ(back.scorer.featurizer(), bow);
  const ScoreResult a = art.scorer.score_text("turn on the lights");
  const ScoreResult b = back.scorer.score_text("turn on the lights");
  EXPECT_EQ(a.d_min, b.d_min);
  EXPECT_EQ(a.c_min, b.c_min);
}

}  // namespace
}  // namespace oosguard
