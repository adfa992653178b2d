/*
 * Copyright 2026 The CPR Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "cpr/fm_trainer.h"

#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "cpr/embedding.h"
#include "cpr/error.h"
#include "testing/fixtures.h"
#include "testing/gradcheck.h"

namespace cpr {
namespace {

using testing::kP1;
using testing::kP2;
using testing::kP3;
using testing::kU1;
using testing::kV1;
using testing::kV2;
using testing::kV3;

TEST(SigmoidTest, StableAtExtremes) {
  EXPECT_DOUBLE_EQ(Sigmoid(0.0), 0.5);
  EXPECT_NEAR(LogSigmoid(-800.0), -800.0, 1e-9);
  EXPECT_EQ(LogSigmoid(800.0), 0.0);
  EXPECT_TRUE(std::isfinite(LogSigmoid(-1e6)));
  EXPECT_NEAR(LogSigmoid(1.0), std::log(1.0 / (1.0 + std::exp(-1.0))), 1e-15);
}

TEST(ScoreTest, ItemScoreIsUserPlusAcceptedAttributes) {
  const EmbeddingTable emb = testing::G0Embeddings();
  // u.v1 = 1, v1.p1 = 0, v1.p3 = 0
  EXPECT_DOUBLE_EQ(ScoreItem(emb, kU1, kV1, std::vector<AttributeId>{kP1}), 1.0);
  EXPECT_DOUBLE_EQ(ScoreItem(emb, kU1, kV2, std::vector<AttributeId>{}), 0.5);
  // u.p1 + p1.p2 = 0 + 0.5
  EXPECT_DOUBLE_EQ(
      ScoreAttributeAffinity(emb, kU1, kP1, std::vector<AttributeId>{kP2}), 0.5);
  EXPECT_THROW(ScoreAttributeAffinity(emb, kU1, kP1, std::vector<AttributeId>{kP1}),
               Error);
}

TEST(CorpusTest, G0SampleCounts) {
  const HeteroGraph g = testing::MakeG0();
  const std::vector<Interaction> train = {{kU1, kV1}};
  std::mt19937_64 rng(3);
  const TrainingCorpus c = CollectTrainingCorpus(g, train, rng);
  // Openers p1 and p2, two prefixes each.
  EXPECT_EQ(c.global_items.size(), 4u);
  // Only prefix [p1] leaves an uninteracted candidate (v2).
  ASSERT_EQ(c.candidate_items.size(), 1u);
  EXPECT_EQ(c.candidate_items[0].negative, kV2);
  EXPECT_EQ(c.candidate_items[0].accepted, (AttributeSet{kP1}));
  ASSERT_EQ(c.attributes.size(), 2u);
  for (const auto& s : c.attributes) EXPECT_EQ(s.negative, kP3);
  for (const auto& s : c.global_items) {
    EXPECT_EQ(s.positive, kV1);
    EXPECT_NE(s.negative, kV1);
  }
}

TEST(CorpusTest, NegativesRespectSamplingSets) {
  std::mt19937_64 rng(4);
  const HeteroGraph g = testing::RandomDenseGraph(rng, 6, 30, 10, 2, 5);
  const auto train = g.Interactions();
  const TrainingCorpus c = CollectTrainingCorpus(g, train, rng);
  ASSERT_FALSE(c.empty());
  for (const auto& s : c.global_items) {
    EXPECT_FALSE(ids::Contains(g.ItemsOfUser(s.user), s.negative));
  }
  for (const auto& s : c.candidate_items) {
    EXPECT_FALSE(ids::Contains(g.ItemsOfUser(s.user), s.negative));
    EXPECT_TRUE(ids::Contains(g.CandidateItems(s.accepted), s.negative));
  }
  for (const auto& s : c.attributes) {
    EXPECT_FALSE(ids::Contains(s.accepted, s.positive));
  }
}

TEST(CorpusTest, SameSeedSameCorpus) {
  std::mt19937_64 gen(5);
  const HeteroGraph g = testing::RandomDenseGraph(gen, 5, 20, 8, 1, 4);
  const auto train = g.Interactions();
  std::mt19937_64 a(9), b(9);
  const TrainingCorpus x = CollectTrainingCorpus(g, train, a);
  const TrainingCorpus y = CollectTrainingCorpus(g, train, b);
  ASSERT_EQ(x.size(), y.size());
  for (std::size_t i = 0; i < x.attributes.size(); ++i) {
    EXPECT_EQ(x.attributes[i].negative, y.attributes[i].negative);
  }
}

TEST(LossTest, BothDirectionsBeatEachOther) {
  EmbeddingTable emb = testing::G0Embeddings();
  const ItemPairSample good{kU1, kV1, kV3, {kP1}, ItemSampleKind::kGlobal};
  const ItemPairSample bad{kU1, kV3, kV1, {kP1}, ItemSampleKind::kGlobal};
  EXPECT_LT(SampleLoss(emb, good, 0.0), SampleLoss(emb, bad, 0.0));
  // -ln sigmoid(1 - 0.2)
  EXPECT_NEAR(SampleLoss(emb, good, 0.0), -std::log(1.0 / (1.0 + std::exp(-0.8))), 1e-15);
}

TEST(GradientTest, ItemPairMatchesFiniteDifferences) {
  std::mt19937_64 rng(21);
  const VertexCounts counts{6, 12, 9};
  for (int trial = 0; trial < 100; ++trial) {
    const EmbeddingTable emb = testing::RandomEmbeddings(counts, 8, rng, 1.0);
    const ItemPairSample s = testing::RandomItemPair(counts, rng);
    EXPECT_LT(testing::FmGradientRelativeError(emb, s, 0.001), 1e-4)
        << "trial " << trial;
  }
}

TEST(GradientTest, AttributePairMatchesFiniteDifferences) {
  std::mt19937_64 rng(22);
  const VertexCounts counts{6, 12, 9};
  for (int trial = 0; trial < 100; ++trial) {
    const EmbeddingTable emb = testing::RandomEmbeddings(counts, 8, rng, 1.0);
    const AttributePairSample s = testing::RandomAttributePair(counts, rng);
    EXPECT_LT(testing::FmGradientRelativeError(emb, s, 0.001), 1e-4)
        << "trial " << trial;
  }
}

TEST(SgdTest, LossDecreasesOnPlantedData) {
  std::mt19937_64 gen(7);
  const HeteroGraph g = testing::RandomDenseGraph(gen, 8, 40, 12, 2, 4);
  TrainConfig cfg;
  cfg.dimension = 16;
  cfg.epochs = 8;
  cfg.seed = 3;
  const FmTrainingResult r = TrainEmbeddings(g, g.Interactions(), cfg);
  ASSERT_EQ(r.epoch_losses.size(), 8u);
  EXPECT_LT(r.epoch_losses.back(), r.epoch_losses.front());
  EXPECT_TRUE(r.table.AllFinite());
}

TEST(SgdTest, SameSeedBitwiseIdentical) {
  std::mt19937_64 gen(8);
  const HeteroGraph g = testing::RandomDenseGraph(gen, 5, 20, 8, 1, 3);
  TrainConfig cfg;
  cfg.dimension = 8;
  cfg.epochs = 3;
  cfg.seed = 42;
  const FmTrainingResult a = TrainEmbeddings(g, g.Interactions(), cfg);
  const FmTrainingResult b = TrainEmbeddings(g, g.Interactions(), cfg);
  EXPECT_EQ(a.table, b.table);
  EXPECT_EQ(a.epoch_losses, b.epoch_losses);
}

TEST(SgdTest, NonFiniteGradientIsReported) {
  const HeteroGraph g = testing::MakeG0();
  EmbeddingTable emb = testing::G0Embeddings();
  emb.user(kU1)[0] = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(1);
  const std::vector<Interaction> train = {{kU1, kV1}};
  const TrainingCorpus c = CollectTrainingCorpus(g, train, rng);
  TrainConfig cfg;
  try {
    SgdEpoch(emb, c, cfg, rng);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInternal);
  }
}

TEST(EmbeddingCheckpointTest, RoundTripIsExact) {
  std::mt19937_64 rng(2);
  const EmbeddingTable emb = testing::RandomEmbeddings({3, 5, 4}, 6, rng, 0.3);
  TrainConfig cfg;
  cfg.dimension = 6;
  cfg.seed = 77;
  testing::TempDir dir;
  SaveEmbeddings(dir.file("e.cpremb"), emb, cfg);
  const EmbeddingCheckpoint ck = LoadEmbeddings(dir.file("e.cpremb"));
  EXPECT_EQ(ck.table, emb);
  EXPECT_EQ(ck.config, cfg);
  EXPECT_EQ(testing::ReadFile(dir.file("e.cpremb")).substr(0, 10), "CPR-EMB-1\n");
}

TEST(EmbeddingCheckpointTest, TruncatedFileIsDataLoss) {
  std::mt19937_64 rng(2);
  const EmbeddingTable emb = testing::RandomEmbeddings({3, 5, 4}, 6, rng, 0.3);
  testing::TempDir dir;
  SaveEmbeddings(dir.file("e.cpremb"), emb, {});
  const std::string bytes = testing::ReadFile(dir.file("e.cpremb"));
  testing::WriteFile(dir.file("t.cpremb"), bytes.substr(0, bytes.size() - 5));
  try {
    LoadEmbeddings(dir.file("t.cpremb"));
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDataLoss);
  }
  testing::WriteFile(dir.file("m.cpremb"), "CPR-POL-1\n{}\n");
  EXPECT_THROW(LoadEmbeddings(dir.file("m.cpremb")), Error);
}

TEST(EmbeddingTest, ColdUserIsMeanRow) {
  std::mt19937_64 rng(4);
  const EmbeddingTable emb = testing::RandomEmbeddings({4, 2, 2}, 3, rng, 1.0);
  const EmbeddingTable cold = emb.WithColdUser();
  ASSERT_EQ(cold.counts().users, 5u);
  for (int k = 0; k < 3; ++k) {
    double mean = 0.0;
    for (UserId u = 0; u < 4; ++u) mean += emb.user(u)[k];
    EXPECT_NEAR(cold.user(4)[k], mean / 4, 1e-15);
  }
}

}  // namespace
}  // namespace cpr
