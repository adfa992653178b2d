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

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "cpr/embedding.h"
#include "cpr/hetgraph.h"

namespace cpr {

enum class ItemSampleKind : std::uint8_t {
  kGlobal,     // negative is any item the user never interacted with
  kCandidate,  // negative comes from the current candidate item set
};

struct ItemPairSample {
  UserId user = 0;
  ItemId positive = 0;
  ItemId negative = 0;
  AttributeSet accepted;
  ItemSampleKind kind = ItemSampleKind::kGlobal;
};

struct AttributePairSample {
  UserId user = 0;
  AttributeId positive = 0;
  AttributeId negative = 0;
  AttributeSet accepted;
};

struct TrainingCorpus {
  std::vector<ItemPairSample> global_items;     // D1
  std::vector<ItemPairSample> candidate_items;  // D2
  std::vector<AttributePairSample> attributes;  // D3

  std::size_t size() const {
    return global_items.size() + candidate_items.size() + attributes.size();
  }
  bool empty() const { return size() == 0; }
};

// Replays simulated conversations over every (user, item) interaction and
// every choice of opening attribute, accumulating pairwise samples at each
// confirmed-attribute prefix. Items without attributes are skipped with a
// warning. "Interacted" is judged against `interactions` only.
TrainingCorpus CollectTrainingCorpus(const HeteroGraph& g,
                                     std::span<const Interaction> interactions,
                                     std::mt19937_64& rng);

double LogSigmoid(double x);
double Sigmoid(double x);

// Sparse gradient over the rows a single sample touches.
struct SampleGradient {
  struct Row {
    VertexKind kind;
    std::uint32_t index;
    std::vector<double> grad;
  };
  std::vector<Row> rows;
};

// -ln sigmoid(f(pos) - f(neg)) + l2 * sum of squared norms of touched rows.
double SampleLoss(const EmbeddingTable& emb, const ItemPairSample& s, double l2);
double SampleLoss(const EmbeddingTable& emb, const AttributePairSample& s,
                  double l2);
SampleGradient ComputeGradient(const EmbeddingTable& emb,
                               const ItemPairSample& s, double l2);
SampleGradient ComputeGradient(const EmbeddingTable& emb,
                               const AttributePairSample& s, double l2);

// L_item + L_attr, with the L2 term over every row touched by the corpus
// (each counted once).
double PairwiseLoss(const EmbeddingTable& emb, const TrainingCorpus& corpus,
                    double l2);

struct EpochResult {
  double loss = 0.0;  // PairwiseLoss after the epoch
};

// One shuffled pass of SGD. Item samples step with lr_item, attribute
// samples with lr_attr. Throws cpr::Error(kInternal) on a non-finite gradient.
EpochResult SgdEpoch(EmbeddingTable& emb, const TrainingCorpus& corpus,
                     const TrainConfig& config, std::mt19937_64& rng);

struct FmTrainingResult {
  EmbeddingTable table;
  std::vector<double> epoch_losses;
};

// Full offline pipeline: seeded init, corpus collection, config.epochs epochs.
FmTrainingResult TrainEmbeddings(const HeteroGraph& g,
                                 std::span<const Interaction> train,
                                 const TrainConfig& config);

}  // namespace cpr
