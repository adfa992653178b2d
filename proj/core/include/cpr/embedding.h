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
#include <string>
#include <vector>

#include "cpr/hetgraph.h"
#include "cpr/id_set.h"

namespace cpr {

// One dense vector per user, item and attribute, stored row-major in three
// blocks. This is the full parameter set of the factorization model.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  // Zero-initialized.
  EmbeddingTable(int dimension, const VertexCounts& counts);

  // Entries drawn uniformly from [-range, range].
  static EmbeddingTable RandomUniform(int dimension, const VertexCounts& counts,
                                      double range, std::mt19937_64& rng);

  int dimension() const { return dimension_; }
  const VertexCounts& counts() const { return counts_; }

  std::span<const double> user(UserId u) const { return row(VertexKind::kUser, u); }
  std::span<const double> item(ItemId v) const { return row(VertexKind::kItem, v); }
  std::span<const double> attribute(AttributeId p) const {
    return row(VertexKind::kAttribute, p);
  }
  std::span<double> user(UserId u) { return row(VertexKind::kUser, u); }
  std::span<double> item(ItemId v) { return row(VertexKind::kItem, v); }
  std::span<double> attribute(AttributeId p) { return row(VertexKind::kAttribute, p); }

  std::span<const double> row(VertexKind kind, std::uint32_t index) const;
  std::span<double> row(VertexKind kind, std::uint32_t index);

  const std::vector<double>& block(VertexKind kind) const {
    return blocks_[static_cast<int>(kind)];
  }
  std::vector<double>& block(VertexKind kind) {
    return blocks_[static_cast<int>(kind)];
  }

  // A copy with one extra user row holding the mean of all user rows. The
  // new row's index is the old user count.
  EmbeddingTable WithColdUser() const;

  bool AllFinite() const;

  friend bool operator==(const EmbeddingTable&, const EmbeddingTable&) = default;

 private:
  int dimension_ = 0;
  VertexCounts counts_;
  std::vector<double> blocks_[kNumVertexKinds];
};

double Dot(std::span<const double> a, std::span<const double> b);

// u.v + sum_{p in accepted} v.p
double ScoreItem(const EmbeddingTable& emb, UserId u, ItemId v,
                 std::span<const AttributeId> accepted);

// u.p + sum_{q in accepted} p.q. Training objective only; inference never
// calls this. `p` must not be in `accepted`.
double ScoreAttributeAffinity(const EmbeddingTable& emb, UserId u,
                              AttributeId p,
                              std::span<const AttributeId> accepted);

struct TrainConfig {
  int dimension = 64;
  double l2 = 0.001;
  double lr_item = 0.01;
  double lr_attr = 0.001;
  int epochs = 20;
  double init_range = 0.01;
  std::uint64_t seed = 0;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EmbeddingCheckpoint {
  EmbeddingTable table;
  TrainConfig config;
};

// Binary container: the line "CPR-EMB-1", one JSON header line (dimension,
// counts, training config) and the three row-major blocks as little-endian
// IEEE doubles.
void SaveEmbeddings(const std::string& path, const EmbeddingTable& table,
                    const TrainConfig& config);
EmbeddingCheckpoint LoadEmbeddings(const std::string& path);

}  // namespace cpr
