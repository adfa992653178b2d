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

#include "cpr/embedding.h"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "checkpoint_io.h"
#include "cpr/error.h"

namespace cpr {

namespace {
constexpr std::string_view kEmbeddingMagic = "CPR-EMB-1";
}

EmbeddingTable::EmbeddingTable(int dimension, const VertexCounts& counts)
    : dimension_(dimension), counts_(counts) {
  if (dimension <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "embedding dimension must be positive");
  }
  for (int k = 0; k < kNumVertexKinds; ++k) {
    blocks_[k].assign(
        static_cast<std::size_t>(counts.of(static_cast<VertexKind>(k))) * dimension,
        0.0);
  }
}

EmbeddingTable EmbeddingTable::RandomUniform(int dimension,
                                             const VertexCounts& counts,
                                             double range, std::mt19937_64& rng) {
  EmbeddingTable t(dimension, counts);
  std::uniform_real_distribution<double> dist(-range, range);
  for (auto& block : t.blocks_) {
    for (double& x : block) x = dist(rng);
  }
  return t;
}

std::span<const double> EmbeddingTable::row(VertexKind kind,
                                            std::uint32_t index) const {
  if (index >= counts_.of(kind)) {
    throw Error(ErrorCode::kOutOfRange, "embedding row " +
                                            std::string(VertexKindName(kind)) +
                                            ":" + std::to_string(index) +
                                            " out of range");
  }
  return std::span<const double>(blocks_[static_cast<int>(kind)])
      .subspan(static_cast<std::size_t>(index) * dimension_, dimension_);
}

std::span<double> EmbeddingTable::row(VertexKind kind, std::uint32_t index) {
  if (index >= counts_.of(kind)) {
    throw Error(ErrorCode::kOutOfRange, "embedding row " +
                                            std::string(VertexKindName(kind)) +
                                            ":" + std::to_string(index) +
                                            " out of range");
  }
  return std::span<double>(blocks_[static_cast<int>(kind)])
      .subspan(static_cast<std::size_t>(index) * dimension_, dimension_);
}

EmbeddingTable EmbeddingTable::WithColdUser() const {
  EmbeddingTable out = *this;
  std::vector<double> mean(dimension_, 0.0);
  for (UserId u = 0; u < counts_.users; ++u) {
    auto r = user(u);
    for (int i = 0; i < dimension_; ++i) mean[i] += r[i];
  }
  if (counts_.users > 0) {
    for (double& x : mean) x /= counts_.users;
  }
  auto& users = out.blocks_[static_cast<int>(VertexKind::kUser)];
  users.insert(users.end(), mean.begin(), mean.end());
  ++out.counts_.users;
  return out;
}

bool EmbeddingTable::AllFinite() const {
  for (const auto& block : blocks_) {
    for (double x : block) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double ScoreItem(const EmbeddingTable& emb, UserId u, ItemId v,
                 std::span<const AttributeId> accepted) {
  auto item = emb.item(v);
  double s = Dot(emb.user(u), item);
  for (AttributeId p : accepted) s += Dot(item, emb.attribute(p));
  return s;
}

double ScoreAttributeAffinity(const EmbeddingTable& emb, UserId u,
                              AttributeId p,
                              std::span<const AttributeId> accepted) {
  auto attr = emb.attribute(p);
  double s = Dot(emb.user(u), attr);
  for (AttributeId q : accepted) {
    if (q == p) {
      throw Error(ErrorCode::kInvalidArgument,
                  "attribute " + std::to_string(p) + " is already accepted");
    }
    s += Dot(attr, emb.attribute(q));
  }
  return s;
}

void SaveEmbeddings(const std::string& path, const EmbeddingTable& table,
                    const TrainConfig& config) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::kNotFound, "cannot write " + path);
  nlohmann::json header = {
      {"dimension", table.dimension()},
      {"users", table.counts().users},
      {"items", table.counts().items},
      {"attributes", table.counts().attributes},
      {"train_config",
       {{"dimension", config.dimension},
        {"l2", config.l2},
        {"lr_item", config.lr_item},
        {"lr_attr", config.lr_attr},
        {"epochs", config.epochs},
        {"init_range", config.init_range},
        {"seed", config.seed}}},
  };
  os << kEmbeddingMagic << '\n' << header.dump() << '\n';
  for (int k = 0; k < kNumVertexKinds; ++k) {
    internal::WriteDoubles(os, table.block(static_cast<VertexKind>(k)));
  }
  if (!os) throw Error(ErrorCode::kDataLoss, "failed writing " + path);
}

EmbeddingCheckpoint LoadEmbeddings(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::kNotFound, "cannot open " + path);
  internal::ExpectMagic(is, kEmbeddingMagic, path);
  std::string line;
  std::getline(is, line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kDataLoss, path + ": bad header: " + e.what());
  }
  EmbeddingCheckpoint ck;
  try {
    const auto& tc = header.at("train_config");
    ck.config.dimension = tc.at("dimension").get<int>();
    ck.config.l2 = tc.at("l2").get<double>();
    ck.config.lr_item = tc.at("lr_item").get<double>();
    ck.config.lr_attr = tc.at("lr_attr").get<double>();
    ck.config.epochs = tc.at("epochs").get<int>();
    ck.config.init_range = tc.at("init_range").get<double>();
    ck.config.seed = tc.at("seed").get<std::uint64_t>();
    VertexCounts counts{header.at("users").get<std::uint32_t>(),
                        header.at("items").get<std::uint32_t>(),
                        header.at("attributes").get<std::uint32_t>()};
    ck.table = EmbeddingTable(header.at("dimension").get<int>(), counts);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kDataLoss, path + ": bad header: " + e.what());
  }
  for (int k = 0; k < kNumVertexKinds; ++k) {
    internal::ReadDoubles(is, ck.table.block(static_cast<VertexKind>(k)), path);
  }
  if (!ck.table.AllFinite()) {
    throw Error(ErrorCode::kDataLoss, path + ": non-finite embedding entries");
  }
  return ck;
}

}  // namespace cpr
