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

#include "fixtures.h"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "cpr/error.h"

namespace cpr::testing {

namespace {

EdgeRecord Edge(Relation r, VertexKind hk, std::uint32_t h, VertexKind tk,
                std::uint32_t t) {
  return {r, {hk, h}, {tk, t}};
}

}  // namespace

HeteroGraph MakeG0() {
  using K = VertexKind;
  const std::vector<EdgeRecord> edges = {
      Edge(Relation::kBelongTo, K::kItem, kV1, K::kAttribute, kP1),
      Edge(Relation::kBelongTo, K::kItem, kV1, K::kAttribute, kP2),
      Edge(Relation::kBelongTo, K::kItem, kV2, K::kAttribute, kP1),
      Edge(Relation::kBelongTo, K::kItem, kV2, K::kAttribute, kP3),
      Edge(Relation::kBelongTo, K::kItem, kV3, K::kAttribute, kP3),
      Edge(Relation::kInteract, K::kUser, kU1, K::kItem, kV1),
  };
  return HeteroGraph::Build({1, 3, 3}, edges);
}

std::string G0NamesFile() {
  return "user:0\tu1\nitem:0\tv1\nitem:1\tv2\nitem:2\tv3\n"
         "attribute:0\tp1\nattribute:1\tp2\nattribute:2\tp3\n";
}

EmbeddingTable G0Embeddings() {
  EmbeddingTable emb(2, {1, 3, 3});
  auto set = [](std::span<double> row, double x, double y) {
    row[0] = x;
    row[1] = y;
  };
  set(emb.user(kU1), 1.0, 0.0);
  set(emb.item(kV1), 1.0, 0.0);
  set(emb.item(kV2), 0.5, 0.0);
  set(emb.item(kV3), 0.2, 0.0);
  set(emb.attribute(kP1), 0.0, 1.0);
  set(emb.attribute(kP2), 0.0, 0.5);
  set(emb.attribute(kP3), 0.0, 0.3);
  return emb;
}

HeteroGraph RandomGraph(std::mt19937_64& rng, int max_vertices, double density) {
  std::uniform_int_distribution<int> total_dist(2, max_vertices);
  const int total = total_dist(rng);
  std::uniform_int_distribution<int> split(0, total - 2);
  const int a = split(rng), b = split(rng);
  // Cut [0, total-2] into three parts, then give items and attributes +1.
  const int lo = std::min(a, b), hi = std::max(a, b);
  VertexCounts c{static_cast<std::uint32_t>(lo),
                 static_cast<std::uint32_t>(hi - lo + 1),
                 static_cast<std::uint32_t>(total - 2 - hi + 1)};
  std::bernoulli_distribution coin(density);
  std::vector<EdgeRecord> edges;
  using K = VertexKind;
  for (std::uint32_t u = 0; u < c.users; ++u) {
    for (std::uint32_t w = u + 1; w < c.users; ++w) {
      if (coin(rng)) edges.push_back(Edge(Relation::kFriend, K::kUser, u, K::kUser, w));
    }
    for (std::uint32_t v = 0; v < c.items; ++v) {
      if (coin(rng)) edges.push_back(Edge(Relation::kInteract, K::kUser, u, K::kItem, v));
    }
    for (std::uint32_t p = 0; p < c.attributes; ++p) {
      if (coin(rng)) edges.push_back(Edge(Relation::kLike, K::kUser, u, K::kAttribute, p));
    }
  }
  for (std::uint32_t v = 0; v < c.items; ++v) {
    for (std::uint32_t p = 0; p < c.attributes; ++p) {
      if (coin(rng)) edges.push_back(Edge(Relation::kBelongTo, K::kItem, v, K::kAttribute, p));
    }
  }
  std::shuffle(edges.begin(), edges.end(), rng);
  return HeteroGraph::Build(c, edges);
}

HeteroGraph RandomDenseGraph(std::mt19937_64& rng, int users, int items,
                             int attributes, int min_attrs, int max_attrs) {
  using K = VertexKind;
  std::vector<EdgeRecord> edges;
  std::uniform_int_distribution<int> count(min_attrs, max_attrs);
  std::vector<std::uint32_t> all(attributes);
  std::iota(all.begin(), all.end(), 0u);
  for (int v = 0; v < items; ++v) {
    std::shuffle(all.begin(), all.end(), rng);
    const int n = std::min(count(rng), attributes);
    for (int i = 0; i < n; ++i) {
      edges.push_back(Edge(Relation::kBelongTo, K::kItem, v, K::kAttribute, all[i]));
    }
  }
  std::uniform_int_distribution<int> item(0, items - 1);
  std::uniform_int_distribution<int> per_user(1, std::max(1, items / 3));
  for (int u = 0; u < users; ++u) {
    std::set<int> chosen;
    const int n = per_user(rng);
    while (static_cast<int>(chosen.size()) < n) chosen.insert(item(rng));
    for (int v : chosen) edges.push_back(Edge(Relation::kInteract, K::kUser, u, K::kItem, v));
  }
  return HeteroGraph::Build({static_cast<std::uint32_t>(users),
                             static_cast<std::uint32_t>(items),
                             static_cast<std::uint32_t>(attributes)},
                            edges);
}

EmbeddingTable RandomEmbeddings(const VertexCounts& counts, int dim,
                                std::mt19937_64& rng, double range) {
  return EmbeddingTable::RandomUniform(dim, counts, range, rng);
}

SessionState RandomReachableState(const HeteroGraph& g, std::mt19937_64& rng,
                                  UserId user, int max_steps) {
  std::vector<AttributeId> openers;
  for (AttributeId p = 0; p < g.counts().attributes; ++p) {
    if (!g.ItemsWithAttribute(p).empty()) openers.push_back(p);
  }
  if (openers.empty()) throw Error(ErrorCode::kInvalidArgument, "no attribute has items");
  const AttributeId p0 =
      openers[std::uniform_int_distribution<std::size_t>(0, openers.size() - 1)(rng)];
  SessionState s = InitSession(g, user, p0);
  std::uniform_int_distribution<int> steps_dist(0, max_steps);
  const int steps = steps_dist(rng);
  std::uniform_int_distribution<int> op(0, 2);
  for (int i = 0; i < steps; ++i) {
    const int which = op(rng);
    if (which < 2 && !s.candidate_attributes.empty()) {
      const AttributeId p = s.candidate_attributes[std::uniform_int_distribution<std::size_t>(
          0, s.candidate_attributes.size() - 1)(rng)];
      if (which == 0) {
        SessionState next = AcceptAttribute(g, s, p);
        if (next.candidate_items.empty()) continue;
        s = std::move(next);
      } else {
        s = RejectAttribute(std::move(s), p);
      }
    } else if (which == 2 && s.candidate_items.size() > 1) {
      const ItemId v = s.candidate_items[std::uniform_int_distribution<std::size_t>(
          0, s.candidate_items.size() - 1)(rng)];
      const ItemId rejected[] = {v};
      s = RejectItems(std::move(s), rejected);
    } else {
      continue;
    }
    ++s.turn;
  }
  return s;
}

QNetwork ConstantPolicyNetwork(Action action, int max_turns, int hidden) {
  QNetwork net(StateDimension(max_turns), hidden);
  net.b2(static_cast<int>(action)) = 1.0;
  return net;
}

TempDir::TempDir() {
  static std::mt19937_64 rng{std::random_device{}()};
  const auto base = std::filesystem::temp_directory_path();
  do {
    path_ = base / ("cpr_test_" + std::to_string(rng()));
  } while (!std::filesystem::create_directory(path_));
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string ReadFile(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void WriteFile(const std::string& path, const std::string& contents) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  os << contents;
}

}  // namespace cpr::testing
