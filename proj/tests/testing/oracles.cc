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

#include "oracles.h"

#include <cmath>
#include <deque>
#include <set>

namespace cpr::testing {

namespace {

struct FlatGraph {
  std::uint32_t users = 0, items = 0;
  std::vector<std::vector<std::size_t>> adj;

  std::size_t Id(VertexId v) const {
    switch (v.kind) {
      case VertexKind::kUser: return v.index;
      case VertexKind::kItem: return users + v.index;
      case VertexKind::kAttribute: return users + items + v.index;
    }
    return 0;
  }
  bool IsAttribute(std::size_t id) const { return id >= users + items; }
};

FlatGraph Flatten(const HeteroGraph& g) {
  FlatGraph f;
  f.users = g.counts().users;
  f.items = g.counts().items;
  f.adj.resize(g.counts().total());
  for (const EdgeRecord& e : g.edges()) {
    const std::size_t a = f.Id(e.head), b = f.Id(e.tail);
    f.adj[a].push_back(b);
    f.adj[b].push_back(a);
  }
  return f;
}

std::set<std::pair<ItemId, AttributeId>> BelongTo(const HeteroGraph& g) {
  std::set<std::pair<ItemId, AttributeId>> out;
  for (const EdgeRecord& e : g.edges()) {
    if (e.relation != Relation::kBelongTo) continue;
    const VertexId item = e.head.kind == VertexKind::kItem ? e.head : e.tail;
    const VertexId attr = e.head.kind == VertexKind::kItem ? e.tail : e.head;
    out.insert({item.index, attr.index});
  }
  return out;
}

}  // namespace

AttributeSet BfsAdjacentOracle(const HeteroGraph& g, AttributeId p) {
  const FlatGraph f = Flatten(g);
  const std::size_t n = f.adj.size();
  std::vector<int> dist(n, -1);
  const std::size_t src = f.Id({VertexKind::kAttribute, p});
  std::deque<std::size_t> queue{src};
  dist[src] = 0;
  while (!queue.empty()) {
    const std::size_t x = queue.front();
    queue.pop_front();
    for (std::size_t y : f.adj[x]) {
      if (dist[y] < 0) {
        dist[y] = dist[x] + 1;
        queue.push_back(y);
      }
    }
  }
  AttributeSet out;
  for (AttributeId q = 0; q < g.counts().attributes; ++q) {
    const std::size_t t = f.Id({VertexKind::kAttribute, q});
    if (t == src || dist[t] != 2) continue;
    // Some shortest path src -> x -> t with x not an attribute.
    for (std::size_t x : f.adj[t]) {
      if (dist[x] == 1 && !f.IsAttribute(x)) {
        out.push_back(q);
        break;
      }
    }
  }
  return out;
}

double WeightedEntropyOracle(const HeteroGraph& g, const EmbeddingTable& emb,
                             const SessionState& state, AttributeId p) {
  const auto belongs = BelongTo(g);
  const int d = emb.dimension();
  double covered = 0.0, total = 0.0;
  std::size_t hits = 0;
  for (ItemId v : state.candidate_items) {
    const auto vv = emb.item(v);
    const auto uu = emb.user(state.user);
    double s = 0.0;
    for (int k = 0; k < d; ++k) s += uu[k] * vv[k];
    for (AttributeId q : state.accepted) {
      const auto qq = emb.attribute(q);
      for (int k = 0; k < d; ++k) s += vv[k] * qq[k];
    }
    const double w = 1.0 / (1.0 + std::exp(-s));
    total += w;
    if (belongs.count({v, p})) {
      covered += w;
      ++hits;
    }
  }
  if (hits == 0 || hits == state.candidate_items.size()) return 0.0;
  const double prob = covered / total;
  return -prob * std::log2(prob);
}

std::vector<InterpreterStep> InterpretEpisode(const HeteroGraph& g,
                                              const EpisodeLog& log) {
  const auto belongs = BelongTo(g);
  std::vector<AttributeId> path = {log.spec.initial_attribute};
  std::set<AttributeId> asked = {log.spec.initial_attribute};
  std::set<ItemId> rejected_items;
  std::vector<InterpreterStep> steps;
  for (const TurnRecord& t : log.turns) {
    const bool yes = t.answer == Answer::kAccept;
    if (t.action == Action::kAsk) {
      asked.insert(t.attribute);
      if (yes) path.push_back(t.attribute);
    } else if (!yes) {
      rejected_items.insert(t.items.begin(), t.items.end());
    }
    InterpreterStep step;
    for (ItemId v = 0; v < g.counts().items; ++v) {
      bool ok = !rejected_items.count(v);
      for (AttributeId a : path) ok = ok && belongs.count({v, a});
      if (ok) step.candidate_items.push_back(v);
    }
    for (AttributeId q : BfsAdjacentOracle(g, path.back())) {
      if (!asked.count(q)) step.candidate_attributes.push_back(q);
    }
    steps.push_back(std::move(step));
  }
  return steps;
}

}  // namespace cpr::testing
