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

#include "cpr/hetgraph.h"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "cpr/error.h"

namespace cpr {

namespace {

std::string Describe(VertexId v) {
  return std::string(VertexKindName(v.kind)) + ":" + std::to_string(v.index);
}

std::string Describe(const EdgeRecord& e, std::size_t position) {
  std::ostringstream os;
  os << "edge #" << position << " (" << RelationName(e.relation) << " "
     << Describe(e.head) << " " << Describe(e.tail) << ")";
  return os.str();
}

std::string Lower(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '_' || c == '-') continue;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

// Orients an edge so that head sorts before tail.
EdgeRecord Canonical(EdgeRecord e) {
  if (e.tail < e.head) std::swap(e.head, e.tail);
  return e;
}

}  // namespace

std::uint32_t VertexCounts::of(VertexKind kind) const {
  switch (kind) {
    case VertexKind::kUser: return users;
    case VertexKind::kItem: return items;
    case VertexKind::kAttribute: return attributes;
  }
  return 0;
}

std::string_view VertexKindName(VertexKind kind) {
  switch (kind) {
    case VertexKind::kUser: return "user";
    case VertexKind::kItem: return "item";
    case VertexKind::kAttribute: return "attribute";
  }
  return "?";
}

std::optional<VertexKind> ParseVertexKind(std::string_view name) {
  const std::string k = Lower(name);
  if (k == "user") return VertexKind::kUser;
  if (k == "item") return VertexKind::kItem;
  if (k == "attribute") return VertexKind::kAttribute;
  return std::nullopt;
}

std::string_view RelationName(Relation relation) {
  switch (relation) {
    case Relation::kInteract: return "interact";
    case Relation::kFriend: return "friend";
    case Relation::kLike: return "like";
    case Relation::kBelongTo: return "belong_to";
  }
  return "?";
}

std::optional<Relation> ParseRelation(std::string_view name) {
  const std::string k = Lower(name);
  if (k == "interact") return Relation::kInteract;
  if (k == "friend") return Relation::kFriend;
  if (k == "like") return Relation::kLike;
  if (k == "belongto") return Relation::kBelongTo;
  return std::nullopt;
}

std::pair<VertexKind, VertexKind> RelationEndpoints(Relation relation) {
  switch (relation) {
    case Relation::kInteract: return {VertexKind::kUser, VertexKind::kItem};
    case Relation::kFriend: return {VertexKind::kUser, VertexKind::kUser};
    case Relation::kLike: return {VertexKind::kUser, VertexKind::kAttribute};
    case Relation::kBelongTo: return {VertexKind::kItem, VertexKind::kAttribute};
  }
  return {VertexKind::kUser, VertexKind::kUser};
}

HeteroGraph HeteroGraph::Build(const VertexCounts& counts,
                               std::span<const EdgeRecord> edges) {
  HeteroGraph g;
  g.counts_ = counts;
  g.edges_.reserve(edges.size());

  for (std::size_t i = 0; i < edges.size(); ++i) {
    const EdgeRecord& e = edges[i];
    for (const VertexId& v : {e.head, e.tail}) {
      if (v.index >= counts.of(v.kind)) {
        throw Error(ErrorCode::kOutOfRange,
                    Describe(e, i) + ": vertex " + Describe(v) +
                        " out of range");
      }
    }
    if (e.head == e.tail) {
      throw Error(ErrorCode::kInvalidArgument, Describe(e, i) + ": self-loop");
    }
    const EdgeRecord c = Canonical(e);
    const auto [want_head, want_tail] = RelationEndpoints(e.relation);
    if (c.head.kind != want_head || c.tail.kind != want_tail) {
      throw Error(ErrorCode::kInvalidArgument,
                  Describe(e, i) + ": relation kind mismatch, expected " +
                      std::string(VertexKindName(want_head)) + "-" +
                      std::string(VertexKindName(want_tail)));
    }
    g.edges_.push_back(c);
  }

  std::vector<std::size_t> order(g.edges_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto key = [&](std::size_t i) {
    return std::tie(g.edges_[i].head, g.edges_[i].tail);
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (key(order[i - 1]) == key(order[i])) {
      throw Error(ErrorCode::kInvalidArgument,
                  Describe(edges[order[i]], order[i]) +
                      ": duplicate of edge #" + std::to_string(order[i - 1]));
    }
  }
  std::vector<EdgeRecord> sorted;
  sorted.reserve(order.size());
  for (std::size_t i : order) sorted.push_back(g.edges_[i]);
  g.edges_ = std::move(sorted);

  // Counting pass, then fill. Canonical edges are sorted by (head, tail), so
  // filling in edge order leaves every neighbor list sorted except for the
  // reverse direction, which is sorted explicitly below.
  for (int from = 0; from < kNumVertexKinds; ++from) {
    for (int to = 0; to < kNumVertexKinds; ++to) {
      Csr& csr = g.index_[from * kNumVertexKinds + to];
      csr.offsets.assign(counts.of(static_cast<VertexKind>(from)) + 1, 0);
    }
  }
  auto slot = [&](VertexKind from, VertexKind to) -> Csr& {
    return g.index_[static_cast<int>(from) * kNumVertexKinds +
                    static_cast<int>(to)];
  };
  for (const EdgeRecord& e : g.edges_) {
    ++slot(e.head.kind, e.tail.kind).offsets[e.head.index + 1];
    ++slot(e.tail.kind, e.head.kind).offsets[e.tail.index + 1];
  }
  for (Csr& csr : g.index_) {
    for (std::size_t i = 1; i < csr.offsets.size(); ++i) {
      csr.offsets[i] += csr.offsets[i - 1];
    }
    csr.targets.resize(csr.offsets.empty() ? 0 : csr.offsets.back());
  }
  std::array<std::vector<std::uint64_t>, kNumVertexKinds * kNumVertexKinds>
      cursor;
  for (int i = 0; i < kNumVertexKinds * kNumVertexKinds; ++i) {
    cursor[i].assign(g.index_[i].offsets.begin(),
                     g.index_[i].offsets.end() - (g.index_[i].offsets.empty() ? 0 : 1));
  }
  auto push = [&](VertexId from, VertexId to) {
    const int s = static_cast<int>(from.kind) * kNumVertexKinds +
                  static_cast<int>(to.kind);
    g.index_[s].targets[cursor[s][from.index]++] = to.index;
  };
  for (const EdgeRecord& e : g.edges_) {
    push(e.head, e.tail);
    push(e.tail, e.head);
  }
  for (Csr& csr : g.index_) {
    for (std::size_t v = 0; v + 1 < csr.offsets.size(); ++v) {
      std::sort(csr.targets.begin() + static_cast<std::ptrdiff_t>(csr.offsets[v]),
                csr.targets.begin() + static_cast<std::ptrdiff_t>(csr.offsets[v + 1]));
    }
  }
  return g;
}

void HeteroGraph::CheckVertex(VertexId v) const {
  if (v.index >= counts_.of(v.kind)) {
    throw Error(ErrorCode::kOutOfRange, "invalid " +
                                            std::string(VertexKindName(v.kind)) +
                                            " index " + std::to_string(v.index));
  }
}

std::span<const std::uint32_t> HeteroGraph::Neighbors(
    VertexId v, VertexKind neighbor_kind) const {
  CheckVertex(v);
  const Csr& c = csr(v.kind, neighbor_kind);
  return std::span<const std::uint32_t>(c.targets)
      .subspan(c.offsets[v.index], c.offsets[v.index + 1] - c.offsets[v.index]);
}

std::span<const ItemId> HeteroGraph::ItemsWithAttribute(AttributeId p) const {
  return Neighbors({VertexKind::kAttribute, p}, VertexKind::kItem);
}

std::span<const AttributeId> HeteroGraph::AttributesOfItem(ItemId v) const {
  return Neighbors({VertexKind::kItem, v}, VertexKind::kAttribute);
}

std::span<const ItemId> HeteroGraph::ItemsOfUser(UserId u) const {
  return Neighbors({VertexKind::kUser, u}, VertexKind::kItem);
}

AttributeSet HeteroGraph::AdjacentAttributes(AttributeId p) const {
  const VertexId self{VertexKind::kAttribute, p};
  std::vector<AttributeId> out;
  for (ItemId v : Neighbors(self, VertexKind::kItem)) {
    auto attrs = AttributesOfItem(v);
    out.insert(out.end(), attrs.begin(), attrs.end());
  }
  for (UserId u : Neighbors(self, VertexKind::kUser)) {
    auto attrs = Neighbors({VertexKind::kUser, u}, VertexKind::kAttribute);
    out.insert(out.end(), attrs.begin(), attrs.end());
  }
  out = ids::Normalize(std::move(out));
  ids::Erase(out, p);
  return out;
}

ItemSet HeteroGraph::CandidateItems(
    std::span<const AttributeId> accepted) const {
  if (accepted.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "candidate items need at least one accepted attribute");
  }
  // Intersect starting from the rarest attribute.
  std::vector<AttributeId> order(accepted.begin(), accepted.end());
  for (AttributeId p : order) CheckVertex({VertexKind::kAttribute, p});
  std::sort(order.begin(), order.end(), [&](AttributeId a, AttributeId b) {
    return ItemsWithAttribute(a).size() < ItemsWithAttribute(b).size() ||
           (ItemsWithAttribute(a).size() == ItemsWithAttribute(b).size() && a < b);
  });
  auto first = ItemsWithAttribute(order.front());
  ItemSet out(first.begin(), first.end());
  for (std::size_t i = 1; i < order.size() && !out.empty(); ++i) {
    out = ids::Intersect(out, ItemsWithAttribute(order[i]));
  }
  return out;
}

std::vector<Interaction> HeteroGraph::Interactions() const {
  std::vector<Interaction> out;
  for (const EdgeRecord& e : edges_) {
    if (e.relation == Relation::kInteract) {
      out.push_back({e.head.index, e.tail.index});
    }
  }
  return out;
}

}  // namespace cpr
