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

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cpr/id_set.h"

namespace cpr {

enum class VertexKind : std::uint8_t { kUser = 0, kItem = 1, kAttribute = 2 };
inline constexpr int kNumVertexKinds = 3;

// Edge semantics are kept for loading and validation only; reasoning treats
// every edge as an undirected, untyped link.
enum class Relation : std::uint8_t {
  kInteract = 0,  // user - item
  kFriend = 1,    // user - user
  kLike = 2,      // user - attribute
  kBelongTo = 3,  // item - attribute
};

struct VertexId {
  VertexKind kind = VertexKind::kUser;
  std::uint32_t index = 0;

  friend auto operator<=>(const VertexId&, const VertexId&) = default;
};

struct EdgeRecord {
  Relation relation = Relation::kInteract;
  VertexId head;
  VertexId tail;

  friend bool operator==(const EdgeRecord&, const EdgeRecord&) = default;
};

struct VertexCounts {
  std::uint32_t users = 0;
  std::uint32_t items = 0;
  std::uint32_t attributes = 0;

  std::uint32_t of(VertexKind kind) const;
  std::uint64_t total() const {
    return std::uint64_t{users} + items + attributes;
  }
  friend bool operator==(const VertexCounts&, const VertexCounts&) = default;
};

struct Interaction {
  UserId user = 0;
  ItemId item = 0;

  friend auto operator<=>(const Interaction&, const Interaction&) = default;
};

std::string_view VertexKindName(VertexKind kind);
std::optional<VertexKind> ParseVertexKind(std::string_view name);
std::string_view RelationName(Relation relation);
// Case-insensitive; accepts "belong_to", "Belong_to", "belongto", ...
std::optional<Relation> ParseRelation(std::string_view name);

// Endpoint kinds a relation may connect, in canonical (head, tail) order.
std::pair<VertexKind, VertexKind> RelationEndpoints(Relation relation);

// Immutable user-item-attribute graph with a CSR adjacency index per
// (vertex kind, neighbor kind) pair. Neighbor lists are sorted ascending.
class HeteroGraph {
 public:
  HeteroGraph() = default;

  // Validates the records and builds the index. Throws cpr::Error naming the
  // offending record (by position) on out-of-range vertices, self-loops,
  // relation/endpoint kind mismatches and duplicate edges.
  static HeteroGraph Build(const VertexCounts& counts,
                           std::span<const EdgeRecord> edges);

  const VertexCounts& counts() const { return counts_; }
  std::size_t edge_count() const { return edges_.size(); }

  // Edges in canonical orientation (head kind <= tail kind), sorted.
  std::span<const EdgeRecord> edges() const { return edges_; }

  std::span<const std::uint32_t> Neighbors(VertexId v,
                                           VertexKind neighbor_kind) const;

  std::span<const ItemId> ItemsWithAttribute(AttributeId p) const;
  std::span<const AttributeId> AttributesOfItem(ItemId v) const;
  std::span<const ItemId> ItemsOfUser(UserId u) const;

  // Attributes p' != p sharing at least one item or user neighbor with p,
  // i.e. reachable at distance two through a non-attribute vertex.
  AttributeSet AdjacentAttributes(AttributeId p) const;

  // Items carrying every attribute in `accepted`. `accepted` must be
  // non-empty; it need not be sorted.
  ItemSet CandidateItems(std::span<const AttributeId> accepted) const;

  // Interact edges as (user, item) pairs in ascending order.
  std::vector<Interaction> Interactions() const;

  void CheckVertex(VertexId v) const;

 private:
  struct Csr {
    std::vector<std::uint64_t> offsets;
    std::vector<std::uint32_t> targets;
  };

  const Csr& csr(VertexKind from, VertexKind to) const {
    return index_[static_cast<int>(from) * kNumVertexKinds +
                  static_cast<int>(to)];
  }

  VertexCounts counts_;
  std::vector<EdgeRecord> edges_;
  std::array<Csr, kNumVertexKinds * kNumVertexKinds> index_;
};

}  // namespace cpr
