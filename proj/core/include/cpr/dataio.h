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
#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cpr/hetgraph.h"

namespace cpr {

struct Dataset {
  HeteroGraph graph;
  std::vector<Interaction> interactions;  // the graph's Interact edges
};

// Edge-list text format:
//   #vertices<TAB>users=<n><TAB>items=<n><TAB>attributes=<n>
//   <relation><TAB><kind>:<index><TAB><kind>:<index>
// Relation names are matched case-insensitively. Blank lines and further
// lines starting with '#' are ignored. Errors carry the 1-based line number.
Dataset ParseEdgeList(std::istream& is, const std::string& source = "<stream>");
Dataset LoadDataset(const std::string& path);
void WriteEdgeList(std::ostream& os, const HeteroGraph& g);
void SaveDataset(const std::string& path, const HeteroGraph& g);

struct PrunedGraph {
  HeteroGraph graph;
  // New attribute index -> original attribute index.
  std::vector<AttributeId> kept_attributes;
};

// Drops attributes attached to fewer than min_freq items (and all their
// edges), then renumbers the surviving attributes densely in original order.
PrunedGraph PruneRareAttributes(const HeteroGraph& g, std::uint32_t min_freq);

struct InteractionSplit {
  std::vector<Interaction> train;
  std::vector<Interaction> validation;
  std::vector<Interaction> test;
};

// Seeded uniform shuffle, then contiguous cuts: train gets
// floor(n * r0 / sum), and the remainder is divided between validation and
// test in proportion r1 : r2 (validation rounded down).
InteractionSplit SplitInteractions(std::span<const Interaction> interactions,
                                   std::array<double, 3> ratios,
                                   std::uint64_t seed);

inline constexpr std::array<double, 3> kDefaultSplitRatios = {7.0, 1.5, 1.5};

struct SyntheticSpec {
  std::uint32_t users = 200;
  std::uint32_t items = 500;
  std::uint32_t attributes = 60;
  std::uint32_t min_attributes_per_item = 3;
  std::uint32_t max_attributes_per_item = 6;
  std::uint32_t interactions_per_user = 20;
  std::uint32_t favored_per_user = 4;
  // Probability that an interaction is drawn from items carrying at least one
  // favored attribute; the rest are uniform.
  double favored_share = 0.8;
  // Zipf exponent of attribute popularity (0 = uniform).
  double popularity_skew = 2.5;
  std::uint32_t friends_per_user = 2;
  std::uint64_t seed = 0;
};

struct SyntheticDataset {
  Dataset data;
  std::vector<AttributeSet> favored;  // hidden per-user favored attributes
};

// Throws cpr::Error(kInvalidArgument) for infeasible specs.
SyntheticDataset GenerateSynthetic(const SyntheticSpec& spec);

// JSON object with SyntheticSpec's field names; missing keys keep defaults.
SyntheticSpec LoadSyntheticSpec(const std::string& path);

// Optional display names: lines "<kind>:<index><TAB><name>".
struct NameTable {
  std::vector<std::string> users;
  std::vector<std::string> items;
  std::vector<std::string> attributes;

  // Falls back to "<kind>:<index>" when no name is known.
  std::string Name(VertexKind kind, std::uint32_t index) const;
};

NameTable LoadNames(const std::string& path, const VertexCounts& counts);

}  // namespace cpr
