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

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "cpr/dialogue.h"
#include "cpr/embedding.h"
#include "cpr/hetgraph.h"
#include "cpr/reasoner.h"

namespace cpr::testing {

// Small hand-checkable graph: one user, items v1..v3, attributes p1..p3.
//   belong_to: v1-p1 v1-p2 v2-p1 v2-p3 v3-p3;  interact: u1-v1
inline constexpr UserId kU1 = 0;
inline constexpr ItemId kV1 = 0, kV2 = 1, kV3 = 2;
inline constexpr AttributeId kP1 = 0, kP2 = 1, kP3 = 2;
HeteroGraph MakeG0();

// Display names for G0 (u1, v1.., p1..) in the names-file format.
std::string G0NamesFile();

// Embeddings for G0 under which v1 outscores v2 for u1 after p1.
EmbeddingTable G0Embeddings();

// Random graph with at most `max_vertices` vertices over all four relations.
// At least one item and one attribute.
HeteroGraph RandomGraph(std::mt19937_64& rng, int max_vertices = 50,
                        double density = 0.15);

// Random graph in which every item carries >= 1 attribute and every user
// interacts with >= 1 item.
HeteroGraph RandomDenseGraph(std::mt19937_64& rng, int users, int items,
                             int attributes, int min_attrs, int max_attrs);

EmbeddingTable RandomEmbeddings(const VertexCounts& counts, int dim,
                                std::mt19937_64& rng, double range = 1.0);

// State reached from a random opening attribute by a few random
// accept/reject/recommend-reject steps; never empties the candidate items.
SessionState RandomReachableState(const HeteroGraph& g, std::mt19937_64& rng,
                                  UserId user, int max_steps = 5);

// Network whose greedy choice is always `action` (all weights zero, biased
// output), sized for max_turns.
QNetwork ConstantPolicyNetwork(Action action, int max_turns, int hidden = 8);

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

std::string ReadFile(const std::string& path);
void WriteFile(const std::string& path, const std::string& contents);

}  // namespace cpr::testing
