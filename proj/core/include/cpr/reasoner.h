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

#include <span>
#include <vector>

#include "cpr/embedding.h"
#include "cpr/hetgraph.h"
#include "cpr/id_set.h"

namespace cpr {

// One conversation's reasoning state.
//
//   accepted             == set of entries of `path`
//   accepted ∩ rejected_attributes == ∅
//   candidate_items      ⊆ CandidateItems(accepted) \ rejected_items
//   candidate_attributes == AdjacentAttributes(path.back())
//                             \ (accepted ∪ rejected_attributes)
struct SessionState {
  UserId user = 0;
  std::vector<AttributeId> path;  // chronological
  AttributeSet accepted;
  AttributeSet rejected_attributes;
  ItemSet rejected_items;
  ItemSet candidate_items;
  AttributeSet candidate_attributes;
  int turn = 0;

  friend bool operator==(const SessionState&, const SessionState&) = default;
};

struct ScoredId {
  std::uint32_t id = 0;
  double score = 0.0;

  friend bool operator==(const ScoredId&, const ScoredId&) = default;
};

// Descending by score, ties broken by ascending id.
using ScoredList = std::vector<ScoredId>;

// Whether an asked attribute must come from the adjacency-restricted
// candidate set (path reasoning) or may be any not-yet-asked attribute
// (the entropy baseline).
enum class AskScope { kAdjacent, kAnyUnasked };

// Throws if p0 has no items.
SessionState InitSession(const HeteroGraph& g, UserId u, AttributeId p0);

// Scores every candidate item with ScoreItem(u, v, accepted). Throws on an
// empty candidate set.
ScoredList RankItems(const EmbeddingTable& emb, const SessionState& state);

// Logistic-squashed item scores aligned with state.candidate_items.
std::vector<double> CandidateWeights(const EmbeddingTable& emb,
                                     const SessionState& state);

// -prob * log2(prob) where prob is p's share of the squashed candidate item
// scores. Zero when p covers no candidate (nothing to propagate) or every
// candidate (limit of x log x at 1).
double WeightedEntropy(const HeteroGraph& g, const EmbeddingTable& emb,
                       const SessionState& state, AttributeId p);
double WeightedEntropy(const HeteroGraph& g, const SessionState& state,
                       AttributeId p, std::span<const double> weights);

// Scores state.candidate_attributes by weighted entropy.
ScoredList RankAttributes(const HeteroGraph& g, const EmbeddingTable& emb,
                          const SessionState& state);

// Transition after the user confirms p: extend the path, narrow candidate
// items, recompute candidate attributes from the new path tip. The turn
// counter is left to the caller.
SessionState AcceptAttribute(const HeteroGraph& g, SessionState state,
                             AttributeId p,
                             AskScope scope = AskScope::kAdjacent);

SessionState RejectAttribute(SessionState state, AttributeId p,
                             AskScope scope = AskScope::kAdjacent);

// `items` need not be sorted but must all be candidates.
SessionState RejectItems(SessionState state, std::span<const ItemId> items);

// Throws cpr::Error(kInternal) describing the first violated invariant.
void CheckSessionInvariants(const HeteroGraph& g, const SessionState& state,
                            int max_turns);

void SortScored(ScoredList& list);

}  // namespace cpr
