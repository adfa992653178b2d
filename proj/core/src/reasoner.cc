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

#include "cpr/reasoner.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "cpr/error.h"
#include "cpr/fm_trainer.h"

namespace cpr {

namespace {

std::string Attr(AttributeId p) { return "attribute " + std::to_string(p); }

void RequireAskable(const SessionState& state, AttributeId p, AskScope scope) {
  if (scope == AskScope::kAdjacent) {
    if (!ids::Contains(state.candidate_attributes, p)) {
      throw Error(ErrorCode::kFailedPrecondition,
                  Attr(p) + " is not a candidate attribute");
    }
  } else if (ids::Contains(state.accepted, p) ||
             ids::Contains(state.rejected_attributes, p)) {
    throw Error(ErrorCode::kFailedPrecondition, Attr(p) + " was already asked");
  }
}

AttributeSet NextCandidates(const HeteroGraph& g, const SessionState& state) {
  return ids::Subtract(
      ids::Subtract(g.AdjacentAttributes(state.path.back()), state.accepted),
      state.rejected_attributes);
}

}  // namespace

void SortScored(ScoredList& list) {
  std::sort(list.begin(), list.end(), [](const ScoredId& a, const ScoredId& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
}

SessionState InitSession(const HeteroGraph& g, UserId u, AttributeId p0) {
  g.CheckVertex({VertexKind::kUser, u});
  auto items = g.ItemsWithAttribute(p0);
  if (items.empty()) {
    throw Error(ErrorCode::kFailedPrecondition,
                Attr(p0) + " has no items; cannot open a session with it");
  }
  SessionState s;
  s.user = u;
  s.path = {p0};
  s.accepted = {p0};
  s.candidate_items.assign(items.begin(), items.end());
  s.candidate_attributes = NextCandidates(g, s);
  return s;
}

ScoredList RankItems(const EmbeddingTable& emb, const SessionState& state) {
  if (state.candidate_items.empty()) {
    throw Error(ErrorCode::kFailedPrecondition, "no candidate items to rank");
  }
  ScoredList out;
  out.reserve(state.candidate_items.size());
  for (ItemId v : state.candidate_items) {
    out.push_back({v, ScoreItem(emb, state.user, v, state.accepted)});
  }
  SortScored(out);
  return out;
}

std::vector<double> CandidateWeights(const EmbeddingTable& emb,
                                     const SessionState& state) {
  std::vector<double> w;
  w.reserve(state.candidate_items.size());
  for (ItemId v : state.candidate_items) {
    w.push_back(Sigmoid(ScoreItem(emb, state.user, v, state.accepted)));
  }
  return w;
}

double WeightedEntropy(const HeteroGraph& g, const SessionState& state,
                       AttributeId p, std::span<const double> weights) {
  if (state.candidate_items.empty()) {
    throw Error(ErrorCode::kFailedPrecondition,
                "weighted entropy needs candidate items");
  }
  auto with = g.ItemsWithAttribute(p);
  double total = 0.0;
  double covered = 0.0;
  std::size_t hits = 0;
  auto it = with.begin();
  for (std::size_t i = 0; i < state.candidate_items.size(); ++i) {
    const ItemId v = state.candidate_items[i];
    total += weights[i];
    it = std::lower_bound(it, with.end(), v);
    if (it != with.end() && *it == v) {
      covered += weights[i];
      ++hits;
    }
  }
  if (hits == 0 || hits == state.candidate_items.size()) return 0.0;
  const double prob = covered / total;
  return -prob * std::log2(prob);
}

double WeightedEntropy(const HeteroGraph& g, const EmbeddingTable& emb,
                       const SessionState& state, AttributeId p) {
  return WeightedEntropy(g, state, p, CandidateWeights(emb, state));
}

ScoredList RankAttributes(const HeteroGraph& g, const EmbeddingTable& emb,
                          const SessionState& state) {
  ScoredList out;
  if (state.candidate_attributes.empty()) return out;
  if (state.candidate_items.empty()) {
    // Nothing propagates to any attribute.
    for (AttributeId p : state.candidate_attributes) out.push_back({p, 0.0});
    return out;
  }
  const std::vector<double> weights = CandidateWeights(emb, state);
  out.reserve(state.candidate_attributes.size());
  for (AttributeId p : state.candidate_attributes) {
    out.push_back({p, WeightedEntropy(g, state, p, weights)});
  }
  SortScored(out);
  return out;
}

SessionState AcceptAttribute(const HeteroGraph& g, SessionState state,
                             AttributeId p, AskScope scope) {
  g.CheckVertex({VertexKind::kAttribute, p});
  RequireAskable(state, p, scope);
  state.path.push_back(p);
  ids::Insert(state.accepted, p);
  state.candidate_items = ids::Subtract(
      ids::Intersect(state.candidate_items, g.ItemsWithAttribute(p)),
      state.rejected_items);
  state.candidate_attributes = NextCandidates(g, state);
  return state;
}

SessionState RejectAttribute(SessionState state, AttributeId p, AskScope scope) {
  RequireAskable(state, p, scope);
  ids::Insert(state.rejected_attributes, p);
  ids::Erase(state.candidate_attributes, p);
  return state;
}

SessionState RejectItems(SessionState state, std::span<const ItemId> items) {
  const ItemSet sorted = ids::Normalize({items.begin(), items.end()});
  for (ItemId v : sorted) {
    if (!ids::Contains(state.candidate_items, v)) {
      throw Error(ErrorCode::kFailedPrecondition,
                  "item " + std::to_string(v) + " is not a candidate");
    }
  }
  state.candidate_items = ids::Subtract(state.candidate_items, sorted);
  state.rejected_items = ids::Union(state.rejected_items, sorted);
  return state;
}

void CheckSessionInvariants(const HeteroGraph& g, const SessionState& state,
                            int max_turns) {
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kInternal, "session invariant violated: " + what);
  };
  if (state.path.empty()) fail("empty path");
  if (ids::Normalize(state.path) != state.accepted ||
      state.path.size() != state.accepted.size()) {
    fail("accepted set differs from path entries");
  }
  if (!ids::Intersect(state.accepted, state.rejected_attributes).empty()) {
    fail("an attribute is both accepted and rejected");
  }
  const ItemSet allowed =
      ids::Subtract(g.CandidateItems(state.accepted), state.rejected_items);
  if (!std::includes(allowed.begin(), allowed.end(),
                     state.candidate_items.begin(), state.candidate_items.end())) {
    fail("candidate items outside CandidateItems(accepted) \\ rejected");
  }
  if (state.candidate_attributes != NextCandidates(g, state)) {
    fail("candidate attributes differ from adjacency of the path tip");
  }
  if (state.turn < 0 || state.turn > max_turns) fail("turn out of range");
}

}  // namespace cpr
