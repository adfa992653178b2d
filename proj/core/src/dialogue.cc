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

#include "cpr/dialogue.h"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <thread>

#include <nlohmann/json.hpp>

#include "cpr/error.h"

namespace cpr {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::vector<ItemId> TopK(const EmbeddingTable& emb, const SessionState& state,
                         int top_k) {
  const ScoredList ranked = RankItems(emb, state);
  std::vector<ItemId> out;
  const std::size_t n = std::min<std::size_t>(ranked.size(), top_k);
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(ranked[i].id);
  return out;
}

Move Recommend(const EmbeddingTable& emb, const SessionState& state, int top_k,
               bool forced = false) {
  Move m;
  m.action = Action::kRecommend;
  m.items = TopK(emb, state, top_k);
  m.forced = forced;
  return m;
}

}  // namespace

Answer ScriptedResponder::Next() {
  if (next_ >= answers_.size()) {
    throw Error(ErrorCode::kOutOfRange, "scripted responder ran out of answers");
  }
  return answers_[next_++];
}

Answer SimulateAnswerAttribute(const HeteroGraph& g, ItemId target,
                               AttributeId p) {
  return ids::Contains(g.AttributesOfItem(target), p) ? Answer::kAccept
                                                      : Answer::kReject;
}

Answer SimulateAnswerRecommendation(ItemId target, std::span<const ItemId> items,
                                    int top_k) {
  if (items.size() > static_cast<std::size_t>(top_k)) {
    throw Error(ErrorCode::kInvalidArgument,
                "recommendation list of " + std::to_string(items.size()) +
                    " items exceeds k=" + std::to_string(top_k));
  }
  return std::find(items.begin(), items.end(), target) != items.end()
             ? Answer::kAccept
             : Answer::kReject;
}

std::string PolicyName(const Policy& policy) {
  return std::visit(Overloaded{
                        [](const ScprPolicy&) { return std::string("scpr"); },
                        [](const MaxEntropyPolicy&) { return std::string("maxent"); },
                        [](const AbsGreedyPolicy&) { return std::string("absgreedy"); },
                    },
                    policy);
}

std::string_view ActionName(Action action) {
  return action == Action::kAsk ? "ask" : "recommend";
}

std::string_view FailReasonName(FailReason reason) {
  switch (reason) {
    case FailReason::kNone: return "none";
    case FailReason::kMaxTurns: return "max_turns";
    case FailReason::kNoCandidates: return "no_candidates";
  }
  return "?";
}

double UnweightedEntropy(const HeteroGraph& g, const SessionState& state,
                         AttributeId p) {
  const std::size_t n = state.candidate_items.size();
  if (n == 0) return 0.0;
  const std::size_t hits =
      ids::Intersect(state.candidate_items, g.ItemsWithAttribute(p)).size();
  if (hits == 0 || hits == n) return 0.0;
  const double prob = static_cast<double>(hits) / static_cast<double>(n);
  return -prob * std::log2(prob);
}

Move MaxEntropyDecide(const HeteroGraph& g, const EmbeddingTable& emb,
                      const SessionState& state, int top_k) {
  if (state.candidate_items.size() <= static_cast<std::size_t>(top_k)) {
    return Recommend(emb, state, top_k);
  }
  std::vector<std::size_t> coverage(g.counts().attributes, 0);
  for (ItemId v : state.candidate_items) {
    for (AttributeId p : g.AttributesOfItem(v)) ++coverage[p];
  }
  const double n = static_cast<double>(state.candidate_items.size());
  std::optional<AttributeId> best;
  double best_entropy = 0.0;
  for (AttributeId p = 0; p < coverage.size(); ++p) {
    const std::size_t hits = coverage[p];
    if (hits == 0 || hits == state.candidate_items.size()) continue;
    if (ids::Contains(state.accepted, p) ||
        ids::Contains(state.rejected_attributes, p)) {
      continue;
    }
    const double prob = static_cast<double>(hits) / n;
    const double h = -prob * std::log2(prob);
    if (h > best_entropy) {
      best_entropy = h;
      best = p;
    }
  }
  if (!best) return Recommend(emb, state, top_k);
  Move m;
  m.action = Action::kAsk;
  m.attribute = *best;
  return m;
}

Move AbsGreedyDecide(const EmbeddingTable& emb, const SessionState& state,
                     int top_k) {
  return Recommend(emb, state, top_k);
}

double EpisodeLog::total_reward() const {
  double r = 0.0;
  for (const TurnRecord& t : turns) r += t.reward;
  return r;
}

Conversation::Conversation(const HeteroGraph& g, const EmbeddingTable& emb,
                           Policy policy, UserId user,
                           AttributeId initial_attribute, int top_k,
                           int max_turns, RewardConfig rewards)
    : g_(g),
      emb_(emb),
      policy_(std::move(policy)),
      top_k_(top_k),
      max_turns_(max_turns),
      rewards_(rewards) {
  if (top_k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  if (max_turns < 1) throw Error(ErrorCode::kInvalidArgument, "T must be >= 1");
  if (const auto* scpr = std::get_if<ScprPolicy>(&policy_)) {
    if (scpr->network == nullptr) {
      throw Error(ErrorCode::kInvalidArgument, "SCPR policy without a network");
    }
    if (scpr->network->input_dim() != StateDimension(max_turns)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "policy network input does not match T=" +
                      std::to_string(max_turns));
    }
  }
  g_.CheckVertex({VertexKind::kAttribute, initial_attribute});
  if (user >= emb.counts().users) {
    throw Error(ErrorCode::kOutOfRange, "no embedding for user " + std::to_string(user));
  }
  // Users beyond the graph (the service's cold-start row) have no edges;
  // InitSession only needs a graph user for validation.
  state_ = InitSession(g_, user < g_.counts().users ? user : 0, initial_attribute);
  state_.user = user;
}

AskScope Conversation::scope() const {
  return std::holds_alternative<MaxEntropyPolicy>(policy_) ? AskScope::kAnyUnasked
                                                          : AskScope::kAdjacent;
}

const Move& Conversation::Propose(std::mt19937_64& rng) {
  if (status_ != EpisodeStatus::kRunning) {
    throw Error(ErrorCode::kFailedPrecondition, "conversation has ended");
  }
  if (pending_) return *pending_;
  Move m = std::visit(
      Overloaded{
          [&](const ScprPolicy& p) {
            pending_state_ =
                EncodeState(state_.candidate_items.size(), history_, max_turns_);
            const double eps = p.exploration ? p.exploration() : p.epsilon;
            const Action a = SelectAction(*p.network, pending_state_, eps, rng);
            if (a == Action::kAsk && !state_.candidate_attributes.empty()) {
              Move ask;
              ask.action = Action::kAsk;
              ask.attribute = RankAttributes(g_, emb_, state_).front().id;
              return ask;
            }
            return Recommend(emb_, state_, top_k_, a == Action::kAsk);
          },
          [&](const MaxEntropyPolicy&) {
            return MaxEntropyDecide(g_, emb_, state_, top_k_);
          },
          [&](const AbsGreedyPolicy&) {
            return AbsGreedyDecide(emb_, state_, top_k_);
          },
      },
      policy_);
  pending_ = std::move(m);
  return *pending_;
}

void Conversation::Finish(FailReason reason) {
  status_ = EpisodeStatus::kFailed;
  fail_reason_ = reason;
}

const TurnRecord& Conversation::Respond(Answer answer) {
  if (!pending_) {
    throw Error(ErrorCode::kFailedPrecondition, "no pending move to answer");
  }
  const Move move = std::move(*pending_);
  pending_.reset();

  TurnRecord rec;
  rec.turn = ++state_.turn;
  rec.action = move.action;
  rec.forced = move.forced;
  rec.attribute = move.attribute;
  rec.items = move.items;
  rec.answer = answer;
  rec.candidates_before = state_.candidate_items.size();

  const bool accepted = answer == Answer::kAccept;
  RewardEvent event;
  TurnOutcome outcome;
  if (move.action == Action::kAsk) {
    if (accepted) {
      SessionState next = AcceptAttribute(g_, state_, move.attribute, scope());
      if (next.candidate_items.empty() && strict_) {
        throw Error(ErrorCode::kFailedPrecondition,
                    "inconsistent responder: confirming attribute " +
                        std::to_string(move.attribute) +
                        " leaves no item matching every confirmed attribute");
      }
      state_ = std::move(next);
      event = RewardEvent::kAskAccept;
      outcome = TurnOutcome::kAskAccepted;
    } else {
      state_ = RejectAttribute(std::move(state_), move.attribute, scope());
      event = RewardEvent::kAskReject;
      outcome = TurnOutcome::kAskRejected;
    }
  } else if (accepted) {
    event = RewardEvent::kRecSuccess;
    outcome = TurnOutcome::kRecAccepted;
    status_ = EpisodeStatus::kSucceeded;
  } else {
    state_ = RejectItems(std::move(state_), move.items);
    event = RewardEvent::kRecFail;
    outcome = TurnOutcome::kRecRejected;
  }
  history_.push_back(outcome);
  rec.reward = RewardFor(event, rewards_);

  if (status_ == EpisodeStatus::kRunning) {
    if (state_.candidate_items.empty()) {
      Finish(FailReason::kNoCandidates);
    } else if (state_.turn >= max_turns_) {
      Finish(FailReason::kMaxTurns);
    }
    if (status_ == EpisodeStatus::kFailed) rec.reward += rewards_.quit;
  }
  rec.candidate_items = state_.candidate_items;
  rec.candidate_attributes = state_.candidate_attributes;

  if (sink_ && std::holds_alternative<ScprPolicy>(policy_)) {
    Transition t;
    t.state = std::move(pending_state_);
    t.action = move.action;
    t.reward = rec.reward;
    t.done = status_ != EpisodeStatus::kRunning;
    if (!t.done) {
      t.next_state =
          EncodeState(state_.candidate_items.size(), history_, max_turns_);
    }
    sink_(std::move(t));
  }
  pending_state_.clear();
  turns_.push_back(std::move(rec));
  return turns_.back();
}

EpisodeLog RunEpisode(const HeteroGraph& g, const EmbeddingTable& emb,
                      const Policy& policy, const EpisodeSpec& spec,
                      Responder& responder, std::mt19937_64& rng,
                      const TrainHooks* hooks, const RewardConfig& rewards) {
  if (spec.target) {
    g.CheckVertex({VertexKind::kItem, *spec.target});
    if (!ids::Contains(g.AttributesOfItem(*spec.target), spec.initial_attribute)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "opening attribute " + std::to_string(spec.initial_attribute) +
                      " does not belong to target item " +
                      std::to_string(*spec.target));
    }
  }
  Conversation conv(g, emb, policy, spec.user, spec.initial_attribute,
                    spec.top_k, spec.max_turns, rewards);
  conv.set_strict(true);
  if (hooks != nullptr && hooks->replay != nullptr) {
    ReplayBuffer* replay = hooks->replay;
    conv.set_transition_sink([replay](Transition t) { replay->Push(std::move(t)); });
  }
  while (conv.status() == EpisodeStatus::kRunning) {
    const Move& m = conv.Propose(rng);
    const Answer a = m.action == Action::kAsk
                         ? responder.AnswerAttribute(m.attribute)
                         : responder.AnswerRecommendation(m.items);
    conv.Respond(a);
  }
  EpisodeLog log;
  log.policy = PolicyName(policy);
  log.spec = spec;
  log.turns = conv.turns();
  log.success = conv.status() == EpisodeStatus::kSucceeded;
  log.success_turn = log.success ? conv.state().turn : 0;
  log.fail_reason = conv.fail_reason();
  log.final_state = conv.state();
  return log;
}

std::vector<EpisodeSpec> MakeEpisodeSpecs(const HeteroGraph& g,
                                          std::span<const Interaction> interactions,
                                          int top_k, int max_turns,
                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<EpisodeSpec> specs;
  specs.reserve(interactions.size());
  for (const Interaction& x : interactions) {
    auto attrs = g.AttributesOfItem(x.item);
    if (attrs.empty()) continue;
    std::uniform_int_distribution<std::size_t> pick(0, attrs.size() - 1);
    specs.push_back({x.user, x.item, attrs[pick(rng)], top_k, max_turns});
  }
  return specs;
}

std::vector<EpisodeLog> EvaluatePolicy(const HeteroGraph& g,
                                       const EmbeddingTable& emb,
                                       const Policy& policy,
                                       std::span<const EpisodeSpec> specs,
                                       int threads) {
  std::vector<EpisodeLog> logs(specs.size());
  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t i = first; i < specs.size(); i += stride) {
      SimulatedUser user(g, *specs[i].target, specs[i].top_k);
      std::mt19937_64 rng(i);
      logs[i] = RunEpisode(g, emb, policy, specs[i], user, rng);
      logs[i].id = i;
    }
  };
  const std::size_t n = static_cast<std::size_t>(std::max(1, threads));
  if (n == 1) {
    work(0, 1);
    return logs;
  }
  std::vector<std::exception_ptr> errors(n);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n; ++w) {
      pool.emplace_back([&, w] {
        try {
          work(w, n);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return logs;
}

PolicyTrainingResult TrainPolicy(const HeteroGraph& g, const EmbeddingTable& emb,
                                 std::span<const Interaction> validation,
                                 const DqnConfig& config, int episodes,
                                 int top_k, int max_turns) {
  std::vector<Interaction> eligible;
  for (const Interaction& x : validation) {
    if (!g.AttributesOfItem(x.item).empty()) eligible.push_back(x);
  }
  if (eligible.empty()) {
    throw Error(ErrorCode::kFailedPrecondition,
                "validation split has no usable interactions");
  }
  DqnLearner learner(StateDimension(max_turns), config);
  std::mt19937_64& rng = learner.rng();
  std::uint64_t steps = 0;
  ScprPolicy scpr;
  scpr.network = &learner.network();
  scpr.exploration = [&] { return EpsilonAt(config, steps++); };
  const Policy policy = scpr;
  TrainHooks hooks{&learner.buffer()};

  PolicyTrainingResult result;
  result.episode_returns.reserve(episodes);
  std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
  for (int e = 0; e < episodes; ++e) {
    const Interaction x = eligible[pick(rng)];
    auto attrs = g.AttributesOfItem(x.item);
    std::uniform_int_distribution<std::size_t> pick_attr(0, attrs.size() - 1);
    const EpisodeSpec spec{x.user, x.item, attrs[pick_attr(rng)], top_k, max_turns};
    SimulatedUser user(g, x.item, top_k);
    const EpisodeLog log =
        RunEpisode(g, emb, policy, spec, user, rng, &hooks, config.rewards);
    result.episode_returns.push_back(log.total_reward());
    for (std::size_t t = 0; t < log.turns.size(); ++t) learner.Update();
    if ((e + 1) % config.target_sync_every == 0) learner.SyncTarget();
  }
  result.network = learner.network();
  return result;
}

void WriteEpisodeLogJsonl(std::ostream& os, std::span<const EpisodeLog> logs) {
  for (const EpisodeLog& log : logs) {
    for (const TurnRecord& t : log.turns) {
      nlohmann::json payload = nlohmann::json::array();
      if (t.action == Action::kAsk) {
        payload.push_back(t.attribute);
      } else {
        for (ItemId v : t.items) payload.push_back(v);
      }
      nlohmann::json line = {
          {"episode_id", log.id},
          {"policy", log.policy},
          {"turn", t.turn},
          {"action", ActionName(t.action)},
          {"forced", t.forced},
          {"payload", payload},
          {"answer", t.answer == Answer::kAccept ? "accept" : "reject"},
          {"reward", t.reward},
          {"candidates", t.candidate_items.size()},
      };
      os << line.dump() << '\n';
    }
  }
}

}  // namespace cpr
