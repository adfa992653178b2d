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

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cpr/embedding.h"
#include "cpr/hetgraph.h"
#include "cpr/policy.h"
#include "cpr/reasoner.h"

namespace cpr {

struct EpisodeSpec {
  UserId user = 0;
  std::optional<ItemId> target;  // set for simulator-driven episodes
  AttributeId initial_attribute = 0;
  int top_k = 10;
  int max_turns = 15;
};

enum class Answer : std::uint8_t { kReject = 0, kAccept = 1 };

class Responder {
 public:
  virtual ~Responder() = default;
  virtual Answer AnswerAttribute(AttributeId p) = 0;
  virtual Answer AnswerRecommendation(std::span<const ItemId> items) = 0;
};

// Accepts an attribute iff the target carries it.
Answer SimulateAnswerAttribute(const HeteroGraph& g, ItemId target, AttributeId p);
// Accepts a list iff it contains the target. Throws if the list is longer
// than top_k.
Answer SimulateAnswerRecommendation(ItemId target, std::span<const ItemId> items,
                                    int top_k);

// User whose preference is anchored by one target item.
class SimulatedUser final : public Responder {
 public:
  SimulatedUser(const HeteroGraph& g, ItemId target, int top_k)
      : g_(g), target_(target), top_k_(top_k) {}

  Answer AnswerAttribute(AttributeId p) override {
    return SimulateAnswerAttribute(g_, target_, p);
  }
  Answer AnswerRecommendation(std::span<const ItemId> items) override {
    return SimulateAnswerRecommendation(target_, items, top_k_);
  }

 private:
  const HeteroGraph& g_;
  ItemId target_;
  int top_k_;
};

// Plays back a fixed answer sequence; throws once it runs out.
class ScriptedResponder final : public Responder {
 public:
  explicit ScriptedResponder(std::vector<Answer> answers)
      : answers_(std::move(answers)) {}

  Answer AnswerAttribute(AttributeId) override { return Next(); }
  Answer AnswerRecommendation(std::span<const ItemId>) override { return Next(); }

 private:
  Answer Next();

  std::vector<Answer> answers_;
  std::size_t next_ = 0;
};

struct ScprPolicy {
  const QNetwork* network = nullptr;
  double epsilon = 0.0;
  // When set, called once per decision and overrides `epsilon` (used for
  // the decaying exploration schedule during training).
  std::function<double()> exploration = nullptr;
};
struct MaxEntropyPolicy {};
struct AbsGreedyPolicy {};
using Policy = std::variant<ScprPolicy, MaxEntropyPolicy, AbsGreedyPolicy>;

std::string PolicyName(const Policy& policy);

struct Move {
  Action action = Action::kAsk;
  AttributeId attribute = 0;   // valid when action == kAsk
  std::vector<ItemId> items;   // ranked, valid when action == kRecommend
  bool forced = false;         // ask was chosen but nothing could be asked
};

// Entropy of p's coverage of the candidate items, counting items equally.
double UnweightedEntropy(const HeteroGraph& g, const SessionState& state,
                         AttributeId p);

// Rule-based baseline: asks the max-entropy unasked attribute found on any
// candidate item while more than top_k candidates remain and some attribute
// has positive entropy; otherwise recommends the FM top-k.
Move MaxEntropyDecide(const HeteroGraph& g, const EmbeddingTable& emb,
                      const SessionState& state, int top_k);

// Always recommends the FM top-k.
Move AbsGreedyDecide(const EmbeddingTable& emb, const SessionState& state,
                     int top_k);

struct TurnRecord {
  int turn = 0;  // 1-based
  Action action = Action::kAsk;
  bool forced = false;
  AttributeId attribute = 0;
  std::vector<ItemId> items;
  Answer answer = Answer::kReject;
  double reward = 0.0;
  std::size_t candidates_before = 0;
  // After the answer was applied.
  ItemSet candidate_items;
  AttributeSet candidate_attributes;
};

enum class EpisodeStatus : std::uint8_t { kRunning, kSucceeded, kFailed };
enum class FailReason : std::uint8_t { kNone, kMaxTurns, kNoCandidates };

std::string_view FailReasonName(FailReason reason);

struct EpisodeLog {
  std::uint64_t id = 0;
  std::string policy;
  EpisodeSpec spec;
  std::vector<TurnRecord> turns;
  bool success = false;
  int success_turn = 0;  // 0 unless success
  FailReason fail_reason = FailReason::kNone;
  SessionState final_state;

  double total_reward() const;
};

// Turn-by-turn Algorithm 1 driver shared by batch episodes, the terminal
// chat and the HTTP session service. Usage: Propose(), then Respond() with
// the user's answer, until status() != kRunning.
class Conversation {
 public:
  using TransitionSink = std::function<void(Transition)>;

  Conversation(const HeteroGraph& g, const EmbeddingTable& emb, Policy policy,
               UserId user, AttributeId initial_attribute, int top_k,
               int max_turns, RewardConfig rewards = {});

  const Move& Propose(std::mt19937_64& rng);
  const TurnRecord& Respond(Answer answer);

  EpisodeStatus status() const { return status_; }
  FailReason fail_reason() const { return fail_reason_; }
  const SessionState& state() const { return state_; }
  const std::optional<Move>& pending() const { return pending_; }
  const std::vector<TurnRecord>& turns() const { return turns_; }
  const std::vector<TurnOutcome>& history() const { return history_; }
  int top_k() const { return top_k_; }
  int max_turns() const { return max_turns_; }

  // Transitions (SCPR only) are handed to the sink as soon as they complete.
  void set_transition_sink(TransitionSink sink) { sink_ = std::move(sink); }

  // When set, an accepted attribute that empties the candidate items throws
  // instead of ending the session as kNoCandidates.
  void set_strict(bool strict) { strict_ = strict; }

 private:
  AskScope scope() const;
  void Finish(FailReason reason);

  const HeteroGraph& g_;
  const EmbeddingTable& emb_;
  Policy policy_;
  int top_k_;
  int max_turns_;
  RewardConfig rewards_;
  SessionState state_;
  std::vector<TurnOutcome> history_;
  std::vector<TurnRecord> turns_;
  std::optional<Move> pending_;
  std::vector<double> pending_state_;
  EpisodeStatus status_ = EpisodeStatus::kRunning;
  FailReason fail_reason_ = FailReason::kNone;
  TransitionSink sink_;
  bool strict_ = false;
};

struct TrainHooks {
  ReplayBuffer* replay = nullptr;
};

// Runs one full session. Throws on an inconsistent responder (one whose
// confirmed attributes no item satisfies) or an invalid spec.
EpisodeLog RunEpisode(const HeteroGraph& g, const EmbeddingTable& emb,
                      const Policy& policy, const EpisodeSpec& spec,
                      Responder& responder, std::mt19937_64& rng,
                      const TrainHooks* hooks = nullptr,
                      const RewardConfig& rewards = {});

// One spec per interaction whose item has attributes, with the opening
// attribute drawn uniformly from the item's attributes.
std::vector<EpisodeSpec> MakeEpisodeSpecs(const HeteroGraph& g,
                                          std::span<const Interaction> interactions,
                                          int top_k, int max_turns,
                                          std::uint64_t seed);

// Simulator-driven episodes, one per spec, ids = spec index. Episodes are
// spread over `threads` workers and returned in id order.
std::vector<EpisodeLog> EvaluatePolicy(const HeteroGraph& g,
                                       const EmbeddingTable& emb,
                                       const Policy& policy,
                                       std::span<const EpisodeSpec> specs,
                                       int threads = 1);

struct PolicyTrainingResult {
  QNetwork network;
  std::vector<double> episode_returns;  // undiscounted reward sums
};

// DQN training against the simulator over interactions sampled uniformly
// from `validation`. One TD update per executed turn once the buffer holds a
// full batch; target network synced every target_sync_every episodes.
PolicyTrainingResult TrainPolicy(const HeteroGraph& g, const EmbeddingTable& emb,
                                 std::span<const Interaction> validation,
                                 const DqnConfig& config, int episodes,
                                 int top_k, int max_turns);

// One JSON object per turn: episode_id, policy, turn, action, payload,
// answer, reward, candidates.
void WriteEpisodeLogJsonl(std::ostream& os, std::span<const EpisodeLog> logs);

std::string_view ActionName(Action action);

}  // namespace cpr
