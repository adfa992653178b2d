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
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace cpr {

// The consultation step has exactly two actions.
enum class Action : std::uint8_t { kAsk = 0, kRecommend = 1 };
inline constexpr int kNumActions = 2;

// What happened in one turn, as seen by the state encoder.
enum class TurnOutcome : std::uint8_t {
  kAskAccepted = 0,
  kAskRejected = 1,
  kRecRejected = 2,
  kRecAccepted = 3,  // only ever the final turn of a successful episode
};

// State vector layout: max_turns history slots of kHistorySlotWidth reals
// (an empty slot is all zeros, otherwise one-hot at the outcome index),
// followed by kLengthBins one-hot bins over the candidate item count.
inline constexpr int kHistorySlotWidth = 4;
inline constexpr int kLengthBins = 8;

int StateDimension(int max_turns);

// Bins: [1], [2,4], [5,8], [9,16], [17,32], [33,64], [65,256], [257,inf).
// Returns -1 for an empty candidate set (no bin is set).
int CandidateCountBin(std::size_t candidate_count);

// Throws if history is longer than max_turns.
std::vector<double> EncodeState(std::size_t candidate_count,
                                std::span<const TurnOutcome> history,
                                int max_turns);

struct QValues {
  double ask = 0.0;
  double recommend = 0.0;

  double operator[](Action a) const { return a == Action::kAsk ? ask : recommend; }
};

// input -> hidden (ReLU) -> 2 linear outputs. Output 0 is ask, 1 recommend.
class QNetwork {
 public:
  QNetwork() = default;
  // Zero weights and biases.
  QNetwork(int input_dim, int hidden_dim);

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init for weights and biases.
  static QNetwork Random(int input_dim, int hidden_dim, std::mt19937_64& rng);

  int input_dim() const { return input_dim_; }
  int hidden_dim() const { return hidden_dim_; }

  QValues Forward(std::span<const double> state) const;

  // Forward pass that keeps hidden pre-activations, for backprop.
  QValues Forward(std::span<const double> state,
                  std::vector<double>& hidden_pre) const;

  // Flat parameter vector: W1 (hidden x input, row-major), b1, W2 (2 x
  // hidden, row-major), b2.
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  std::size_t parameter_count() const { return params_.size(); }

  double& w1(int h, int i) { return params_[h * input_dim_ + i]; }
  double& b1(int h) { return params_[w1_size() + h]; }
  double& w2(int a, int h) { return params_[w1_size() + hidden_dim_ + a * hidden_dim_ + h]; }
  double& b2(int a) { return params_[w1_size() + hidden_dim_ + kNumActions * hidden_dim_ + a]; }

  // Accumulates d(scale * Q(state, action))/d(params) into `grad`.
  void Backward(std::span<const double> state,
                std::span<const double> hidden_pre, Action action, double scale,
                std::span<double> grad) const;

  friend bool operator==(const QNetwork&, const QNetwork&) = default;

 private:
  std::size_t w1_size() const {
    return static_cast<std::size_t>(hidden_dim_) * input_dim_;
  }
  void CheckInput(std::span<const double> state) const;

  int input_dim_ = 0;
  int hidden_dim_ = 0;
  std::vector<double> params_;
};

struct Transition {
  std::vector<double> state;
  Action action = Action::kAsk;
  double reward = 0.0;
  std::vector<double> next_state;  // empty when done
  bool done = false;
};

// Fixed-capacity ring buffer; the oldest transition is evicted first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 50000);

  void Push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }

  // Uniform sampling with replacement.
  std::vector<const Transition*> Sample(std::size_t batch,
                                        std::mt19937_64& rng) const;

  // i-th oldest transition.
  const Transition& at(std::size_t i) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // next slot to overwrite once full
  std::vector<Transition> items_;
};

struct RewardConfig {
  double rec_success = 1.0;
  double rec_fail = -0.1;
  double ask_success = 0.01;
  double ask_fail = -0.1;
  double quit = -0.3;
};

enum class RewardEvent { kRecSuccess, kRecFail, kAskAccept, kAskReject, kQuit };

double RewardFor(RewardEvent event, const RewardConfig& rewards);

struct DqnConfig {
  std::size_t batch_size = 128;
  std::size_t replay_capacity = 50000;
  double gamma = 0.999;
  int target_sync_every = 20;  // episodes
  int hidden_dim = 64;
  double learning_rate = 1e-4;
  double rmsprop_decay = 0.99;
  double rmsprop_epsilon = 1e-8;
  double epsilon_start = 0.9;
  double epsilon_end = 0.1;
  double epsilon_decay_steps = 1000.0;
  RewardConfig rewards;
  std::uint64_t seed = 0;

  // Throws on out-of-range values.
  void Validate() const;
};

// end + (start - end) * exp(-steps / decay)
double EpsilonAt(const DqnConfig& config, std::uint64_t steps);

// Greedy with probability 1 - epsilon (ties go to ask), otherwise uniform.
Action SelectAction(const QNetwork& net, std::span<const double> state,
                    double epsilon, std::mt19937_64& rng);
Action GreedyAction(const QValues& q);

// Per-parameter adaptive step: v = d*v + (1-d)*g^2; p -= lr*g/(sqrt(v)+eps).
class RmsProp {
 public:
  RmsProp() = default;
  RmsProp(std::size_t parameter_count, double learning_rate, double decay,
          double epsilon);

  void Step(std::span<double> params, std::span<const double> grad);

 private:
  double learning_rate_ = 1e-4;
  double decay_ = 0.99;
  double epsilon_ = 1e-8;
  std::vector<double> square_avg_;
};

// Mean squared TD error over the batch, with targets
// y = r + gamma * max_a Q_target(s', a) (y = r when done).
double TdLoss(const QNetwork& net, const QNetwork& target,
              std::span<const Transition* const> batch, double gamma);

// Same loss, plus its gradient with respect to `net`'s parameters (targets
// held fixed). `grad` is overwritten.
double TdLossAndGradient(const QNetwork& net, const QNetwork& target,
                         std::span<const Transition* const> batch, double gamma,
                         std::vector<double>& grad);

// Online network, target network, optimizer and replay memory.
class DqnLearner {
 public:
  DqnLearner(int input_dim, const DqnConfig& config);

  const QNetwork& network() const { return net_; }
  QNetwork& network() { return net_; }
  const QNetwork& target() const { return target_; }
  ReplayBuffer& buffer() { return buffer_; }
  const DqnConfig& config() const { return config_; }
  std::mt19937_64& rng() { return rng_; }

  // One optimizer step on a sampled batch; nullopt while the buffer holds
  // fewer than batch_size transitions. Throws on a non-finite loss.
  std::optional<double> Update();

  // One optimizer step on an explicit batch.
  double UpdateOn(std::span<const Transition* const> batch);

  void SyncTarget() { target_ = net_; }

 private:
  DqnConfig config_;
  std::mt19937_64 rng_;
  QNetwork net_;
  QNetwork target_;
  RmsProp optimizer_;
  ReplayBuffer buffer_;
  std::vector<double> grad_;
};

struct PolicyCheckpoint {
  QNetwork network;
  DqnConfig config;
  int max_turns = 15;
};

// "CPR-POL-1" line, JSON header line (config echo, shapes), then parameters
// as little-endian doubles.
void SavePolicy(const std::string& path, const QNetwork& net,
                const DqnConfig& config, int max_turns);
PolicyCheckpoint LoadPolicy(const std::string& path);

}  // namespace cpr
