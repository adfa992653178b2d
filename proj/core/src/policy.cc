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

#include "cpr/policy.h"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "checkpoint_io.h"
#include "cpr/error.h"

namespace cpr {

namespace {
constexpr std::string_view kPolicyMagic = "CPR-POL-1";
}

int StateDimension(int max_turns) {
  return max_turns * kHistorySlotWidth + kLengthBins;
}

int CandidateCountBin(std::size_t n) {
  if (n == 0) return -1;
  if (n == 1) return 0;
  if (n <= 4) return 1;
  if (n <= 8) return 2;
  if (n <= 16) return 3;
  if (n <= 32) return 4;
  if (n <= 64) return 5;
  if (n <= 256) return 6;
  return 7;
}

std::vector<double> EncodeState(std::size_t candidate_count,
                                std::span<const TurnOutcome> history,
                                int max_turns) {
  if (max_turns <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "max_turns must be positive");
  }
  if (history.size() > static_cast<std::size_t>(max_turns)) {
    throw Error(ErrorCode::kInvalidArgument,
                "history of " + std::to_string(history.size()) +
                    " turns exceeds max_turns " + std::to_string(max_turns));
  }
  std::vector<double> s(StateDimension(max_turns), 0.0);
  for (std::size_t t = 0; t < history.size(); ++t) {
    s[t * kHistorySlotWidth + static_cast<int>(history[t])] = 1.0;
  }
  const int bin = CandidateCountBin(candidate_count);
  if (bin >= 0) s[max_turns * kHistorySlotWidth + bin] = 1.0;
  return s;
}

QNetwork::QNetwork(int input_dim, int hidden_dim)
    : input_dim_(input_dim), hidden_dim_(hidden_dim) {
  if (input_dim <= 0 || hidden_dim <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "network dimensions must be positive");
  }
  params_.assign(w1_size() + hidden_dim_ + kNumActions * hidden_dim_ + kNumActions,
                 0.0);
}

QNetwork QNetwork::Random(int input_dim, int hidden_dim, std::mt19937_64& rng) {
  QNetwork net(input_dim, hidden_dim);
  std::uniform_real_distribution<double> layer1(-1.0 / std::sqrt(input_dim),
                                                1.0 / std::sqrt(input_dim));
  std::uniform_real_distribution<double> layer2(-1.0 / std::sqrt(hidden_dim),
                                                1.0 / std::sqrt(hidden_dim));
  const std::size_t first = net.w1_size() + hidden_dim;
  for (std::size_t i = 0; i < net.params_.size(); ++i) {
    net.params_[i] = i < first ? layer1(rng) : layer2(rng);
  }
  return net;
}

void QNetwork::CheckInput(std::span<const double> state) const {
  if (state.size() != static_cast<std::size_t>(input_dim_)) {
    throw Error(ErrorCode::kInvalidArgument,
                "state has dimension " + std::to_string(state.size()) +
                    ", network expects " + std::to_string(input_dim_));
  }
}

QValues QNetwork::Forward(std::span<const double> state) const {
  std::vector<double> hidden;
  return Forward(state, hidden);
}

QValues QNetwork::Forward(std::span<const double> state,
                          std::vector<double>& hidden_pre) const {
  CheckInput(state);
  hidden_pre.assign(hidden_dim_, 0.0);
  const double* w = params_.data();
  const double* b = w + w1_size();
  for (int h = 0; h < hidden_dim_; ++h) {
    double z = b[h];
    const double* row = w + static_cast<std::size_t>(h) * input_dim_;
    for (int i = 0; i < input_dim_; ++i) z += row[i] * state[i];
    hidden_pre[h] = z;
  }
  const double* w_out = b + hidden_dim_;
  const double* b_out = w_out + kNumActions * hidden_dim_;
  double out[kNumActions];
  for (int a = 0; a < kNumActions; ++a) {
    double z = b_out[a];
    for (int h = 0; h < hidden_dim_; ++h) {
      z += w_out[a * hidden_dim_ + h] * std::max(0.0, hidden_pre[h]);
    }
    out[a] = z;
  }
  return {out[0], out[1]};
}

void QNetwork::Backward(std::span<const double> state,
                        std::span<const double> hidden_pre, Action action,
                        double scale, std::span<double> grad) const {
  const int a = static_cast<int>(action);
  const std::size_t b1_off = w1_size();
  const std::size_t w2_off = b1_off + hidden_dim_;
  const std::size_t b2_off = w2_off + kNumActions * hidden_dim_;
  const double* w_out = params_.data() + w2_off;
  grad[b2_off + a] += scale;
  for (int h = 0; h < hidden_dim_; ++h) {
    const double z = hidden_pre[h];
    if (z > 0.0) {
      grad[w2_off + a * hidden_dim_ + h] += scale * z;
      const double dz = scale * w_out[a * hidden_dim_ + h];
      grad[b1_off + h] += dz;
      double* row = grad.data() + static_cast<std::size_t>(h) * input_dim_;
      for (int i = 0; i < input_dim_; ++i) row[i] += dz * state[i];
    }
  }
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) {
    throw Error(ErrorCode::kInvalidArgument, "replay capacity must be positive");
  }
}

void ReplayBuffer::Push(Transition t) {
  if (t.done && !t.next_state.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "terminal transition must not carry a next state");
  }
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
    return;
  }
  items_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= items_.size()) throw Error(ErrorCode::kOutOfRange, "replay index");
  return items_[(head_ + i) % items_.size()];
}

std::vector<const Transition*> ReplayBuffer::Sample(std::size_t batch,
                                                    std::mt19937_64& rng) const {
  if (items_.empty()) {
    throw Error(ErrorCode::kFailedPrecondition, "sampling from an empty buffer");
  }
  std::uniform_int_distribution<std::size_t> dist(0, items_.size() - 1);
  std::vector<const Transition*> out;
  out.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) out.push_back(&items_[dist(rng)]);
  return out;
}

double RewardFor(RewardEvent event, const RewardConfig& r) {
  switch (event) {
    case RewardEvent::kRecSuccess: return r.rec_success;
    case RewardEvent::kRecFail: return r.rec_fail;
    case RewardEvent::kAskAccept: return r.ask_success;
    case RewardEvent::kAskReject: return r.ask_fail;
    case RewardEvent::kQuit: return r.quit;
  }
  return 0.0;
}

void DqnConfig::Validate() const {
  auto bad = [](const std::string& what) {
    throw Error(ErrorCode::kInvalidArgument, "invalid DQN config: " + what);
  };
  if (!(gamma > 0.0 && gamma <= 1.0)) bad("gamma must lie in (0, 1]");
  if (batch_size == 0 || batch_size > replay_capacity) {
    bad("batch size must be in [1, replay capacity]");
  }
  if (target_sync_every <= 0) bad("target_sync_every must be positive");
  if (hidden_dim <= 0) bad("hidden_dim must be positive");
  if (!(learning_rate > 0.0)) bad("learning rate must be positive");
  if (epsilon_start < 0 || epsilon_start > 1 || epsilon_end < 0 || epsilon_end > 1) {
    bad("epsilon bounds must lie in [0, 1]");
  }
  if (!(epsilon_decay_steps > 0.0)) bad("epsilon decay must be positive");
}

double EpsilonAt(const DqnConfig& c, std::uint64_t steps) {
  return c.epsilon_end + (c.epsilon_start - c.epsilon_end) *
                             std::exp(-static_cast<double>(steps) /
                                      c.epsilon_decay_steps);
}

Action GreedyAction(const QValues& q) {
  return q.recommend > q.ask ? Action::kRecommend : Action::kAsk;
}

Action SelectAction(const QNetwork& net, std::span<const double> state,
                    double epsilon, std::mt19937_64& rng) {
  if (epsilon < 0.0 || epsilon > 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "epsilon must lie in [0, 1]");
  }
  if (epsilon > 0.0) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) < epsilon) {
      std::uniform_int_distribution<int> pick(0, kNumActions - 1);
      return static_cast<Action>(pick(rng));
    }
  }
  return GreedyAction(net.Forward(state));
}

RmsProp::RmsProp(std::size_t parameter_count, double learning_rate,
                 double decay, double epsilon)
    : learning_rate_(learning_rate),
      decay_(decay),
      epsilon_(epsilon),
      square_avg_(parameter_count, 0.0) {}

void RmsProp::Step(std::span<double> params, std::span<const double> grad) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    square_avg_[i] = decay_ * square_avg_[i] + (1.0 - decay_) * grad[i] * grad[i];
    params[i] -= learning_rate_ * grad[i] / (std::sqrt(square_avg_[i]) + epsilon_);
  }
}

namespace {

double Target(const QNetwork& target, const Transition& t, double gamma) {
  if (t.done) return t.reward;
  const QValues next = target.Forward(t.next_state);
  return t.reward + gamma * std::max(next.ask, next.recommend);
}

}  // namespace

double TdLoss(const QNetwork& net, const QNetwork& target,
              std::span<const Transition* const> batch, double gamma) {
  if (batch.empty()) throw Error(ErrorCode::kInvalidArgument, "empty TD batch");
  double loss = 0.0;
  for (const Transition* t : batch) {
    const double err = net.Forward(t->state)[t->action] - Target(target, *t, gamma);
    loss += err * err;
  }
  return loss / static_cast<double>(batch.size());
}

double TdLossAndGradient(const QNetwork& net, const QNetwork& target,
                         std::span<const Transition* const> batch, double gamma,
                         std::vector<double>& grad) {
  if (batch.empty()) throw Error(ErrorCode::kInvalidArgument, "empty TD batch");
  grad.assign(net.parameter_count(), 0.0);
  const double n = static_cast<double>(batch.size());
  std::vector<double> hidden;
  double loss = 0.0;
  for (const Transition* t : batch) {
    const double y = Target(target, *t, gamma);
    const double err = net.Forward(t->state, hidden)[t->action] - y;
    loss += err * err;
    net.Backward(t->state, hidden, t->action, 2.0 * err / n, grad);
  }
  return loss / n;
}

DqnLearner::DqnLearner(int input_dim, const DqnConfig& config)
    : config_(config), rng_(config.seed), buffer_(config.replay_capacity) {
  config_.Validate();
  net_ = QNetwork::Random(input_dim, config_.hidden_dim, rng_);
  target_ = net_;
  optimizer_ = RmsProp(net_.parameter_count(), config_.learning_rate,
                       config_.rmsprop_decay, config_.rmsprop_epsilon);
}

double DqnLearner::UpdateOn(std::span<const Transition* const> batch) {
  const double loss =
      TdLossAndGradient(net_, target_, batch, config_.gamma, grad_);
  if (!std::isfinite(loss)) {
    throw Error(ErrorCode::kInternal, "non-finite TD loss");
  }
  optimizer_.Step(net_.parameters(), grad_);
  return loss;
}

std::optional<double> DqnLearner::Update() {
  if (buffer_.size() < config_.batch_size) return std::nullopt;
  const auto batch = buffer_.Sample(config_.batch_size, rng_);
  return UpdateOn(batch);
}

void SavePolicy(const std::string& path, const QNetwork& net,
                const DqnConfig& c, int max_turns) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::kNotFound, "cannot write " + path);
  nlohmann::json header = {
      {"input_dim", net.input_dim()},
      {"hidden_dim", net.hidden_dim()},
      {"actions", kNumActions},
      {"max_turns", max_turns},
      {"config",
       {{"batch_size", c.batch_size},
        {"replay_capacity", c.replay_capacity},
        {"gamma", c.gamma},
        {"target_sync_every", c.target_sync_every},
        {"hidden_dim", c.hidden_dim},
        {"learning_rate", c.learning_rate},
        {"rmsprop_decay", c.rmsprop_decay},
        {"rmsprop_epsilon", c.rmsprop_epsilon},
        {"epsilon_start", c.epsilon_start},
        {"epsilon_end", c.epsilon_end},
        {"epsilon_decay_steps", c.epsilon_decay_steps},
        {"seed", c.seed},
        {"rewards",
         {{"rec_success", c.rewards.rec_success},
          {"rec_fail", c.rewards.rec_fail},
          {"ask_success", c.rewards.ask_success},
          {"ask_fail", c.rewards.ask_fail},
          {"quit", c.rewards.quit}}}}},
  };
  os << kPolicyMagic << '\n' << header.dump() << '\n';
  internal::WriteDoubles(os, net.parameters());
  if (!os) throw Error(ErrorCode::kDataLoss, "failed writing " + path);
}

PolicyCheckpoint LoadPolicy(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::kNotFound, "cannot open " + path);
  internal::ExpectMagic(is, kPolicyMagic, path);
  std::string line;
  std::getline(is, line);
  PolicyCheckpoint ck;
  try {
    const nlohmann::json h = nlohmann::json::parse(line);
    if (h.at("actions").get<int>() != kNumActions) {
      throw Error(ErrorCode::kDataLoss, path + ": action space must have size 2");
    }
    const auto& c = h.at("config");
    ck.config.batch_size = c.at("batch_size").get<std::size_t>();
    ck.config.replay_capacity = c.at("replay_capacity").get<std::size_t>();
    ck.config.gamma = c.at("gamma").get<double>();
    ck.config.target_sync_every = c.at("target_sync_every").get<int>();
    ck.config.hidden_dim = c.at("hidden_dim").get<int>();
    ck.config.learning_rate = c.at("learning_rate").get<double>();
    ck.config.rmsprop_decay = c.at("rmsprop_decay").get<double>();
    ck.config.rmsprop_epsilon = c.at("rmsprop_epsilon").get<double>();
    ck.config.epsilon_start = c.at("epsilon_start").get<double>();
    ck.config.epsilon_end = c.at("epsilon_end").get<double>();
    ck.config.epsilon_decay_steps = c.at("epsilon_decay_steps").get<double>();
    ck.config.seed = c.at("seed").get<std::uint64_t>();
    const auto& r = c.at("rewards");
    ck.config.rewards = {r.at("rec_success").get<double>(),
                         r.at("rec_fail").get<double>(),
                         r.at("ask_success").get<double>(),
                         r.at("ask_fail").get<double>(),
                         r.at("quit").get<double>()};
    ck.max_turns = h.at("max_turns").get<int>();
    ck.network = QNetwork(h.at("input_dim").get<int>(), h.at("hidden_dim").get<int>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kDataLoss, path + ": bad header: " + e.what());
  }
  internal::ReadDoubles(is, ck.network.parameters(), path);
  if (ck.network.input_dim() != StateDimension(ck.max_turns)) {
    throw Error(ErrorCode::kDataLoss, path + ": input dimension does not match max_turns");
  }
  return ck;
}

}  // namespace cpr
