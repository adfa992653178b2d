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

#include "testing/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <span>

namespace cpr::testing {
namespace {

using RowKey = std::pair<VertexKind, std::uint32_t>;

std::map<RowKey, std::vector<double>> Dense(const SampleGradient& g) {
  std::map<RowKey, std::vector<double>> out;
  for (const auto& row : g.rows) {
    auto& acc = out[{row.kind, row.index}];
    if (acc.empty()) acc.assign(row.grad.size(), 0.0);
    for (std::size_t k = 0; k < row.grad.size(); ++k) acc[k] += row.grad[k];
  }
  return out;
}

double Ratio(double diff2, double a2, double n2) {
  return std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
}

template <typename Sample>
double FmError(EmbeddingTable& emb, const Sample& s, double l2, double h) {
  const auto analytic = Dense(ComputeGradient(emb, s, l2));
  double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
  for (const auto& [key, grad] : analytic) {
    auto row = emb.row(key.first, key.second);
    for (std::size_t k = 0; k < row.size(); ++k) {
      const double saved = row[k];
      row[k] = saved + h;
      const double up = SampleLoss(emb, s, l2);
      row[k] = saved - h;
      const double down = SampleLoss(emb, s, l2);
      row[k] = saved;
      const double numeric = (up - down) / (2 * h);
      diff2 += (grad[k] - numeric) * (grad[k] - numeric);
      a2 += grad[k] * grad[k];
      n2 += numeric * numeric;
    }
  }
  return Ratio(diff2, a2, n2);
}

AttributeSet RandomSubset(std::uint32_t n, std::size_t max_size,
                          std::mt19937_64& rng) {
  std::vector<AttributeId> all(n);
  for (AttributeId p = 0; p < n; ++p) all[p] = p;
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(std::uniform_int_distribution<std::size_t>(
      0, std::min<std::size_t>(max_size, n))(rng));
  return ids::Normalize(all);
}

std::vector<double> RandomState(std::mt19937_64& rng, int max_turns) {
  const int len = std::uniform_int_distribution<int>(0, max_turns)(rng);
  std::uniform_int_distribution<int> outcome(0, 2);
  std::vector<TurnOutcome> history;
  for (int t = 0; t < len; ++t) history.push_back(static_cast<TurnOutcome>(outcome(rng)));
  const std::size_t n = std::uniform_int_distribution<std::size_t>(0, 400)(rng);
  return EncodeState(n, history, max_turns);
}

bool AwayFromKink(const QNetwork& net, std::span<const double> state,
                  double margin) {
  std::vector<double> hidden;
  net.Forward(state, hidden);
  return std::all_of(hidden.begin(), hidden.end(),
                     [&](double z) { return std::abs(z) >= margin; });
}

}  // namespace

double FmGradientRelativeError(EmbeddingTable emb, const ItemPairSample& s,
                               double l2, double h) {
  return FmError(emb, s, l2, h);
}

double FmGradientRelativeError(EmbeddingTable emb, const AttributePairSample& s,
                               double l2, double h) {
  return FmError(emb, s, l2, h);
}

ItemPairSample RandomItemPair(const VertexCounts& counts, std::mt19937_64& rng) {
  ItemPairSample s;
  s.user = std::uniform_int_distribution<UserId>(0, counts.users - 1)(rng);
  std::uniform_int_distribution<ItemId> item(0, counts.items - 1);
  s.positive = item(rng);
  do {
    s.negative = item(rng);
  } while (s.negative == s.positive);
  s.accepted = RandomSubset(counts.attributes, 3, rng);
  return s;
}

AttributePairSample RandomAttributePair(const VertexCounts& counts,
                                        std::mt19937_64& rng) {
  AttributePairSample s;
  s.user = std::uniform_int_distribution<UserId>(0, counts.users - 1)(rng);
  std::vector<AttributeId> all(counts.attributes);
  for (AttributeId p = 0; p < counts.attributes; ++p) all[p] = p;
  std::shuffle(all.begin(), all.end(), rng);
  s.positive = all[0];
  s.negative = all[1];
  const std::size_t k = std::uniform_int_distribution<std::size_t>(
      0, std::min<std::size_t>(3, all.size() - 2))(rng);
  s.accepted = ids::Normalize({all.begin() + 2, all.begin() + 2 + k});
  return s;
}

DqnInstance RandomDqnInstance(std::mt19937_64& rng, int max_turns, int hidden,
                              int batch, double margin) {
  const int dim = StateDimension(max_turns);
  DqnInstance inst;
  inst.net = QNetwork::Random(dim, hidden, rng);
  inst.target = QNetwork::Random(dim, hidden, rng);
  std::uniform_real_distribution<double> reward(-0.3, 1.0);
  std::bernoulli_distribution coin(0.5);
  while (static_cast<int>(inst.batch.size()) < batch) {
    Transition t;
    t.state = RandomState(rng, max_turns);
    if (!AwayFromKink(inst.net, t.state, margin)) continue;
    t.action = coin(rng) ? Action::kAsk : Action::kRecommend;
    t.reward = reward(rng);
    t.done = coin(rng);
    if (!t.done) t.next_state = RandomState(rng, max_turns);
    inst.batch.push_back(std::move(t));
  }
  return inst;
}

double DqnGradientRelativeError(const DqnInstance& instance, double h) {
  std::vector<const Transition*> batch;
  for (const auto& t : instance.batch) batch.push_back(&t);
  std::vector<double> analytic;
  TdLossAndGradient(instance.net, instance.target, batch, instance.gamma, analytic);
  QNetwork net = instance.net;
  auto params = net.parameters();
  double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    const double up = TdLoss(net, instance.target, batch, instance.gamma);
    params[i] = saved - h;
    const double down = TdLoss(net, instance.target, batch, instance.gamma);
    params[i] = saved;
    const double numeric = (up - down) / (2 * h);
    diff2 += (analytic[i] - numeric) * (analytic[i] - numeric);
    a2 += analytic[i] * analytic[i];
    n2 += numeric * numeric;
  }
  return Ratio(diff2, a2, n2);
}

}  // namespace cpr::testing
