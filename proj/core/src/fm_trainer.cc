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

#include "cpr/fm_trainer.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <glog/logging.h>

#include "cpr/error.h"

namespace cpr {

namespace {

// k-th element (0-based) of {0..n-1} \ excluded, where excluded is sorted.
std::uint32_t NthOutside(std::uint32_t k, std::span<const std::uint32_t> excluded) {
  std::uint32_t value = k;
  for (std::uint32_t x : excluded) {
    if (x <= value) {
      ++value;
    } else {
      break;
    }
  }
  return value;
}

std::uint32_t UniformIndex(std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return static_cast<std::uint32_t>(dist(rng));
}

struct Touched {
  VertexKind kind;
  std::uint32_t index;
};

double SquaredNorm(std::span<const double> x) { return Dot(x, x); }

// Shared pairwise machinery. `anchor` is the user row, `pos`/`neg` the two
// compared rows and `context` the accepted attribute rows.
struct PairView {
  std::span<const double> anchor;
  std::span<const double> pos;
  std::span<const double> neg;
  std::vector<std::span<const double>> context;
};

double PairMargin(const PairView& v) {
  double d = 0.0;
  for (std::size_t i = 0; i < v.pos.size(); ++i) {
    double w = v.anchor[i];
    for (const auto& c : v.context) w += c[i];
    d += (v.pos[i] - v.neg[i]) * w;
  }
  return d;
}

SampleGradient PairGradient(const PairView& v, double margin, double l2,
                            const std::vector<Touched>& rows) {
  // rows = {anchor, pos, neg, context...}
  const std::size_t dim = v.pos.size();
  const double coef = -Sigmoid(-margin);  // d(-ln sigmoid(m))/dm
  std::vector<double> sum_ctx(dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) {
    sum_ctx[i] = v.anchor[i];
    for (const auto& c : v.context) sum_ctx[i] += c[i];
  }
  SampleGradient g;
  g.rows.reserve(rows.size());
  auto add = [&](const Touched& t, std::span<const double> value,
                 auto&& dmargin) {
    SampleGradient::Row r{t.kind, t.index, std::vector<double>(dim)};
    for (std::size_t i = 0; i < dim; ++i) {
      r.grad[i] = coef * dmargin(i) + 2.0 * l2 * value[i];
    }
    g.rows.push_back(std::move(r));
  };
  add(rows[0], v.anchor, [&](std::size_t i) { return v.pos[i] - v.neg[i]; });
  add(rows[1], v.pos, [&](std::size_t i) { return sum_ctx[i]; });
  add(rows[2], v.neg, [&](std::size_t i) { return -sum_ctx[i]; });
  for (std::size_t c = 0; c < v.context.size(); ++c) {
    add(rows[3 + c], v.context[c],
        [&](std::size_t i) { return v.pos[i] - v.neg[i]; });
  }
  return g;
}

double PairLoss(const PairView& v, double l2) {
  double reg = SquaredNorm(v.anchor) + SquaredNorm(v.pos) + SquaredNorm(v.neg);
  for (const auto& c : v.context) reg += SquaredNorm(c);
  return -LogSigmoid(PairMargin(v)) + l2 * reg;
}

PairView View(const EmbeddingTable& emb, const ItemPairSample& s) {
  PairView v{emb.user(s.user), emb.item(s.positive), emb.item(s.negative), {}};
  for (AttributeId p : s.accepted) v.context.push_back(emb.attribute(p));
  return v;
}

PairView View(const EmbeddingTable& emb, const AttributePairSample& s) {
  PairView v{emb.user(s.user), emb.attribute(s.positive),
             emb.attribute(s.negative), {}};
  for (AttributeId p : s.accepted) v.context.push_back(emb.attribute(p));
  return v;
}

std::vector<Touched> Rows(const ItemPairSample& s) {
  std::vector<Touched> r{{VertexKind::kUser, s.user},
                         {VertexKind::kItem, s.positive},
                         {VertexKind::kItem, s.negative}};
  for (AttributeId p : s.accepted) r.push_back({VertexKind::kAttribute, p});
  return r;
}

std::vector<Touched> Rows(const AttributePairSample& s) {
  std::vector<Touched> r{{VertexKind::kUser, s.user},
                         {VertexKind::kAttribute, s.positive},
                         {VertexKind::kAttribute, s.negative}};
  for (AttributeId p : s.accepted) r.push_back({VertexKind::kAttribute, p});
  return r;
}

void Validate(const ItemPairSample& s) {
  if (s.positive == s.negative) {
    throw Error(ErrorCode::kInvalidArgument, "item sample with positive == negative");
  }
}

void Validate(const AttributePairSample& s) {
  if (s.positive == s.negative || ids::Contains(s.accepted, s.positive) ||
      ids::Contains(s.accepted, s.negative)) {
    throw Error(ErrorCode::kInvalidArgument,
                "attribute sample overlaps its accepted set");
  }
}

}  // namespace

double Sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double LogSigmoid(double x) {
  if (x >= 0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

TrainingCorpus CollectTrainingCorpus(const HeteroGraph& g,
                                     std::span<const Interaction> interactions,
                                     std::mt19937_64& rng) {
  const VertexCounts& n = g.counts();
  std::map<UserId, ItemSet> interacted;
  for (const Interaction& x : interactions) {
    g.CheckVertex({VertexKind::kUser, x.user});
    g.CheckVertex({VertexKind::kItem, x.item});
    interacted[x.user].push_back(x.item);
  }
  for (auto& [u, items] : interacted) items = ids::Normalize(std::move(items));

  TrainingCorpus corpus;
  std::size_t skipped = 0;
  for (const Interaction& x : interactions) {
    auto item_attrs = g.AttributesOfItem(x.item);
    if (item_attrs.empty()) {
      ++skipped;
      continue;
    }
    const ItemSet& seen = interacted[x.user];
    const std::size_t global_pool = n.items - seen.size();
    const std::size_t outside_attrs = n.attributes - item_attrs.size();

    for (AttributeId first : item_attrs) {
      std::vector<AttributeId> order{first};
      for (AttributeId p : item_attrs) {
        if (p != first) order.push_back(p);
      }
      std::shuffle(order.begin() + 1, order.end(), rng);

      AttributeSet accepted;
      ItemSet candidates;
      for (std::size_t len = 1; len <= order.size(); ++len) {
        const AttributeId added = order[len - 1];
        ids::Insert(accepted, added);
        auto with = g.ItemsWithAttribute(added);
        candidates = len == 1 ? ItemSet(with.begin(), with.end())
                              : ids::Intersect(candidates, with);

        if (global_pool > 0) {
          const ItemId neg = NthOutside(UniformIndex(global_pool, rng), seen);
          corpus.global_items.push_back(
              {x.user, x.item, neg, accepted, ItemSampleKind::kGlobal});
        }
        const ItemSet pool = ids::Subtract(candidates, seen);
        if (!pool.empty()) {
          const ItemId neg = pool[UniformIndex(pool.size(), rng)];
          corpus.candidate_items.push_back(
              {x.user, x.item, neg, accepted, ItemSampleKind::kCandidate});
        }
        if (outside_attrs > 0) {
          for (AttributeId pos : item_attrs) {
            if (ids::Contains(accepted, pos)) continue;
            const AttributeId neg =
                NthOutside(UniformIndex(outside_attrs, rng), item_attrs);
            corpus.attributes.push_back({x.user, pos, neg, accepted});
          }
        }
      }
    }
  }
  if (skipped > 0) {
    LOG(WARNING) << "skipped " << skipped
                 << " interactions whose item has no attributes";
  }
  return corpus;
}

double SampleLoss(const EmbeddingTable& emb, const ItemPairSample& s, double l2) {
  Validate(s);
  return PairLoss(View(emb, s), l2);
}

double SampleLoss(const EmbeddingTable& emb, const AttributePairSample& s,
                  double l2) {
  Validate(s);
  return PairLoss(View(emb, s), l2);
}

SampleGradient ComputeGradient(const EmbeddingTable& emb,
                               const ItemPairSample& s, double l2) {
  Validate(s);
  const PairView v = View(emb, s);
  return PairGradient(v, PairMargin(v), l2, Rows(s));
}

SampleGradient ComputeGradient(const EmbeddingTable& emb,
                               const AttributePairSample& s, double l2) {
  Validate(s);
  const PairView v = View(emb, s);
  return PairGradient(v, PairMargin(v), l2, Rows(s));
}

double PairwiseLoss(const EmbeddingTable& emb, const TrainingCorpus& corpus,
                    double l2) {
  if (corpus.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "empty training corpus");
  }
  std::vector<std::vector<bool>> touched(kNumVertexKinds);
  for (int k = 0; k < kNumVertexKinds; ++k) {
    touched[k].assign(emb.counts().of(static_cast<VertexKind>(k)), false);
  }
  double loss = 0.0;
  auto mark = [&](const std::vector<Touched>& rows) {
    for (const Touched& t : rows) touched[static_cast<int>(t.kind)][t.index] = true;
  };
  for (const auto* set : {&corpus.global_items, &corpus.candidate_items}) {
    for (const ItemPairSample& s : *set) {
      loss -= LogSigmoid(PairMargin(View(emb, s)));
      mark(Rows(s));
    }
  }
  for (const AttributePairSample& s : corpus.attributes) {
    loss -= LogSigmoid(PairMargin(View(emb, s)));
    mark(Rows(s));
  }
  double reg = 0.0;
  for (int k = 0; k < kNumVertexKinds; ++k) {
    for (std::uint32_t i = 0; i < touched[k].size(); ++i) {
      if (touched[k][i]) reg += SquaredNorm(emb.row(static_cast<VertexKind>(k), i));
    }
  }
  return loss + l2 * reg;
}

EpochResult SgdEpoch(EmbeddingTable& emb, const TrainingCorpus& corpus,
                     const TrainConfig& config, std::mt19937_64& rng) {
  if (config.lr_item < 0 || config.lr_attr < 0) {
    throw Error(ErrorCode::kInvalidArgument, "learning rates must be non-negative");
  }
  // Sample handles: 0 = D1, 1 = D2, 2 = D3.
  std::vector<std::pair<std::uint8_t, std::uint32_t>> order;
  order.reserve(corpus.size());
  for (std::uint32_t i = 0; i < corpus.global_items.size(); ++i) order.push_back({0, i});
  for (std::uint32_t i = 0; i < corpus.candidate_items.size(); ++i) order.push_back({1, i});
  for (std::uint32_t i = 0; i < corpus.attributes.size(); ++i) order.push_back({2, i});
  std::shuffle(order.begin(), order.end(), rng);

  for (const auto& [set, i] : order) {
    SampleGradient grad;
    double lr;
    if (set == 2) {
      grad = ComputeGradient(emb, corpus.attributes[i], config.l2);
      lr = config.lr_attr;
    } else {
      const auto& s = set == 0 ? corpus.global_items[i] : corpus.candidate_items[i];
      grad = ComputeGradient(emb, s, config.l2);
      lr = config.lr_item;
    }
    for (const auto& r : grad.rows) {
      for (double x : r.grad) {
        if (!std::isfinite(x)) {
          std::ostringstream os;
          os << "non-finite gradient on " << VertexKindName(r.kind) << ":"
             << r.index << " (sample set " << int{set} << ", #" << i << ")";
          throw Error(ErrorCode::kInternal, os.str());
        }
      }
    }
    for (const auto& r : grad.rows) {
      auto row = emb.row(r.kind, r.index);
      for (std::size_t k = 0; k < row.size(); ++k) row[k] -= lr * r.grad[k];
    }
  }
  return {PairwiseLoss(emb, corpus, config.l2)};
}

FmTrainingResult TrainEmbeddings(const HeteroGraph& g,
                                 std::span<const Interaction> train,
                                 const TrainConfig& config) {
  std::mt19937_64 rng(config.seed);
  FmTrainingResult result{
      EmbeddingTable::RandomUniform(config.dimension, g.counts(),
                                    config.init_range, rng),
      {}};
  const TrainingCorpus corpus = CollectTrainingCorpus(g, train, rng);
  if (corpus.empty()) {
    throw Error(ErrorCode::kFailedPrecondition,
                "training interactions produced no pairwise samples");
  }
  for (int e = 0; e < config.epochs; ++e) {
    result.epoch_losses.push_back(SgdEpoch(result.table, corpus, config, rng).loss);
  }
  return result;
}

}  // namespace cpr
