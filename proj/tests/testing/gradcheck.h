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

#include <random>
#include <vector>

#include "cpr/embedding.h"
#include "cpr/fm_trainer.h"
#include "cpr/policy.h"

// Central finite-difference checks shared by the unit tests and the
// acceptance suite. Errors are ||analytic - numeric|| / max(||analytic||,
// ||numeric||) over every parameter the loss depends on.
namespace cpr::testing {

double FmGradientRelativeError(EmbeddingTable emb, const ItemPairSample& s,
                               double l2, double h = 1e-5);
double FmGradientRelativeError(EmbeddingTable emb, const AttributePairSample& s,
                               double l2, double h = 1e-5);

ItemPairSample RandomItemPair(const VertexCounts& counts, std::mt19937_64& rng);
// Needs at least two attributes.
AttributePairSample RandomAttributePair(const VertexCounts& counts,
                                        std::mt19937_64& rng);

struct DqnInstance {
  QNetwork net;
  QNetwork target;
  std::vector<Transition> batch;
  double gamma = 0.999;
};

// Encoded states from random histories; every hidden pre-activation stays at
// least `margin` away from the ReLU kink so central differences are valid.
DqnInstance RandomDqnInstance(std::mt19937_64& rng, int max_turns = 15,
                              int hidden = 16, int batch = 8,
                              double margin = 1e-3);

double DqnGradientRelativeError(const DqnInstance& instance, double h = 1e-6);

}  // namespace cpr::testing
