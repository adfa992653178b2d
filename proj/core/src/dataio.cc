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

#include "cpr/dataio.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cpr/error.h"

namespace cpr {

namespace {

std::vector<std::string_view> SplitTabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

bool ParseUint(std::string_view s, std::uint32_t& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

[[noreturn]] void Malformed(const std::string& source, std::size_t line,
                            const std::string& what) {
  throw Error(ErrorCode::kInvalidArgument,
              source + ":" + std::to_string(line) + ": " + what);
}

VertexId ParseVertex(std::string_view field, const std::string& source,
                     std::size_t line) {
  const std::size_t colon = field.find(':');
  if (colon == std::string_view::npos) {
    Malformed(source, line, "expected <kind>:<index>, got '" + std::string(field) + "'");
  }
  const auto kind = ParseVertexKind(field.substr(0, colon));
  std::uint32_t index = 0;
  if (!kind || !ParseUint(field.substr(colon + 1), index)) {
    Malformed(source, line, "bad vertex '" + std::string(field) + "'");
  }
  return {*kind, index};
}

}  // namespace

Dataset ParseEdgeList(std::istream& is, const std::string& source) {
  std::string raw;
  std::size_t line_no = 0;
  VertexCounts counts;
  bool have_header = false;
  std::vector<EdgeRecord> edges;
  std::vector<std::size_t> edge_lines;

  while (std::getline(is, raw)) {
    ++line_no;
    const std::string_view line = Trim(raw);
    if (!have_header) {
      const auto fields = SplitTabs(line);
      if (fields.empty() || fields[0] != "#vertices") {
        Malformed(source, line_no, "missing '#vertices' header line");
      }
      bool seen[3] = {false, false, false};
      for (std::size_t i = 1; i < fields.size(); ++i) {
        const std::size_t eq = fields[i].find('=');
        std::uint32_t value = 0;
        if (eq == std::string_view::npos || !ParseUint(fields[i].substr(eq + 1), value)) {
          Malformed(source, line_no, "bad header field '" + std::string(fields[i]) + "'");
        }
        const std::string_view key = fields[i].substr(0, eq);
        if (key == "users") {
          counts.users = value;
          seen[0] = true;
        } else if (key == "items") {
          counts.items = value;
          seen[1] = true;
        } else if (key == "attributes") {
          counts.attributes = value;
          seen[2] = true;
        } else {
          Malformed(source, line_no, "unknown header key '" + std::string(key) + "'");
        }
      }
      if (!(seen[0] && seen[1] && seen[2])) {
        Malformed(source, line_no, "header must give users, items and attributes");
      }
      have_header = true;
      continue;
    }
    if (line.empty() || line.front() == '#') continue;
    const auto fields = SplitTabs(line);
    if (fields.size() != 3) {
      Malformed(source, line_no, "expected 3 tab-separated fields");
    }
    const auto relation = ParseRelation(fields[0]);
    if (!relation) {
      Malformed(source, line_no, "unknown relation '" + std::string(fields[0]) + "'");
    }
    edges.push_back({*relation, ParseVertex(fields[1], source, line_no),
                     ParseVertex(fields[2], source, line_no)});
    edge_lines.push_back(line_no);
  }
  if (!have_header) Malformed(source, line_no + 1, "missing '#vertices' header line");

  Dataset d;
  try {
    d.graph = HeteroGraph::Build(counts, edges);
  } catch (const Error& e) {
    // Map "edge #i" back to the file line for the message.
    std::string msg = e.what();
    const std::size_t hash = msg.find("edge #");
    std::size_t idx = 0;
    if (hash != std::string::npos &&
        std::sscanf(msg.c_str() + hash, "edge #%zu", &idx) == 1 &&
        idx < edge_lines.size()) {
      msg = source + ":" + std::to_string(edge_lines[idx]) + ": " + msg;
    } else {
      msg = source + ": " + msg;
    }
    throw Error(e.code(), msg);
  }
  d.interactions = d.graph.Interactions();
  return d;
}

Dataset LoadDataset(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::kNotFound, "cannot open dataset " + path);
  return ParseEdgeList(is, path);
}

void WriteEdgeList(std::ostream& os, const HeteroGraph& g) {
  const VertexCounts& c = g.counts();
  os << "#vertices\tusers=" << c.users << "\titems=" << c.items
     << "\tattributes=" << c.attributes << '\n';
  for (const EdgeRecord& e : g.edges()) {
    os << RelationName(e.relation) << '\t' << VertexKindName(e.head.kind) << ':'
       << e.head.index << '\t' << VertexKindName(e.tail.kind) << ':'
       << e.tail.index << '\n';
  }
}

void SaveDataset(const std::string& path, const HeteroGraph& g) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error(ErrorCode::kNotFound, "cannot write " + path);
  WriteEdgeList(os, g);
}

PrunedGraph PruneRareAttributes(const HeteroGraph& g, std::uint32_t min_freq) {
  if (min_freq < 1) {
    throw Error(ErrorCode::kInvalidArgument, "min_freq must be >= 1");
  }
  const VertexCounts& c = g.counts();
  PrunedGraph out;
  std::vector<std::int64_t> remap(c.attributes, -1);
  for (AttributeId p = 0; p < c.attributes; ++p) {
    if (g.ItemsWithAttribute(p).size() >= min_freq) {
      remap[p] = static_cast<std::int64_t>(out.kept_attributes.size());
      out.kept_attributes.push_back(p);
    }
  }
  std::vector<EdgeRecord> edges;
  edges.reserve(g.edge_count());
  for (EdgeRecord e : g.edges()) {
    bool keep = true;
    for (VertexId* v : {&e.head, &e.tail}) {
      if (v->kind != VertexKind::kAttribute) continue;
      if (remap[v->index] < 0) {
        keep = false;
      } else {
        v->index = static_cast<std::uint32_t>(remap[v->index]);
      }
    }
    if (keep) edges.push_back(e);
  }
  out.graph = HeteroGraph::Build(
      {c.users, c.items, static_cast<std::uint32_t>(out.kept_attributes.size())},
      edges);
  return out;
}

InteractionSplit SplitInteractions(std::span<const Interaction> interactions,
                                   std::array<double, 3> ratios,
                                   std::uint64_t seed) {
  for (double r : ratios) {
    if (!(r > 0.0)) throw Error(ErrorCode::kInvalidArgument, "split ratios must be positive");
  }
  const std::size_t n = interactions.size();
  if (n < 3) {
    throw Error(ErrorCode::kInvalidArgument,
                "need at least 3 interactions to split, got " + std::to_string(n));
  }
  std::vector<Interaction> shuffled(interactions.begin(), interactions.end());
  std::mt19937_64 rng(seed);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);

  const double sum = ratios[0] + ratios[1] + ratios[2];
  const auto train = static_cast<std::size_t>(
      std::floor(ratios[0] * static_cast<double>(n) / sum));
  const std::size_t rest = n - train;
  const auto validation = static_cast<std::size_t>(
      std::floor(ratios[1] * static_cast<double>(rest) / (ratios[1] + ratios[2])));

  InteractionSplit s;
  auto begin = shuffled.begin();
  s.train.assign(begin, begin + static_cast<std::ptrdiff_t>(train));
  s.validation.assign(begin + static_cast<std::ptrdiff_t>(train),
                      begin + static_cast<std::ptrdiff_t>(train + validation));
  s.test.assign(begin + static_cast<std::ptrdiff_t>(train + validation),
                shuffled.end());
  return s;
}

SyntheticDataset GenerateSynthetic(const SyntheticSpec& spec) {
  auto bad = [](const std::string& what) {
    throw Error(ErrorCode::kInvalidArgument, "infeasible synthetic spec: " + what);
  };
  if (spec.users == 0 || spec.items == 0 || spec.attributes == 0) {
    bad("users, items and attributes must be positive");
  }
  if (spec.min_attributes_per_item == 0 ||
      spec.min_attributes_per_item > spec.max_attributes_per_item ||
      spec.max_attributes_per_item > spec.attributes) {
    bad("attributes per item must satisfy 1 <= min <= max <= attributes");
  }
  if (spec.interactions_per_user == 0 || spec.interactions_per_user > spec.items) {
    bad("interactions per user must lie in [1, items]");
  }
  if (spec.favored_per_user == 0 || spec.favored_per_user > spec.attributes) {
    bad("favored attributes per user must lie in [1, attributes]");
  }
  if (spec.favored_share < 0.0 || spec.favored_share > 1.0) {
    bad("favored share must lie in [0, 1]");
  }
  if (spec.users < 2 && spec.friends_per_user > 0) {
    bad("friend edges need at least two users");
  }

  std::mt19937_64 rng(spec.seed);
  // Popularity rank -> attribute id is a random permutation.
  std::vector<AttributeId> by_rank(spec.attributes);
  std::iota(by_rank.begin(), by_rank.end(), 0);
  std::shuffle(by_rank.begin(), by_rank.end(), rng);
  std::vector<double> weight(spec.attributes);
  for (std::uint32_t r = 0; r < spec.attributes; ++r) {
    weight[by_rank[r]] = 1.0 / std::pow(static_cast<double>(r + 1), spec.popularity_skew);
  }

  auto draw_distinct = [&](std::uint32_t count) {
    std::vector<double> w = weight;
    AttributeSet chosen;
    for (std::uint32_t i = 0; i < count; ++i) {
      std::discrete_distribution<std::uint32_t> dist(w.begin(), w.end());
      const AttributeId p = dist(rng);
      w[p] = 0.0;
      chosen.push_back(p);
    }
    return ids::Normalize(std::move(chosen));
  };

  std::vector<EdgeRecord> edges;
  std::vector<AttributeSet> item_attrs(spec.items);
  std::vector<ItemSet> items_with(spec.attributes);
  std::uniform_int_distribution<std::uint32_t> attr_count(spec.min_attributes_per_item,
                                                          spec.max_attributes_per_item);
  for (ItemId v = 0; v < spec.items; ++v) {
    item_attrs[v] = draw_distinct(attr_count(rng));
    for (AttributeId p : item_attrs[v]) {
      edges.push_back({Relation::kBelongTo, {VertexKind::kItem, v},
                       {VertexKind::kAttribute, p}});
      items_with[p].push_back(v);
    }
  }

  SyntheticDataset out;
  out.favored.resize(spec.users);
  std::bernoulli_distribution favored_coin(spec.favored_share);
  for (UserId u = 0; u < spec.users; ++u) {
    out.favored[u] = draw_distinct(spec.favored_per_user);
    ItemSet favored_items;
    for (AttributeId p : out.favored[u]) {
      favored_items = ids::Union(favored_items, items_with[p]);
      edges.push_back({Relation::kLike, {VertexKind::kUser, u},
                       {VertexKind::kAttribute, p}});
    }
    ItemSet taken;
    for (std::uint32_t j = 0; j < spec.interactions_per_user; ++j) {
      const ItemSet pool = ids::Subtract(favored_items, taken);
      ItemId v;
      if (favored_coin(rng) && !pool.empty()) {
        v = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
      } else {
        // k-th item outside `taken`.
        std::uint32_t k = std::uniform_int_distribution<std::uint32_t>(
            0, spec.items - static_cast<std::uint32_t>(taken.size()) - 1)(rng);
        for (ItemId t : taken) {
          if (t <= k) ++k;
          else break;
        }
        v = k;
      }
      ids::Insert(taken, v);
      edges.push_back({Relation::kInteract, {VertexKind::kUser, u},
                       {VertexKind::kItem, v}});
    }
  }

  std::set<std::pair<UserId, UserId>> friends;
  if (spec.users >= 2) {
    std::uniform_int_distribution<UserId> other(0, spec.users - 1);
    for (UserId u = 0; u < spec.users; ++u) {
      for (std::uint32_t f = 0; f < spec.friends_per_user; ++f) {
        const UserId w = other(rng);
        if (w == u) continue;
        if (friends.insert({std::min(u, w), std::max(u, w)}).second) {
          edges.push_back({Relation::kFriend, {VertexKind::kUser, std::min(u, w)},
                           {VertexKind::kUser, std::max(u, w)}});
        }
      }
    }
  }

  out.data.graph =
      HeteroGraph::Build({spec.users, spec.items, spec.attributes}, edges);
  out.data.interactions = out.data.graph.Interactions();
  return out;
}

SyntheticSpec LoadSyntheticSpec(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::kNotFound, "cannot open synthetic spec " + path);
  SyntheticSpec s;
  try {
    const nlohmann::json j = nlohmann::json::parse(is);
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("users", s.users);
    get("items", s.items);
    get("attributes", s.attributes);
    get("min_attributes_per_item", s.min_attributes_per_item);
    get("max_attributes_per_item", s.max_attributes_per_item);
    get("interactions_per_user", s.interactions_per_user);
    get("favored_per_user", s.favored_per_user);
    get("favored_share", s.favored_share);
    get("popularity_skew", s.popularity_skew);
    get("friends_per_user", s.friends_per_user);
    get("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, path + ": " + e.what());
  }
  return s;
}

std::string NameTable::Name(VertexKind kind, std::uint32_t index) const {
  const std::vector<std::string>* names = nullptr;
  switch (kind) {
    case VertexKind::kUser: names = &users; break;
    case VertexKind::kItem: names = &items; break;
    case VertexKind::kAttribute: names = &attributes; break;
  }
  if (index < names->size() && !(*names)[index].empty()) return (*names)[index];
  return std::string(VertexKindName(kind)) + ":" + std::to_string(index);
}

NameTable LoadNames(const std::string& path, const VertexCounts& counts) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::kNotFound, "cannot open names file " + path);
  NameTable t;
  t.users.resize(counts.users);
  t.items.resize(counts.items);
  t.attributes.resize(counts.attributes);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    const std::string_view line = Trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos) Malformed(path, line_no, "expected <vertex><TAB><name>");
    const VertexId v = ParseVertex(line.substr(0, tab), path, line_no);
    if (v.index >= counts.of(v.kind)) Malformed(path, line_no, "vertex out of range");
    const std::string name(line.substr(tab + 1));
    switch (v.kind) {
      case VertexKind::kUser: t.users[v.index] = name; break;
      case VertexKind::kItem: t.items[v.index] = name; break;
      case VertexKind::kAttribute: t.attributes[v.index] = name; break;
    }
  }
  return t;
}

}  // namespace cpr
