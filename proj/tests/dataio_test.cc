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

#include <set>
#include <span>
#include <sstream>

#include <gtest/gtest.h>

#include "cpr/error.h"
#include "testing/fixtures.h"

namespace cpr {
namespace {

using testing::kP1;
using testing::kP2;
using testing::kP3;

template <typename T>
std::vector<T> Vec(std::span<const T> s) {
  return {s.begin(), s.end()};
}

Dataset Parse(const std::string& text) {
  std::istringstream is(text);
  return ParseEdgeList(is, "t.tsv");
}

std::string ErrorMessage(const std::string& text) {
  try {
    Parse(text);
  } catch (const Error& e) {
    EXPECT_TRUE(e.code() == ErrorCode::kInvalidArgument ||
                e.code() == ErrorCode::kOutOfRange);
    return e.what();
  }
  return "<no error>";
}

TEST(EdgeListTest, ParsesG0) {
  const Dataset d = Parse(
      "#vertices\tusers=1\titems=3\tattributes=3\n"
      "# comment\n"
      "BELONG_TO\titem:0\tattribute:0\n"
      "belongto\tattribute:1\titem:0\n"
      "belong-to\titem:1\tattribute:0\n"
      "\n"
      "belong_to\titem:1\tattribute:2\n"
      "belong_to\titem:2\tattribute:2\n"
      "Interact\tuser:0\titem:0\n");
  const HeteroGraph g0 = testing::MakeG0();
  EXPECT_EQ(d.graph.counts(), g0.counts());
  EXPECT_TRUE(std::equal(d.graph.edges().begin(), d.graph.edges().end(),
                         g0.edges().begin(), g0.edges().end()));
  ASSERT_EQ(d.interactions.size(), 1u);
}

TEST(EdgeListTest, ErrorsCarryLineNumbers) {
  EXPECT_NE(ErrorMessage("interact\tuser:0\titem:0\n").find("t.tsv:1: missing"),
            std::string::npos);
  EXPECT_NE(ErrorMessage("").find("missing '#vertices'"), std::string::npos);
  EXPECT_NE(ErrorMessage("#vertices\tusers=1\titems=1\n").find("t.tsv:1:"),
            std::string::npos);
  const std::string head = "#vertices\tusers=1\titems=2\tattributes=1\n";
  EXPECT_NE(ErrorMessage(head + "\ninteract\tuser:0\n").find("t.tsv:3: expected 3"),
            std::string::npos);
  EXPECT_NE(ErrorMessage(head + "follows\tuser:0\titem:0\n").find("t.tsv:2: unknown relation"),
            std::string::npos);
  EXPECT_NE(ErrorMessage(head + "interact\tuser:x\titem:0\n").find("t.tsv:2: bad vertex"),
            std::string::npos);
  // Graph-level errors are mapped back to the offending line.
  EXPECT_NE(ErrorMessage(head + "interact\tuser:0\titem:0\n# c\ninteract\tuser:0\titem:7\n")
                .find("t.tsv:4:"),
            std::string::npos);
}

TEST(EdgeListTest, WriteThenParseRoundTrips) {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 20; ++trial) {
    const HeteroGraph g = testing::RandomGraph(rng);
    std::ostringstream os;
    WriteEdgeList(os, g);
    const Dataset d = Parse(os.str());
    EXPECT_EQ(d.graph.counts(), g.counts());
    EXPECT_TRUE(std::equal(d.graph.edges().begin(), d.graph.edges().end(),
                           g.edges().begin(), g.edges().end()));
  }
}

TEST(EdgeListTest, FileHelpers) {
  testing::TempDir dir;
  SaveDataset(dir.file("g.tsv"), testing::MakeG0());
  EXPECT_EQ(LoadDataset(dir.file("g.tsv")).graph.counts(), testing::MakeG0().counts());
  try {
    LoadDataset(dir.file("absent.tsv"));
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotFound);
  }
}

TEST(EdgeListTest, LastFmScaleCounts) {
  // 1,801 users, 7,432 items, 76,693 distinct interactions.
  std::ostringstream os;
  os << "#vertices\tusers=1801\titems=7432\tattributes=33\n";
  for (std::uint32_t i = 0; i < 76693; ++i) {
    const std::uint32_t u = i % 1801, j = i / 1801;
    os << "interact\tuser:" << u << "\titem:" << (u * 37 + j * 173) % 7432 << "\n";
  }
  for (std::uint32_t v = 0; v < 7432; ++v) {
    os << "belong_to\titem:" << v << "\tattribute:" << v % 33 << "\n";
  }
  const Dataset d = Parse(os.str());
  EXPECT_EQ(d.graph.counts(), (VertexCounts{1801, 7432, 33}));
  EXPECT_EQ(d.interactions.size(), 76693u);
}

TEST(PruneTest, G0DropsSingletonAttribute) {
  const PrunedGraph p = PruneRareAttributes(testing::MakeG0(), 2);
  EXPECT_EQ(p.kept_attributes, (std::vector<AttributeId>{kP1, kP3}));
  EXPECT_EQ(p.graph.counts().attributes, 2u);
  // p3 is renumbered to 1 and keeps its items v2, v3.
  EXPECT_EQ(Vec(p.graph.ItemsWithAttribute(1)), (ItemSet{1, 2}));
  EXPECT_EQ(Vec(p.graph.AttributesOfItem(0)), (AttributeSet{0}));
  EXPECT_THROW(PruneRareAttributes(testing::MakeG0(), 0), Error);
  EXPECT_EQ(PruneRareAttributes(testing::MakeG0(), 1).graph.counts().attributes, 3u);
}

TEST(PrunePropertyTest, SurvivorsMeetFrequency) {
  std::mt19937_64 rng(72);
  for (int trial = 0; trial < 30; ++trial) {
    const HeteroGraph g = testing::RandomDenseGraph(rng, 4, 30, 15, 1, 4);
    const std::uint32_t min_freq = std::uniform_int_distribution<std::uint32_t>(1, 6)(rng);
    const PrunedGraph p = PruneRareAttributes(g, min_freq);
    for (AttributeId a = 0; a < p.graph.counts().attributes; ++a) {
      EXPECT_GE(p.graph.ItemsWithAttribute(a).size(), min_freq);
      EXPECT_EQ(Vec(p.graph.ItemsWithAttribute(a)),
                Vec(g.ItemsWithAttribute(p.kept_attributes[a])));
    }
    std::size_t expected = 0;
    for (AttributeId a = 0; a < g.counts().attributes; ++a) {
      expected += g.ItemsWithAttribute(a).size() >= min_freq;
    }
    EXPECT_EQ(p.kept_attributes.size(), expected);
    EXPECT_EQ(p.graph.Interactions().size(), g.Interactions().size());
  }
}

std::vector<Interaction> Numbered(std::uint32_t n) {
  std::vector<Interaction> xs;
  for (std::uint32_t i = 0; i < n; ++i) xs.push_back({i, i});
  return xs;
}

TEST(SplitTest, SeventyFifteenFifteen) {
  const auto xs = Numbered(100);
  const InteractionSplit s = SplitInteractions(xs, kDefaultSplitRatios, 1);
  EXPECT_EQ(s.train.size(), 70u);
  EXPECT_EQ(s.validation.size(), 15u);
  EXPECT_EQ(s.test.size(), 15u);
  std::set<std::uint32_t> seen;
  for (const auto* part : {&s.train, &s.validation, &s.test}) {
    for (const Interaction& x : *part) seen.insert(x.user);
  }
  EXPECT_EQ(seen.size(), 100u);
}

TEST(SplitTest, SeededAndShuffled) {
  const auto xs = Numbered(50);
  const auto a = SplitInteractions(xs, kDefaultSplitRatios, 5);
  const auto b = SplitInteractions(xs, kDefaultSplitRatios, 5);
  const auto c = SplitInteractions(xs, kDefaultSplitRatios, 6);
  auto users = [](const std::vector<Interaction>& v) {
    std::vector<std::uint32_t> out;
    for (const auto& x : v) out.push_back(x.user);
    return out;
  };
  EXPECT_EQ(users(a.train), users(b.train));
  EXPECT_NE(users(a.train), users(c.train));
  EXPECT_THROW(SplitInteractions(Numbered(2), kDefaultSplitRatios, 0), Error);
  EXPECT_THROW(SplitInteractions(xs, {1.0, 0.0, 1.0}, 0), Error);
}

TEST(SyntheticTest, DefaultShape) {
  const SyntheticDataset s = GenerateSynthetic({});
  const VertexCounts c = s.data.graph.counts();
  EXPECT_EQ(c, (VertexCounts{200, 500, 60}));
  EXPECT_EQ(s.data.interactions.size(), 200u * 20u);
  ASSERT_EQ(s.favored.size(), 200u);
  for (ItemId v = 0; v < c.items; ++v) {
    const std::size_t n = s.data.graph.AttributesOfItem(v).size();
    EXPECT_GE(n, 3u);
    EXPECT_LE(n, 6u);
  }
  std::size_t favored_hits = 0;
  for (const Interaction& x : s.data.interactions) {
    EXPECT_EQ(s.favored[x.user].size(), 4u);
    EXPECT_EQ(Vec(s.data.graph.Neighbors({VertexKind::kUser, x.user},
                                         VertexKind::kAttribute)),
              s.favored[x.user]);
    favored_hits += !ids::Intersect(s.data.graph.AttributesOfItem(x.item),
                                    s.favored[x.user])
                         .empty();
  }
  // Planted share is 0.8 plus whatever the uniform draws hit by chance.
  EXPECT_GE(static_cast<double>(favored_hits) / s.data.interactions.size(), 0.7);
}

TEST(SyntheticTest, SameSeedSameBytes) {
  SyntheticSpec spec;
  spec.users = 30;
  spec.items = 60;
  spec.attributes = 12;
  spec.interactions_per_user = 5;
  spec.seed = 8;
  std::ostringstream a, b, c;
  WriteEdgeList(a, GenerateSynthetic(spec).data.graph);
  WriteEdgeList(b, GenerateSynthetic(spec).data.graph);
  spec.seed = 9;
  WriteEdgeList(c, GenerateSynthetic(spec).data.graph);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_NE(a.str(), c.str());
}

TEST(SyntheticTest, InfeasibleSpecsRejected) {
  SyntheticSpec s;
  s.max_attributes_per_item = 2;  // below the minimum
  EXPECT_THROW(GenerateSynthetic(s), Error);
  s = {};
  s.interactions_per_user = s.items + 1;
  EXPECT_THROW(GenerateSynthetic(s), Error);
  s = {};
  s.users = 1;
  EXPECT_THROW(GenerateSynthetic(s), Error);
}

TEST(SyntheticTest, SpecFromJson) {
  testing::TempDir dir;
  testing::WriteFile(dir.file("s.json"), R"({"users": 10, "popularity_skew": 0.5})");
  const SyntheticSpec s = LoadSyntheticSpec(dir.file("s.json"));
  EXPECT_EQ(s.users, 10u);
  EXPECT_EQ(s.popularity_skew, 0.5);
  EXPECT_EQ(s.items, SyntheticSpec{}.items);
  testing::WriteFile(dir.file("bad.json"), R"({"users": "many"})");
  EXPECT_THROW(LoadSyntheticSpec(dir.file("bad.json")), Error);
}

TEST(NamesTest, LoadAndFallback) {
  testing::TempDir dir;
  testing::WriteFile(dir.file("names.tsv"), testing::G0NamesFile());
  const NameTable t = LoadNames(dir.file("names.tsv"), {1, 3, 3});
  EXPECT_EQ(t.Name(VertexKind::kAttribute, kP3), "p3");
  EXPECT_EQ(t.Name(VertexKind::kUser, 0), "u1");
  EXPECT_EQ(NameTable{}.Name(VertexKind::kItem, 4), "item:4");
  EXPECT_THROW(LoadNames(dir.file("names.tsv"), {1, 3, 2}), Error);
}

}  // namespace
}  // namespace cpr
