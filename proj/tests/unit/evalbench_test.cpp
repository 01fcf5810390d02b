/*
 * Copyright 2026 The bus-segmentation Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "bus/builder.hpp"
#include "bus/error.hpp"
#include "bus/evalbench.hpp"
#include "bus/retrieval.hpp"
#include "bus/tree_io.hpp"
#include "fixtures.hpp"

namespace bus {
namespace {

SynthConfig Planted(std::uint64_t seed) {
  SynthConfig c;
  c.seed = seed;
  c.users = 6000;
  c.items = 300;
  c.attributes = {{"country", 3, {}, 0.5},
                  {"city", 6, {"country"}, 0.0},
                  {"age", 4, {}, 0.0},
                  {"gender", 2, {}, 0.0}};
  c.governing = {"country", "age"};
  c.items_per_segment = 3;
  c.concentration = 0.8;
  c.edges_per_user = 3;
  return c;
}

SynthConfig Maximal(std::uint64_t seed) {
  SynthConfig c = Planted(seed);
  c.items_per_segment = 1;
  c.concentration = 1.0;
  return c;
}

BuildParams Params(std::size_t mu, std::size_t k) {
  BuildParams p;
  p.mu = mu;
  p.k = k;
  return p;
}

std::size_t ScoredMarginal(const UserClassification& cls) {
  std::size_t n = 0;
  for (UserIndex u : cls.marginal()) n += cls.is_scored(u);
  return n;
}

TEST(SynthConfigTest, JsonRoundTripAndValidation) {
  const SynthConfig c = Planted(3);
  const SynthConfig back = SynthConfig::FromJsonText(c.ToJsonText());
  EXPECT_EQ(back.ToJsonText(), c.ToJsonText());
  EXPECT_THROW(SynthConfig::FromJsonText(R"({"bogus": 1})"), ConfigError);
  EXPECT_THROW(SynthConfig::FromJsonText("[1"), ConfigError);

  SynthConfig bad = Planted(1);
  bad.items = 10;  // 12 planted segments cannot own 3 items each
  EXPECT_THROW(generate_synthetic(bad), ConfigError);
  bad = Planted(1);
  bad.active_fraction = 0.7;
  bad.marginal_fraction = 0.7;
  EXPECT_THROW(generate_synthetic(bad), ConfigError);
  bad = Planted(1);
  bad.governing = {"height"};
  EXPECT_THROW(generate_synthetic(bad), ConfigError);
  bad = Planted(1);
  bad.attributes[0].cardinality = 0;
  EXPECT_THROW(generate_synthetic(bad), ConfigError);
}

TEST(GenerateSyntheticTest, DeterministicInSeed) {
  const SyntheticDataset a = generate_synthetic(Planted(9));
  const SyntheticDataset b = generate_synthetic(Planted(9));
  const SyntheticDataset c = generate_synthetic(Planted(10));
  EXPECT_EQ(a.users, b.users);
  EXPECT_EQ(a.engagements, b.engagements);
  EXPECT_EQ(a.graph.edges(), b.graph.edges());
  EXPECT_EQ(a.planted, b.planted);
  EXPECT_FALSE(a.engagements == c.engagements);
  EXPECT_EQ(a.planted_segments, 12u);
}

TEST(GenerateSyntheticTest, FullHomophilyKeepsEdgesInsideSegments) {
  SynthConfig c = Planted(4);
  c.homophily = 1.0;
  const SyntheticDataset d = generate_synthetic(c);
  ASSERT_GT(d.graph.num_edges(), 0u);
  for (auto [a, b] : d.graph.edges()) EXPECT_EQ(d.planted[a], d.planted[b]);
}

TEST(GenerateSyntheticTest, MaximalConcentrationIsRecoveredExactly) {
  const SyntheticDataset d = generate_synthetic(Maximal(5));
  const UserClassification cls = classify_users(d.engagements, d.users);
  const BuildResult r = build_tree(d.users, d.engagements, cls, Params(1, 10));
  // Every scored marginal user gets NDCG 1.
  EXPECT_EQ(r.levels.back().total_reward,
            Reward::FromTicks(static_cast<Int128>(ScoredMarginal(cls))
                              << Reward::kFractionBits));

  const std::vector<std::string> governing{"country", "age"};
  const BaselineResult baseline =
      one_hot_baseline(governing, d.users, d.engagements, cls, 10);
  EXPECT_EQ(baseline.reward, r.levels.back().total_reward);
  EXPECT_EQ(baseline.segments, 12u);
}

TEST(OneHotBaselineTest, NonGoverningAttributeStaysNearRootReward) {
  const SyntheticDataset d = generate_synthetic(Planted(6));
  const UserClassification cls = classify_users(d.engagements, d.users);
  const std::vector<std::string> gender{"gender"};
  const BaselineResult baseline =
      one_hot_baseline(gender, d.users, d.engagements, cls, 20);
  const RankedList root = top_k_behaviors(cls.active(), d.engagements, 20);
  const double root_reward =
      segment_reward(root, cls.marginal(), d.engagements, 20).total_reward;
  EXPECT_EQ(baseline.segments, 2u);
  EXPECT_NEAR(baseline.reward.value() / root_reward, 1.0, 0.05);
}

TEST(OneHotBaselineTest, SegmentWithoutActiveUsersScoresZero) {
  const fixtures::Data d = fixtures::make_data(
      AttributeSchema::FromNames({"x"}),
      {{"a", {{"x", "p"}}, {{"i", 1}}, {}},
       {"b", {{"x", "p"}}, {}, {{"i", 1}}},
       {"c", {{"x", "q"}}, {}, {{"i", 1}}}});
  const std::vector<std::string> x{"x"};
  const BaselineResult r =
      one_hot_baseline(x, d.users, d.engagements, d.classification, 5);
  EXPECT_EQ(r.segments, 2u);
  EXPECT_EQ(r.reward, Reward::FromScore(1.0));
  EXPECT_THROW(one_hot_baseline({}, d.users, d.engagements, d.classification, 5),
               ConfigError);
}

TEST(HoldoutEvalTest, IdealAndDisjointCatalogs) {
  const fixtures::Data d = fixtures::make_data(
      AttributeSchema::FromNames({"x"}),
      {{"a", {{"x", "p"}}, {{"i1", 2}, {"i2", 1}}, {}},
       {"b", {{"x", "p"}}, {}, {{"i1", 5}, {"i2", 1}}},
       {"c", {{"x", "p"}}, {}, {{"i1", 1}}},
       {"d", {{"x", "p"}}, {{"i9", 1}}, {}}});
  BusTree tree(TreeParams{}, 2, 2, Reward());
  NodeCatalog ideal(5, d.engagements.items());
  ideal.set(0, {{*d.engagements.items().code("i1"), 2},
                {*d.engagements.items().code("i2"), 1}});
  const std::vector<UserIndex> eval{1, 2};
  const HoldoutSummary good =
      holdout_eval(tree, ideal, d.users, d.engagements, eval, 5);
  EXPECT_EQ(good.users, 2u);
  EXPECT_DOUBLE_EQ(good.mean, 1.0);
  ASSERT_EQ(good.by_size.size(), 1u);
  EXPECT_EQ(good.by_size[0].bucket, "1-9");

  NodeCatalog disjoint(5, d.engagements.items());
  disjoint.set(0, {{*d.engagements.items().code("i9"), 1}});
  EXPECT_DOUBLE_EQ(
      holdout_eval(tree, disjoint, d.users, d.engagements, eval, 5).mean, 0.0);
}

TEST(HoldoutEvalTest, PlantedDatasetAtMuOneScoresOne) {
  const SyntheticDataset d = generate_synthetic(Maximal(7));
  SweepOptions o;
  o.mus = {1};
  o.k = 10;
  const EvalReport report = sweep(d.users, d.engagements, o);
  ASSERT_EQ(report.rows.size(), 1u);
  EXPECT_GT(report.rows[0].holdout.users, 0u);
  EXPECT_DOUBLE_EQ(report.rows[0].holdout.mean, 1.0);
}

TEST(SizeBucketTest, PowersOfTen) {
  EXPECT_EQ(size_bucket(0), "0");
  EXPECT_EQ(size_bucket(1), "1-9");
  EXPECT_EQ(size_bucket(9), "1-9");
  EXPECT_EQ(size_bucket(10), "10-99");
  EXPECT_EQ(size_bucket(12345), "10000-99999");
}

TEST(SweepTest, TrendsAndReproducibleReports) {
  const SyntheticDataset d = generate_synthetic(Planted(8));
  SweepOptions o;
  o.mus = {5, 50, 500};
  o.omegas = {1.0};
  o.k = 20;
  const EvalReport a = sweep(d.users, d.engagements, o);
  ASSERT_EQ(a.rows.size(), 3u);
  for (std::size_t i = 1; i < a.rows.size(); ++i) {
    EXPECT_LE(a.rows[i].segments, a.rows[i - 1].segments);
    EXPECT_LE(a.rows[i].valid_attributes, a.rows[i - 1].valid_attributes);
  }
  for (const auto& row : a.rows) {
    for (std::size_t l = 1; l < row.level_rewards.size(); ++l) {
      EXPECT_GE(row.level_rewards[l], row.level_rewards[l - 1]);
    }
    EXPECT_GE(row.training_reward, row.level_rewards.front());
  }
  o.workers = 3;
  const EvalReport b = sweep(d.users, d.engagements, o);
  std::ostringstream ta, tb, sa, sb;
  write_report_tsv(a, ta);
  write_report_tsv(b, tb);
  write_report_summary(a, sa);
  write_report_summary(b, sb);
  EXPECT_EQ(ta.str(), tb.str());
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(ta.str().find("wall"), std::string::npos);
  std::ostringstream timed;
  write_report_tsv(a, timed, true);
  EXPECT_NE(timed.str().find("wall_seconds"), std::string::npos);
}

}  // namespace
}  // namespace bus
