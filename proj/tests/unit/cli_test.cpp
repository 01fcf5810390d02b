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

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "bus/dataset.hpp"
#include "bus/tree_io.hpp"
#include "cli.hpp"
#include "fixtures.hpp"

namespace bus::cli {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("bus_cli_" +
            std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name)) << text;
  }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return run_command(args, out_, err_);
  }

  // Writes the city/age fixture as users.csv and engagements.csv.
  void write_city_fixture() {
    const fixtures::Data d = fixtures::city_vs_age();
    save_users(path("users.csv"), d.users);
    save_engagements(path("engagements.csv"), d.engagements, d.users);
    write("schema.json", d.users.schema().ToJsonText());
  }

  fs::path dir_;
  std::ostringstream out_;
  std::ostringstream err_;
};

TEST_F(CliTest, BuildSelectsThePlantedAttributeFirst) {
  write("spec.json", R"({
    "seed": 3, "users": 4000, "items": 200,
    "attributes": [{"name": "region", "cardinality": 5},
                   {"name": "age", "cardinality": 6},
                   {"name": "gender", "cardinality": 2}],
    "governing": ["age"], "items_per_segment": 1, "concentration": 1.0
  })");
  ASSERT_EQ(run({"synth", "--spec", path("spec.json"), "--out-dir", path("data")}), 0)
      << err_.str();
  ASSERT_EQ(run({"build", "--users", path("data/users.csv"), "--engagements",
                 path("data/engagements.csv"), "--schema", path("data/schema.json"),
                 "--tree", path("tree.jsonl"), "--mu", "1", "--omega", "1.0",
                 "--log", path("log.jsonl")}),
            0)
      << err_.str();
  const BusTree tree = load_tree(path("tree.jsonl"));
  ASSERT_FALSE(tree.attribute_order().empty());
  EXPECT_EQ(tree.attribute_order()[0], "age");
  const std::string log = read_file(path("log.jsonl"));
  EXPECT_NE(log.find(R"("event":"level","level":1,"attribute":"age")"),
            std::string::npos);
}

TEST_F(CliTest, RecommendWithoutTreeNamesTheMissingFile) {
  write_city_fixture();
  EXPECT_NE(run({"recommend", "--tree", path("nope.jsonl"), "--users",
                 path("users.csv"), "--engagements", path("engagements.csv")}),
            0);
  EXPECT_NE(err_.str().find("missing tree file"), std::string::npos);
  EXPECT_NE(err_.str().find("nope.jsonl"), std::string::npos);
}

TEST_F(CliTest, ReadOnlyAssignLeavesTheTreeUntouched) {
  write_city_fixture();
  ASSERT_EQ(run({"build", "--users", path("users.csv"), "--engagements",
                 path("engagements.csv"), "--schema", path("schema.json"),
                 "--tree", path("tree.jsonl"), "--mu", "1", "--k", "1",
                 "--log", path("log.jsonl")}),
            0)
      << err_.str();
  const std::uint64_t before = fnv1a64(read_file(path("tree.jsonl")));
  // Canada has no node and the root has no regress child.
  write("novel.csv", "user_id,country,city,age\nn1,CA,Toronto,20s\nn2,US,SF,20s\n");
  ASSERT_EQ(run({"assign", "--tree", path("tree.jsonl"), "--users",
                 path("novel.csv"), "--read-only", "--out", path("a.csv")}),
            0)
      << err_.str();
  EXPECT_EQ(fnv1a64(read_file(path("tree.jsonl"))), before);
  const BusTree tree = load_tree(path("tree.jsonl"));
  const NodeId sf20 = tree.find_value_child(
      tree.find_value_child(tree.find_value_child(0, "US"), "SF"), "20s");
  EXPECT_EQ(read_file(path("a.csv")),
            "user_id,node_id,path\n"
            "n1,0,global>REGRESS>REGRESS>REGRESS\n"
            "n2," + std::to_string(sf20) + ",global>US>SF>20s\n");
  EXPECT_NE(err_.str().find("insert_rate 0"), std::string::npos);

  // Mutating assignment grows the tree and reports the insert.
  ASSERT_EQ(run({"assign", "--tree", path("tree.jsonl"), "--users",
                 path("novel.csv"), "--tree-out", path("grown.jsonl")}),
            0);
  EXPECT_NE(err_.str().find("inserts 1"), std::string::npos);
  EXPECT_EQ(load_tree(path("grown.jsonl")).size(),
            load_tree(path("tree.jsonl")).size() + 3);
}

TEST_F(CliTest, RecommendOutputsAreReproducible) {
  write_city_fixture();
  ASSERT_EQ(run({"build", "--users", path("users.csv"), "--engagements",
                 path("engagements.csv"), "--schema", path("schema.json"),
                 "--tree", path("tree.jsonl"), "--catalog", path("cat.jsonl"),
                 "--mu", "1", "--k", "2", "--log", path("log.jsonl")}),
            0);
  ASSERT_EQ(run({"recommend", "--tree", path("tree.jsonl"), "--users",
                 path("users.csv"), "--catalog", path("cat.jsonl"), "--out",
                 path("r1.csv")}),
            0)
      << err_.str();
  ASSERT_EQ(run({"--workers", "3", "recommend", "--tree", path("tree.jsonl"),
                 "--users", path("users.csv"), "--engagements",
                 path("engagements.csv"), "--out", path("r2.csv")}),
            0)
      << err_.str();
  EXPECT_EQ(read_file(path("r1.csv")), read_file(path("r2.csv")));
  EXPECT_NE(read_file(path("r1.csv")).find("u0,1,a,10\nu0,2,g,6\n"),
            std::string::npos);

  // An empty graph changes nothing.
  write("graph.csv", "user_id_a,user_id_b\n");
  ASSERT_EQ(run({"recommend", "--tree", path("tree.jsonl"), "--users",
                 path("users.csv"), "--catalog", path("cat.jsonl"),
                 "--connections", path("graph.csv"), "--out", path("r3.csv")}),
            0)
      << err_.str();
  EXPECT_EQ(read_file(path("r1.csv")), read_file(path("r3.csv")));
}

TEST_F(CliTest, ConfigFileSuppliesDefaultsAndFlagsOverride) {
  write_city_fixture();
  write("run.toml", "[build]\nmu = 1000\nk = 1\n");
  ASSERT_EQ(run({"--config", path("run.toml"), "build", "--users", path("users.csv"),
                 "--engagements", path("engagements.csv"), "--schema",
                 path("schema.json"), "--tree", path("t1.jsonl"), "--log",
                 path("l1.jsonl")}),
            0)
      << err_.str();
  EXPECT_EQ(load_tree(path("t1.jsonl")).params().mu, 1000u);
  ASSERT_EQ(run({"--config", path("run.toml"), "build", "--users", path("users.csv"),
                 "--engagements", path("engagements.csv"), "--schema",
                 path("schema.json"), "--tree", path("t2.jsonl"), "--mu", "1",
                 "--log", path("l2.jsonl")}),
            0);
  EXPECT_EQ(load_tree(path("t2.jsonl")).params().mu, 1u);
  EXPECT_EQ(load_tree(path("t2.jsonl")).params().k, 1u);
}

TEST_F(CliTest, UsageErrorsExitNonzero) {
  EXPECT_NE(run({}), 0);
  EXPECT_NE(run({"frobnicate"}), 0);
  EXPECT_NE(run({"build", "--users"}), 0);
  write_city_fixture();
  EXPECT_NE(run({"build", "--users", path("users.csv"), "--engagements",
                 path("engagements.csv"), "--tree", path("t.jsonl"), "--k", "0"}),
            0);
  EXPECT_NE(err_.str().find("K must be at least 1"), std::string::npos);
}

TEST_F(CliTest, SweepAndEvalWriteReports) {
  write("spec.json", R"({"seed": 2, "users": 3000, "items": 120,
    "attributes": [{"name": "a", "cardinality": 4}, {"name": "b", "cardinality": 3}],
    "governing": ["a"]})");
  ASSERT_EQ(run({"synth", "--spec", path("spec.json"), "--out-dir", path("d")}), 0);
  ASSERT_EQ(run({"sweep", "--users", path("d/users.csv"), "--engagements",
                 path("d/engagements.csv"), "--report-dir", path("rep"), "--mus",
                 "5,50", "--k", "10"}),
            0)
      << err_.str();
  const std::string first = read_file(path("rep/report.tsv"));
  EXPECT_NE(first.find("mu\tomega"), std::string::npos);
  ASSERT_EQ(run({"sweep", "--users", path("d/users.csv"), "--engagements",
                 path("d/engagements.csv"), "--report-dir", path("rep"), "--mus",
                 "5,50", "--k", "10"}),
            0);
  EXPECT_EQ(read_file(path("rep/report.tsv")), first);
  EXPECT_TRUE(fs::exists(path("rep/summary.json")));

  ASSERT_EQ(run({"build", "--users", path("d/users.csv"), "--engagements",
                 path("d/engagements.csv"), "--tree", path("t.jsonl"), "--mu", "5",
                 "--k", "10", "--log", path("log.jsonl")}),
            0);
  ASSERT_EQ(run({"eval", "--tree", path("t.jsonl"), "--users", path("d/users.csv"),
                 "--engagements", path("d/engagements.csv"), "--one-hot", "b"}),
            0)
      << err_.str();
  EXPECT_NE(out_.str().find("\"mean\""), std::string::npos);
  EXPECT_NE(out_.str().find("\"one_hot\""), std::string::npos);
}

}  // namespace
}  // namespace bus::cli
