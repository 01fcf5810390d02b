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
#include <string>

#include <gtest/gtest.h>

#include "bus/builder.hpp"
#include "bus/error.hpp"
#include "bus/index.hpp"
#include "bus/tree_io.hpp"
#include "fixtures.hpp"

namespace bus {
namespace {

BusTree Built(std::uint64_t seed, std::size_t mu) {
  const fixtures::Data d = fixtures::random_data(seed, 600, 3, 4, 12);
  BuildParams p;
  p.mu = mu;
  p.k = 4;
  p.omega = 1.0;
  p.relevance = seed % 2 ? Relevance::kBinary : Relevance::kGraded;
  return build_tree(d.users, d.engagements, d.classification, p).tree;
}

// Replaces the checksum record so a body edit is not caught there.
std::string Resealed(const std::string& text, const std::string& from,
                     const std::string& to) {
  std::string body = text.substr(0, text.rfind("{\"checksum\""));
  const auto pos = body.find(from);
  EXPECT_NE(pos, std::string::npos);
  body.replace(pos, from.size(), to);
  return body + checksum_line(body);
}

TEST(TreeIoTest, RoundTripIsExact) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const BusTree tree = Built(seed, 3 + seed);
    const std::string text = serialize_tree(tree);
    const BusTree back = parse_tree(text);
    EXPECT_EQ(back, tree);
    EXPECT_EQ(serialize_tree(back), text);
  }
}

TEST(TreeIoTest, GrownTreesRoundTrip) {
  BusTree tree = Built(1, 5);
  assign_user(tree, {"n", {{"a0", "zz"}, {"a1", "zz"}, {"a2", "zz"}}},
              AssignMode::kMutating);
  EXPECT_EQ(parse_tree(serialize_tree(tree)), tree);
}

TEST(TreeIoTest, DetectsCorruption) {
  const std::string text = serialize_tree(Built(2, 4));
  std::string flipped = text;
  flipped[text.find("\"level\":1") + 8] = '2';
  EXPECT_THROW(parse_tree(flipped), FormatError);
  EXPECT_THROW(parse_tree(text.substr(0, text.size() - 1)), FormatError);
  EXPECT_THROW(parse_tree(text.substr(0, text.rfind("{\"checksum\""))),
               FormatError);
  EXPECT_THROW(parse_tree(""), FormatError);
}

TEST(TreeIoTest, RejectsWrongFormatAndVersion) {
  const std::string text = serialize_tree(Built(3, 4));
  EXPECT_THROW(parse_tree(Resealed(text, "\"bus-tree\"", "\"other\"")), FormatError);
  EXPECT_THROW(parse_tree(Resealed(text, "\"version\":1", "\"version\":9")),
               FormatError);
}

TEST(TreeIoTest, RejectsStructuralViolations) {
  const std::string text = serialize_tree(Built(4, 2));
  // A node pointing at a parent defined later.
  EXPECT_THROW(parse_tree(Resealed(text, "\"parent_id\":0", "\"parent_id\":999")),
               FormatError);
  // Population that no longer adds up.
  EXPECT_THROW(
      parse_tree(Resealed(text, "\"marginal_count\":", "\"marginal_count\":1")),
      FormatError);
}

TEST(TreeIoTest, FileRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "bus_tree_io_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "tree.jsonl").string();
  const BusTree tree = Built(5, 3);
  save_tree(tree, path);
  EXPECT_EQ(load_tree(path), tree);
  EXPECT_THROW(load_tree((dir / "missing.jsonl").string()), Error);
  std::filesystem::remove_all(dir);
}

TEST(TreeIoTest, Fnv1a64KnownValues) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cull);
}

}  // namespace
}  // namespace bus
