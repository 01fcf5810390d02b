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

#ifndef BUS_TESTS_SUPPORT_FIXTURES_HPP_
#define BUS_TESTS_SUPPORT_FIXTURES_HPP_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "bus/dataset.hpp"
#include "bus/schema.hpp"
#include "oracle.hpp"

namespace fixtures {

struct Data {
  bus::UserTable users;
  bus::EngagementTable engagements;
  bus::UserClassification classification;
};

inline Data make_data(const bus::AttributeSchema& schema,
                      const std::vector<oracle::User>& people) {
  std::vector<bus::UserRecord> records;
  std::vector<bus::EngagementRow> rows;
  for (const auto& p : people) {
    records.push_back({p.id, p.attributes});
    for (const auto& [item, score] : p.training) {
      rows.push_back({p.id, item, score, bus::Window::kTraining});
    }
    for (const auto& [item, score] : p.holdout) {
      rows.push_back({p.id, item, score, bus::Window::kHoldout});
    }
  }
  Data d;
  d.users = bus::UserTable::FromRecords(schema, records);
  d.engagements = bus::EngagementTable::FromRows(d.users, rows);
  d.classification = bus::classify_users(d.engagements, d.users);
  return d;
}

// Oracle view of a library dataset.
inline std::vector<oracle::User> to_oracle(const bus::UserTable& users,
                                           const bus::EngagementTable& eng) {
  std::vector<oracle::User> out(users.size());
  for (bus::UserIndex u = 0; u < users.size(); ++u) {
    out[u].id = users.id(u);
    out[u].attributes = users.record(u).attributes;
    for (const auto& e : eng.training(u)) {
      out[u].training[eng.items().value(e.item)] = e.score;
    }
    for (const auto& e : eng.holdout(u)) {
      out[u].holdout[eng.items().value(e.item)] = e.score;
    }
  }
  return out;
}

// The two-way split of a single-country market: city and age both refine
// country. Splitting by city earns 360, splitting by age 320.
inline Data city_vs_age() {
  bus::AttributeSchema schema({{"country", {}},
                               {"city", {"country"}},
                               {"age", {"country"}}});
  std::vector<oracle::User> people;
  int next = 0;
  auto add = [&](const std::string& city, const std::string& age,
                 oracle::Scores training, oracle::Scores holdout) {
    oracle::User u;
    u.id = "u" + std::to_string(next++);
    u.attributes = {{"country", "US"}, {"city", city}, {"age", age}};
    u.training = std::move(training);
    u.holdout = std::move(holdout);
    people.push_back(std::move(u));
  };
  add("SF", "20s", {{"a", 10}, {"g", 6}}, {});
  add("NY", "30s", {{"b", 10}, {"g", 6}}, {});
  add("AB", "20s", {{"c", 2.5}}, {});
  add("AB", "30s", {{"c", 2.5}}, {});
  for (int i = 0; i < 180; ++i) add("SF", "20s", {}, {{"a", 1}});
  for (int i = 0; i < 140; ++i) add("NY", "30s", {}, {{"b", 1}});
  for (int i = 0; i < 20; ++i) add("AB", "20s", {}, {{"g", 1}});
  for (int i = 0; i < 20; ++i) add("AB", "30s", {}, {{"g", 1}});
  return make_data(schema, people);
}

// Small random dataset over `n_attr` attributes with cardinality `card`.
inline Data random_data(std::uint64_t seed, std::size_t n_users,
                        std::size_t n_attr, std::size_t card,
                        std::size_t n_items) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> names;
  for (std::size_t a = 0; a < n_attr; ++a) names.push_back("a" + std::to_string(a));
  std::vector<oracle::User> people(n_users);
  for (std::size_t i = 0; i < n_users; ++i) {
    auto& p = people[i];
    p.id = "u" + std::to_string(i);
    for (const auto& name : names) {
      p.attributes[name] = "v" + std::to_string(rng() % card);
    }
    // Preference follows the first attribute, with noise.
    const std::size_t pref = p.attributes[names[0]].back() - '0';
    const bool active = rng() % 3 == 0;
    const std::size_t rows = 1 + rng() % 4;
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t item =
          rng() % 2 == 0 ? (pref * 3 + rng() % 3) % n_items : rng() % n_items;
      auto& target = active ? p.training : p.holdout;
      target["i" + std::to_string(item)] += double(1 + rng() % 3);
    }
  }
  return make_data(bus::AttributeSchema::FromNames(names), people);
}

}  // namespace fixtures

#endif  // BUS_TESTS_SUPPORT_FIXTURES_HPP_
