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

#include "bus/schema.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <unordered_map>

#include "bus/error.hpp"
#include "json.hpp"

namespace bus {

BucketSpec::BucketSpec(std::string attribute, std::vector<Bucket> buckets)
    : attribute_(std::move(attribute)), buckets_(std::move(buckets)) {
  if (buckets_.empty()) {
    throw ConfigError("bucket spec for '" + attribute_ + "' has no ranges");
  }
  for (std::size_t i = 0; i < buckets_.size(); ++i) {
    const Bucket& b = buckets_[i];
    if (!(b.lo < b.hi)) {
      throw ConfigError("bucket '" + b.label + "' of '" + attribute_ +
                        "' is empty or inverted");
    }
    if (b.label.empty() || b.label == kNullValue) {
      throw ConfigError("bucket labels of '" + attribute_ +
                        "' must be non-empty and not NULL");
    }
    if (i > 0 && buckets_[i - 1].hi != b.lo) {
      throw ConfigError("bucket ranges of '" + attribute_ +
                        "' must be ordered and contiguous");
    }
  }
}

BucketSpec BucketSpec::Decades(std::string attribute, int lo, int hi) {
  if (lo % 10 != 0 || hi % 10 != 0 || lo >= hi) {
    throw ConfigError("decade buckets need multiples of 10 with lo < hi");
  }
  std::vector<Bucket> buckets;
  for (int d = lo; d < hi; d += 10) {
    buckets.push_back({static_cast<double>(d), static_cast<double>(d + 10),
                       std::to_string(d) + "s"});
  }
  return BucketSpec(std::move(attribute), std::move(buckets));
}

std::string bucketize(double value, const BucketSpec& spec) {
  const auto& buckets = spec.buckets();
  if (std::isnan(value) || buckets.empty() || value < buckets.front().lo ||
      value >= buckets.back().hi) {
    return std::string(kNullValue);
  }
  // First bucket whose upper bound exceeds the value.
  auto it = std::upper_bound(
      buckets.begin(), buckets.end(), value,
      [](double v, const Bucket& b) { return v < b.hi; });
  return it->label;
}

AttributeSchema::AttributeSchema(std::vector<AttributeType> types,
                                 std::vector<BucketSpec> buckets)
    : types_(std::move(types)), buckets_(std::move(buckets)) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < types_.size(); ++i) {
    if (types_[i].name.empty()) {
      throw ConfigError("attribute type names must be non-empty");
    }
    if (!index.emplace(types_[i].name, i).second) {
      throw ConfigError("duplicate attribute type '" + types_[i].name + "'");
    }
  }
  for (const auto& t : types_) {
    for (const auto& p : t.prerequisites) {
      if (!index.contains(p)) {
        throw ConfigError("attribute '" + t.name +
                          "' requires unknown attribute '" + p + "'");
      }
      if (p == t.name) {
        throw ConfigError("attribute '" + t.name + "' requires itself");
      }
    }
  }
  // Cycle detection by DFS colouring.
  std::vector<int> colour(types_.size(), 0);
  std::function<void(std::size_t)> visit = [&](std::size_t i) {
    colour[i] = 1;
    for (const auto& p : types_[i].prerequisites) {
      const std::size_t j = index.at(p);
      if (colour[j] == 1) {
        throw ConfigError("prerequisite cycle through attribute '" +
                          types_[j].name + "'");
      }
      if (colour[j] == 0) visit(j);
    }
    colour[i] = 2;
  };
  for (std::size_t i = 0; i < types_.size(); ++i) {
    if (colour[i] == 0) visit(i);
  }
  std::set<std::string> bucketed;
  for (const auto& b : buckets_) {
    if (!index.contains(b.attribute())) {
      throw ConfigError("bucket spec for unknown attribute '" +
                        b.attribute() + "'");
    }
    if (!bucketed.insert(b.attribute()).second) {
      throw ConfigError("duplicate bucket spec for '" + b.attribute() + "'");
    }
  }
}

AttributeSchema AttributeSchema::FromNames(
    const std::vector<std::string>& names) {
  std::vector<AttributeType> types;
  types.reserve(names.size());
  for (const auto& n : names) types.push_back({n, {}});
  return AttributeSchema(std::move(types));
}

std::optional<std::size_t> AttributeSchema::index_of(
    std::string_view name) const {
  for (std::size_t i = 0; i < types_.size(); ++i) {
    if (types_[i].name == name) return i;
  }
  return std::nullopt;
}

const BucketSpec* AttributeSchema::bucket_spec(
    std::string_view attribute) const {
  for (const auto& b : buckets_) {
    if (b.attribute() == attribute) return &b;
  }
  return nullptr;
}

AttributeSchema AttributeSchema::FromJsonText(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("schema is not valid JSON: ") + e.what());
  }
  try {
    std::vector<AttributeType> types;
    for (const auto& a : doc.at("attributes")) {
      AttributeType t;
      t.name = a.at("name").get<std::string>();
      if (a.contains("requires")) {
        t.prerequisites = a.at("requires").get<std::vector<std::string>>();
      }
      types.push_back(std::move(t));
    }
    std::vector<BucketSpec> buckets;
    if (doc.contains("buckets")) {
      for (const auto& b : doc.at("buckets")) {
        std::vector<Bucket> ranges;
        for (const auto& r : b.at("ranges")) {
          ranges.push_back({r.at("lo").get<double>(), r.at("hi").get<double>(),
                            r.at("label").get<std::string>()});
        }
        buckets.emplace_back(b.at("attribute").get<std::string>(),
                             std::move(ranges));
      }
    }
    return AttributeSchema(std::move(types), std::move(buckets));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed schema: ") + e.what());
  }
}

AttributeSchema AttributeSchema::FromJsonFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schema file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return FromJsonText(buffer.str());
}

std::string AttributeSchema::ToJsonText() const {
  nlohmann::json doc;
  doc["attributes"] = nlohmann::json::array();
  for (const auto& t : types_) {
    nlohmann::json a;
    a["name"] = t.name;
    if (!t.prerequisites.empty()) a["requires"] = t.prerequisites;
    doc["attributes"].push_back(std::move(a));
  }
  if (!buckets_.empty()) {
    doc["buckets"] = nlohmann::json::array();
    for (const auto& b : buckets_) {
      nlohmann::json spec;
      spec["attribute"] = b.attribute();
      spec["ranges"] = nlohmann::json::array();
      for (const auto& r : b.buckets()) {
        spec["ranges"].push_back({{"lo", r.lo}, {"hi", r.hi}, {"label", r.label}});
      }
      doc["buckets"].push_back(std::move(spec));
    }
  }
  return doc.dump(2) + "\n";
}

}  // namespace bus
