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

#ifndef BUS_SCHEMA_HPP_
#define BUS_SCHEMA_HPP_

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bus {

// Sentinel categorical value for missing or out-of-domain attributes. It is a
// member of every attribute's value domain.
inline constexpr std::string_view kNullValue = "NULL";

struct AttributeType {
  std::string name;
  // Attribute types that must be selected at a shallower tree level before
  // this one becomes eligible.
  std::vector<std::string> prerequisites;

  friend bool operator==(const AttributeType&, const AttributeType&) = default;
};

// Half-open numeric range [lo, hi) mapped to a categorical label.
struct Bucket {
  double lo = 0;
  double hi = 0;
  std::string label;

  friend bool operator==(const Bucket&, const Bucket&) = default;
};

// Bucketization of one numeric attribute into contiguous, disjoint ranges.
class BucketSpec {
 public:
  BucketSpec() = default;
  // Throws ConfigError unless ranges are non-empty, ordered and contiguous.
  BucketSpec(std::string attribute, std::vector<Bucket> buckets);

  // Decade buckets "0s", "10s", ... covering [lo, hi); lo and hi must be
  // multiples of 10.
  static BucketSpec Decades(std::string attribute, int lo, int hi);

  const std::string& attribute() const { return attribute_; }
  const std::vector<Bucket>& buckets() const { return buckets_; }

  friend bool operator==(const BucketSpec&, const BucketSpec&) = default;

 private:
  std::string attribute_;
  std::vector<Bucket> buckets_;
};

// Label of the range containing `value`, or "NULL" outside the covered
// domain (including NaN).
std::string bucketize(double value, const BucketSpec& spec);

// Ordered catalog of categorical attribute types plus optional numeric
// bucketization rules.
class AttributeSchema {
 public:
  AttributeSchema() = default;
  // Validates unique names, known prerequisites and an acyclic prerequisite
  // relation. Throws ConfigError.
  explicit AttributeSchema(std::vector<AttributeType> types,
                           std::vector<BucketSpec> buckets = {});

  // Schema whose types are `names` in order, without prerequisites.
  static AttributeSchema FromNames(const std::vector<std::string>& names);

  // Reads {"attributes": [{"name": .., "requires": [..]}, ..],
  //        "buckets": [{"attribute": .., "ranges": [{"lo","hi","label"}]}]}.
  static AttributeSchema FromJsonFile(const std::string& path);
  static AttributeSchema FromJsonText(std::string_view text);
  std::string ToJsonText() const;

  const std::vector<AttributeType>& types() const { return types_; }
  std::size_t size() const { return types_.size(); }
  bool empty() const { return types_.empty(); }
  std::optional<std::size_t> index_of(std::string_view name) const;
  const AttributeType& at(std::size_t i) const { return types_.at(i); }
  const BucketSpec* bucket_spec(std::string_view attribute) const;
  const std::vector<BucketSpec>& bucket_specs() const { return buckets_; }

  friend bool operator==(const AttributeSchema&,
                         const AttributeSchema&) = default;

 private:
  std::vector<AttributeType> types_;
  std::vector<BucketSpec> buckets_;
};

}  // namespace bus

#endif  // BUS_SCHEMA_HPP_
