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

#ifndef BUS_DATASET_HPP_
#define BUS_DATASET_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "bus/schema.hpp"

namespace bus {

using UserIndex = std::uint32_t;
using ItemIndex = std::uint32_t;
using ValueCode = std::uint32_t;

// Interned strings. Codes follow lexicographic order of the strings, so
// comparing codes is the same as comparing the strings.
class Dictionary {
 public:
  Dictionary() = default;
  // Sorts and deduplicates `values`.
  explicit Dictionary(std::vector<std::string> values);

  std::size_t size() const { return values_.size(); }
  const std::string& value(std::uint32_t code) const { return values_[code]; }
  std::optional<std::uint32_t> code(std::string_view value) const;
  const std::vector<std::string>& values() const { return values_; }

  friend bool operator==(const Dictionary& a, const Dictionary& b) {
    return a.values_ == b.values_;
  }

 private:
  std::vector<std::string> values_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

// One user with a categorical value for attribute names.
struct UserRecord {
  std::string user_id;
  std::map<std::string, std::string> attributes;

  // The stored value, or "NULL" when absent.
  std::string_view value(std::string_view attribute) const;

  friend bool operator==(const UserRecord&, const UserRecord&) = default;
};

// Column-oriented user attribute table. Every schema attribute has exactly
// one value per user; missing raw values are stored as "NULL".
class UserTable {
 public:
  UserTable() = default;
  // Throws DataError on duplicate user ids. Attributes outside the schema are
  // ignored; bucketed attributes are bucketized from their numeric text.
  static UserTable FromRecords(AttributeSchema schema,
                               const std::vector<UserRecord>& records);
  // Columnar form: codes[a][u] indexes domains[a], whose entries must be
  // unique stored values. Throws DataError on duplicate ids or bad codes.
  static UserTable FromColumns(AttributeSchema schema,
                               std::vector<std::string> ids,
                               std::vector<std::vector<std::string>> domains,
                               std::vector<std::vector<ValueCode>> codes);

  const AttributeSchema& schema() const { return schema_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }

  const std::string& id(UserIndex u) const { return ids_[u]; }
  std::optional<UserIndex> find(std::string_view user_id) const;

  // Value codes index into dictionary(attribute).
  ValueCode code(UserIndex u, std::size_t attribute) const {
    return columns_[attribute][u];
  }
  std::span<const ValueCode> column(std::size_t attribute) const {
    return columns_[attribute];
  }
  const Dictionary& dictionary(std::size_t attribute) const {
    return dictionaries_[attribute];
  }
  const std::string& value(UserIndex u, std::size_t attribute) const {
    return dictionaries_[attribute].value(columns_[attribute][u]);
  }
  UserRecord record(UserIndex u) const;

  friend bool operator==(const UserTable& a, const UserTable& b) {
    return a.schema_ == b.schema_ && a.ids_ == b.ids_ &&
           a.columns_ == b.columns_ && a.dictionaries_ == b.dictionaries_;
  }

 private:
  AttributeSchema schema_;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, UserIndex> id_index_;
  std::vector<std::vector<ValueCode>> columns_;
  std::vector<Dictionary> dictionaries_;
};

// Maps a raw attribute text to its stored categorical value: empty becomes
// "NULL"; bucketed attributes are bucketized unless already a bucket label.
std::string normalize_attribute_value(const AttributeSchema& schema,
                                      std::string_view attribute,
                                      std::string_view raw);

// Reads a delimited file with a header row holding a `user_id` column.
// Tab-separated for .tsv/.tab extensions, comma-separated otherwise.
// Rows keep file order. Throws ParseError (with line) or DataError.
UserTable load_users(const std::string& path, const AttributeSchema& schema);
void save_users(const std::string& path, const UserTable& users);

enum class Window { kTraining, kHoldout };

std::string_view window_name(Window w);
std::optional<Window> parse_window(std::string_view text);

struct Engagement {
  ItemIndex item;
  double score;

  friend bool operator==(const Engagement&, const Engagement&) = default;
};

// Raw engagement row before interning.
struct EngagementRow {
  std::string user_id;
  std::string item_id;
  double score = 0;
  Window window = Window::kTraining;
};

// Per-user engagement lists for the training and holdout windows. Rows are
// keyed by (user, item, window); duplicates are summed. Immutable once built.
class EngagementTable {
 public:
  EngagementTable() = default;
  // Throws DataError for users absent from `users` and for negative or
  // non-finite scores.
  static EngagementTable FromRows(const UserTable& users,
                                  const std::vector<EngagementRow>& rows);

  std::size_t num_users() const { return num_users_; }
  std::size_t num_items() const { return items_.size(); }
  const Dictionary& items() const { return items_; }

  // Sorted by item index.
  std::span<const Engagement> rows(UserIndex u, Window w) const;
  std::span<const Engagement> training(UserIndex u) const {
    return rows(u, Window::kTraining);
  }
  std::span<const Engagement> holdout(UserIndex u) const {
    return rows(u, Window::kHoldout);
  }
  std::size_t total_rows(Window w) const;

  // Copy keeping the item dictionary, dropping (user, window) lists for
  // which `keep` is false.
  EngagementTable filtered(
      const std::function<bool(UserIndex, Window)>& keep) const;

  std::vector<EngagementRow> to_rows(const UserTable& users) const;

  friend bool operator==(const EngagementTable&,
                         const EngagementTable&) = default;

 private:
  struct Csr {
    std::vector<std::size_t> offsets;
    std::vector<Engagement> entries;
    friend bool operator==(const Csr&, const Csr&) = default;
  };
  const Csr& csr(Window w) const {
    return w == Window::kTraining ? training_ : holdout_;
  }

  friend class EngagementTableBuilder;

  std::size_t num_users_ = 0;
  Dictionary items_;
  Csr training_;
  Csr holdout_;
};

// Incremental construction of an EngagementTable bound to a user table.
class EngagementTableBuilder {
 public:
  explicit EngagementTableBuilder(const UserTable& users);

  // Throws DataError for unknown users or negative / non-finite scores.
  void add(std::string_view user_id, std::string_view item_id, double score,
           Window window);
  void add(UserIndex user, std::string_view item_id, double score,
           Window window);
  EngagementTable build() &&;

 private:
  struct Row {
    UserIndex user;
    std::uint32_t item;  // provisional, insertion order
    double score;
  };
  const UserTable& users_;
  std::unordered_map<std::string, std::uint32_t> item_codes_;
  std::vector<std::string> item_names_;
  std::vector<Row> rows_[2];
};

// Columns: user_id, item_id, score, window.
EngagementTable load_engagements(const std::string& path,
                                 const UserTable& users);
void save_engagements(const std::string& path, const EngagementTable& table,
                      const UserTable& users);

// Active: at least `min_training_rows` training rows. Marginal: everyone
// else. A marginal user with fewer than `min_holdout_rows` holdout rows is
// kept marginal but unscored (contributes zero reward).
struct ActivityRule {
  std::size_t min_training_rows = 1;
  std::size_t min_holdout_rows = 1;
};

enum class UserStatus : std::uint8_t { kActive, kMarginal, kMarginalUnscored };

class UserClassification {
 public:
  UserClassification() = default;
  explicit UserClassification(std::vector<UserStatus> status);

  std::size_t size() const { return status_.size(); }
  UserStatus status(UserIndex u) const { return status_[u]; }
  bool is_active(UserIndex u) const {
    return status_[u] == UserStatus::kActive;
  }
  bool is_scored(UserIndex u) const {
    return status_[u] == UserStatus::kMarginal;
  }
  std::span<const UserIndex> active() const { return active_; }
  std::span<const UserIndex> marginal() const { return marginal_; }

 private:
  std::vector<UserStatus> status_;
  std::vector<UserIndex> active_;
  std::vector<UserIndex> marginal_;
};

UserClassification classify_users(const EngagementTable& engagements,
                                   const UserTable& users,
                                   const ActivityRule& rule = {});

// Splits one delimited line. No quoting.
std::vector<std::string_view> split_fields(std::string_view line, char delim);
char delimiter_for_path(const std::string& path);

}  // namespace bus

#endif  // BUS_DATASET_HPP_
