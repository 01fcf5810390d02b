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

#include "bus/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

#include "bus/error.hpp"

namespace bus {
namespace {

// Interns strings in first-seen order, then remaps codes to sorted order.
class ColumnInterner {
 public:
  std::uint32_t add(std::string_view value) {
    auto it = codes_.find(std::string(value));
    if (it != codes_.end()) return it->second;
    const auto code = static_cast<std::uint32_t>(names_.size());
    names_.emplace_back(value);
    codes_.emplace(names_.back(), code);
    return code;
  }

  // Returns the sorted dictionary and rewrites `column` in place.
  Dictionary finalize(std::vector<ValueCode>& column) {
    std::vector<std::uint32_t> order(names_.size());
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      return names_[a] < names_[b];
    });
    std::vector<std::uint32_t> remap(names_.size());
    for (std::uint32_t rank = 0; rank < order.size(); ++rank) {
      remap[order[rank]] = rank;
    }
    for (auto& c : column) c = remap[c];
    return Dictionary(std::move(names_));
  }

 private:
  std::unordered_map<std::string, std::uint32_t> codes_;
  std::vector<std::string> names_;
};

std::optional<double> parse_double(std::string_view text) {
  double value = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

std::string format_double(double value) {
  char buffer[64];
  auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, ptr);
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool is_blank(std::string_view line) {
  return line.find_first_not_of(" \t") == std::string_view::npos;
}

void check_writable_field(std::string_view value, char delim) {
  if (value.find(delim) != std::string_view::npos ||
      value.find('\n') != std::string_view::npos) {
    throw DataError("value '" + std::string(value) +
                    "' contains the delimiter or a newline");
  }
}

}  // namespace

Dictionary::Dictionary(std::vector<std::string> values) {
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  values_ = std::move(values);
  index_.reserve(values_.size());
  for (std::uint32_t i = 0; i < values_.size(); ++i) {
    index_.emplace(values_[i], i);
  }
}

std::optional<std::uint32_t> Dictionary::code(std::string_view value) const {
  auto it = index_.find(std::string(value));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string_view UserRecord::value(std::string_view attribute) const {
  auto it = attributes.find(std::string(attribute));
  if (it == attributes.end()) return kNullValue;
  return it->second;
}

std::vector<std::string_view> split_fields(std::string_view line, char delim) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

char delimiter_for_path(const std::string& path) {
  auto ends_with = [&](std::string_view suffix) {
    return path.size() >= suffix.size() &&
           path.compare(path.size() - suffix.size(), suffix.size(), suffix) ==
               0;
  };
  return (ends_with(".tsv") || ends_with(".tab")) ? '\t' : ',';
}

std::string normalize_attribute_value(const AttributeSchema& schema,
                                      std::string_view attribute,
                                      std::string_view raw) {
  if (raw.empty()) return std::string(kNullValue);
  const BucketSpec* spec = schema.bucket_spec(attribute);
  if (spec == nullptr || raw == kNullValue) return std::string(raw);
  for (const auto& b : spec->buckets()) {
    if (b.label == raw) return std::string(raw);
  }
  const auto number = parse_double(raw);
  if (!number) return std::string(kNullValue);
  return bucketize(*number, *spec);
}

UserTable UserTable::FromRecords(AttributeSchema schema,
                                 const std::vector<UserRecord>& records) {
  UserTable table;
  const std::size_t n_attr = schema.size();
  std::vector<ColumnInterner> interners(n_attr);
  table.columns_.assign(n_attr, {});
  for (auto& c : table.columns_) c.reserve(records.size());
  table.ids_.reserve(records.size());
  for (const auto& r : records) {
    const auto u = static_cast<UserIndex>(table.ids_.size());
    if (!table.id_index_.emplace(r.user_id, u).second) {
      throw DataError("duplicate user_id '" + r.user_id + "'");
    }
    table.ids_.push_back(r.user_id);
    for (std::size_t a = 0; a < n_attr; ++a) {
      const auto& name = schema.at(a).name;
      table.columns_[a].push_back(interners[a].add(
          normalize_attribute_value(schema, name, r.value(name))));
    }
  }
  for (std::size_t a = 0; a < n_attr; ++a) {
    interners[a].add(kNullValue);
    table.dictionaries_.push_back(interners[a].finalize(table.columns_[a]));
  }
  table.schema_ = std::move(schema);
  return table;
}

UserTable UserTable::FromColumns(AttributeSchema schema,
                                 std::vector<std::string> ids,
                                 std::vector<std::vector<std::string>> domains,
                                 std::vector<std::vector<ValueCode>> codes) {
  const std::size_t n_attr = schema.size();
  if (domains.size() != n_attr || codes.size() != n_attr) {
    throw DataError("column count does not match the schema");
  }
  UserTable table;
  table.id_index_.reserve(ids.size());
  for (UserIndex u = 0; u < ids.size(); ++u) {
    if (!table.id_index_.emplace(ids[u], u).second) {
      throw DataError("duplicate user_id '" + ids[u] + "'");
    }
  }
  for (std::size_t a = 0; a < n_attr; ++a) {
    if (codes[a].size() != ids.size()) {
      throw DataError("column length does not match the user count");
    }
    ColumnInterner interner;
    std::vector<ValueCode> local(domains[a].size());
    for (std::size_t c = 0; c < domains[a].size(); ++c) {
      local[c] = interner.add(domains[a][c]);
    }
    for (auto& c : codes[a]) {
      if (c >= local.size()) throw DataError("value code out of range");
      c = local[c];
    }
    interner.add(kNullValue);
    table.dictionaries_.push_back(interner.finalize(codes[a]));
  }
  table.ids_ = std::move(ids);
  table.columns_ = std::move(codes);
  table.schema_ = std::move(schema);
  return table;
}

std::optional<UserIndex> UserTable::find(std::string_view user_id) const {
  auto it = id_index_.find(std::string(user_id));
  if (it == id_index_.end()) return std::nullopt;
  return it->second;
}

UserRecord UserTable::record(UserIndex u) const {
  UserRecord r;
  r.user_id = ids_[u];
  for (std::size_t a = 0; a < schema_.size(); ++a) {
    r.attributes.emplace(schema_.at(a).name, value(u, a));
  }
  return r;
}

UserTable load_users(const std::string& path, const AttributeSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open users file '" + path + "'");
  const char delim = delimiter_for_path(path);

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (is_blank(line)) continue;
    for (auto f : split_fields(line, delim)) header.emplace_back(f);
    break;
  }
  UserTable empty_table = UserTable::FromRecords(schema, {});
  if (header.empty()) return empty_table;

  std::optional<std::size_t> id_column;
  std::vector<std::optional<std::size_t>> attr_column(schema.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "user_id") {
      id_column = c;
    } else if (auto a = schema.index_of(header[c])) {
      attr_column[*a] = c;
    }
  }
  if (!id_column) {
    throw ParseError(path, line_no, "header has no 'user_id' column");
  }

  std::vector<UserRecord> records;
  std::unordered_map<std::string, std::size_t> seen;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (is_blank(line)) continue;
    const auto fields = split_fields(line, delim);
    if (fields.size() != header.size()) {
      throw ParseError(path, line_no,
                       "expected " + std::to_string(header.size()) +
                           " fields, found " + std::to_string(fields.size()));
    }
    UserRecord r;
    r.user_id = std::string(fields[*id_column]);
    if (r.user_id.empty()) throw ParseError(path, line_no, "empty user_id");
    if (auto [it, inserted] = seen.emplace(r.user_id, line_no); !inserted) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": duplicate user_id '" + r.user_id +
                      "' (first seen on line " + std::to_string(it->second) +
                      ")");
    }
    for (std::size_t a = 0; a < schema.size(); ++a) {
      if (attr_column[a]) {
        r.attributes.emplace(schema.at(a).name,
                             std::string(fields[*attr_column[a]]));
      }
    }
    records.push_back(std::move(r));
  }
  return UserTable::FromRecords(schema, records);
}

void save_users(const std::string& path, const UserTable& users) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write users file '" + path + "'");
  const char delim = delimiter_for_path(path);
  out << "user_id";
  for (const auto& t : users.schema().types()) {
    check_writable_field(t.name, delim);
    out << delim << t.name;
  }
  out << '\n';
  for (UserIndex u = 0; u < users.size(); ++u) {
    check_writable_field(users.id(u), delim);
    out << users.id(u);
    for (std::size_t a = 0; a < users.schema().size(); ++a) {
      check_writable_field(users.value(u, a), delim);
      out << delim << users.value(u, a);
    }
    out << '\n';
  }
  if (!out) throw Error("failed writing users file '" + path + "'");
}

std::string_view window_name(Window w) {
  return w == Window::kTraining ? "training" : "holdout";
}

std::optional<Window> parse_window(std::string_view text) {
  if (text == "training") return Window::kTraining;
  if (text == "holdout") return Window::kHoldout;
  return std::nullopt;
}

EngagementTableBuilder::EngagementTableBuilder(const UserTable& users)
    : users_(users) {}

void EngagementTableBuilder::add(std::string_view user_id,
                                 std::string_view item_id, double score,
                                 Window window) {
  const auto u = users_.find(user_id);
  if (!u) {
    throw DataError("engagement for user '" + std::string(user_id) +
                    "' absent from the user table");
  }
  add(*u, item_id, score, window);
}

void EngagementTableBuilder::add(UserIndex user, std::string_view item_id,
                                 double score, Window window) {
  if (user >= users_.size()) {
    throw DataError("engagement user index out of range");
  }
  if (!std::isfinite(score) || score < 0) {
    throw DataError("engagement score must be finite and non-negative (user '" +
                    users_.id(user) + "', item '" + std::string(item_id) +
                    "')");
  }
  if (item_id.empty()) throw DataError("empty item_id");
  std::uint32_t code;
  if (auto it = item_codes_.find(std::string(item_id)); it != item_codes_.end()) {
    code = it->second;
  } else {
    code = static_cast<std::uint32_t>(item_names_.size());
    item_names_.emplace_back(item_id);
    item_codes_.emplace(item_names_.back(), code);
  }
  rows_[window == Window::kTraining ? 0 : 1].push_back({user, code, score});
}

EngagementTable EngagementTableBuilder::build() && {
  EngagementTable table;
  table.num_users_ = users_.size();

  std::vector<std::uint32_t> order(item_names_.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return item_names_[a] < item_names_[b];
  });
  std::vector<ItemIndex> remap(item_names_.size());
  for (std::uint32_t rank = 0; rank < order.size(); ++rank) {
    remap[order[rank]] = rank;
  }
  table.items_ = Dictionary(std::move(item_names_));

  for (int w = 0; w < 2; ++w) {
    auto& rows = rows_[w];
    for (auto& r : rows) r.item = remap[r.item];
    // Stable: duplicates are summed in input order.
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
      return a.user != b.user ? a.user < b.user : a.item < b.item;
    });
    auto& csr = w == 0 ? table.training_ : table.holdout_;
    csr.offsets.assign(table.num_users_ + 1, 0);
    csr.entries.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size();) {
      std::size_t j = i;
      double sum = 0;
      while (j < rows.size() && rows[j].user == rows[i].user &&
             rows[j].item == rows[i].item) {
        sum += rows[j].score;
        ++j;
      }
      csr.entries.push_back({rows[i].item, sum});
      ++csr.offsets[rows[i].user + 1];
      i = j;
    }
    for (std::size_t u = 0; u < table.num_users_; ++u) {
      csr.offsets[u + 1] += csr.offsets[u];
    }
    rows.clear();
    rows.shrink_to_fit();
  }
  return table;
}

EngagementTable EngagementTable::FromRows(
    const UserTable& users, const std::vector<EngagementRow>& rows) {
  EngagementTableBuilder builder(users);
  for (const auto& r : rows) builder.add(r.user_id, r.item_id, r.score, r.window);
  return std::move(builder).build();
}

std::span<const Engagement> EngagementTable::rows(UserIndex u, Window w) const {
  const Csr& c = csr(w);
  if (c.offsets.empty()) return {};
  return std::span<const Engagement>(c.entries.data() + c.offsets[u],
                                     c.offsets[u + 1] - c.offsets[u]);
}

std::size_t EngagementTable::total_rows(Window w) const {
  return csr(w).entries.size();
}

EngagementTable EngagementTable::filtered(
    const std::function<bool(UserIndex, Window)>& keep) const {
  EngagementTable out;
  out.num_users_ = num_users_;
  out.items_ = items_;
  for (Window w : {Window::kTraining, Window::kHoldout}) {
    Csr& dst = w == Window::kTraining ? out.training_ : out.holdout_;
    dst.offsets.assign(num_users_ + 1, 0);
    for (UserIndex u = 0; u < num_users_; ++u) {
      if (keep(u, w)) {
        const auto r = rows(u, w);
        dst.entries.insert(dst.entries.end(), r.begin(), r.end());
      }
      dst.offsets[u + 1] = dst.entries.size();
    }
  }
  return out;
}

std::vector<EngagementRow> EngagementTable::to_rows(
    const UserTable& users) const {
  std::vector<EngagementRow> out;
  for (UserIndex u = 0; u < num_users_; ++u) {
    for (Window w : {Window::kTraining, Window::kHoldout}) {
      for (const auto& e : rows(u, w)) {
        out.push_back({users.id(u), items_.value(e.item), e.score, w});
      }
    }
  }
  return out;
}

EngagementTable load_engagements(const std::string& path,
                                 const UserTable& users) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open engagements file '" + path + "'");
  const char delim = delimiter_for_path(path);
  EngagementTableBuilder builder(users);

  std::string line;
  std::size_t line_no = 0;
  std::size_t col_user = 0, col_item = 1, col_score = 2, col_window = 3;
  std::size_t n_cols = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (is_blank(line)) continue;
    const auto header = split_fields(line, delim);
    n_cols = header.size();
    bool found[4] = {false, false, false, false};
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == "user_id") col_user = c, found[0] = true;
      if (header[c] == "item_id") col_item = c, found[1] = true;
      if (header[c] == "score") col_score = c, found[2] = true;
      if (header[c] == "window") col_window = c, found[3] = true;
    }
    if (!(found[0] && found[1] && found[2] && found[3])) {
      throw ParseError(path, line_no,
                       "header must name user_id, item_id, score, window");
    }
    break;
  }
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (is_blank(line)) continue;
    const auto fields = split_fields(line, delim);
    if (fields.size() != n_cols) {
      throw ParseError(path, line_no,
                       "expected " + std::to_string(n_cols) + " fields, found " +
                           std::to_string(fields.size()));
    }
    const auto score = parse_double(fields[col_score]);
    if (!score) {
      throw ParseError(path, line_no,
                       "score '" + std::string(fields[col_score]) +
                           "' is not a number");
    }
    const auto window = parse_window(fields[col_window]);
    if (!window) {
      throw ParseError(path, line_no,
                       "window must be 'training' or 'holdout', found '" +
                           std::string(fields[col_window]) + "'");
    }
    try {
      builder.add(fields[col_user], fields[col_item], *score, *window);
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return std::move(builder).build();
}

void save_engagements(const std::string& path, const EngagementTable& table,
                      const UserTable& users) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write engagements file '" + path + "'");
  const char d = delimiter_for_path(path);
  out << "user_id" << d << "item_id" << d << "score" << d << "window\n";
  for (UserIndex u = 0; u < table.num_users(); ++u) {
    for (Window w : {Window::kTraining, Window::kHoldout}) {
      for (const auto& e : table.rows(u, w)) {
        out << users.id(u) << d << table.items().value(e.item) << d
            << format_double(e.score) << d << window_name(w) << '\n';
      }
    }
  }
  if (!out) throw Error("failed writing engagements file '" + path + "'");
}

UserClassification::UserClassification(std::vector<UserStatus> status)
    : status_(std::move(status)) {
  for (UserIndex u = 0; u < status_.size(); ++u) {
    if (status_[u] == UserStatus::kActive) {
      active_.push_back(u);
    } else {
      marginal_.push_back(u);
    }
  }
}

UserClassification classify_users(const EngagementTable& engagements,
                                   const UserTable& users,
                                   const ActivityRule& rule) {
  if (rule.min_training_rows == 0) {
    throw ConfigError("activity rule needs min_training_rows >= 1");
  }
  if (engagements.num_users() != users.size()) {
    throw DataError("engagement table is bound to a different user table (" +
                    std::to_string(engagements.num_users()) + " vs " +
                    std::to_string(users.size()) + " users)");
  }
  std::vector<UserStatus> status(users.size());
  for (UserIndex u = 0; u < users.size(); ++u) {
    if (engagements.training(u).size() >= rule.min_training_rows) {
      status[u] = UserStatus::kActive;
    } else if (engagements.holdout(u).size() >= rule.min_holdout_rows &&
               !engagements.holdout(u).empty()) {
      status[u] = UserStatus::kMarginal;
    } else {
      status[u] = UserStatus::kMarginalUnscored;
    }
  }
  return UserClassification(std::move(status));
}

}  // namespace bus
