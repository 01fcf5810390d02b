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

#include "bus/index.hpp"

#include <algorithm>

#include "bus/error.hpp"
#include "bus/parallel.hpp"

namespace bus {
namespace {

// Per-level attribute values of one user, in tree order.
std::vector<std::string_view> values_for_levels(const BusTree& tree,
                                                const UserRecord& user) {
  std::vector<std::string_view> values;
  values.reserve(tree.depth());
  for (const auto& attr : tree.attribute_order()) {
    auto it = user.attributes.find(attr);
    if (it == user.attributes.end()) {
      throw DataError("user '" + user.user_id + "' has no value for '" + attr +
                      "'");
    }
    values.push_back(it->second);
  }
  return values;
}

struct Walk {
  NodeId node;
  // Level of the first unmatched step, or depth when a leaf was reached.
  std::size_t stopped_at;
};

template <typename ValueAt>
Walk walk(const BusTree& tree, ValueAt&& value_at) {
  NodeId cur = tree.root();
  for (std::size_t level = 0; level < tree.depth(); ++level) {
    NodeId next = tree.find_value_child(cur, value_at(level));
    if (next == kNoNode) next = tree.regress_child(cur);
    if (next == kNoNode) return {cur, level};
    cur = next;
  }
  return {cur, tree.depth()};
}

NodeId insert_padding(BusTree& tree, NodeId from) {
  NodeId cur = from;
  while (tree.node(cur).level < tree.depth()) {
    cur = tree.add_child(cur, NodeKind::kRegress, {}, 0, 0, Reward());
  }
  return cur;
}

std::vector<std::size_t> level_columns(const BusTree& tree,
                                       const UserTable& users) {
  std::vector<std::size_t> columns;
  for (const auto& attr : tree.attribute_order()) {
    auto idx = users.schema().index_of(attr);
    if (!idx) {
      throw DataError("user table has no attribute '" + attr +
                      "' required by the tree");
    }
    columns.push_back(*idx);
  }
  return columns;
}

}  // namespace

std::string SegmentPath::to_string() const {
  std::string out = "global";
  for (const auto& s : steps) {
    out += '>';
    out += s.kind == NodeKind::kRegress ? std::string("REGRESS") : s.value;
  }
  return out;
}

SegmentPath path_of(const BusTree& tree, NodeId node) {
  SegmentPath path;
  path.node = node;
  for (NodeId id : tree.path_to(node)) {
    const BusNode& n = tree.node(id);
    if (n.kind == NodeKind::kRoot) continue;
    path.steps.push_back({n.attribute, n.kind, n.value, id});
  }
  for (std::size_t level = path.steps.size(); level < tree.depth(); ++level) {
    path.steps.push_back({tree.attribute_order()[level], NodeKind::kRegress, {},
                          kNoNode});
    path.complete = false;
  }
  return path;
}

Assignment assign_user(BusTree& tree, const UserRecord& user, AssignMode mode) {
  const auto values = values_for_levels(tree, user);
  const Walk w = walk(tree, [&](std::size_t level) { return values[level]; });
  Assignment result;
  if (w.stopped_at == tree.depth() || mode == AssignMode::kReadOnly) {
    result.path = path_of(tree, w.node);
    return result;
  }
  result.path = path_of(tree, insert_padding(tree, w.node));
  result.mutated = true;
  return result;
}

SegmentPath search_user(const BusTree& tree, const UserRecord& user) {
  const auto values = values_for_levels(tree, user);
  const Walk w = walk(tree, [&](std::size_t level) { return values[level]; });
  return path_of(tree, w.node);
}

AssignAllResult search_all(const BusTree& tree, const UserTable& users,
                           unsigned workers) {
  const auto columns = level_columns(tree, users);
  AssignAllResult result;
  result.nodes.assign(users.size(), kNoNode);
  std::vector<std::uint8_t> missed(users.size(), 0);
  constexpr std::size_t kChunk = 4096;
  const std::size_t chunks = (users.size() + kChunk - 1) / kChunk;
  parallel_for(chunks, workers, [&](std::size_t c, unsigned) {
    const std::size_t end = std::min(users.size(), (c + 1) * kChunk);
    for (std::size_t u = c * kChunk; u < end; ++u) {
      const auto user = static_cast<UserIndex>(u);
      const Walk w = walk(tree, [&](std::size_t level) -> std::string_view {
        return users.value(user, columns[level]);
      });
      result.nodes[u] = w.node;
      missed[u] = w.stopped_at != tree.depth();
    }
  });
  result.inserts = static_cast<std::size_t>(
      std::count(missed.begin(), missed.end(), std::uint8_t{1}));
  return result;
}

AssignAllResult assign_all(BusTree& tree, const UserTable& users,
                           AssignMode mode, unsigned workers) {
  if (mode == AssignMode::kReadOnly) return search_all(tree, users, workers);
  const auto columns = level_columns(tree, users);
  AssignAllResult result;
  result.nodes.reserve(users.size());
  for (UserIndex u = 0; u < users.size(); ++u) {
    const Walk w = walk(tree, [&](std::size_t level) -> std::string_view {
      return users.value(u, columns[level]);
    });
    if (w.stopped_at == tree.depth()) {
      result.nodes.push_back(w.node);
    } else {
      result.nodes.push_back(insert_padding(tree, w.node));
      ++result.inserts;
    }
  }
  return result;
}

}  // namespace bus
