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

#ifndef BUS_INDEX_HPP_
#define BUS_INDEX_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "bus/dataset.hpp"
#include "bus/tree.hpp"

namespace bus {

struct PathStep {
  std::string attribute;
  NodeKind kind = NodeKind::kValue;
  std::string value;
  // kNoNode for padding steps of an unresolved read-only path.
  NodeId node = kNoNode;

  friend bool operator==(const PathStep&, const PathStep&) = default;
};

// Root-to-leaf route of a user; one step per tree level.
struct SegmentPath {
  std::vector<PathStep> steps;
  // Leaf reached, or in read-only mode the deepest existing node when the
  // route would need a new leaf.
  NodeId node = kNoNode;
  // False when the trailing steps are REGRESS padding that does not exist.
  bool complete = true;

  // e.g. "global>US>REGRESS>30s".
  std::string to_string() const;

  friend bool operator==(const SegmentPath&, const SegmentPath&) = default;
};

// Path of `node`, padded with REGRESS steps below it up to the tree depth.
SegmentPath path_of(const BusTree& tree, NodeId node);

enum class AssignMode { kReadOnly, kMutating };

struct Assignment {
  SegmentPath path;
  bool mutated = false;
};

// Walks the levels: a child with the user's value (case 1), else the
// regress child (case 2), else a new regress-padded leaf under the current
// node (case 3, mutating mode only). Throws DataError when the user lacks
// one of the tree's attribute types.
Assignment assign_user(BusTree& tree, const UserRecord& user, AssignMode mode);
// Read-only search on an immutable tree.
SegmentPath search_user(const BusTree& tree, const UserRecord& user);

struct AssignAllResult {
  // Resolved node per user index.
  std::vector<NodeId> nodes;
  // Users whose route needed a new leaf (created in mutating mode).
  std::size_t inserts = 0;

  double insert_rate() const {
    return nodes.empty() ? 0.0
                         : static_cast<double>(inserts) /
                               static_cast<double>(nodes.size());
  }
};

// Assigns every user of `users`. Read-only mode runs in parallel and never
// touches the tree.
AssignAllResult assign_all(BusTree& tree, const UserTable& users,
                           AssignMode mode, unsigned workers = 0);
AssignAllResult search_all(const BusTree& tree, const UserTable& users,
                           unsigned workers = 0);

}  // namespace bus

#endif  // BUS_INDEX_HPP_
