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

#ifndef BUS_TREE_HPP_
#define BUS_TREE_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bus/ranking.hpp"

namespace bus {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

enum class NodeKind : std::uint8_t { kRoot, kValue, kRegress };

// Parameters a tree was built with; persisted with it.
struct TreeParams {
  double omega = 1.0;
  std::size_t mu = 250;
  std::size_t k = 100;
  Relevance relevance = Relevance::kGraded;

  friend bool operator==(const TreeParams&, const TreeParams&) = default;
};

struct BusNode {
  NodeId id = kNoNode;
  NodeId parent = kNoNode;
  std::uint32_t level = 0;
  // Empty for the root.
  std::string attribute;
  NodeKind kind = NodeKind::kRoot;
  // Categorical value; empty unless kind == kValue.
  std::string value;
  std::uint64_t active_count = 0;
  std::uint64_t marginal_count = 0;
  // Reward of this node's marginal users under its effective behaviors.
  Reward reward;
  // Nearest non-regress ancestor-or-self.
  NodeId effective_source = kNoNode;

  // Derived from the parent links.
  std::vector<NodeId> children;
  std::map<std::string, NodeId, std::less<>> value_children;
  NodeId regress_child = kNoNode;

  bool is_regress() const { return kind == NodeKind::kRegress; }
  // "<value>", "REGRESS" or "global".
  std::string label() const;

  friend bool operator==(const BusNode&, const BusNode&) = default;
};

// Hierarchical segment tree. Node ids are dense and parents always precede
// their children.
class BusTree {
 public:
  BusTree() = default;
  BusTree(TreeParams params, std::uint64_t active_count,
          std::uint64_t marginal_count, Reward root_reward);

  const TreeParams& params() const { return params_; }
  NodeId root() const { return 0; }
  std::size_t size() const { return nodes_.size(); }
  const BusNode& node(NodeId id) const { return nodes_.at(id); }
  std::span<const BusNode> nodes() const { return nodes_; }

  // One attribute type per level below the root.
  const std::vector<std::string>& attribute_order() const { return order_; }
  std::size_t depth() const { return order_.size(); }
  void append_level(std::string attribute);

  // Adds a child one level below `parent`. Regress children inherit the
  // parent's effective source; value children are their own. Throws
  // DataError on duplicate values, a second regress child, or a parent at
  // the deepest level.
  NodeId add_child(NodeId parent, NodeKind kind, std::string value,
                   std::uint64_t active_count, std::uint64_t marginal_count,
                   Reward reward);

  NodeId find_value_child(NodeId parent, std::string_view value) const;
  NodeId regress_child(NodeId parent) const {
    return nodes_.at(parent).regress_child;
  }
  bool is_leaf(NodeId id) const { return nodes_.at(id).children.empty(); }
  // Nodes without children, ascending id.
  std::vector<NodeId> leaves() const;
  // Root-to-node id chain.
  std::vector<NodeId> path_to(NodeId id) const;

  // Empty when every structural invariant holds (uniform depth, distinct
  // sibling values, one regress child at most, effective sources, count
  // additivity); otherwise a description of the first violation.
  std::string check_structure() const;

  // Rebuilds a tree from a node table (ids 0..n-1, parents first). Used by
  // persistence. Throws FormatError on orphans and inconsistent links.
  static BusTree FromNodes(TreeParams params, std::vector<std::string> order,
                           std::vector<BusNode> nodes);

  friend bool operator==(const BusTree&, const BusTree&) = default;

 private:
  TreeParams params_;
  std::vector<std::string> order_;
  std::vector<BusNode> nodes_;
};

}  // namespace bus

#endif  // BUS_TREE_HPP_
