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

#include "bus/tree.hpp"

#include <algorithm>

#include "bus/error.hpp"

namespace bus {

std::string BusNode::label() const {
  switch (kind) {
    case NodeKind::kRoot:
      return "global";
    case NodeKind::kRegress:
      return "REGRESS";
    case NodeKind::kValue:
      break;
  }
  return value;
}

BusTree::BusTree(TreeParams params, std::uint64_t active_count,
                 std::uint64_t marginal_count, Reward root_reward)
    : params_(params) {
  BusNode root;
  root.id = 0;
  root.kind = NodeKind::kRoot;
  root.active_count = active_count;
  root.marginal_count = marginal_count;
  root.reward = root_reward;
  root.effective_source = 0;
  nodes_.push_back(std::move(root));
}

void BusTree::append_level(std::string attribute) {
  if (std::find(order_.begin(), order_.end(), attribute) != order_.end()) {
    throw DataError("attribute '" + attribute + "' already has a level");
  }
  order_.push_back(std::move(attribute));
}

NodeId BusTree::add_child(NodeId parent, NodeKind kind, std::string value,
                          std::uint64_t active_count,
                          std::uint64_t marginal_count, Reward reward) {
  if (parent >= nodes_.size()) throw DataError("unknown parent node");
  const std::uint32_t level = nodes_[parent].level + 1;
  if (level > order_.size()) {
    throw DataError("parent node is already at the deepest level");
  }
  if (kind == NodeKind::kRoot) throw DataError("cannot add a second root");
  const auto id = static_cast<NodeId>(nodes_.size());
  BusNode child;
  child.id = id;
  child.parent = parent;
  child.level = level;
  child.attribute = order_[level - 1];
  child.kind = kind;
  child.active_count = active_count;
  child.marginal_count = marginal_count;
  child.reward = reward;
  if (kind == NodeKind::kRegress) {
    if (nodes_[parent].regress_child != kNoNode) {
      throw DataError("node " + std::to_string(parent) +
                      " already has a regress child");
    }
    child.effective_source = nodes_[parent].effective_source;
    nodes_[parent].regress_child = id;
  } else {
    if (nodes_[parent].value_children.contains(value)) {
      throw DataError("node " + std::to_string(parent) +
                      " already has a child with value '" + value + "'");
    }
    child.value = value;
    child.effective_source = id;
    nodes_[parent].value_children.emplace(std::move(value), id);
  }
  nodes_[parent].children.push_back(id);
  nodes_.push_back(std::move(child));
  return id;
}

NodeId BusTree::find_value_child(NodeId parent, std::string_view value) const {
  const auto& children = nodes_.at(parent).value_children;
  auto it = children.find(value);
  return it == children.end() ? kNoNode : it->second;
}

std::vector<NodeId> BusTree::leaves() const {
  std::vector<NodeId> out;
  for (const auto& n : nodes_) {
    if (n.children.empty()) out.push_back(n.id);
  }
  return out;
}

std::vector<NodeId> BusTree::path_to(NodeId id) const {
  std::vector<NodeId> chain;
  for (NodeId cur = id; cur != kNoNode; cur = nodes_.at(cur).parent) {
    chain.push_back(cur);
  }
  std::reverse(chain.begin(), chain.end());
  return chain;
}

std::string BusTree::check_structure() const {
  if (nodes_.empty()) return "tree has no root";
  const BusNode& root = nodes_[0];
  if (root.kind != NodeKind::kRoot || root.parent != kNoNode ||
      root.level != 0 || root.effective_source != 0) {
    return "node 0 is not a well-formed root";
  }
  for (const auto& n : nodes_) {
    const std::string where = "node " + std::to_string(n.id) + ": ";
    if (n.id != &n - nodes_.data()) return where + "id does not match position";
    if (n.id == 0) continue;
    if (n.kind == NodeKind::kRoot) return where + "second root";
    if (n.parent == kNoNode || n.parent >= n.id) {
      return where + "parent must precede the node";
    }
    const BusNode& p = nodes_[n.parent];
    if (n.level != p.level + 1) return where + "level is not parent level + 1";
    if (n.level > order_.size() || n.attribute != order_[n.level - 1]) {
      return where + "attribute does not match the level order";
    }
    if (n.is_regress()) {
      if (p.regress_child != n.id) return where + "extra regress sibling";
      if (n.effective_source != p.effective_source) {
        return where + "regress node must share its parent's effective source";
      }
    } else {
      if (n.effective_source != n.id) {
        return where + "value node must be its own effective source";
      }
      auto it = p.value_children.find(n.value);
      if (it == p.value_children.end() || it->second != n.id) {
        return where + "duplicate sibling value '" + n.value + "'";
      }
    }
  }
  for (const auto& n : nodes_) {
    const std::string where = "node " + std::to_string(n.id) + ": ";
    if (n.children.empty()) {
      if (n.level != order_.size()) return where + "leaf above the tree depth";
      continue;
    }
    std::uint64_t active = 0, marginal = 0;
    for (NodeId c : n.children) {
      active += nodes_[c].active_count;
      marginal += nodes_[c].marginal_count;
    }
    if (active != n.active_count || marginal != n.marginal_count) {
      return where + "children's populations do not sum to the parent's";
    }
  }
  return {};
}

BusTree BusTree::FromNodes(TreeParams params, std::vector<std::string> order,
                           std::vector<BusNode> nodes) {
  if (nodes.empty()) throw FormatError("tree has no nodes");
  BusTree tree(params, nodes[0].active_count, nodes[0].marginal_count,
               nodes[0].reward);
  if (nodes[0].kind != NodeKind::kRoot || nodes[0].parent != kNoNode) {
    throw FormatError("first node is not the root");
  }
  for (auto& attr : order) tree.append_level(std::move(attr));
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    const BusNode& n = nodes[i];
    if (n.id != i) throw FormatError("node ids must be dense and ordered");
    if (n.parent == kNoNode || n.parent >= i) {
      throw FormatError("orphan node " + std::to_string(n.id) +
                        " (parent " + (n.parent == kNoNode ? std::string("-")
                                                          : std::to_string(n.parent)) +
                        " not defined before it)");
    }
    NodeId id;
    try {
      id = tree.add_child(n.parent, n.kind, n.value, n.active_count,
                          n.marginal_count, n.reward);
    } catch (const DataError& e) {
      throw FormatError(e.what());
    }
    const BusNode& added = tree.nodes_[id];
    if (added.level != n.level || added.attribute != n.attribute ||
        added.effective_source != n.effective_source) {
      throw FormatError("node " + std::to_string(n.id) +
                        " disagrees with its parent on level, attribute or "
                        "effective source");
    }
  }
  return tree;
}

}  // namespace bus
