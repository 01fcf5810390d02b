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

#ifndef BUS_RETRIEVAL_HPP_
#define BUS_RETRIEVAL_HPP_

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bus/dataset.hpp"
#include "bus/ranking.hpp"
#include "bus/tree.hpp"

namespace bus {

// The tree with regress nodes removed. Every node of the source tree gets a
// priority list of its non-regress ancestors-or-self, nearest first; the
// root is always last.
class StrippedTree {
 public:
  StrippedTree() = default;
  explicit StrippedTree(const BusTree& tree);

  // Non-regress node ids, ascending.
  std::span<const NodeId> nodes() const { return nodes_; }
  std::span<const NodeId> priority(NodeId node) const {
    return priority_.at(node);
  }
  // Highest-priority node: the effective source.
  NodeId p1(NodeId node) const { return priority_.at(node).front(); }
  std::size_t source_size() const { return priority_.size(); }

 private:
  std::vector<NodeId> nodes_;
  std::vector<std::vector<NodeId>> priority_;
};

StrippedTree strip_regress(const BusTree& tree);

// Top-K list per non-regress node.
class NodeCatalog {
 public:
  NodeCatalog() = default;
  NodeCatalog(std::size_t k, Dictionary items);

  std::size_t k() const { return k_; }
  const Dictionary& items() const { return items_; }
  // Empty list for nodes without an entry.
  const RankedList& at(NodeId node) const;
  bool contains(NodeId node) const { return lists_.contains(node); }
  void set(NodeId node, RankedList list);
  const std::map<NodeId, RankedList>& lists() const { return lists_; }

  friend bool operator==(const NodeCatalog&, const NodeCatalog&) = default;

 private:
  std::size_t k_ = 0;
  Dictionary items_;
  std::map<NodeId, RankedList> lists_;
};

// Aggregates the training behaviors of active users at or below each
// non-regress node. `user_nodes[u]` is the node user u is assigned to.
NodeCatalog build_catalog(const StrippedTree& stripped,
                          std::span<const NodeId> user_nodes,
                          const EngagementTable& engagements,
                          const UserClassification& classification,
                          std::size_t k, unsigned workers = 0);

struct BlendConfig {
  // Off: serve the P1 list only.
  bool enabled = false;
  // Explicit per-distance weights (P1 first). When empty, decay^distance.
  std::vector<double> weights;
  double decay = 0.5;
  // 0 = the catalog's K.
  std::size_t k = 0;
};

// Retrieval list for a user assigned to `node`.
RankedList recommend(NodeId node, const StrippedTree& stripped,
                     const NodeCatalog& catalog, const BlendConfig& blend = {});

// (item id, score) view of a list.
std::vector<std::pair<std::string, double>> named(const RankedList& list,
                                                  const Dictionary& items);

// JSON lines with a header, one record per node and a checksum record.
std::string serialize_catalog(const NodeCatalog& catalog);
NodeCatalog parse_catalog(std::string_view text);
void save_catalog(const NodeCatalog& catalog, const std::string& path);
NodeCatalog load_catalog(const std::string& path);

}  // namespace bus

#endif  // BUS_RETRIEVAL_HPP_
