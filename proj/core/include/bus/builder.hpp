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

#ifndef BUS_BUILDER_HPP_
#define BUS_BUILDER_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bus/dataset.hpp"
#include "bus/ranking.hpp"
#include "bus/tree.hpp"

namespace bus {

struct BuildParams {
  // Regress a staging node when its own reward < omega * inherited reward.
  double omega = 1.0;
  // Regress a staging node with fewer active users than this.
  std::size_t mu = 250;
  std::size_t k = 100;
  Relevance relevance = Relevance::kGraded;
  // When non-empty, a permutation of the schema fixing the level order
  // instead of greedy selection.
  std::vector<std::string> forced_order;
  // 0 = hardware concurrency. Output does not depend on it.
  unsigned workers = 0;
  // Keep every non-regress node's top-K list in the result.
  bool keep_predictions = false;

  TreeParams tree_params() const { return {omega, mu, k, relevance}; }
};

// Throws ConfigError for negative omega or K == 0.
void validate(const BuildParams& params);

// Keep rule for a staging node with the given rewards (ignoring mu). With
// omega >= 1 a kept node never has less reward than it inherits.
bool passes_omega(Reward own, Reward inherited, double omega);

struct StagingNode {
  NodeId parent = kNoNode;
  std::string value;
  std::uint64_t active_count = 0;
  std::uint64_t marginal_count = 0;
  Reward own_reward;
  Reward inherited_reward;
  bool regressed = false;

  Reward kept_reward() const {
    return regressed ? inherited_reward : own_reward;
  }
};

// Evaluation of one attribute type against the current leaves.
struct StagingReport {
  std::string attribute;
  // Grouped by parent leaf (ascending id), values ascending.
  std::vector<StagingNode> nodes;
  Reward total_reward;

  std::size_t regressed_count() const;
};

// Aggregate of the regressed siblings under one parent.
struct RegressMerge {
  NodeId parent = kNoNode;
  std::size_t merged = 0;
  std::uint64_t active_count = 0;
  std::uint64_t marginal_count = 0;
  // Sum of the siblings' inherited rewards.
  Reward reward;
};

// Merges the regressed nodes among `siblings` (all under `parent`). Returns
// nullopt when none is regressed.
std::optional<RegressMerge> merge_regress(NodeId parent,
                                          std::span<const StagingNode> siblings);

struct LevelRecord {
  std::size_t level = 0;
  std::string attribute;
  Reward total_reward;
  std::size_t staging_nodes = 0;
  std::size_t regressed_nodes = 0;
  // Total reward of every attribute evaluated for this level.
  std::vector<std::pair<std::string, Reward>> candidates;
};

struct BuildResult {
  BusTree tree;
  Reward root_reward;
  std::vector<LevelRecord> levels;
  // Leaf of every user of the training universe.
  std::vector<NodeId> user_leaf;
  // Top-K list of each non-regress node, when requested.
  std::map<NodeId, RankedList> predictions;
};

using LevelObserver = std::function<void(const LevelRecord&)>;

// Level-by-level greedy construction. Each level evaluates every eligible
// attribute type over all current leaves, selects the one with the largest
// total reward (ties by ascending name), merges its regressed staging nodes
// and grows the tree.
class TreeBuilder {
 public:
  // Throws ConfigError for an empty schema or invalid params, DataError when
  // the inputs disagree on the user universe.
  TreeBuilder(const UserTable& users, const EngagementTable& engagements,
              const UserClassification& classification, BuildParams params);
  ~TreeBuilder();
  TreeBuilder(const TreeBuilder&) = delete;
  TreeBuilder& operator=(const TreeBuilder&) = delete;

  const BusTree& tree() const;
  bool done() const;
  std::vector<std::string> remaining_attributes() const;
  // Remaining attributes whose prerequisites are already levels.
  std::vector<std::string> eligible_attributes() const;

  StagingReport evaluate_attribute(const std::string& attribute) const;

  // Adds one level. Throws ConfigError on a prerequisite deadlock.
  LevelRecord grow_level();

  BuildResult finish() &&;

 private:
  struct State;
  std::unique_ptr<State> state_;
};

BuildResult build_tree(const UserTable& users,
                       const EngagementTable& engagements,
                       const UserClassification& classification,
                       const BuildParams& params,
                       const LevelObserver& observer = {});

}  // namespace bus

#endif  // BUS_BUILDER_HPP_
