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

#ifndef BUS_SOCIAL_HPP_
#define BUS_SOCIAL_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bus/dataset.hpp"
#include "bus/ranking.hpp"
#include "bus/retrieval.hpp"
#include "bus/tree.hpp"

namespace bus {

// Undirected graph over a user table. Self-loops are dropped and parallel
// edges merged.
class SocialGraph {
 public:
  SocialGraph() = default;
  // Throws DataError for users absent from `users`.
  static SocialGraph FromEdges(
      const UserTable& users,
      const std::vector<std::pair<std::string, std::string>>& edges);
  static SocialGraph FromIndexEdges(
      std::size_t num_users, std::vector<std::pair<UserIndex, UserIndex>> edges);

  std::size_t num_users() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t num_edges() const { return adjacency_.size() / 2; }
  // Ascending.
  std::span<const UserIndex> neighbors(UserIndex u) const;
  // Each undirected edge once, (smaller, larger), ascending.
  std::vector<std::pair<UserIndex, UserIndex>> edges() const;

 private:
  std::vector<std::size_t> offsets_;
  std::vector<UserIndex> adjacency_;
};

// Edge list file with columns user_id_a, user_id_b (header row required).
SocialGraph load_graph(const std::string& path, const UserTable& users);
void save_graph(const std::string& path, const SocialGraph& graph,
                const UserTable& users);

// Segment weight in tenths: 1..10 stands for 0.1..1.0.
struct WeightedSegment {
  NodeId segment = kNoNode;
  int tenths = 0;

  double weight() const { return tenths / 10.0; }
  friend bool operator==(const WeightedSegment&, const WeightedSegment&) = default;
};

struct ConnectionProfile {
  UserIndex owner = 0;
  NodeId own_segment = kNoNode;
  // Ascending segment id.
  std::vector<WeightedSegment> segments;
};

// Counts the user's neighbors per segment, drops segments holding fewer than
// phi * |neighbors|, renormalizes over the retained ones and rounds each
// share to the nearest tenth (halves away from zero), dropping zeros.
ConnectionProfile connection_segments(UserIndex user, const SocialGraph& graph,
                                      std::span<const NodeId> assignment,
                                      double phi = 0.1);

// Same rounding applied to raw per-segment neighbor counts.
std::vector<WeightedSegment> weigh_segments(
    const std::vector<std::pair<NodeId, std::size_t>>& counts, double phi);

// Canonical key; users with equal keys get identical utility rankings.
std::string profile_key(const ConnectionProfile& profile,
                        const StrippedTree& stripped);

enum class UtilityMerge { kMax, kSum };

// U = P * (1 + w * [s != own]) over own and connection segments (each
// resolved to its effective node); per candidate the max (or sum) of U.
RankedList utility_rank(const ConnectionProfile& profile,
                        const StrippedTree& stripped,
                        const NodeCatalog& catalog, std::size_t k,
                        UtilityMerge merge = UtilityMerge::kMax);

}  // namespace bus

#endif  // BUS_SOCIAL_HPP_
