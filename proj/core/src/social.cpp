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

#include "bus/social.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <unordered_map>

#include "bus/error.hpp"

namespace bus {

SocialGraph SocialGraph::FromIndexEdges(
    std::size_t num_users, std::vector<std::pair<UserIndex, UserIndex>> edges) {
  std::vector<std::pair<UserIndex, UserIndex>> directed;
  directed.reserve(edges.size() * 2);
  for (auto [a, b] : edges) {
    if (a >= num_users || b >= num_users) {
      throw DataError("graph edge refers to an unknown user index");
    }
    if (a == b) continue;
    directed.emplace_back(a, b);
    directed.emplace_back(b, a);
  }
  std::sort(directed.begin(), directed.end());
  directed.erase(std::unique(directed.begin(), directed.end()), directed.end());
  SocialGraph g;
  g.offsets_.assign(num_users + 1, 0);
  g.adjacency_.reserve(directed.size());
  for (auto [a, b] : directed) {
    ++g.offsets_[a + 1];
    g.adjacency_.push_back(b);
  }
  for (std::size_t u = 0; u < num_users; ++u) g.offsets_[u + 1] += g.offsets_[u];
  return g;
}

SocialGraph SocialGraph::FromEdges(
    const UserTable& users,
    const std::vector<std::pair<std::string, std::string>>& edges) {
  std::vector<std::pair<UserIndex, UserIndex>> indexed;
  indexed.reserve(edges.size());
  for (const auto& [a, b] : edges) {
    auto ia = users.find(a);
    auto ib = users.find(b);
    if (!ia || !ib) {
      throw DataError("graph edge (" + a + ", " + b +
                      ") refers to a user absent from the user table");
    }
    indexed.emplace_back(*ia, *ib);
  }
  return FromIndexEdges(users.size(), std::move(indexed));
}

std::span<const UserIndex> SocialGraph::neighbors(UserIndex u) const {
  if (u + 1 >= offsets_.size()) return {};
  return std::span<const UserIndex>(adjacency_.data() + offsets_[u],
                                    offsets_[u + 1] - offsets_[u]);
}

std::vector<std::pair<UserIndex, UserIndex>> SocialGraph::edges() const {
  std::vector<std::pair<UserIndex, UserIndex>> out;
  for (UserIndex u = 0; u < num_users(); ++u) {
    for (UserIndex v : neighbors(u)) {
      if (u < v) out.emplace_back(u, v);
    }
  }
  return out;
}

SocialGraph load_graph(const std::string& path, const UserTable& users) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open graph file '" + path + "'");
  const char delim = delimiter_for_path(path);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::vector<std::pair<std::string, std::string>> edges;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto fields = split_fields(line, delim);
    if (fields.size() != 2) {
      throw ParseError(path, line_no, "expected 2 fields, found " +
                                          std::to_string(fields.size()));
    }
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    edges.emplace_back(std::string(fields[0]), std::string(fields[1]));
  }
  try {
    return SocialGraph::FromEdges(users, edges);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void save_graph(const std::string& path, const SocialGraph& graph,
                const UserTable& users) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write graph file '" + path + "'");
  const char d = delimiter_for_path(path);
  out << "user_id_a" << d << "user_id_b\n";
  for (auto [a, b] : graph.edges()) out << users.id(a) << d << users.id(b) << '\n';
  if (!out) throw Error("failed writing graph file '" + path + "'");
}

std::vector<WeightedSegment> weigh_segments(
    const std::vector<std::pair<NodeId, std::size_t>>& counts, double phi) {
  if (!(phi >= 0.0 && phi <= 1.0)) throw ConfigError("phi must lie in [0, 1]");
  std::size_t total = 0;
  for (const auto& [segment, count] : counts) total += count;
  // Counts within 1e-9 of the threshold count as meeting it, so that
  // 0.1 * 30 keeps a segment of 3.
  const double threshold = phi * static_cast<double>(total) - 1e-9;
  std::vector<std::pair<NodeId, std::size_t>> retained;
  std::size_t retained_total = 0;
  for (const auto& [segment, count] : counts) {
    if (count == 0 || static_cast<double>(count) < threshold) continue;
    retained.emplace_back(segment, count);
    retained_total += count;
  }
  std::vector<WeightedSegment> out;
  for (const auto& [segment, count] : retained) {
    // round(10 * count / total), halves away from zero, in integers.
    const auto tenths = static_cast<int>((20 * count + retained_total) /
                                         (2 * retained_total));
    if (tenths > 0) out.push_back({segment, tenths});
  }
  std::sort(out.begin(), out.end(),
            [](const WeightedSegment& a, const WeightedSegment& b) {
              return a.segment < b.segment;
            });
  return out;
}

ConnectionProfile connection_segments(UserIndex user, const SocialGraph& graph,
                                      std::span<const NodeId> assignment,
                                      double phi) {
  if (user >= assignment.size() || assignment[user] == kNoNode) {
    throw DataError("user has no segment assignment");
  }
  ConnectionProfile profile;
  profile.owner = user;
  profile.own_segment = assignment[user];
  std::map<NodeId, std::size_t> counts;
  for (UserIndex v : graph.neighbors(user)) {
    if (v < assignment.size() && assignment[v] != kNoNode) ++counts[assignment[v]];
  }
  profile.segments = weigh_segments({counts.begin(), counts.end()}, phi);
  return profile;
}

std::string profile_key(const ConnectionProfile& profile,
                        const StrippedTree& stripped) {
  std::string key = "own=" + std::to_string(stripped.p1(profile.own_segment));
  for (const auto& s : profile.segments) {
    key += ';';
    key += std::to_string(s.segment);
    key += ':';
    key += std::to_string(s.tenths);
  }
  return key;
}

RankedList utility_rank(const ConnectionProfile& profile,
                        const StrippedTree& stripped,
                        const NodeCatalog& catalog, std::size_t k,
                        UtilityMerge merge) {
  const NodeId own = stripped.p1(profile.own_segment);
  std::unordered_map<ItemIndex, double> utility;
  auto offer = [&](ItemIndex item, double u) {
    auto [it, inserted] = utility.emplace(item, u);
    if (inserted) return;
    it->second = merge == UtilityMerge::kMax ? std::max(it->second, u)
                                             : it->second + u;
  };
  for (const auto& e : catalog.at(own)) offer(e.item, e.score);
  for (const auto& s : profile.segments) {
    const NodeId source = stripped.p1(s.segment);
    const double indicator = source != own ? 1.0 : 0.0;
    const double factor = 1.0 + s.weight() * indicator;
    for (const auto& e : catalog.at(source)) offer(e.item, e.score * factor);
  }
  RankedList out;
  out.reserve(utility.size());
  for (const auto& [item, u] : utility) out.push_back({item, u});
  std::sort(out.begin(), out.end(), [](const RankedEntry& a, const RankedEntry& b) {
    return a.score != b.score ? a.score > b.score : a.item < b.item;
  });
  if (out.size() > k) out.resize(k);
  return out;
}

}  // namespace bus
