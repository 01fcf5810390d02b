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

#include "bus/retrieval.hpp"

#include <algorithm>
#include <unordered_map>

#include "bus/error.hpp"
#include "bus/parallel.hpp"
#include "bus/tree_io.hpp"
#include "json.hpp"

namespace bus {
namespace {

bool ranks_before(const RankedEntry& a, const RankedEntry& b) {
  return a.score != b.score ? a.score > b.score : a.item < b.item;
}

}  // namespace

StrippedTree::StrippedTree(const BusTree& tree) {
  priority_.resize(tree.size());
  for (const BusNode& n : tree.nodes()) {
    auto& list = priority_[n.id];
    if (!n.is_regress()) {
      nodes_.push_back(n.id);
      list.push_back(n.id);
    }
    if (n.parent != kNoNode) {
      const auto& up = priority_[n.parent];
      list.insert(list.end(), up.begin(), up.end());
    }
  }
}

StrippedTree strip_regress(const BusTree& tree) { return StrippedTree(tree); }

NodeCatalog::NodeCatalog(std::size_t k, Dictionary items)
    : k_(k), items_(std::move(items)) {}

const RankedList& NodeCatalog::at(NodeId node) const {
  static const RankedList kEmpty;
  auto it = lists_.find(node);
  return it == lists_.end() ? kEmpty : it->second;
}

void NodeCatalog::set(NodeId node, RankedList list) {
  lists_[node] = std::move(list);
}

NodeCatalog build_catalog(const StrippedTree& stripped,
                          std::span<const NodeId> user_nodes,
                          const EngagementTable& engagements,
                          const UserClassification& classification,
                          std::size_t k, unsigned workers) {
  if (k == 0) throw ConfigError("K must be at least 1");
  if (user_nodes.size() != engagements.num_users()) {
    throw DataError("assignment does not cover the engagement table's users");
  }
  const auto nodes = stripped.nodes();
  std::unordered_map<NodeId, std::size_t> slot;
  for (std::size_t i = 0; i < nodes.size(); ++i) slot.emplace(nodes[i], i);

  // Users of each node, ascending, so sums match the builder's.
  std::vector<std::vector<UserIndex>> members(nodes.size());
  for (UserIndex u : classification.active()) {
    if (user_nodes[u] == kNoNode) continue;
    for (NodeId n : stripped.priority(user_nodes[u])) {
      members[slot.at(n)].push_back(u);
    }
  }

  std::vector<RankedList> lists(nodes.size());
  const unsigned n_workers = resolve_workers(workers);
  std::vector<ItemAccumulator> accumulators;
  for (unsigned w = 0; w < n_workers; ++w) {
    accumulators.emplace_back(engagements.num_items());
  }
  parallel_for(nodes.size(), n_workers, [&](std::size_t i, unsigned worker) {
    ItemAccumulator& acc = accumulators[worker];
    acc.clear();
    for (UserIndex u : members[i]) acc.add(engagements.training(u));
    lists[i] = acc.top_k(k);
    acc.clear();
  });

  NodeCatalog catalog(k, engagements.items());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    catalog.set(nodes[i], std::move(lists[i]));
  }
  return catalog;
}

RankedList recommend(NodeId node, const StrippedTree& stripped,
                     const NodeCatalog& catalog, const BlendConfig& blend) {
  const std::size_t k = blend.k == 0 ? catalog.k() : blend.k;
  const auto priority = stripped.priority(node);
  if (!blend.enabled) {
    RankedList list = catalog.at(priority.front());
    if (list.size() > k) list.resize(k);
    return list;
  }
  std::unordered_map<ItemIndex, double> combined;
  std::vector<ItemIndex> order;
  double weight = 1.0;
  for (std::size_t d = 0; d < priority.size(); ++d) {
    if (!blend.weights.empty()) {
      weight = d < blend.weights.size() ? blend.weights[d] : 0.0;
    } else if (d > 0) {
      weight *= blend.decay;
    }
    if (weight == 0.0) continue;
    for (const auto& e : catalog.at(priority[d])) {
      auto [it, inserted] = combined.emplace(e.item, 0.0);
      if (inserted) order.push_back(e.item);
      it->second += weight * e.score;
    }
  }
  RankedList out;
  out.reserve(order.size());
  for (ItemIndex item : order) {
    if (combined[item] > 0) out.push_back({item, combined[item]});
  }
  std::sort(out.begin(), out.end(), ranks_before);
  if (out.size() > k) out.resize(k);
  return out;
}

std::vector<std::pair<std::string, double>> named(const RankedList& list,
                                                  const Dictionary& items) {
  std::vector<std::pair<std::string, double>> out;
  out.reserve(list.size());
  for (const auto& e : list) out.emplace_back(items.value(e.item), e.score);
  return out;
}

std::string serialize_catalog(const NodeCatalog& catalog) {
  using Json = nlohmann::ordered_json;
  std::string body;
  Json header;
  header["format"] = "bus-catalog";
  header["version"] = 1;
  header["k"] = catalog.k();
  header["node_count"] = catalog.lists().size();
  // Full dictionary so item codes survive a round trip.
  Json names = Json::array();
  for (std::size_t i = 0; i < catalog.items().size(); ++i) {
    names.push_back(catalog.items().value(static_cast<ItemIndex>(i)));
  }
  header["items"] = std::move(names);
  body += header.dump() + "\n";
  for (const auto& [node, list] : catalog.lists()) {
    Json j;
    j["node_id"] = node;
    Json items = Json::array();
    for (const auto& e : list) {
      items.push_back(Json::array({catalog.items().value(e.item), e.score}));
    }
    j["items"] = std::move(items);
    body += j.dump() + "\n";
  }
  return body + checksum_line(body);
}

NodeCatalog parse_catalog(std::string_view text) {
  using Json = nlohmann::json;
  const std::string_view body = verify_checksum(text, "catalog file");
  std::vector<std::string_view> lines;
  for (std::size_t start = 0; start < body.size();) {
    const std::size_t end = body.find('\n', start);
    lines.push_back(body.substr(start, end - start));
    start = end + 1;
  }
  if (lines.empty()) throw FormatError("catalog file has no header");
  try {
    const Json header = Json::parse(lines[0]);
    if (header.at("format").get<std::string>() != "bus-catalog" ||
        header.at("version").get<int>() != 1) {
      throw FormatError("unsupported catalog format or version");
    }
    const auto k = header.at("k").get<std::size_t>();
    if (lines.size() != header.at("node_count").get<std::size_t>() + 1) {
      throw FormatError("catalog node count does not match its records");
    }
    std::vector<std::pair<NodeId, std::vector<std::pair<std::string, double>>>>
        raw;
    auto names = header.at("items").get<std::vector<std::string>>();
    for (std::size_t i = 1; i < lines.size(); ++i) {
      const Json j = Json::parse(lines[i]);
      auto& entry = raw.emplace_back();
      entry.first = j.at("node_id").get<NodeId>();
      for (const auto& item : j.at("items")) {
        entry.second.emplace_back(item.at(0).get<std::string>(),
                                  item.at(1).get<double>());
      }
    }
    NodeCatalog catalog(k, Dictionary(std::move(names)));
    for (auto& [node, items] : raw) {
      RankedList list;
      for (auto& [name, score] : items) {
        const auto code = catalog.items().code(name);
        if (!code) {
          throw FormatError("catalog item '" + name + "' is not in its dictionary");
        }
        list.push_back({*code, score});
      }
      if (!is_ranked_list(list)) {
        throw FormatError("catalog list of node " + std::to_string(node) +
                          " is not ranked");
      }
      catalog.set(node, std::move(list));
    }
    return catalog;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed catalog record: ") + e.what());
  }
}

void save_catalog(const NodeCatalog& catalog, const std::string& path) {
  write_file_atomic(path, serialize_catalog(catalog));
}

NodeCatalog load_catalog(const std::string& path) {
  return parse_catalog(read_file(path));
}

}  // namespace bus
