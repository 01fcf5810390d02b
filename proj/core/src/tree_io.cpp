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

#include "bus/tree_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "bus/error.hpp"
#include "json.hpp"

namespace bus {
namespace {

using Json = nlohmann::ordered_json;

std::string_view kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::kRoot:
      return "root";
    case NodeKind::kRegress:
      return "regress";
    case NodeKind::kValue:
      break;
  }
  return "value";
}

NodeKind parse_kind(const std::string& s) {
  if (s == "root") return NodeKind::kRoot;
  if (s == "regress") return NodeKind::kRegress;
  if (s == "value") return NodeKind::kValue;
  throw FormatError("unknown node kind '" + s + "'");
}

std::vector<std::string_view> split_lines(std::string_view body) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < body.size()) {
    std::size_t end = body.find('\n', start);
    if (end == std::string_view::npos) end = body.size();
    lines.push_back(body.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string checksum_line(std::string_view body) {
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(fnv1a64(body)));
  return std::string("{\"checksum\":\"fnv1a64:") + hex + "\"}\n";
}

std::string_view verify_checksum(std::string_view text, std::string_view what) {
  if (text.empty() || text.back() != '\n') {
    throw FormatError(std::string(what) + " is truncated (no final newline)");
  }
  const std::size_t last_start = text.rfind('\n', text.size() - 2);
  const std::size_t body_len =
      last_start == std::string_view::npos ? 0 : last_start + 1;
  const std::string_view body = text.substr(0, body_len);
  const std::string_view last = text.substr(body_len);
  if (last.find("\"checksum\"") == std::string_view::npos) {
    throw FormatError(std::string(what) +
                      " is truncated (missing checksum record)");
  }
  if (last != checksum_line(body)) {
    throw FormatError(std::string(what) + " checksum mismatch");
  }
  return body;
}

std::string serialize_tree(const BusTree& tree) {
  std::string body;
  Json header;
  header["format"] = kTreeFormat;
  header["version"] = kTreeFormatVersion;
  header["params"] = {{"omega", tree.params().omega},
                      {"mu", tree.params().mu},
                      {"k", tree.params().k},
                      {"relevance", relevance_name(tree.params().relevance)}};
  header["attribute_order"] = tree.attribute_order();
  header["node_count"] = tree.size();
  body += header.dump() + "\n";
  for (const BusNode& n : tree.nodes()) {
    Json j;
    j["node_id"] = n.id;
    j["parent_id"] = n.parent == kNoNode ? Json(nullptr) : Json(n.parent);
    j["level"] = n.level;
    j["attribute_type"] =
        n.kind == NodeKind::kRoot ? Json(nullptr) : Json(n.attribute);
    j["kind"] = kind_name(n.kind);
    j["attribute_value"] =
        n.kind == NodeKind::kValue ? Json(n.value) : Json(nullptr);
    j["active_count"] = n.active_count;
    j["marginal_count"] = n.marginal_count;
    j["node_reward"] = n.reward.value();
    j["node_reward_ticks"] = n.reward.to_string();
    j["effective_source_node_id"] = n.effective_source;
    body += j.dump() + "\n";
  }
  return body + checksum_line(body);
}

BusTree parse_tree(std::string_view text) {
  const std::string_view body = verify_checksum(text, "tree file");
  const auto lines = split_lines(body);
  if (lines.empty()) throw FormatError("tree file has no header");
  try {
    const Json header = Json::parse(lines[0]);
    if (header.at("format").get<std::string>() != kTreeFormat) {
      throw FormatError("not a tree file (format tag '" +
                        header.at("format").get<std::string>() + "')");
    }
    const int version = header.at("version").get<int>();
    if (version != kTreeFormatVersion) {
      throw FormatError("unsupported tree format version " +
                        std::to_string(version) + " (expected " +
                        std::to_string(kTreeFormatVersion) + ")");
    }
    TreeParams params;
    const auto& p = header.at("params");
    params.omega = p.at("omega").get<double>();
    params.mu = p.at("mu").get<std::size_t>();
    params.k = p.at("k").get<std::size_t>();
    params.relevance = parse_relevance(p.at("relevance").get<std::string>());
    auto order = header.at("attribute_order").get<std::vector<std::string>>();
    const auto count = header.at("node_count").get<std::size_t>();
    if (lines.size() != count + 1) {
      throw FormatError("tree file declares " + std::to_string(count) +
                        " nodes but holds " + std::to_string(lines.size() - 1));
    }
    std::vector<BusNode> nodes;
    nodes.reserve(count);
    for (std::size_t i = 1; i < lines.size(); ++i) {
      const Json j = Json::parse(lines[i]);
      BusNode n;
      n.id = j.at("node_id").get<NodeId>();
      n.parent = j.at("parent_id").is_null() ? kNoNode
                                             : j.at("parent_id").get<NodeId>();
      n.level = j.at("level").get<std::uint32_t>();
      n.kind = parse_kind(j.at("kind").get<std::string>());
      if (!j.at("attribute_type").is_null()) {
        n.attribute = j.at("attribute_type").get<std::string>();
      }
      if (n.kind == NodeKind::kValue) {
        n.value = j.at("attribute_value").get<std::string>();
      }
      n.active_count = j.at("active_count").get<std::uint64_t>();
      n.marginal_count = j.at("marginal_count").get<std::uint64_t>();
      n.reward = Reward::Parse(j.at("node_reward_ticks").get<std::string>());
      n.effective_source = j.at("effective_source_node_id").get<NodeId>();
      nodes.push_back(std::move(n));
    }
    BusTree tree = BusTree::FromNodes(params, std::move(order), std::move(nodes));
    if (auto problem = tree.check_structure(); !problem.empty()) {
      throw FormatError("tree file is inconsistent: " + problem);
    }
    return tree;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed tree record: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file_atomic(const std::string& path, std::string_view contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("failed writing '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot move '" + tmp + "' to '" + path + "': " + ec.message());
}

void save_tree(const BusTree& tree, const std::string& path) {
  write_file_atomic(path, serialize_tree(tree));
}

BusTree load_tree(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return parse_tree(text);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace bus
