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

#include "bus/evalbench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <ostream>
#include <set>
#include <sstream>

#include "bus/error.hpp"
#include "bus/index.hpp"
#include "bus/tree_io.hpp"
#include "json.hpp"

namespace bus {
namespace {

using Json = nlohmann::ordered_json;

// Portable draws: the standard distributions are not specified bit-exactly.
class Random {
 public:
  explicit Random(std::uint64_t seed) : engine_(seed) {}
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  std::size_t below(std::size_t n) { return engine_() % n; }

 private:
  std::mt19937_64 engine_;
};

// Cumulative weights 1 / (i + 1)^exponent for i < n.
std::vector<double> power_law(std::size_t n, double exponent) {
  std::vector<double> cumulative(n);
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total += 1.0 / std::pow(static_cast<double>(i + 1), exponent);
    cumulative[i] = total;
  }
  return cumulative;
}

std::size_t draw(const std::vector<double>& cumulative, Random& rng) {
  const double target = rng.uniform() * cumulative.back();
  const auto it =
      std::upper_bound(cumulative.begin(), cumulative.end(), target);
  return std::min<std::size_t>(it - cumulative.begin(), cumulative.size() - 1);
}

std::string padded(char prefix, std::size_t value, std::size_t width) {
  std::string digits = std::to_string(value);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return prefix + digits;
}

std::size_t digits_of(std::size_t n) {
  return std::to_string(n == 0 ? 0 : n - 1).size();
}

std::string format_number(double value) {
  char buffer[64];
  auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, ptr);
}

bool fraction_ok(double f) { return f >= 0.0 && f <= 1.0; }

}  // namespace

SynthConfig SynthConfig::FromJsonText(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("synthetic config is not valid JSON: ") +
                      e.what());
  }
  if (!j.is_object()) throw ConfigError("synthetic config must be an object");
  static const std::set<std::string> kKeys = {
      "seed", "users", "items", "attributes", "governing",
      "items_per_segment", "concentration", "active_fraction",
      "marginal_fraction", "training_rows", "holdout_rows", "homophily",
      "edges_per_user", "missing_fraction"};
  for (const auto& [key, value] : j.items()) {
    if (!kKeys.contains(key)) {
      throw ConfigError("unknown synthetic config key '" + key + "'");
    }
  }
  SynthConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    c.users = j.value("users", c.users);
    c.items = j.value("items", c.items);
    c.governing = j.value("governing", c.governing);
    c.items_per_segment = j.value("items_per_segment", c.items_per_segment);
    c.concentration = j.value("concentration", c.concentration);
    c.active_fraction = j.value("active_fraction", c.active_fraction);
    c.marginal_fraction = j.value("marginal_fraction", c.marginal_fraction);
    c.training_rows = j.value("training_rows", c.training_rows);
    c.holdout_rows = j.value("holdout_rows", c.holdout_rows);
    c.homophily = j.value("homophily", c.homophily);
    c.edges_per_user = j.value("edges_per_user", c.edges_per_user);
    c.missing_fraction = j.value("missing_fraction", c.missing_fraction);
    for (const auto& a : j.value("attributes", Json::array())) {
      SynthAttribute attr;
      attr.name = a.at("name").get<std::string>();
      attr.cardinality = a.value("cardinality", attr.cardinality);
      attr.prerequisites = a.value("requires", attr.prerequisites);
      attr.skew = a.value("skew", attr.skew);
      c.attributes.push_back(std::move(attr));
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("bad synthetic config: ") + e.what());
  }
  validate(c);
  return c;
}

SynthConfig SynthConfig::FromJsonFile(const std::string& path) {
  return FromJsonText(read_file(path));
}

std::string SynthConfig::ToJsonText() const {
  Json j;
  j["seed"] = seed;
  j["users"] = users;
  j["items"] = items;
  Json attrs = Json::array();
  for (const auto& a : attributes) {
    attrs.push_back({{"name", a.name},
                     {"cardinality", a.cardinality},
                     {"requires", a.prerequisites},
                     {"skew", a.skew}});
  }
  j["attributes"] = attrs;
  j["governing"] = governing;
  j["items_per_segment"] = items_per_segment;
  j["concentration"] = concentration;
  j["active_fraction"] = active_fraction;
  j["marginal_fraction"] = marginal_fraction;
  j["training_rows"] = training_rows;
  j["holdout_rows"] = holdout_rows;
  j["homophily"] = homophily;
  j["edges_per_user"] = edges_per_user;
  j["missing_fraction"] = missing_fraction;
  return j.dump(2) + "\n";
}

void validate(const SynthConfig& c) {
  if (c.users == 0) throw ConfigError("synthetic config needs users >= 1");
  if (c.users > std::numeric_limits<UserIndex>::max()) {
    throw ConfigError("too many synthetic users");
  }
  if (c.items == 0) throw ConfigError("synthetic config needs items >= 1");
  if (c.attributes.empty()) {
    throw ConfigError("synthetic config needs at least one attribute");
  }
  std::vector<AttributeType> types;
  for (const auto& a : c.attributes) {
    if (a.cardinality == 0) {
      throw ConfigError("attribute '" + a.name + "' needs cardinality >= 1");
    }
    if (!(a.skew >= 0.0) || !std::isfinite(a.skew)) {
      throw ConfigError("attribute '" + a.name + "' needs a finite skew >= 0");
    }
    types.push_back({a.name, a.prerequisites});
  }
  AttributeSchema schema(types);  // names, prerequisites, cycles
  std::set<std::string> seen;
  std::size_t segments = 1;
  for (const auto& g : c.governing) {
    if (!seen.insert(g).second) {
      throw ConfigError("governing attribute '" + g + "' listed twice");
    }
    const auto index = schema.index_of(g);
    if (!index) throw ConfigError("unknown governing attribute '" + g + "'");
    segments *= c.attributes[*index].cardinality;
    if (segments > c.items) break;
  }
  if (c.items_per_segment == 0) {
    throw ConfigError("items_per_segment must be at least 1");
  }
  if (segments > c.items || segments * c.items_per_segment > c.items) {
    throw ConfigError(
        "infeasible synthetic config: planted segments need more items than "
        "the catalog holds");
  }
  for (auto [name, f] :
       {std::pair{"concentration", c.concentration},
        std::pair{"active_fraction", c.active_fraction},
        std::pair{"marginal_fraction", c.marginal_fraction},
        std::pair{"homophily", c.homophily},
        std::pair{"missing_fraction", c.missing_fraction}}) {
    if (!fraction_ok(f)) {
      throw ConfigError(std::string(name) + " must lie in [0, 1]");
    }
  }
  if (c.active_fraction + c.marginal_fraction > 1.0 + 1e-12) {
    throw ConfigError("active_fraction + marginal_fraction exceeds 1");
  }
  if (c.active_fraction > 0 && c.training_rows == 0) {
    throw ConfigError("training_rows must be at least 1");
  }
  if (c.marginal_fraction > 0 && c.holdout_rows == 0) {
    throw ConfigError("holdout_rows must be at least 1");
  }
}

SyntheticDataset generate_synthetic(const SynthConfig& config) {
  validate(config);
  Random rng(config.seed);
  const std::size_t n = config.users;
  const std::size_t n_attr = config.attributes.size();

  std::vector<AttributeType> types;
  for (const auto& a : config.attributes) {
    types.push_back({a.name, a.prerequisites});
  }
  AttributeSchema schema(types);

  std::vector<bool> governing(n_attr, false);
  std::vector<std::size_t> governing_order;
  for (const auto& g : config.governing) {
    const auto a = *schema.index_of(g);
    governing[a] = true;
    governing_order.push_back(a);
  }

  std::vector<std::vector<std::string>> domains(n_attr);
  std::vector<std::vector<ValueCode>> codes(n_attr);
  std::vector<std::vector<double>> value_weights(n_attr);
  for (std::size_t a = 0; a < n_attr; ++a) {
    const auto& attr = config.attributes[a];
    const std::size_t width = digits_of(attr.cardinality);
    for (std::size_t v = 0; v < attr.cardinality; ++v) {
      domains[a].push_back(attr.name + "_" + padded('v', v, width).substr(1));
    }
    domains[a].emplace_back(kNullValue);
    value_weights[a] = power_law(attr.cardinality, attr.skew);
    codes[a].resize(n);
  }

  SyntheticDataset out;
  out.planted.assign(n, 0);
  out.planted_segments = 1;
  for (std::size_t a : governing_order) {
    out.planted_segments *= config.attributes[a].cardinality;
  }

  std::vector<std::string> ids(n);
  const std::size_t user_width = digits_of(n);
  for (std::size_t u = 0; u < n; ++u) {
    ids[u] = padded('u', u, user_width);
    for (std::size_t a = 0; a < n_attr; ++a) {
      const bool missing = !governing[a] && config.missing_fraction > 0 &&
                           rng.uniform() < config.missing_fraction;
      codes[a][u] = static_cast<ValueCode>(
          missing ? config.attributes[a].cardinality
                  : draw(value_weights[a], rng));
    }
    std::uint32_t segment = 0;
    for (std::size_t a : governing_order) {
      segment = segment * static_cast<std::uint32_t>(
                              config.attributes[a].cardinality) +
                codes[a][u];
    }
    out.planted[u] = segment;
  }
  out.users = UserTable::FromColumns(std::move(schema), std::move(ids),
                                     std::move(domains), std::move(codes));

  std::vector<std::string> item_names(config.items);
  const std::size_t item_width = digits_of(config.items);
  for (std::size_t i = 0; i < config.items; ++i) {
    item_names[i] = padded('i', i, item_width);
  }
  const auto global = power_law(config.items, 0.8);
  const auto local = power_law(config.items_per_segment, 1.0);
  auto draw_item = [&](std::uint32_t segment) {
    if (rng.uniform() < config.concentration) {
      return segment * config.items_per_segment + draw(local, rng);
    }
    return draw(global, rng);
  };

  EngagementTableBuilder builder(out.users);
  for (UserIndex u = 0; u < n; ++u) {
    const double r = rng.uniform();
    if (r < config.active_fraction) {
      for (std::size_t i = 0; i < config.training_rows; ++i) {
        builder.add(u, item_names[draw_item(out.planted[u])], 1.0,
                    Window::kTraining);
      }
    } else if (r < config.active_fraction + config.marginal_fraction) {
      for (std::size_t i = 0; i < config.holdout_rows; ++i) {
        builder.add(u, item_names[draw_item(out.planted[u])], 1.0,
                    Window::kHoldout);
      }
    }
  }
  out.engagements = std::move(builder).build();

  std::vector<std::pair<UserIndex, UserIndex>> edges;
  if (config.edges_per_user > 0) {
    std::vector<std::vector<UserIndex>> members(out.planted_segments);
    for (UserIndex u = 0; u < n; ++u) members[out.planted[u]].push_back(u);
    for (UserIndex u = 0; u < n; ++u) {
      const auto& own = members[out.planted[u]];
      for (std::size_t e = 0; e < config.edges_per_user; ++e) {
        const bool inside = rng.uniform() < config.homophily;
        const UserIndex v = inside ? own[rng.below(own.size())]
                                   : static_cast<UserIndex>(rng.below(n));
        if (v != u) edges.emplace_back(u, v);
      }
    }
  }
  out.graph = SocialGraph::FromIndexEdges(n, std::move(edges));
  return out;
}

BaselineResult one_hot_baseline(std::span<const std::string> subset,
                                const UserTable& users,
                                const EngagementTable& engagements,
                                const UserClassification& classification,
                                std::size_t k, Relevance relevance) {
  if (subset.empty()) throw ConfigError("one-hot subset must not be empty");
  if (k == 0) throw ConfigError("K must be at least 1");
  std::vector<std::size_t> columns;
  for (const auto& name : subset) {
    const auto a = users.schema().index_of(name);
    if (!a) throw ConfigError("unknown attribute '" + name + "'");
    columns.push_back(*a);
  }
  std::vector<UserIndex> order(users.size());
  for (UserIndex u = 0; u < order.size(); ++u) order[u] = u;
  auto key_less = [&](UserIndex a, UserIndex b) {
    for (std::size_t c : columns) {
      const auto ca = users.code(a, c);
      const auto cb = users.code(b, c);
      if (ca != cb) return ca < cb;
    }
    return a < b;
  };
  auto same_key = [&](UserIndex a, UserIndex b) {
    for (std::size_t c : columns) {
      if (users.code(a, c) != users.code(b, c)) return false;
    }
    return true;
  };
  std::sort(order.begin(), order.end(), key_less);

  BaselineResult result;
  std::vector<UserIndex> active;
  std::vector<UserIndex> marginal;
  for (std::size_t begin = 0; begin < order.size();) {
    std::size_t end = begin + 1;
    while (end < order.size() && same_key(order[begin], order[end])) ++end;
    ++result.segments;
    active.clear();
    marginal.clear();
    for (std::size_t i = begin; i < end; ++i) {
      const UserIndex u = order[i];
      if (classification.is_active(u)) {
        active.push_back(u);
      } else if (classification.is_scored(u)) {
        marginal.push_back(u);
      }
    }
    if (!active.empty() && !marginal.empty()) {
      const RankedList list = top_k_behaviors(active, engagements, k);
      result.reward +=
          segment_reward(list, marginal, engagements, k, relevance).exact;
    }
    begin = end;
  }
  return result;
}

std::string size_bucket(std::uint64_t size) {
  if (size == 0) return "0";
  std::uint64_t lo = 1;
  while (size / lo >= 10) lo *= 10;
  return std::to_string(lo) + "-" + std::to_string(lo * 10 - 1);
}

namespace {

// Orders bucket labels by their lower bound.
std::uint64_t bucket_floor(const std::string& label) {
  std::uint64_t value = 0;
  std::from_chars(label.data(), label.data() + label.size(), value);
  return value;
}

template <typename T>
std::vector<std::pair<std::string, T>> by_floor(
    const std::map<std::string, T>& buckets) {
  std::vector<std::pair<std::string, T>> out(buckets.begin(), buckets.end());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return bucket_floor(a.first) < bucket_floor(b.first);
  });
  return out;
}

}  // namespace

HoldoutSummary holdout_eval(const BusTree& tree, const NodeCatalog& catalog,
                            const UserTable& users,
                            const EngagementTable& engagements,
                            std::span<const UserIndex> eval_users,
                            std::size_t k, Relevance relevance) {
  if (k == 0) throw ConfigError("K must be at least 1");
  std::vector<UserIndex> sorted(eval_users.begin(), eval_users.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  const StrippedTree stripped = strip_regress(tree);
  std::map<NodeId, RankedList> lists;
  std::map<std::string, BucketStat> buckets;
  HoldoutSummary summary;
  for (UserIndex u : sorted) {
    if (u >= users.size()) throw DataError("evaluation user out of range");
    const NodeId node = search_user(tree, users.record(u)).node;
    auto it = lists.find(node);
    if (it == lists.end()) {
      it = lists.emplace(node, recommend(node, stripped, catalog)).first;
    }
    const double score =
        ndcg_at_k(it->second, engagements.holdout(u), k, relevance);
    const auto& n = tree.node(node);
    auto& stat = buckets[size_bucket(n.active_count + n.marginal_count)];
    ++stat.users;
    stat.sum += score;
    ++summary.users;
    summary.sum += score;
  }
  if (summary.users > 0) {
    summary.mean = summary.sum / static_cast<double>(summary.users);
  }
  for (auto& [label, stat] : by_floor(buckets)) {
    stat.bucket = label;
    stat.mean = stat.sum / static_cast<double>(stat.users);
    summary.by_size.push_back(stat);
  }
  return summary;
}

std::vector<UserIndex> select_eval_users(const UserTable& users,
                                         const UserClassification& cls,
                                         double fraction, std::uint64_t seed) {
  if (!fraction_ok(fraction)) {
    throw ConfigError("evaluation fraction must lie in [0, 1]");
  }
  std::vector<UserIndex> out;
  const std::string salt = "#" + std::to_string(seed);
  for (UserIndex u : cls.marginal()) {
    if (!cls.is_scored(u)) continue;
    const std::uint64_t h = fnv1a64(users.id(u) + salt);
    if (static_cast<double>(h >> 11) * 0x1.0p-53 < fraction) out.push_back(u);
  }
  return out;
}

std::size_t leaf_segments(const BusTree& tree) { return tree.leaves().size(); }

std::size_t valid_attributes(const BusTree& tree) {
  std::set<std::string> used;
  for (const auto& n : tree.nodes()) {
    if (n.kind == NodeKind::kValue) used.insert(n.attribute);
  }
  return used.size();
}

EvalReport sweep(const UserTable& users, const EngagementTable& engagements,
                 const SweepOptions& options) {
  if (options.mus.empty() || options.omegas.empty()) {
    throw ConfigError("sweep needs at least one mu and one omega");
  }
  const UserClassification full =
      classify_users(engagements, users, options.rule);
  const std::vector<UserIndex> eval_users =
      select_eval_users(users, full, options.eval_fraction, options.seed);
  std::vector<char> held(users.size(), 0);
  for (UserIndex u : eval_users) held[u] = 1;
  const EngagementTable build_rows =
      engagements.filtered([&](UserIndex u, Window w) {
        return !(w == Window::kHoldout && held[u]);
      });
  const UserClassification cls =
      classify_users(build_rows, users, options.rule);

  EvalReport report;
  report.k = options.k;
  for (std::size_t mu : options.mus) {
    for (double omega : options.omegas) {
      BuildParams params;
      params.omega = omega;
      params.mu = mu;
      params.k = options.k;
      params.relevance = options.relevance;
      params.workers = options.workers;

      const auto start = std::chrono::steady_clock::now();
      BuildResult built = build_tree(users, build_rows, cls, params);
      const StrippedTree stripped = strip_regress(built.tree);
      const NodeCatalog catalog =
          build_catalog(stripped, built.user_leaf, build_rows, cls, options.k,
                        options.workers);

      EvalRow row;
      row.mu = mu;
      row.omega = omega;
      row.seed = options.seed;
      row.segments = leaf_segments(built.tree);
      row.valid_attributes = valid_attributes(built.tree);
      row.attribute_order = built.tree.attribute_order();
      row.level_rewards.push_back(built.root_reward);
      for (const auto& level : built.levels) {
        row.level_rewards.push_back(level.total_reward);
      }
      row.training_reward = row.level_rewards.back();
      std::map<std::string, std::size_t> histogram;
      for (NodeId leaf : built.tree.leaves()) {
        const auto& n = built.tree.node(leaf);
        ++histogram[size_bucket(n.active_count + n.marginal_count)];
      }
      row.size_histogram = by_floor(histogram);
      row.holdout = holdout_eval(built.tree, catalog, users, engagements,
                                 eval_users, options.k, options.relevance);
      row.wall_seconds = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - start)
                             .count();
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

void write_report_tsv(const EvalReport& report, std::ostream& out,
                      bool wall_clock) {
  out << "mu\tomega\tseed\tsegments\tvalid_attributes\ttraining_reward"
         "\tholdout_users\tholdout_sum\tholdout_mean\tsize_histogram"
         "\tattribute_order\tlevel_rewards";
  if (wall_clock) out << "\twall_seconds";
  out << '\n';
  for (const auto& r : report.rows) {
    std::string histogram;
    for (const auto& [label, count] : r.size_histogram) {
      if (!histogram.empty()) histogram += ';';
      histogram += label + ":" + std::to_string(count);
    }
    std::string order;
    for (const auto& a : r.attribute_order) {
      if (!order.empty()) order += '>';
      order += a;
    }
    std::string levels;
    for (const auto& reward : r.level_rewards) {
      if (!levels.empty()) levels += ';';
      levels += format_number(reward.value());
    }
    out << r.mu << '\t' << format_number(r.omega) << '\t' << r.seed << '\t'
        << r.segments << '\t' << r.valid_attributes << '\t'
        << format_number(r.training_reward.value()) << '\t'
        << r.holdout.users << '\t' << format_number(r.holdout.sum) << '\t'
        << format_number(r.holdout.mean) << '\t' << histogram << '\t' << order
        << '\t' << levels;
    if (wall_clock) out << '\t' << format_number(r.wall_seconds);
    out << '\n';
  }
}

void write_report_summary(const EvalReport& report, std::ostream& out,
                          bool wall_clock) {
  Json j;
  j["k"] = report.k;
  Json rows = Json::array();
  for (const auto& r : report.rows) {
    Json row;
    row["mu"] = r.mu;
    row["omega"] = r.omega;
    row["seed"] = r.seed;
    row["segments"] = r.segments;
    row["valid_attributes"] = r.valid_attributes;
    row["attribute_order"] = r.attribute_order;
    Json histogram = Json::object();
    for (const auto& [label, count] : r.size_histogram) histogram[label] = count;
    row["size_histogram"] = histogram;
    Json levels = Json::array();
    for (const auto& reward : r.level_rewards) levels.push_back(reward.value());
    row["level_rewards"] = levels;
    row["training_reward"] = r.training_reward.value();
    row["training_reward_ticks"] = r.training_reward.to_string();
    Json holdout;
    holdout["users"] = r.holdout.users;
    holdout["sum"] = r.holdout.sum;
    holdout["mean"] = r.holdout.mean;
    Json buckets = Json::array();
    for (const auto& b : r.holdout.by_size) {
      buckets.push_back({{"bucket", b.bucket},
                         {"users", b.users},
                         {"sum", b.sum},
                         {"mean", b.mean}});
    }
    holdout["by_size"] = buckets;
    row["holdout"] = holdout;
    if (wall_clock) row["wall_seconds"] = r.wall_seconds;
    rows.push_back(row);
  }
  j["rows"] = rows;
  out << j.dump(2) << '\n';
}

}  // namespace bus
