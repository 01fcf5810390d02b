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

#include "bus/builder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bus/error.hpp"
#include "bus/parallel.hpp"

namespace bus {
namespace {

struct Member {
  ValueCode code;
  UserIndex user;
  friend bool operator<(const Member& a, const Member& b) {
    return a.code != b.code ? a.code < b.code : a.user < b.user;
  }
};

struct Leaf {
  NodeId node;
  // Ascending.
  std::vector<UserIndex> users;
  std::shared_ptr<const RankedList> prediction;
};

struct Scratch {
  Scratch(std::size_t num_items, const NdcgScorer& scorer)
      : accumulator(num_items), session(scorer) {}
  ItemAccumulator accumulator;
  NdcgScorer::Session session;
  std::vector<Member> members;
};

// Staging node evaluated together with what a commit needs.
struct GroupResult {
  StagingNode node;
  std::vector<UserIndex> users;
  std::shared_ptr<const RankedList> prediction;
  // Own reward of each scored marginal user, aligned with `users`.
  std::vector<Reward> user_rewards;
};

}  // namespace

void validate(const BuildParams& params) {
  if (!(params.omega >= 0) || !std::isfinite(params.omega)) {
    throw ConfigError("omega must be a finite non-negative number");
  }
  if (params.k == 0) throw ConfigError("K must be at least 1");
}

bool passes_omega(Reward own, Reward inherited, double omega) {
  if (omega == 1.0) return own >= inherited;
  const long double lhs = static_cast<long double>(own.ticks());
  const long double rhs =
      static_cast<long double>(omega) * static_cast<long double>(inherited.ticks());
  bool keep = !(lhs < rhs);
  // Guard rounding in the scaled comparison.
  if (omega > 1.0) keep = keep && own >= inherited;
  return keep;
}

std::size_t StagingReport::regressed_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(),
                    [](const StagingNode& n) { return n.regressed; }));
}

std::optional<RegressMerge> merge_regress(
    NodeId parent, std::span<const StagingNode> siblings) {
  RegressMerge merge;
  merge.parent = parent;
  for (const auto& s : siblings) {
    if (!s.regressed) continue;
    ++merge.merged;
    merge.active_count += s.active_count;
    merge.marginal_count += s.marginal_count;
    merge.reward += s.inherited_reward;
  }
  if (merge.merged == 0) return std::nullopt;
  return merge;
}

struct TreeBuilder::State {
  State(const UserTable& u, const EngagementTable& e,
        const UserClassification& c, BuildParams p)
      : users(u),
        engagements(e),
        classification(c),
        params(std::move(p)),
        scorer(e, c, params.k, params.relevance),
        workers(resolve_workers(params.workers)) {}

  const UserTable& users;
  const EngagementTable& engagements;
  const UserClassification& classification;
  BuildParams params;
  NdcgScorer scorer;
  unsigned workers;

  BusTree tree;
  std::vector<Leaf> frontier;
  std::vector<Reward> user_reward;
  std::vector<NodeId> user_leaf;
  std::vector<std::size_t> remaining;
  std::vector<std::string> selected;
  std::vector<LevelRecord> levels;
  std::map<NodeId, RankedList> predictions;
  Reward root_reward;
  Reward level_total;
  mutable std::vector<std::unique_ptr<Scratch>> scratch;

  Scratch& scratch_for(unsigned worker) const { return *scratch[worker]; }

  bool is_eligible(std::size_t attr) const {
    for (const auto& p : users.schema().at(attr).prerequisites) {
      if (std::find(selected.begin(), selected.end(), p) == selected.end()) {
        return false;
      }
    }
    return true;
  }

  std::vector<std::size_t> eligible() const {
    std::vector<std::size_t> out;
    for (std::size_t a : remaining) {
      if (is_eligible(a)) out.push_back(a);
    }
    std::sort(out.begin(), out.end(), [&](std::size_t a, std::size_t b) {
      return users.schema().at(a).name < users.schema().at(b).name;
    });
    return out;
  }

  std::size_t attribute_index(const std::string& name) const {
    auto idx = users.schema().index_of(name);
    if (!idx) throw ConfigError("unknown attribute type '" + name + "'");
    return *idx;
  }

  // Groups the leaf's users by value of `attr` into scratch.members and
  // returns [begin, end) ranges, values ascending.
  std::vector<std::pair<std::size_t, std::size_t>> group(const Leaf& leaf,
                                                         std::size_t attr,
                                                         Scratch& s) const {
    const auto column = users.column(attr);
    s.members.clear();
    s.members.reserve(leaf.users.size());
    for (UserIndex u : leaf.users) s.members.push_back({column[u], u});
    std::sort(s.members.begin(), s.members.end());
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (std::size_t i = 0; i < s.members.size();) {
      std::size_t j = i;
      while (j < s.members.size() && s.members[j].code == s.members[i].code) ++j;
      ranges.emplace_back(i, j);
      i = j;
    }
    return ranges;
  }

  GroupResult evaluate_group(const Leaf& leaf, std::size_t attr,
                             std::span<const Member> members, Scratch& s,
                             bool for_commit) const {
    GroupResult result;
    StagingNode& node = result.node;
    node.parent = leaf.node;
    node.value = users.dictionary(attr).value(members.front().code);
    s.accumulator.clear();
    for (const Member& m : members) {
      if (classification.is_active(m.user)) {
        ++node.active_count;
        s.accumulator.add(engagements.training(m.user));
      } else {
        ++node.marginal_count;
      }
    }
    auto prediction =
        std::make_shared<const RankedList>(s.accumulator.top_k(params.k));
    s.accumulator.clear();
    s.session.bind(*prediction);
    for (const Member& m : members) {
      if (classification.is_active(m.user)) continue;
      node.inherited_reward += user_reward[m.user];
      const Reward own = classification.is_scored(m.user)
                             ? s.session.reward(m.user)
                             : Reward();
      node.own_reward += own;
      if (for_commit) result.user_rewards.push_back(own);
    }
    s.session.unbind();
    node.regressed = node.active_count < params.mu ||
                     !passes_omega(node.own_reward, node.inherited_reward,
                                   params.omega);
    if (for_commit) {
      result.users.reserve(members.size());
      for (const Member& m : members) result.users.push_back(m.user);
      result.prediction = std::move(prediction);
    }
    return result;
  }

  std::vector<StagingReport> evaluate(const std::vector<std::size_t>& attrs) const {
    const std::size_t n_leaves = frontier.size();
    std::vector<std::vector<StagingNode>> slots(attrs.size() * n_leaves);
    parallel_for(slots.size(), workers, [&](std::size_t task, unsigned worker) {
      const std::size_t a = task / n_leaves;
      const Leaf& leaf = frontier[task % n_leaves];
      Scratch& s = scratch_for(worker);
      const auto ranges = group(leaf, attrs[a], s);
      auto& out = slots[task];
      out.reserve(ranges.size());
      for (const auto& [b, e] : ranges) {
        std::span<const Member> members(s.members.data() + b, e - b);
        out.push_back(std::move(evaluate_group(leaf, attrs[a], members, s, false).node));
      }
    });
    std::vector<StagingReport> reports(attrs.size());
    for (std::size_t a = 0; a < attrs.size(); ++a) {
      StagingReport& r = reports[a];
      r.attribute = users.schema().at(attrs[a]).name;
      for (std::size_t l = 0; l < n_leaves; ++l) {
        for (auto& node : slots[a * n_leaves + l]) {
          r.total_reward += node.kept_reward();
          r.nodes.push_back(std::move(node));
        }
      }
    }
    return reports;
  }

  void commit(std::size_t attr) {
    const std::size_t n_leaves = frontier.size();
    std::vector<std::vector<GroupResult>> per_leaf(n_leaves);
    parallel_for(n_leaves, workers, [&](std::size_t l, unsigned worker) {
      Scratch& s = scratch_for(worker);
      const auto ranges = group(frontier[l], attr, s);
      for (const auto& [b, e] : ranges) {
        std::span<const Member> members(s.members.data() + b, e - b);
        per_leaf[l].push_back(evaluate_group(frontier[l], attr, members, s, true));
      }
    });

    tree.append_level(users.schema().at(attr).name);
    std::vector<Leaf> next;
    Reward total;
    for (std::size_t l = 0; l < n_leaves; ++l) {
      const Leaf& parent = frontier[l];
      std::vector<StagingNode> siblings;
      std::vector<UserIndex> regressed_users;
      for (auto& g : per_leaf[l]) {
        siblings.push_back(g.node);
        if (g.node.regressed) {
          regressed_users.insert(regressed_users.end(), g.users.begin(),
                                 g.users.end());
          continue;
        }
        const NodeId id = tree.add_child(parent.node, NodeKind::kValue,
                                         g.node.value, g.node.active_count,
                                         g.node.marginal_count,
                                         g.node.own_reward);
        std::size_t r = 0;
        for (UserIndex u : g.users) {
          user_leaf[u] = id;
          if (!classification.is_active(u)) user_reward[u] = g.user_rewards[r++];
        }
        if (params.keep_predictions) predictions.emplace(id, *g.prediction);
        total += g.node.own_reward;
        next.push_back({id, std::move(g.users), std::move(g.prediction)});
      }
      if (auto merge = merge_regress(parent.node, siblings)) {
        const NodeId id =
            tree.add_child(parent.node, NodeKind::kRegress, {}, merge->active_count,
                           merge->marginal_count, merge->reward);
        std::sort(regressed_users.begin(), regressed_users.end());
        for (UserIndex u : regressed_users) user_leaf[u] = id;
        total += merge->reward;
        next.push_back({id, std::move(regressed_users), parent.prediction});
      }
    }
    frontier = std::move(next);

    if (params.omega >= 1.0 && total < level_total) {
      throw std::logic_error(
          "reward decreased between levels with omega >= 1 (" +
          level_total.to_string() + " -> " + total.to_string() + ")");
    }
    level_total = total;
  }
};

TreeBuilder::TreeBuilder(const UserTable& users,
                         const EngagementTable& engagements,
                         const UserClassification& classification,
                         BuildParams params) {
  validate(params);
  if (users.schema().empty()) {
    throw ConfigError("cannot build a tree without attribute types");
  }
  if (users.empty()) throw DataError("cannot build a tree over an empty universe");
  if (engagements.num_users() != users.size() ||
      classification.size() != users.size()) {
    throw DataError("users, engagements and classification disagree on the "
                    "user universe");
  }
  if (!params.forced_order.empty()) {
    auto sorted = params.forced_order;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::string> names;
    for (const auto& t : users.schema().types()) names.push_back(t.name);
    std::sort(names.begin(), names.end());
    if (sorted != names) {
      throw ConfigError("forced attribute order must be a permutation of the "
                        "schema attribute types");
    }
  }
  state_ = std::make_unique<State>(users, engagements, classification,
                                   std::move(params));
  State& s = *state_;
  for (unsigned w = 0; w < s.workers; ++w) {
    s.scratch.push_back(
        std::make_unique<Scratch>(engagements.num_items(), s.scorer));
  }
  for (std::size_t a = 0; a < users.schema().size(); ++a) s.remaining.push_back(a);

  Leaf root{0, {}, nullptr};
  root.users.resize(users.size());
  for (UserIndex u = 0; u < users.size(); ++u) root.users[u] = u;
  auto prediction = std::make_shared<const RankedList>(
      top_k_behaviors(classification.active(), engagements, s.params.k));
  s.user_reward.assign(users.size(), Reward());
  Scratch& scratch = *s.scratch[0];
  scratch.session.bind(*prediction);
  for (UserIndex u : classification.marginal()) {
    if (classification.is_scored(u)) {
      s.user_reward[u] = scratch.session.reward(u);
      s.root_reward += s.user_reward[u];
    }
  }
  scratch.session.unbind();
  s.level_total = s.root_reward;
  s.tree = BusTree(s.params.tree_params(), classification.active().size(),
                   classification.marginal().size(), s.root_reward);
  if (s.params.keep_predictions) s.predictions.emplace(0, *prediction);
  root.prediction = std::move(prediction);
  s.frontier.push_back(std::move(root));
  s.user_leaf.assign(users.size(), 0);
}

TreeBuilder::~TreeBuilder() = default;

const BusTree& TreeBuilder::tree() const { return state_->tree; }

bool TreeBuilder::done() const { return state_->remaining.empty(); }

std::vector<std::string> TreeBuilder::remaining_attributes() const {
  std::vector<std::string> out;
  for (std::size_t a : state_->remaining) {
    out.push_back(state_->users.schema().at(a).name);
  }
  return out;
}

std::vector<std::string> TreeBuilder::eligible_attributes() const {
  std::vector<std::string> out;
  for (std::size_t a : state_->eligible()) {
    out.push_back(state_->users.schema().at(a).name);
  }
  return out;
}

StagingReport TreeBuilder::evaluate_attribute(const std::string& attribute) const {
  const std::size_t a = state_->attribute_index(attribute);
  if (std::find(state_->remaining.begin(), state_->remaining.end(), a) ==
          state_->remaining.end() ||
      !state_->is_eligible(a)) {
    throw ConfigError("attribute type '" + attribute +
                      "' is not eligible at this level");
  }
  return std::move(state_->evaluate({a}).front());
}

LevelRecord TreeBuilder::grow_level() {
  State& s = *state_;
  if (s.remaining.empty()) throw ConfigError("all attribute types are placed");
  const std::size_t level = s.selected.size() + 1;
  std::vector<std::size_t> candidates;
  if (!s.params.forced_order.empty()) {
    const std::size_t a = s.attribute_index(s.params.forced_order[level - 1]);
    if (!s.is_eligible(a)) {
      throw ConfigError("forced attribute '" + s.params.forced_order[level - 1] +
                        "' is placed before its prerequisites");
    }
    candidates.push_back(a);
  } else {
    candidates = s.eligible();
  }
  if (candidates.empty()) {
    std::string blocked;
    for (std::size_t a : s.remaining) {
      if (!blocked.empty()) blocked += ", ";
      blocked += s.users.schema().at(a).name;
    }
    throw ConfigError("no eligible attribute type; prerequisites block: " +
                      blocked);
  }

  const auto reports = s.evaluate(candidates);
  std::size_t best = 0;
  for (std::size_t i = 1; i < reports.size(); ++i) {
    // Candidates are name-ordered, so strict comparison keeps the smallest
    // name on ties.
    if (reports[i].total_reward > reports[best].total_reward) best = i;
  }

  LevelRecord record;
  record.level = level;
  record.attribute = reports[best].attribute;
  record.staging_nodes = reports[best].nodes.size();
  record.regressed_nodes = reports[best].regressed_count();
  for (const auto& r : reports) record.candidates.emplace_back(r.attribute, r.total_reward);

  s.commit(candidates[best]);
  record.total_reward = s.level_total;
  if (record.total_reward != reports[best].total_reward) {
    throw std::logic_error("committed level reward differs from its evaluation");
  }
  s.selected.push_back(record.attribute);
  s.remaining.erase(std::find(s.remaining.begin(), s.remaining.end(),
                              candidates[best]));
  s.levels.push_back(record);
  return record;
}

BuildResult TreeBuilder::finish() && {
  while (!done()) grow_level();
  State& s = *state_;
  if (auto problem = s.tree.check_structure(); !problem.empty()) {
    throw std::logic_error("built tree violates an invariant: " + problem);
  }
  BuildResult result;
  result.tree = std::move(s.tree);
  result.root_reward = s.root_reward;
  result.levels = std::move(s.levels);
  result.user_leaf = std::move(s.user_leaf);
  result.predictions = std::move(s.predictions);
  return result;
}

BuildResult build_tree(const UserTable& users,
                       const EngagementTable& engagements,
                       const UserClassification& classification,
                       const BuildParams& params,
                       const LevelObserver& observer) {
  TreeBuilder builder(users, engagements, classification, params);
  while (!builder.done()) {
    const LevelRecord record = builder.grow_level();
    if (observer) observer(record);
  }
  return std::move(builder).finish();
}

}  // namespace bus
