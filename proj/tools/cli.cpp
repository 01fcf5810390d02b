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

#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bus/builder.hpp"
#include "bus/dataset.hpp"
#include "bus/error.hpp"
#include "bus/evalbench.hpp"
#include "bus/index.hpp"
#include "bus/retrieval.hpp"
#include "bus/schema.hpp"
#include "bus/social.hpp"
#include "bus/tree_io.hpp"
#include "json.hpp"

namespace bus::cli {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

std::string format_number(double value) {
  char buffer[64];
  auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, ptr);
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw Error("no " + what + " given");
  if (!fs::is_regular_file(path)) {
    throw Error("missing " + what + " '" + path + "'");
  }
}

// Writes to `path` atomically, or to `out` when no path is given.
void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
  } else {
    write_file_atomic(path, text);
  }
}

// Options shared by every command that reads users.
struct SchemaOptions {
  std::string schema;
  std::vector<std::string> attributes;
};

void add_schema_options(CLI::App* cmd, SchemaOptions& s) {
  cmd->add_option("--schema", s.schema, "Attribute schema JSON file");
  cmd->add_option("--attributes", s.attributes,
                  "Attribute names (when no schema file is given)")
      ->delimiter(',');
}

// Schema file, explicit names, the tree's level order, or the users header.
AttributeSchema resolve_schema(const SchemaOptions& s,
                               const std::string& users_path,
                               const BusTree* tree) {
  if (!s.schema.empty()) {
    require_file(s.schema, "schema file");
    return AttributeSchema::FromJsonFile(s.schema);
  }
  if (!s.attributes.empty()) return AttributeSchema::FromNames(s.attributes);
  if (tree != nullptr) return AttributeSchema::FromNames(tree->attribute_order());
  std::ifstream in(users_path);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") != std::string::npos) break;
  }
  std::vector<std::string> names;
  for (auto field : split_fields(line, delimiter_for_path(users_path))) {
    if (field != "user_id") names.emplace_back(field);
  }
  return AttributeSchema::FromNames(names);
}

struct ActivityOptions {
  ActivityRule rule;
};

void add_activity_options(CLI::App* cmd, ActivityOptions& a) {
  cmd->add_option("--min-training-rows", a.rule.min_training_rows,
                  "Training rows needed to count as active")
      ->capture_default_str();
  cmd->add_option("--min-holdout-rows", a.rule.min_holdout_rows,
                  "Holdout rows needed for a marginal user to be scored")
      ->capture_default_str();
}

const std::map<std::string, Relevance> kRelevance = {
    {"graded", Relevance::kGraded}, {"binary", Relevance::kBinary}};

Json level_json(const LevelRecord& level) {
  Json j;
  j["event"] = "level";
  j["level"] = level.level;
  j["attribute"] = level.attribute;
  j["total_reward"] = level.total_reward.value();
  j["total_reward_ticks"] = level.total_reward.to_string();
  j["staging_nodes"] = level.staging_nodes;
  j["regressed_nodes"] = level.regressed_nodes;
  Json candidates = Json::object();
  for (const auto& [name, reward] : level.candidates) {
    candidates[name] = reward.value();
  }
  j["candidates"] = candidates;
  return j;
}

// --- build -----------------------------------------------------------------

struct BuildCommand {
  std::string users, engagements, tree, catalog, log;
  SchemaOptions schema;
  ActivityOptions activity;
  BuildParams params;
};

void run_build(const BuildCommand& c, unsigned workers, std::ostream& out) {
  require_file(c.users, "users file");
  require_file(c.engagements, "engagements file");
  if (c.tree.empty()) throw Error("no output tree path given (--tree)");
  const AttributeSchema schema = resolve_schema(c.schema, c.users, nullptr);
  const UserTable users = load_users(c.users, schema);
  const EngagementTable eng = load_engagements(c.engagements, users);
  const UserClassification cls = classify_users(eng, users, c.activity.rule);

  BuildParams params = c.params;
  params.workers = workers;
  std::ostringstream log;
  BuildResult result = build_tree(
      users, eng, cls, params,
      [&](const LevelRecord& level) { log << level_json(level).dump() << '\n'; });

  Json root;
  root["event"] = "root";
  root["users"] = users.size();
  root["active_users"] = cls.active().size();
  root["marginal_users"] = cls.marginal().size();
  root["total_reward"] = result.root_reward.value();
  root["total_reward_ticks"] = result.root_reward.to_string();
  Json done;
  done["event"] = "done";
  done["levels"] = result.levels.size();
  done["nodes"] = result.tree.size();
  done["leaves"] = result.tree.leaves().size();
  done["valid_attributes"] = valid_attributes(result.tree);

  save_tree(result.tree, c.tree);
  if (!c.catalog.empty()) {
    const StrippedTree stripped = strip_regress(result.tree);
    save_catalog(build_catalog(stripped, result.user_leaf, eng, cls,
                               params.k, workers),
                 c.catalog);
  }
  emit(c.log, root.dump() + "\n" + log.str() + done.dump() + "\n", out);
}

// --- assign ----------------------------------------------------------------

struct AssignCommand {
  std::string tree, users, out, tree_out;
  SchemaOptions schema;
  bool read_only = false;
};

void run_assign(const AssignCommand& c, unsigned workers, std::ostream& out,
                std::ostream& err) {
  require_file(c.tree, "tree file");
  require_file(c.users, "users file");
  BusTree tree = load_tree(c.tree);
  const UserTable users =
      load_users(c.users, resolve_schema(c.schema, c.users, &tree));
  const AssignMode mode =
      c.read_only ? AssignMode::kReadOnly : AssignMode::kMutating;
  const AssignAllResult result = assign_all(tree, users, mode, workers);

  std::string rows = "user_id,node_id,path\n";
  for (UserIndex u = 0; u < users.size(); ++u) {
    rows += users.id(u) + "," + std::to_string(result.nodes[u]) + "," +
            path_of(tree, result.nodes[u]).to_string() + "\n";
  }
  emit(c.out, rows, out);
  err << "assigned " << users.size() << " users, inserts " << result.inserts
      << ", insert_rate " << format_number(result.insert_rate()) << '\n';
  if (mode == AssignMode::kMutating && result.inserts > 0) {
    save_tree(tree, c.tree_out.empty() ? c.tree : c.tree_out);
  }
}

// --- recommend -------------------------------------------------------------

struct RecommendCommand {
  std::string tree, users, catalog, engagements, save_catalog, connections,
      out;
  SchemaOptions schema;
  ActivityOptions activity;
  std::size_t k = 0;
  double phi = 0.1;
  std::string merge = "max";
  bool blend = false;
  std::vector<double> blend_weights;
  double blend_decay = 0.5;
};

void run_recommend(const RecommendCommand& c, unsigned workers,
                   std::ostream& out) {
  require_file(c.tree, "tree file");
  require_file(c.users, "users file");
  if (c.catalog.empty() && c.engagements.empty()) {
    throw Error("recommend needs --catalog or --engagements");
  }
  if (!c.connections.empty() && c.blend) {
    throw ConfigError("--connections and --blend cannot be combined");
  }
  if (!(c.phi >= 0.0 && c.phi <= 1.0)) {
    throw ConfigError("--phi must lie in [0, 1]");
  }
  const BusTree tree = load_tree(c.tree);
  const UserTable users =
      load_users(c.users, resolve_schema(c.schema, c.users, &tree));
  const StrippedTree stripped = strip_regress(tree);
  const std::vector<NodeId> nodes = search_all(tree, users, workers).nodes;

  NodeCatalog catalog;
  if (!c.catalog.empty()) {
    require_file(c.catalog, "catalog file");
    catalog = load_catalog(c.catalog);
  } else {
    require_file(c.engagements, "engagements file");
    const EngagementTable eng = load_engagements(c.engagements, users);
    const UserClassification cls = classify_users(eng, users, c.activity.rule);
    catalog = build_catalog(stripped, nodes, eng, cls,
                            c.k == 0 ? tree.params().k : c.k, workers);
    if (!c.save_catalog.empty()) save_catalog(catalog, c.save_catalog);
  }
  const std::size_t k = c.k == 0 ? catalog.k() : c.k;

  std::string rows = "user_id,rank,item_id,score\n";
  auto append = [&](UserIndex u, const RankedList& list) {
    for (std::size_t r = 0; r < list.size(); ++r) {
      rows += users.id(u) + "," + std::to_string(r + 1) + "," +
              catalog.items().value(list[r].item) + "," +
              format_number(list[r].score) + "\n";
    }
  };

  if (!c.connections.empty()) {
    require_file(c.connections, "connections file");
    const SocialGraph graph = load_graph(c.connections, users);
    const UtilityMerge merge =
        c.merge == "sum" ? UtilityMerge::kSum : UtilityMerge::kMax;
    std::map<std::string, RankedList> by_key;
    for (UserIndex u = 0; u < users.size(); ++u) {
      const ConnectionProfile profile =
          connection_segments(u, graph, nodes, c.phi);
      const std::string key = profile_key(profile, stripped);
      auto it = by_key.find(key);
      if (it == by_key.end()) {
        it = by_key
                 .emplace(key, utility_rank(profile, stripped, catalog, k, merge))
                 .first;
      }
      append(u, it->second);
    }
  } else {
    BlendConfig blend;
    blend.enabled = c.blend;
    blend.weights = c.blend_weights;
    blend.decay = c.blend_decay;
    blend.k = k;
    std::map<NodeId, RankedList> by_node;
    for (UserIndex u = 0; u < users.size(); ++u) {
      auto it = by_node.find(nodes[u]);
      if (it == by_node.end()) {
        it = by_node.emplace(nodes[u], recommend(nodes[u], stripped, catalog,
                                                 blend))
                 .first;
      }
      append(u, it->second);
    }
  }
  emit(c.out, rows, out);
}

// --- synth -----------------------------------------------------------------

struct SynthCommand {
  std::string spec, out_dir;
  std::optional<std::uint64_t> seed;
};

void run_synth(const SynthCommand& c, std::ostream& out) {
  require_file(c.spec, "synthetic spec file");
  if (c.out_dir.empty()) throw Error("no output directory given (--out-dir)");
  SynthConfig config = SynthConfig::FromJsonFile(c.spec);
  if (c.seed) config.seed = *c.seed;
  const SyntheticDataset data = generate_synthetic(config);
  fs::create_directories(c.out_dir);
  const fs::path dir(c.out_dir);
  save_users((dir / "users.csv").string(), data.users);
  save_engagements((dir / "engagements.csv").string(), data.engagements,
                   data.users);
  save_graph((dir / "graph.csv").string(), data.graph, data.users);
  write_file_atomic((dir / "schema.json").string(),
                    data.users.schema().ToJsonText());
  write_file_atomic((dir / "synth.json").string(), config.ToJsonText());
  std::string planted = "user_id,segment\n";
  for (UserIndex u = 0; u < data.users.size(); ++u) {
    planted += data.users.id(u) + "," + std::to_string(data.planted[u]) + "\n";
  }
  write_file_atomic((dir / "planted.csv").string(), planted);
  out << "wrote " << data.users.size() << " users, "
      << data.engagements.total_rows(Window::kTraining) << " training rows, "
      << data.engagements.total_rows(Window::kHoldout) << " holdout rows, "
      << data.graph.num_edges() << " edges to " << c.out_dir << '\n';
}

// --- sweep -----------------------------------------------------------------

struct SweepCommand {
  std::string users, engagements, report_dir;
  SchemaOptions schema;
  ActivityOptions activity;
  SweepOptions options;
  bool wall_clock = false;
};

void run_sweep(const SweepCommand& c, unsigned workers, std::ostream& out) {
  require_file(c.users, "users file");
  require_file(c.engagements, "engagements file");
  if (c.report_dir.empty()) throw Error("no report directory given");
  const UserTable users =
      load_users(c.users, resolve_schema(c.schema, c.users, nullptr));
  const EngagementTable eng = load_engagements(c.engagements, users);
  SweepOptions options = c.options;
  options.rule = c.activity.rule;
  options.workers = workers;
  const EvalReport report = sweep(users, eng, options);

  fs::create_directories(c.report_dir);
  const fs::path dir(c.report_dir);
  std::ostringstream tsv;
  write_report_tsv(report, tsv, c.wall_clock);
  write_file_atomic((dir / "report.tsv").string(), tsv.str());
  std::ostringstream summary;
  write_report_summary(report, summary, c.wall_clock);
  write_file_atomic((dir / "summary.json").string(), summary.str());
  out << tsv.str();
}

// --- eval ------------------------------------------------------------------

struct EvalCommand {
  std::string tree, users, engagements, catalog, out;
  SchemaOptions schema;
  ActivityOptions activity;
  std::size_t k = 0;
  std::vector<std::string> one_hot;
};

void run_eval(const EvalCommand& c, unsigned workers, std::ostream& out) {
  require_file(c.tree, "tree file");
  require_file(c.users, "users file");
  require_file(c.engagements, "engagements file");
  const BusTree tree = load_tree(c.tree);
  const UserTable users =
      load_users(c.users, resolve_schema(c.schema, c.users, &tree));
  const EngagementTable eng = load_engagements(c.engagements, users);
  const UserClassification cls = classify_users(eng, users, c.activity.rule);
  const std::size_t k = c.k == 0 ? tree.params().k : c.k;
  const Relevance relevance = tree.params().relevance;

  NodeCatalog catalog;
  if (!c.catalog.empty()) {
    require_file(c.catalog, "catalog file");
    catalog = load_catalog(c.catalog);
  } else {
    catalog = build_catalog(strip_regress(tree), search_all(tree, users, workers).nodes,
                            eng, cls, k, workers);
  }
  std::vector<UserIndex> eval_users;
  for (UserIndex u : cls.marginal()) {
    if (cls.is_scored(u)) eval_users.push_back(u);
  }
  const HoldoutSummary summary =
      holdout_eval(tree, catalog, users, eng, eval_users, k, relevance);

  Json j;
  j["k"] = k;
  j["users"] = summary.users;
  j["sum"] = summary.sum;
  j["mean"] = summary.mean;
  Json buckets = Json::array();
  for (const auto& b : summary.by_size) {
    buckets.push_back(
        {{"bucket", b.bucket}, {"users", b.users}, {"sum", b.sum}, {"mean", b.mean}});
  }
  j["by_size"] = buckets;
  if (!c.one_hot.empty()) {
    const BaselineResult baseline =
        one_hot_baseline(c.one_hot, users, eng, cls, k, relevance);
    j["one_hot"] = {{"attributes", c.one_hot},
                    {"segments", baseline.segments},
                    {"reward", baseline.reward.value()}};
  }
  emit(c.out, j.dump(2) + "\n", out);
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out,
                std::ostream& err) {
  CLI::App app{"Behavior-based user segmentation trees", "bus"};
  app.set_config("--config", "", "TOML config file; flags override it");
  app.require_subcommand(1);
  unsigned workers = 0;
  app.add_option("--workers", workers, "Worker threads (0 = all cores)");

  BuildCommand build;
  auto* b = app.add_subcommand("build", "Build a segmentation tree");
  b->add_option("--users", build.users, "Users file")->required();
  b->add_option("--engagements", build.engagements, "Engagements file")
      ->required();
  b->add_option("--tree", build.tree, "Output tree file")->required();
  b->add_option("--catalog", build.catalog, "Also write the node catalog");
  b->add_option("--log", build.log, "Level log (JSON lines); stdout if absent");
  b->add_option("--omega", build.params.omega, "Regress factor")
      ->capture_default_str();
  b->add_option("--mu", build.params.mu, "Minimum active users per segment")
      ->capture_default_str();
  b->add_option("--k", build.params.k, "NDCG cutoff and list length")
      ->capture_default_str();
  b->add_option("--relevance", build.params.relevance, "graded or binary")
      ->transform(CLI::CheckedTransformer(kRelevance, CLI::ignore_case));
  b->add_option("--order", build.params.forced_order,
                "Fixed attribute order instead of greedy selection")
      ->delimiter(',');
  add_schema_options(b, build.schema);
  add_activity_options(b, build.activity);

  AssignCommand assign;
  auto* a = app.add_subcommand("assign", "Route users to tree segments");
  a->add_option("--tree", assign.tree, "Tree file")->required();
  a->add_option("--users", assign.users, "Users file")->required();
  a->add_option("--out", assign.out, "Assignment rows; stdout if absent");
  a->add_option("--tree-out", assign.tree_out,
                "Where to write a grown tree (default: --tree)");
  a->add_flag("--read-only", assign.read_only,
              "Never grow the tree; novel users get the nearest segment");
  add_schema_options(a, assign.schema);

  RecommendCommand rec;
  auto* r = app.add_subcommand("recommend", "Emit ranked candidate lists");
  r->add_option("--tree", rec.tree, "Tree file")->required();
  r->add_option("--users", rec.users, "Users file")->required();
  r->add_option("--catalog", rec.catalog, "Node catalog file");
  r->add_option("--engagements", rec.engagements,
                "Build the catalog from these engagements");
  r->add_option("--save-catalog", rec.save_catalog,
                "Write the catalog built from --engagements");
  r->add_option("--connections", rec.connections,
                "Edge list; switches to connection-aware ranking");
  r->add_option("--phi", rec.phi, "Connection segment threshold")
      ->capture_default_str();
  r->add_option("--merge", rec.merge, "Duplicate candidates: max or sum")
      ->check(CLI::IsMember({"max", "sum"}))
      ->capture_default_str();
  r->add_option("--k", rec.k, "List length (default: catalog K)");
  r->add_flag("--blend", rec.blend, "Blend lists of ancestor segments");
  r->add_option("--blend-weights", rec.blend_weights,
                "Per-distance blend weights")
      ->delimiter(',');
  r->add_option("--blend-decay", rec.blend_decay, "Blend weight decay")
      ->capture_default_str();
  r->add_option("--out", rec.out, "Ranked rows; stdout if absent");
  add_schema_options(r, rec.schema);
  add_activity_options(r, rec.activity);

  SynthCommand synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic dataset");
  s->add_option("--spec", synth.spec, "Synthetic config JSON")->required();
  s->add_option("--out-dir", synth.out_dir, "Output directory")->required();
  s->add_option("--seed", synth.seed, "Override the config seed");

  SweepCommand sw;
  auto* w = app.add_subcommand("sweep", "Build and evaluate over mu/omega");
  w->add_option("--users", sw.users, "Users file")->required();
  w->add_option("--engagements", sw.engagements, "Engagements file")
      ->required();
  w->add_option("--report-dir", sw.report_dir, "Report directory")->required();
  w->add_option("--mus", sw.options.mus, "mu values")->delimiter(',');
  w->add_option("--omegas", sw.options.omegas, "omega values")->delimiter(',');
  w->add_option("--k", sw.options.k, "NDCG cutoff")->capture_default_str();
  w->add_option("--relevance", sw.options.relevance, "graded or binary")
      ->transform(CLI::CheckedTransformer(kRelevance, CLI::ignore_case));
  w->add_option("--eval-fraction", sw.options.eval_fraction,
                "Share of marginal users held out for evaluation")
      ->capture_default_str();
  w->add_option("--seed", sw.options.seed, "Evaluation split seed")
      ->capture_default_str();
  w->add_flag("--wall-clock", sw.wall_clock, "Report build time per row");
  add_schema_options(w, sw.schema);
  add_activity_options(w, sw.activity);

  EvalCommand ev;
  auto* e = app.add_subcommand("eval", "Holdout NDCG of a tree");
  e->add_option("--tree", ev.tree, "Tree file")->required();
  e->add_option("--users", ev.users, "Users file")->required();
  e->add_option("--engagements", ev.engagements, "Engagements file")
      ->required();
  e->add_option("--catalog", ev.catalog, "Node catalog (else built here)");
  e->add_option("--k", ev.k, "NDCG cutoff (default: tree K)");
  e->add_option("--one-hot", ev.one_hot, "Also score a one-hot baseline")
      ->delimiter(',');
  e->add_option("--out", ev.out, "Summary JSON; stdout if absent");
  add_schema_options(e, ev.schema);
  add_activity_options(e, ev.activity);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    return app.exit(ex, out, err);
  }

  try {
    if (b->parsed()) {
      run_build(build, workers, out);
    } else if (a->parsed()) {
      run_assign(assign, workers, out, err);
    } else if (r->parsed()) {
      run_recommend(rec, workers, out);
    } else if (s->parsed()) {
      run_synth(synth, out);
    } else if (w->parsed()) {
      run_sweep(sw, workers, out);
    } else if (e->parsed()) {
      run_eval(ev, workers, out);
    }
  } catch (const std::exception& ex) {
    err << "bus: error: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace bus::cli
