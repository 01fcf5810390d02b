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

#ifndef BUS_EVALBENCH_HPP_
#define BUS_EVALBENCH_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bus/builder.hpp"
#include "bus/dataset.hpp"
#include "bus/ranking.hpp"
#include "bus/retrieval.hpp"
#include "bus/social.hpp"
#include "bus/tree.hpp"

namespace bus {

struct SynthAttribute {
  std::string name;
  std::size_t cardinality = 2;
  std::vector<std::string> prerequisites;
  // Value v is drawn with weight 1 / (v + 1)^skew.
  double skew = 0.0;
};

struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t users = 10000;
  std::size_t items = 1000;
  std::vector<SynthAttribute> attributes;
  // Attributes whose value combination selects a user's planted segment.
  std::vector<std::string> governing;
  // Each planted segment owns this many items; rows drawn from the segment
  // favour its first items (weight 1 / (rank + 1)).
  std::size_t items_per_segment = 5;
  // Probability that a row comes from the segment's items rather than the
  // global popularity distribution.
  double concentration = 0.8;
  double active_fraction = 0.3;
  double marginal_fraction = 0.5;
  std::size_t training_rows = 10;
  std::size_t holdout_rows = 5;
  // Probability that a generated edge stays inside the planted segment.
  double homophily = 0.8;
  std::size_t edges_per_user = 0;
  // Probability that a non-governing attribute is missing (NULL).
  double missing_fraction = 0.0;

  static SynthConfig FromJsonText(const std::string& text);
  static SynthConfig FromJsonFile(const std::string& path);
  std::string ToJsonText() const;
};

// Throws ConfigError for infeasible or malformed configs.
void validate(const SynthConfig& config);

struct SyntheticDataset {
  UserTable users;
  EngagementTable engagements;
  SocialGraph graph;
  // Planted segment index of each user.
  std::vector<std::uint32_t> planted;
  std::size_t planted_segments = 0;
};

// Deterministic in config.seed.
SyntheticDataset generate_synthetic(const SynthConfig& config);

struct BaselineResult {
  Reward reward;
  std::size_t segments = 0;
};

// One segment per combination of `subset` values present in the data.
BaselineResult one_hot_baseline(std::span<const std::string> subset,
                                const UserTable& users,
                                const EngagementTable& engagements,
                                const UserClassification& classification,
                                std::size_t k,
                                Relevance relevance = Relevance::kGraded);

// Powers-of-ten population buckets: "0", "1-9", "10-99", ...
std::string size_bucket(std::uint64_t size);

struct BucketStat {
  std::string bucket;
  std::size_t users = 0;
  double sum = 0;
  double mean = 0;
};

struct HoldoutSummary {
  std::size_t users = 0;
  double sum = 0;
  double mean = 0;
  // By population (active + marginal) of the user's leaf, ascending bucket.
  std::vector<BucketStat> by_size;
};

// Holdout NDCG@k of `eval_users` against the P1 list of the leaf each is
// routed to (read-only). Users are summed in ascending index order.
HoldoutSummary holdout_eval(const BusTree& tree, const NodeCatalog& catalog,
                            const UserTable& users,
                            const EngagementTable& engagements,
                            std::span<const UserIndex> eval_users,
                            std::size_t k,
                            Relevance relevance = Relevance::kGraded);

// Scored marginal users whose id hashes below `fraction`.
std::vector<UserIndex> select_eval_users(const UserTable& users,
                                         const UserClassification& cls,
                                         double fraction, std::uint64_t seed);

struct SweepOptions {
  std::vector<std::size_t> mus{10, 50, 250, 1000};
  std::vector<double> omegas{1.0};
  std::size_t k = 100;
  Relevance relevance = Relevance::kGraded;
  ActivityRule rule;
  // Share of scored marginal users whose holdout rows are held back from the
  // build and used for holdout_eval.
  double eval_fraction = 0.5;
  std::uint64_t seed = 1;
  unsigned workers = 0;
};

struct EvalRow {
  std::size_t mu = 0;
  double omega = 1.0;
  std::uint64_t seed = 0;
  std::size_t segments = 0;
  std::vector<std::pair<std::string, std::size_t>> size_histogram;
  std::size_t valid_attributes = 0;
  std::vector<std::string> attribute_order;
  // Total reward after each level, root first.
  std::vector<Reward> level_rewards;
  Reward training_reward;
  HoldoutSummary holdout;
  double wall_seconds = 0;
};

struct EvalReport {
  std::size_t k = 0;
  std::vector<EvalRow> rows;
};

// Leaf count and number of attribute types with a non-regress node.
std::size_t leaf_segments(const BusTree& tree);
std::size_t valid_attributes(const BusTree& tree);

// Builds and evaluates one tree per (mu, omega), in that nesting order.
EvalReport sweep(const UserTable& users, const EngagementTable& engagements,
                 const SweepOptions& options);

// Tab-separated, one row per configuration. Wall-clock only on request so
// that reports are otherwise byte-identical across runs.
void write_report_tsv(const EvalReport& report, std::ostream& out,
                      bool wall_clock = false);
// JSON summary.
void write_report_summary(const EvalReport& report, std::ostream& out,
                          bool wall_clock = false);

}  // namespace bus

#endif  // BUS_EVALBENCH_HPP_
