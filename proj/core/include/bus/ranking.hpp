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

#ifndef BUS_RANKING_HPP_
#define BUS_RANKING_HPP_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bus/dataset.hpp"

namespace bus {

struct RankedEntry {
  ItemIndex item;
  double score;

  friend bool operator==(const RankedEntry&, const RankedEntry&) = default;
};

// Top-K items by popularity, score non-increasing, ties by ascending item.
using RankedList = std::vector<RankedEntry>;

// Checks the RankedList ordering and distinctness invariants.
bool is_ranked_list(const RankedList& list);

enum class Relevance { kGraded, kBinary };

std::string_view relevance_name(Relevance r);
Relevance parse_relevance(std::string_view text);

__extension__ using Int128 = __int128;
__extension__ using UInt128 = unsigned __int128;

// Sum of per-user NDCG values in 2^-60 fixed point. Addition is exact and
// associative, so totals do not depend on grouping or thread schedule.
class Reward {
 public:
  static constexpr int kFractionBits = 60;

  constexpr Reward() = default;
  // `score` must lie in [0, 1].
  static Reward FromScore(double score);
  static constexpr Reward FromTicks(Int128 ticks) {
    Reward r;
    r.ticks_ = ticks;
    return r;
  }
  // Inverse of to_string(); throws FormatError.
  static Reward Parse(std::string_view text);

  constexpr Int128 ticks() const { return ticks_; }
  double value() const;
  // Exact decimal rendering of the tick count.
  std::string to_string() const;

  Reward& operator+=(Reward other) {
    ticks_ += other.ticks_;
    return *this;
  }
  friend Reward operator+(Reward a, Reward b) { return a += b; }
  friend Reward operator-(Reward a, Reward b) {
    return FromTicks(a.ticks_ - b.ticks_);
  }
  friend constexpr auto operator<=>(const Reward&, const Reward&) = default;

 private:
  Int128 ticks_ = 0;
};

// Dense per-item score accumulator for aggregating engagement rows.
class ItemAccumulator {
 public:
  explicit ItemAccumulator(std::size_t num_items);

  void add(std::span<const Engagement> rows);
  // Items with a positive total, ranked, truncated to k.
  RankedList top_k(std::size_t k) const;
  double score(ItemIndex item) const { return scores_[item]; }
  void clear();

 private:
  std::vector<double> scores_;
  std::vector<std::uint8_t> touched_flag_;
  std::vector<ItemIndex> touched_;
};

// Items ranked by summed training-window score over `users`. Users are
// visited in ascending index order regardless of the order given.
RankedList top_k_behaviors(std::span<const UserIndex> users,
                           const EngagementTable& engagements, std::size_t k);

// log2(rank + 2) for 0-based rank.
double rank_discount(std::size_t rank);

// DCG of `actual` in its ideal order, truncated to k.
double ideal_dcg(std::span<const Engagement> actual, std::size_t k,
                 Relevance relevance = Relevance::kGraded);

// NDCG@k of `predicted` against one user's engagement rows (sorted by item).
// Unmatched predictions have zero relevance. Returns 0 when IDCG is 0.
double ndcg_at_k(const RankedList& predicted,
                 std::span<const Engagement> actual, std::size_t k,
                 Relevance relevance = Relevance::kGraded);

struct RewardReport {
  std::string segment;
  // Sum of per-user NDCG in ascending user order.
  double total_reward = 0;
  Reward exact;
  // (user, NDCG) in ascending user order, when requested.
  std::vector<std::pair<UserIndex, double>> per_user;
};

// Sum of holdout NDCG@k of `marginal_users` against `predicted`.
RewardReport segment_reward(const RankedList& predicted,
                            std::span<const UserIndex> marginal_users,
                            const EngagementTable& engagements, std::size_t k,
                            Relevance relevance = Relevance::kGraded,
                            bool keep_per_user = false);

// Fast NDCG evaluation of many users against one prediction. Precomputes
// IDCG for every scored marginal user; unscored users always get 0. Produces
// bit-identical values to ndcg_at_k.
class NdcgScorer {
 public:
  NdcgScorer(const EngagementTable& engagements,
             const UserClassification& classification, std::size_t k,
             Relevance relevance);

  std::size_t k() const { return k_; }
  Relevance relevance() const { return relevance_; }

  // Per-thread scratch holding item positions of the bound prediction.
  class Session {
   public:
    explicit Session(const NdcgScorer& scorer);
    void bind(const RankedList& predicted);
    void unbind();
    double ndcg(UserIndex u);
    Reward reward(UserIndex u) { return Reward::FromScore(ndcg(u)); }

   private:
    const NdcgScorer& scorer_;
    std::vector<std::int32_t> position_;
    const RankedList* bound_ = nullptr;
    std::vector<std::pair<std::int32_t, double>> hits_;
  };

 private:
  const EngagementTable& engagements_;
  std::size_t k_;
  Relevance relevance_;
  std::vector<double> ideal_;
};

}  // namespace bus

#endif  // BUS_RANKING_HPP_
