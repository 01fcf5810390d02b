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

#include "bus/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "bus/error.hpp"

namespace bus {
namespace {

bool ranks_before(const RankedEntry& a, const RankedEntry& b) {
  return a.score != b.score ? a.score > b.score : a.item < b.item;
}

double relevance_of(double score, Relevance relevance) {
  if (relevance == Relevance::kBinary) return score > 0 ? 1.0 : 0.0;
  return score;
}

double clamp_ratio(double dcg, double idcg) {
  if (idcg <= 0) return 0.0;
  return std::min(1.0, dcg / idcg);
}

}  // namespace

bool is_ranked_list(const RankedList& list) {
  std::unordered_set<ItemIndex> seen;
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (!(list[i].score >= 0)) return false;
    if (!seen.insert(list[i].item).second) return false;
    if (i > 0 && !ranks_before(list[i - 1], list[i])) return false;
  }
  return true;
}

std::string_view relevance_name(Relevance r) {
  return r == Relevance::kGraded ? "graded" : "binary";
}

Relevance parse_relevance(std::string_view text) {
  if (text == "graded") return Relevance::kGraded;
  if (text == "binary") return Relevance::kBinary;
  throw ConfigError("relevance must be 'graded' or 'binary', got '" +
                    std::string(text) + "'");
}

Reward Reward::FromScore(double score) {
  return FromTicks(static_cast<Int128>(
      std::llround(std::ldexp(score, kFractionBits))));
}

double Reward::value() const {
  return static_cast<double>(std::ldexp(static_cast<long double>(ticks_),
                                        -kFractionBits));
}

std::string Reward::to_string() const {
  if (ticks_ == 0) return "0";
  const bool negative = ticks_ < 0;
  UInt128 v = negative ? static_cast<UInt128>(-ticks_)
                                 : static_cast<UInt128>(ticks_);
  std::string digits;
  while (v > 0) {
    digits.push_back(static_cast<char>('0' + static_cast<int>(v % 10)));
    v /= 10;
  }
  if (negative) digits.push_back('-');
  std::reverse(digits.begin(), digits.end());
  return digits;
}

Reward Reward::Parse(std::string_view text) {
  if (text.empty()) throw FormatError("empty reward value");
  bool negative = false;
  std::size_t i = 0;
  if (text[0] == '-') {
    negative = true;
    i = 1;
  }
  if (i == text.size() || text.size() - i > 38) {
    throw FormatError("bad reward value '" + std::string(text) + "'");
  }
  Int128 v = 0;
  for (; i < text.size(); ++i) {
    if (text[i] < '0' || text[i] > '9') {
      throw FormatError("bad reward value '" + std::string(text) + "'");
    }
    v = v * 10 + (text[i] - '0');
  }
  return FromTicks(negative ? -v : v);
}

ItemAccumulator::ItemAccumulator(std::size_t num_items)
    : scores_(num_items, 0.0), touched_flag_(num_items, 0) {}

void ItemAccumulator::add(std::span<const Engagement> rows) {
  for (const auto& e : rows) {
    if (!touched_flag_[e.item]) {
      touched_flag_[e.item] = 1;
      touched_.push_back(e.item);
    }
    scores_[e.item] += e.score;
  }
}

RankedList ItemAccumulator::top_k(std::size_t k) const {
  RankedList all;
  all.reserve(touched_.size());
  for (ItemIndex item : touched_) {
    if (scores_[item] > 0) all.push_back({item, scores_[item]});
  }
  if (all.size() > k) {
    std::nth_element(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k),
                     all.end(), ranks_before);
    all.resize(k);
  }
  std::sort(all.begin(), all.end(), ranks_before);
  return all;
}

void ItemAccumulator::clear() {
  for (ItemIndex item : touched_) {
    scores_[item] = 0.0;
    touched_flag_[item] = 0;
  }
  touched_.clear();
}

RankedList top_k_behaviors(std::span<const UserIndex> users,
                           const EngagementTable& engagements, std::size_t k) {
  if (k == 0) throw ConfigError("K must be at least 1");
  std::vector<UserIndex> sorted(users.begin(), users.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  ItemAccumulator acc(engagements.num_items());
  for (UserIndex u : sorted) acc.add(engagements.training(u));
  return acc.top_k(k);
}

double rank_discount(std::size_t rank) {
  return std::log2(static_cast<double>(rank) + 2.0);
}

double ideal_dcg(std::span<const Engagement> actual, std::size_t k,
                 Relevance relevance) {
  std::vector<double> rel;
  rel.reserve(actual.size());
  for (const auto& e : actual) rel.push_back(relevance_of(e.score, relevance));
  std::sort(rel.begin(), rel.end(), std::greater<>());
  double idcg = 0;
  const std::size_t n = std::min(k, rel.size());
  for (std::size_t i = 0; i < n; ++i) idcg += rel[i] / rank_discount(i);
  return idcg;
}

double ndcg_at_k(const RankedList& predicted,
                 std::span<const Engagement> actual, std::size_t k,
                 Relevance relevance) {
  const double idcg = ideal_dcg(actual, k, relevance);
  if (idcg <= 0) return 0.0;
  double dcg = 0;
  const std::size_t n = std::min(k, predicted.size());
  for (std::size_t i = 0; i < n; ++i) {
    auto it = std::lower_bound(
        actual.begin(), actual.end(), predicted[i].item,
        [](const Engagement& e, ItemIndex item) { return e.item < item; });
    if (it != actual.end() && it->item == predicted[i].item) {
      dcg += relevance_of(it->score, relevance) / rank_discount(i);
    }
  }
  return clamp_ratio(dcg, idcg);
}

RewardReport segment_reward(const RankedList& predicted,
                            std::span<const UserIndex> marginal_users,
                            const EngagementTable& engagements, std::size_t k,
                            Relevance relevance, bool keep_per_user) {
  std::vector<UserIndex> users(marginal_users.begin(), marginal_users.end());
  std::sort(users.begin(), users.end());
  RewardReport report;
  for (UserIndex u : users) {
    const double score = ndcg_at_k(predicted, engagements.holdout(u), k,
                                   relevance);
    report.total_reward += score;
    report.exact += Reward::FromScore(score);
    if (keep_per_user) report.per_user.emplace_back(u, score);
  }
  return report;
}

NdcgScorer::NdcgScorer(const EngagementTable& engagements,
                       const UserClassification& classification,
                       std::size_t k, Relevance relevance)
    : engagements_(engagements),
      k_(k),
      relevance_(relevance),
      ideal_(engagements.num_users(), 0.0) {
  if (k == 0) throw ConfigError("K must be at least 1");
  if (classification.size() != engagements.num_users()) {
    throw DataError("classification does not match the engagement table");
  }
  for (UserIndex u : classification.marginal()) {
    if (classification.is_scored(u)) {
      ideal_[u] = ideal_dcg(engagements.holdout(u), k, relevance);
    }
  }
}

NdcgScorer::Session::Session(const NdcgScorer& scorer)
    : scorer_(scorer), position_(scorer.engagements_.num_items(), -1) {}

void NdcgScorer::Session::bind(const RankedList& predicted) {
  unbind();
  const std::size_t n = std::min(scorer_.k_, predicted.size());
  for (std::size_t i = 0; i < n; ++i) {
    position_[predicted[i].item] = static_cast<std::int32_t>(i);
  }
  bound_ = &predicted;
}

void NdcgScorer::Session::unbind() {
  if (bound_ == nullptr) return;
  const std::size_t n = std::min(scorer_.k_, bound_->size());
  for (std::size_t i = 0; i < n; ++i) position_[(*bound_)[i].item] = -1;
  bound_ = nullptr;
}

double NdcgScorer::Session::ndcg(UserIndex u) {
  const double idcg = scorer_.ideal_[u];
  if (idcg <= 0 || bound_ == nullptr) return 0.0;
  hits_.clear();
  for (const auto& e : scorer_.engagements_.holdout(u)) {
    const std::int32_t pos = position_[e.item];
    if (pos >= 0) hits_.emplace_back(pos, relevance_of(e.score, scorer_.relevance_));
  }
  // Sum in rank order, exactly as ndcg_at_k does.
  std::sort(hits_.begin(), hits_.end());
  double dcg = 0;
  for (const auto& [pos, rel] : hits_) {
    dcg += rel / rank_discount(static_cast<std::size_t>(pos));
  }
  return clamp_ratio(dcg, idcg);
}

}  // namespace bus
