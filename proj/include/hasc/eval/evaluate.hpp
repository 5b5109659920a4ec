#pragma once

// Sampled-candidate top-K protocol: each held-out item is ranked against n
// items the user has not interacted with; HR@K / NDCG@K are averaged over
// users, then mean and std are taken over independent repeats.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "hasc/core.hpp"
#include "hasc/data/sampling.hpp"
#include "hasc/data/split.hpp"
#include "hasc/eval/metrics.hpp"
#include "hasc/model/scorer.hpp"

namespace hasc {

// Scores a list of items for one user.
using ScoreFn = std::function<std::vector<Real>(Index user, std::span<const Index> items)>;

inline ScoreFn score_fn(const Scorer& scorer) {
  return [&scorer](Index user, std::span<const Index> items) { return scorer.score_items(user, items); };
}

struct EvalConfig {
  std::vector<Index> ks = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  Index candidates = 100;
  Index repeats = 10;
  std::uint64_t seed = 0;
};

// ranks[r][k]: rank of pairs[k] in repeat r.
struct RankTable {
  std::vector<UserItem> pairs;
  std::vector<std::vector<Index>> ranks;
  std::vector<std::uint64_t> seeds;
};

// Items each user must never see as a candidate: their test and validation items.
inline std::unordered_map<Index, std::vector<Index>> held_out_items(const SplitDataset& split) {
  std::unordered_map<Index, std::vector<Index>> held;
  for (const auto& p : split.test) held[p.user].push_back(p.item);
  for (const auto& p : split.validation) held[p.user].push_back(p.item);
  return held;
}

// Candidates for (pair, repeat) come from their own stream seeded by
// (seed + repeat, user), so results do not depend on evaluation order.
inline RankTable rank_held_out(const ScoreFn& score, const SplitDataset& split, std::span<const UserItem> pairs,
                               const EvalConfig& cfg) {
  const auto held = held_out_items(split);
  RankTable table;
  table.pairs.assign(pairs.begin(), pairs.end());
  std::vector<Index> items;
  for (Index r = 0; r < cfg.repeats; ++r) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(r);
    table.seeds.push_back(seed);
    std::vector<Index> ranks;
    ranks.reserve(pairs.size());
    for (const auto& p : pairs) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(p.user)));
      auto it = held.find(p.user);
      std::span<const Index> exclude;
      if (it != held.end()) exclude = it->second;
      const auto candidates = sample_eval_candidates(split.train, p.user, cfg.candidates, rng, exclude);
      items.clear();
      items.push_back(p.item);
      items.insert(items.end(), candidates.begin(), candidates.end());
      const auto scores = score(p.user, items);
      ranks.push_back(rank_of_test_item(scores[0], std::span<const Real>(scores).subspan(1)));
    }
    table.ranks.push_back(std::move(ranks));
  }
  return table;
}

struct MetricSummary {
  Real mean = 0.0;
  std::optional<Real> std;  // absent with a single repeat
};

struct MetricsAtK {
  Index k = 0;
  MetricSummary hr;
  MetricSummary ndcg;
};

struct BinReport {
  Index lower = 0;
  std::optional<Index> upper;  // exclusive; absent for the last bin
  Index users = 0;
  Real share = 0.0;
  std::vector<MetricsAtK> metrics;
};

struct EvalReport {
  std::vector<MetricsAtK> metrics;
  Index users = 0;
  Index repeats = 0;
  Index candidates = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<BinReport> bins;

  const MetricsAtK& at(Index k) const {
    for (const auto& m : metrics) {
      if (m.k == k) return m;
    }
    throw Error("no metrics for K=" + std::to_string(k));
  }
};

namespace detail {

inline MetricSummary summarize(const std::vector<Real>& per_repeat) {
  MetricSummary s;
  if (per_repeat.empty()) return s;
  Real sum = 0.0;
  for (Real v : per_repeat) sum += v;
  s.mean = sum / static_cast<Real>(per_repeat.size());
  if (per_repeat.size() > 1) {
    Real ss = 0.0;
    for (Real v : per_repeat) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<Real>(per_repeat.size() - 1));
  }
  return s;
}

// Metrics over the pair indices in `subset`.
inline std::vector<MetricsAtK> metrics_for(const RankTable& table, std::span<const Index> ks,
                                           std::span<const std::size_t> subset) {
  std::vector<MetricsAtK> out;
  for (Index k : ks) {
    std::vector<Real> hr, ndcg;
    for (const auto& ranks : table.ranks) {
      Real h = 0.0, n = 0.0;
      for (std::size_t idx : subset) {
        h += hr_at_k(ranks[idx], k);
        n += ndcg_at_k(ranks[idx], k);
      }
      const Real denom = subset.empty() ? 1.0 : static_cast<Real>(subset.size());
      hr.push_back(h / denom);
      ndcg.push_back(n / denom);
    }
    out.push_back({k, summarize(hr), summarize(ndcg)});
  }
  return out;
}

}  // namespace detail

inline EvalReport summarize(const RankTable& table, std::span<const Index> ks, Index candidates) {
  for (Index k : ks) {
    if (k < 1) throw Error("K must be >= 1");
  }
  EvalReport report;
  report.users = static_cast<Index>(table.pairs.size());
  report.repeats = static_cast<Index>(table.ranks.size());
  report.candidates = candidates;
  report.seeds = table.seeds;
  std::vector<std::size_t> all(table.pairs.size());
  for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
  report.metrics = detail::metrics_for(table, ks, all);
  return report;
}

// Splits evaluated users by their number of training ratings. With edges
// e_0 < e_1 < ... < e_n the bins are [e_0, e_1), ..., [e_n, inf); users below
// e_0 fall into the first bin.
inline std::vector<BinReport> sparsity_bins(const RankTable& table, const InteractionDataset& train,
                                            std::span<const Index> ks, std::span<const Index> edges) {
  if (edges.empty()) throw Error("sparsity bins need at least one edge");
  for (std::size_t k = 1; k < edges.size(); ++k) {
    if (edges[k] <= edges[k - 1]) throw Error("sparsity bin edges must be strictly increasing");
  }
  std::vector<std::vector<std::size_t>> members(edges.size());
  for (std::size_t idx = 0; idx < table.pairs.size(); ++idx) {
    const auto count = static_cast<Index>(train.rated_items(table.pairs[idx].user).size());
    std::size_t bin = 0;
    while (bin + 1 < edges.size() && count >= edges[bin + 1]) ++bin;
    members[bin].push_back(idx);
  }
  std::vector<BinReport> bins;
  for (std::size_t b = 0; b < edges.size(); ++b) {
    BinReport r;
    r.lower = edges[b];
    if (b + 1 < edges.size()) r.upper = edges[b + 1];
    r.users = static_cast<Index>(members[b].size());
    r.share = table.pairs.empty() ? 0.0
                                  : static_cast<Real>(r.users) / static_cast<Real>(table.pairs.size());
    r.metrics = detail::metrics_for(table, ks, members[b]);
    bins.push_back(std::move(r));
  }
  return bins;
}

inline EvalReport evaluate(const ScoreFn& score, const SplitDataset& split, std::span<const UserItem> pairs,
                           const EvalConfig& cfg, std::span<const Index> bin_edges = {}) {
  const auto table = rank_held_out(score, split, pairs, cfg);
  auto report = summarize(table, cfg.ks, cfg.candidates);
  if (!bin_edges.empty()) report.bins = sparsity_bins(table, split.train, cfg.ks, bin_edges);
  return report;
}

inline EvalReport evaluate(const Scorer& scorer, const SplitDataset& split, const EvalConfig& cfg,
                           std::span<const Index> bin_edges = {}) {
  return evaluate(score_fn(scorer), split, split.test, cfg, bin_edges);
}

inline nlohmann::ordered_json to_json(const MetricSummary& s) {
  nlohmann::ordered_json j;
  j["mean"] = s.mean;
  if (s.std) j["std"] = *s.std;
  return j;
}

inline nlohmann::ordered_json to_json(const std::vector<MetricsAtK>& metrics) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& m : metrics) {
    arr.push_back({{"k", m.k}, {"hr", to_json(m.hr)}, {"ndcg", to_json(m.ndcg)}});
  }
  return arr;
}

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["users"] = r.users;
  j["repeats"] = r.repeats;
  j["candidates"] = r.candidates;
  j["seeds"] = r.seeds;
  j["metrics"] = to_json(r.metrics);
  if (!r.bins.empty()) {
    auto bins = nlohmann::ordered_json::array();
    for (const auto& b : r.bins) {
      nlohmann::ordered_json jb;
      jb["lower"] = b.lower;
      jb["upper"] = b.upper ? nlohmann::ordered_json(*b.upper) : nlohmann::ordered_json(nullptr);
      jb["users"] = b.users;
      jb["share"] = b.share;
      jb["metrics"] = to_json(b.metrics);
      bins.push_back(std::move(jb));
    }
    j["bins"] = std::move(bins);
  }
  return j;
}

}  // namespace hasc
