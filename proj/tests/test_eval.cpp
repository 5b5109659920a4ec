#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "hasc/data/split.hpp"
#include "hasc/eval/ablation.hpp"
#include "hasc/eval/attention_dump.hpp"
#include "hasc/eval/evaluate.hpp"
#include "hasc/train/gradcheck.hpp"
#include "support.hpp"

using namespace hasc;
using namespace hasc::test;

namespace {

// Ratings 1..k for user k (k = 1..6) over 40 items; no social links.
SplitDataset ladder_split() {
  Vocabulary users, items;
  for (int u = 1; u <= 6; ++u) users.intern("u" + std::to_string(u));
  for (int i = 0; i < 40; ++i) items.intern("i" + std::to_string(i));
  std::vector<Rating> ratings;
  for (Index u = 0; u < 6; ++u) {
    for (Index k = 0; k <= u + 1; ++k) ratings.push_back({u, (u * 5 + k) % 40, k});
  }
  std::vector<Index> creators(40);
  for (Index i = 0; i < 40; ++i) creators[static_cast<std::size_t>(i)] = i % 6;
  InteractionDataset ds(std::move(users), std::move(items), std::move(ratings), {}, std::move(creators));
  return leave_one_out_split(ds, 0.0, 1);
}

}  // namespace

TEST(Metrics, RankMatchesBruteForceWithPessimisticTies) {
  Rng rng(4);
  for (int rep = 0; rep < 500; ++rep) {
    std::vector<Real> c(20);
    for (auto& x : c) x = static_cast<Real>(uniform_index(rng, 5));
    const Real t = static_cast<Real>(uniform_index(rng, 5));
    std::vector<Real> all = c;
    all.push_back(t);
    std::sort(all.begin(), all.end(), std::greater<>());
    // position of the last occurrence of t in descending order
    Index last = 0;
    for (std::size_t k = 0; k < all.size(); ++k) {
      if (all[k] == t) last = static_cast<Index>(k) + 1;
    }
    ASSERT_EQ(rank_of_test_item(t, c), last);
  }
}

TEST(Metrics, HitAndDiscountedGain) {
  EXPECT_EQ(hr_at_k(5, 5), 1.0);
  EXPECT_EQ(hr_at_k(6, 5), 0.0);
  EXPECT_DOUBLE_EQ(ndcg_at_k(1, 5), 1.0);
  EXPECT_DOUBLE_EQ(ndcg_at_k(3, 5), 0.5);
  EXPECT_DOUBLE_EQ(ndcg_at_k(7, 7), 1.0 / 3.0);
  EXPECT_EQ(ndcg_at_k(6, 5), 0.0);
}

TEST(Metrics, UniformScorerHitsChanceRate) {
  Rng rng(9);
  const int n = 10000;
  Real hits = 0.0;
  std::vector<Real> c(100);
  for (int rep = 0; rep < n; ++rep) {
    for (auto& x : c) x = uniform_real(rng);
    hits += hr_at_k(rank_of_test_item(uniform_real(rng), c), 5);
  }
  const Real p = 5.0 / 101.0, sigma = std::sqrt(p * (1 - p) / n);
  EXPECT_LT(std::abs(hits / n - p), 3 * sigma);
}

TEST(Evaluate, PerfectScorerAndConstantScorer) {
  const auto split = ladder_split();
  EvalConfig cfg;
  cfg.candidates = 20;
  cfg.repeats = 3;
  cfg.seed = 10;
  std::map<Index, Index> held;
  for (const auto& p : split.test) held[p.user] = p.item;
  const ScoreFn perfect = [&](Index u, std::span<const Index> items) {
    std::vector<Real> s;
    for (Index i : items) s.push_back(i == held.at(u) ? 1.0 : 0.0);
    return s;
  };
  const auto r = evaluate(perfect, split, split.test, cfg);
  for (const auto& m : r.metrics) {
    EXPECT_EQ(m.hr.mean, 1.0);
    EXPECT_EQ(m.ndcg.mean, 1.0);
    ASSERT_TRUE(m.hr.std.has_value());
    EXPECT_EQ(*m.hr.std, 0.0);
  }
  EXPECT_EQ(r.seeds, (std::vector<std::uint64_t>{10, 11, 12}));

  const ScoreFn flat = [](Index, std::span<const Index> items) { return std::vector<Real>(items.size(), 0.0); };
  EXPECT_EQ(evaluate(flat, split, split.test, cfg).at(10).hr.mean, 0.0);
}

TEST(Evaluate, CandidatesAreUnseenAndOrderIndependent) {
  const auto split = ladder_split();
  EvalConfig cfg;
  cfg.candidates = 25;
  cfg.repeats = 2;
  std::map<std::pair<Index, Index>, std::vector<Index>> drawn;
  Index call = 0;
  const ScoreFn spy = [&](Index u, std::span<const Index> items) {
    drawn[{u, call++ / static_cast<Index>(split.test.size())}] = {items.begin() + 1, items.end()};
    return std::vector<Real>(items.size(), 0.0);
  };
  evaluate(spy, split, split.test, cfg);
  for (const auto& [key, items] : drawn) {
    EXPECT_EQ(items.size(), 25u);
    EXPECT_EQ(std::set<Index>(items.begin(), items.end()).size(), 25u);
    for (Index i : items) {
      EXPECT_FALSE(split.train.has_rating(key.first, i));
      for (const auto& p : split.test) EXPECT_FALSE(p.user == key.first && p.item == i);
    }
  }
  // reversing the user order leaves each user's draw unchanged
  std::vector<UserItem> reversed(split.test.rbegin(), split.test.rend());
  std::map<Index, std::vector<Index>> first, second;
  const auto capture = [](std::map<Index, std::vector<Index>>& into) {
    return ScoreFn([&into](Index u, std::span<const Index> items) {
      if (!into.count(u)) into[u] = {items.begin(), items.end()};
      return std::vector<Real>(items.size(), 0.0);
    });
  };
  cfg.repeats = 1;
  evaluate(capture(first), split, split.test, cfg);
  evaluate(capture(second), split, reversed, cfg);
  EXPECT_EQ(first, second);
}

TEST(Evaluate, SingleRepeatOmitsStd) {
  const auto split = ladder_split();
  EvalConfig cfg;
  cfg.candidates = 10;
  cfg.repeats = 1;
  const ScoreFn flat = [](Index, std::span<const Index> items) { return std::vector<Real>(items.size(), 0.0); };
  const auto r = evaluate(flat, split, split.test, cfg);
  EXPECT_FALSE(r.at(5).hr.std.has_value());
  const auto j = to_json(r);
  EXPECT_FALSE(j["metrics"][0]["hr"].contains("std"));
  EXPECT_THROW(r.at(11), Error);
}

TEST(Evaluate, SparsityBinsAreHalfOpen) {
  const auto split = ladder_split();
  EvalConfig cfg;
  cfg.candidates = 10;
  cfg.repeats = 1;
  cfg.ks = {5};
  const ScoreFn flat = [](Index, std::span<const Index> items) { return std::vector<Real>(items.size(), 0.0); };
  const std::vector<Index> edges = {1, 3, 5};
  const auto r = evaluate(flat, split, split.test, cfg, edges);
  ASSERT_EQ(r.bins.size(), 3u);
  // train counts are 1..6: [1,3) -> 2 users, [3,5) -> 2, [5,inf) -> 2
  EXPECT_EQ(r.bins[0].users, 2);
  EXPECT_EQ(r.bins[1].users, 2);
  EXPECT_EQ(r.bins[2].users, 2);
  EXPECT_EQ(r.bins[1].upper, 5);
  EXPECT_FALSE(r.bins[2].upper.has_value());
  EXPECT_NEAR(r.bins[0].share + r.bins[1].share + r.bins[2].share, 1.0, 1e-15);
  const std::vector<Index> bad = {3, 3};
  EXPECT_THROW(evaluate(flat, split, split.test, cfg, bad), Error);
}

TEST(Ablation, GridShapeAndLabels) {
  const auto grid = ablation_grid();
  ASSERT_EQ(grid.size(), 1u + 7u + 4u + 7u);
  EXPECT_EQ(grid.front().label, "BPR");
  EXPECT_EQ(attention_rows().front().label, "AVG/AVG");
  EXPECT_EQ(attention_rows().back().label, "ATT/ATT");
  std::vector<std::string> aspects;
  for (const auto& r : aspect_rows()) aspects.push_back(r.label);
  EXPECT_EQ(aspects, (std::vector<std::string>{"U", "S", "C", "U+S+C"}));
  EXPECT_EQ(input_rows().front().label, "base");
  EXPECT_EQ(input_rows().back().label, "base+aux+soc+vis_cs");
  EXPECT_EQ(ablation_grid(false, true, false).size(), 5u);
}

TEST(Ablation, GainFormatting) {
  EXPECT_EQ(format_gain(0.0), "0.00%");
  EXPECT_EQ(format_gain(-0.00001), "0.00%");
  EXPECT_EQ(format_gain(0.1234), "+12.34%");
  EXPECT_EQ(format_gain(-0.5), "-50.00%");
  EXPECT_DOUBLE_EQ(relative_improvement(0.3, 0.2), 0.5);
  EXPECT_EQ(relative_improvement(0.0, 0.0), 0.0);
  AblationResult base;
  base.row = baseline_row();
  base.hr5 = 0.25;
  const auto table = ablation_table({base});
  EXPECT_NE(table.find("BPR"), std::string::npos);
  EXPECT_NE(table.find(" 0.00%"), std::string::npos);
}

TEST(AttentionDump, MeansAndDominantAspect) {
  const auto t = make_tiny_instance(TinySpec{}, 13);
  const Scorer s(t.params, t.graph, t.bundle, AttentionMode{});
  std::vector<UserItem> pairs;
  for (Index a = 0; a < t.graph.num_users(); ++a) {
    for (Index i : t.graph.rated_items(a)) pairs.push_back({a, i});
  }
  const auto dump = export_attention(s, pairs);
  EXPECT_EQ(dump.omitted, 0);
  for (const auto& u : dump.users) {
    Real sum = 0.0, hi = 0.0;
    for (Real g : u.gamma) {
      sum += g;
      hi = std::max(hi, g);
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    EXPECT_EQ(u.gamma[static_cast<std::size_t>(u.dominant)], hi);
  }
  AttentionMode none;
  none.aspects = parse_aspects("none");
  const Scorer mf(t.params, t.graph, t.bundle, none);
  const auto empty = export_attention(mf, pairs);
  EXPECT_TRUE(empty.users.empty());
  EXPECT_EQ(empty.omitted, t.graph.num_users());

  TempDir dir;
  write_attention_tsv(dump, t.graph.users(), dir / "a.tsv");
  const auto text = read_file(dir / "a.tsv");
  EXPECT_EQ(text.rfind("user_id\tgamma_upload", 0), 0u);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), static_cast<long>(dump.users.size() + 1));
}
