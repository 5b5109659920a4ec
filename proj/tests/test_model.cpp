#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "hasc/model/checkpoint.hpp"
#include "hasc/model/mode.hpp"
#include "hasc/model/params.hpp"
#include "hasc/model/scorer.hpp"
#include "hasc/train/gradcheck.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace hasc;
using namespace hasc::test;

TEST(Mode, ParsePoolingAspectsInputs) {
  AttentionMode m;
  parse_pooling_pair("att,max", m);
  EXPECT_EQ(m.bottom, Pooling::att);
  EXPECT_EQ(m.top, Pooling::max);
  EXPECT_THROW(parse_pooling_pair("att", m), Error);
  EXPECT_THROW(parse_pooling_pair("att,sum", m), Error);
  EXPECT_EQ(parse_aspects("u+c"), (std::array<bool, 3>{true, false, true}));
  EXPECT_EQ(parse_aspects("none"), (std::array<bool, 3>{false, false, false}));
  EXPECT_THROW(parse_aspects("u+x"), Error);
  const auto in = parse_inputs("base+aux+vis_cs");
  EXPECT_TRUE(in.aux && in.content && in.style && !in.social);
  EXPECT_THROW(parse_inputs("aux"), Error);
  EXPECT_EQ(inputs_label(parse_inputs("base+soc+vis_s")), "base+soc+vis_s");
  EXPECT_EQ(aspects_label(parse_aspects("all")), "U+S+C");
}

TEST(Mode, JsonRoundTrip) {
  AttentionMode m;
  parse_pooling_pair("max,avg", m);
  m.aspects = parse_aspects("s+c");
  m.inputs = parse_inputs("base+vis_c");
  m.creator_input_is_user = true;
  EXPECT_EQ(attention_mode_from_json(nlohmann::json::parse(to_json(m).dump())), m);
}

TEST(Params, InputSizes) {
  ModelDims d;
  d.latent = 4;
  d.social_dim = 6;
  EXPECT_EQ(d.upload_input(), 8 * 4 + 6);
  EXPECT_EQ(d.social_input(), 6 * 4 + 12);
  const auto p = zeros_like(d);
  EXPECT_EQ(p.upload.weight.rows(), d.hidden);
  EXPECT_EQ(p.upload.weight.cols(), d.upload_input());
  EXPECT_EQ(p.aspect.weight.cols(), 4);
}

TEST(Params, InitIsSeededAndWarmStartOverrides) {
  ModelDims d;
  d.num_users = 3;
  d.num_items = 4;
  d.latent = 2;
  d.social_dim = d.content_dim = d.style_dim = 3;
  const auto a = init_params(d, 5), b = init_params(d, 5);
  EXPECT_EQ(a.user_base, b.user_base);
  EXPECT_NE(init_params(d, 6).user_base, a.user_base);
  WarmStart w{Matrix::Ones(3, 2), Matrix::Constant(4, 2, 2.0)};
  const auto c = init_params(d, 5, w);
  EXPECT_EQ(c.user_base, w.user_base);
  EXPECT_EQ(c.item_aux, a.item_aux);
  w.user_base = Matrix::Ones(2, 2);
  EXPECT_THROW(init_params(d, 5, w), Error);
}

TEST(Pooling, WeightsSumToOneAndShiftInvariant) {
  Rng rng(1);
  for (int rep = 0; rep < 1000; ++rep) {
    const auto n = static_cast<std::size_t>(1 + uniform_index(rng, 8));
    std::vector<AttentionUnit> units(n), shifted(n), scaled(n);
    const Real shift = 50.0 * standard_normal(rng), scale = std::exp(standard_normal(rng));
    for (std::size_t k = 0; k < n; ++k) {
      units[k].raw = 3.0 * standard_normal(rng);
      shifted[k].raw = units[k].raw + shift;
      scaled[k].raw = units[k].raw * scale;
    }
    for (Pooling how : {Pooling::att, Pooling::avg, Pooling::max}) {
      pool_weights(units, how);
      pool_weights(shifted, how);
      Real total = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        total += units[k].weight;
        EXPECT_LT(std::abs(units[k].weight - shifted[k].weight), 1e-10);
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
    pool_weights(units, Pooling::max);
    pool_weights(scaled, Pooling::max);
    for (std::size_t k = 0; k < n; ++k) EXPECT_EQ(units[k].weight, scaled[k].weight);
  }
}

TEST(Pooling, MaxPicksFirstOfTies) {
  std::vector<AttentionUnit> u(3);
  u[0].raw = 1.0;
  u[1].raw = 2.0;
  u[2].raw = 2.0;
  pool_weights(u, Pooling::max);
  EXPECT_EQ(u[1].weight, 1.0);
  EXPECT_EQ(u[2].weight, 0.0);
}

TEST(Scorer, MatchesOracleInEveryMode) {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const auto t = make_tiny_instance(TinySpec{}, seed);
    for (const char* pair : kPoolingPairs) {
      auto m = mode_of(pair);
      m.creator_input_is_user = seed % 5 == 0;
      if (seed % 3 == 1) m.inputs = parse_inputs("base+aux+vis_c");
      if (seed % 7 == 2) m.aspects = parse_aspects("u+s");
      const Scorer s(t.params, t.graph, t.bundle, m);
      const Oracle o{t.params, t.graph, t.bundle, m};
      for (Index a = 0; a < t.graph.num_users(); ++a) {
        for (Index i = 0; i < t.graph.num_items(); ++i) ASSERT_LT(rel_diff(s.predict(a, i), o.score(a, i)), 1e-12);
      }
    }
  }
}

TEST(Scorer, AttentionWeightsNormalizedOverSupport) {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto t = make_tiny_instance(TinySpec{}, seed);
    const Scorer s(t.params, t.graph, t.bundle, mode_of("att,att"));
    AttentionTrace tr;
    const Index a = static_cast<Index>(seed % 8), i = static_cast<Index>(seed % 12);
    s.predict(a, i, tr);
    const auto sum = [](const std::vector<AttentionUnit>& u) {
      Real total = 0.0;
      for (const auto& x : u) total += x.weight;
      return total;
    };
    if (!tr.uploads.empty()) ASSERT_NEAR(sum(tr.uploads), 1.0, 1e-12);
    if (!tr.followees.empty()) ASSERT_NEAR(sum(tr.followees), 1.0, 1e-12);
    ASSERT_FALSE(tr.aspects.empty());
    ASSERT_NEAR(sum(tr.aspects), 1.0, 1e-12);
  }
}

TEST(Scorer, AvgAvgIsEnhancedSvdpp) {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto t = make_tiny_instance(TinySpec{}, seed);
    const Scorer s(t.params, t.graph, t.bundle, mode_of("avg,avg"));
    const Index a = static_cast<Index>(seed % 8);
    for (Index i = 0; i < t.graph.num_items(); ++i) {
      ASSERT_LT(rel_diff(s.predict(a, i), svdpp_oracle(t.params, t.graph, a, i)), 1e-10);
    }
  }
}

TEST(Scorer, AllAspectsMaskedIsMatrixFactorization) {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto t = make_tiny_instance(TinySpec{}, seed);
    auto m = mode_of(kPoolingPairs[seed % 7]);
    m.aspects = parse_aspects("none");
    const Scorer s(t.params, t.graph, t.bundle, m);
    const Index a = static_cast<Index>(seed % 8), i = static_cast<Index>(seed % 12);
    ASSERT_LT(rel_diff(s.predict(a, i), t.params.user_base.row(a).dot(t.params.item_base.row(i))), 1e-10);
  }
}

TEST(Scorer, HierarchicalEqualsExpandedForm) {
  // w.(p + g1 sum a_j x_j + g2 sum b_f q_f + g3 q_C)
  //   = w.p + sum g1 a_j w.x_j + sum g2 b_f w.q_f + g3 w.q_C
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto t = make_tiny_instance(TinySpec{}, seed);
    const auto& p = t.params;
    const Scorer s(p, t.graph, t.bundle, mode_of(kPoolingPairs[seed % 7]));
    AttentionTrace tr;
    const Index a = static_cast<Index>(seed % 8), i = static_cast<Index>((seed / 8) % 12);
    s.predict(a, i, tr);
    const auto g = tr.gamma();
    const auto w = p.item_base.row(i);
    Real expanded = w.dot(p.user_base.row(a));
    for (const auto& u : tr.uploads) expanded += g[kUpload] * u.weight * w.dot(p.item_aux.row(u.id));
    for (const auto& u : tr.followees) expanded += g[kSocial] * u.weight * w.dot(p.user_aux.row(u.id));
    expanded += g[kCreator] * w.dot(p.user_aux.row(t.graph.creator(i)));
    ASSERT_LT(rel_diff(tr.score, expanded), 1e-10);
  }
}

TEST(Scorer, ScoredItemLeavesUploadSupport) {
  const auto t = make_tiny_instance(TinySpec{}, 3);
  const Scorer s(t.params, t.graph, t.bundle, mode_of("att,att"));
  for (Index a = 0; a < t.graph.num_users(); ++a) {
    for (Index j : t.graph.uploads(a)) {
      AttentionTrace tr;
      s.predict(a, j, tr);
      for (const auto& u : tr.uploads) EXPECT_NE(u.id, j);
    }
  }
}

TEST(Scorer, ScoreItemsMatchesPredict) {
  const auto t = make_tiny_instance(TinySpec{}, 4);
  const Scorer s(t.params, t.graph, t.bundle, mode_of("att,max"));
  std::vector<Index> items(12);
  std::iota(items.begin(), items.end(), 0);
  for (Index a = 0; a < 8; ++a) {
    const auto scores = s.score_items(a, items);
    for (Index i = 0; i < 12; ++i) EXPECT_EQ(scores[static_cast<std::size_t>(i)], s.predict(a, i));
  }
}

TEST(Scorer, ShapeMismatchRejected) {
  auto t = make_tiny_instance(TinySpec{}, 5);
  t.bundle.social = Matrix::Zero(8, 5);
  EXPECT_THROW(Scorer(t.params, t.graph, t.bundle, AttentionMode{}), Error);
}

TEST(Gradients, MatchFiniteDifferencesAcrossVariants) {
  const auto t = make_tiny_instance(TinySpec{}, 11);
  const auto triples = tiny_triples(t.graph, 12);
  std::vector<AttentionMode> modes;
  for (const char* pair : kPoolingPairs) modes.push_back(mode_of(pair));
  for (const char* a : {"u", "s", "c", "u+c"}) {
    AttentionMode m;
    m.aspects = parse_aspects(a);
    modes.push_back(m);
  }
  for (const char* in : {"base", "base+soc", "base+aux+vis_s"}) {
    AttentionMode m;
    m.inputs = parse_inputs(in);
    modes.push_back(m);
  }
  AttentionMode user_creator;
  user_creator.creator_input_is_user = true;
  modes.push_back(user_creator);
  for (const auto& m : modes) {
    const auto r = gradient_check_by_user(t.params, t.graph, t.bundle, m, triples, 0.01);
    EXPECT_LT(r.max_rel_error(), 1e-4) << to_json(r).dump();
  }
}

TEST(Checkpoint, RoundTripIsBitExact) {
  TempDir dir;
  const auto t = make_tiny_instance(TinySpec{}, 6);
  Checkpoint c;
  c.params = t.params;
  c.mode = mode_of("max,att");
  c.seed = 99;
  c.metadata = {{"best_epoch", 3}};
  save_checkpoint(c, dir / "ck");
  const auto back = load_checkpoint(dir / "ck");
  EXPECT_EQ(back.mode, c.mode);
  EXPECT_EQ(back.seed, 99u);
  EXPECT_EQ(back.params.dims, c.params.dims);
  zip_tensors(back.params, c.params, [](const char*, const auto& x, const auto& y) { EXPECT_EQ(x, y); });
}

TEST(Checkpoint, CorruptedMagicRejected) {
  TempDir dir;
  Checkpoint c;
  c.params = make_tiny_instance(TinySpec{}, 7).params;
  save_checkpoint(c, dir / "ck");
  auto text = read_file(dir / "ck/manifest.json");
  text.replace(text.find("HASC-CHECKPOINT"), 4, "XXXX");
  write_file(dir / "ck/manifest.json", text);
  EXPECT_THROW(load_checkpoint(dir / "ck"), Error);
  EXPECT_THROW(load_checkpoint(dir / "nowhere"), Error);
}

TEST(Checkpoint, DatasetMismatchNamed) {
  ModelDims d;
  d.num_users = 5;
  d.num_items = 6;
  try {
    check_compatible(d, 5, 7, d.social_dim, d.content_dim, d.style_dim);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("items"), std::string::npos);
  }
}
