#pragma once

// Central-difference check of Scorer::backward plus the local regularizer,
// and a generator of tiny random instances to run it on.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "hasc/core.hpp"
#include "hasc/data/dataset.hpp"
#include "hasc/embed/bundle.hpp"
#include "hasc/model/params.hpp"
#include "hasc/model/scorer.hpp"
#include "hasc/train/trainer.hpp"

namespace hasc {

struct TinySpec {
  Index users = 8;
  Index items = 12;
  Index latent = 4;
  Index hidden = 5;
  Index social_dim = 6;
  Index content_dim = 7;
  Index style_dim = 9;
  Index min_ratings = 2;
  Index max_ratings = 5;
  Real link_probability = 0.35;
};

struct TinyInstance {
  InteractionDataset graph;
  EmbeddingBundle bundle;
  ModelParams params;
};

inline Matrix random_matrix(Index rows, Index cols, Real stddev, Rng& rng) {
  Matrix m(rows, cols);
  for (Index k = 0; k < m.size(); ++k) m.data()[k] = stddev * standard_normal(rng);
  return m;
}

// Random users, items, creators, ratings and follow edges; parameters drawn
// with stddev 0.5 so attention weights are far from uniform.
inline TinyInstance make_tiny_instance(const TinySpec& s, std::uint64_t seed) {
  if (s.users < 2 || s.items < 2) throw Error("tiny instance needs at least 2 users and 2 items");
  Rng rng(seed);
  Vocabulary users, items;
  for (Index u = 0; u < s.users; ++u) users.intern("u" + std::to_string(u));
  for (Index i = 0; i < s.items; ++i) items.intern("i" + std::to_string(i));
  std::vector<Index> creators(static_cast<std::size_t>(s.items));
  for (auto& c : creators) c = uniform_index(rng, s.users);
  std::vector<Rating> ratings;
  for (Index u = 0; u < s.users; ++u) {
    const Index hi = std::min(s.max_ratings, s.items);
    const Index lo = std::min(s.min_ratings, hi);
    const Index n = lo + uniform_index(rng, hi - lo + 1);
    std::vector<Index> all(static_cast<std::size_t>(s.items));
    for (Index i = 0; i < s.items; ++i) all[static_cast<std::size_t>(i)] = i;
    shuffle(all.begin(), all.end(), rng);
    for (Index k = 0; k < n; ++k) ratings.push_back({u, all[static_cast<std::size_t>(k)], std::nullopt});
  }
  std::vector<SocialEdge> social;
  for (Index a = 0; a < s.users; ++a) {
    for (Index b = 0; b < s.users; ++b) {
      if (a != b && uniform_real(rng) < s.link_probability) social.push_back({a, b});
    }
  }
  TinyInstance t;
  t.graph = InteractionDataset(std::move(users), std::move(items), std::move(ratings), std::move(social),
                               std::move(creators));
  t.bundle.social = random_matrix(s.users, s.social_dim, 0.5, rng);
  t.bundle.item_content = random_matrix(s.items, s.content_dim, 0.5, rng);
  t.bundle.item_style = random_matrix(s.items, s.style_dim, 0.5, rng);
  t.bundle.user_content = random_matrix(s.users, s.content_dim, 0.5, rng);
  t.bundle.user_style = random_matrix(s.users, s.style_dim, 0.5, rng);
  ModelDims d;
  d.num_users = s.users;
  d.num_items = s.items;
  d.latent = s.latent;
  d.hidden = s.hidden;
  d.social_dim = s.social_dim;
  d.content_dim = s.content_dim;
  d.style_dim = s.style_dim;
  t.params = zeros_like(d);
  for_each_tensor(t.params, [&](const char*, auto& m) {
    for (Index k = 0; k < m.size(); ++k) m.data()[k] = 0.5 * standard_normal(rng);
  });
  return t;
}

// One triple per rating, with a random unrated negative.
inline std::vector<Triple> tiny_triples(const InteractionDataset& graph, std::uint64_t seed) {
  Rng rng(seed);
  return build_triples(graph, 1, rng);
}

struct TensorCheck {
  std::string name;
  Real max_rel_error = 0.0;
  Real max_abs_error = 0.0;
  Index entries = 0;
};

struct GradCheckReport {
  std::vector<TensorCheck> tensors;

  Real max_rel_error() const {
    Real m = 0.0;
    for (const auto& t : tensors) m = std::max(m, t.max_rel_error);
    return m;
  }
};

// |analytic - numeric| / max(|analytic|, |numeric|, floor). The floor keeps
// entries whose true gradient is ~0 from turning round-off into large ratios.
inline constexpr Real kGradCheckFloor = 1e-5;

// Summed pairwise loss of `triples` (ranking + local regularization).
inline Real triples_loss(const ModelParams& params, const InteractionDataset& graph, const EmbeddingBundle& bundle,
                         const AttentionMode& mode, std::span<const Triple> triples, Real lambda) {
  Scorer scorer(params, graph, bundle, mode);
  AttentionTrace tp, tn;
  TouchedRows touched;
  Real loss = 0.0;
  for (const auto& tr : triples) {
    scorer.predict_pair(tr.user, tr.pos, tr.neg, tp, tn);
    loss += ranking_loss(tp.score, tn.score);
    if (lambda > 0.0) {
      touched.clear();
      touched.add(tp, mode, graph);
      touched.add(tn, mode, graph);
      touched.unique();
      for (const auto& r : touched.user_base) loss += lambda * params.user_base.row(r).squaredNorm();
      for (const auto& r : touched.user_aux) loss += lambda * params.user_aux.row(r).squaredNorm();
      for (const auto& r : touched.item_base) loss += lambda * params.item_base.row(r).squaredNorm();
      for (const auto& r : touched.item_aux) loss += lambda * params.item_aux.row(r).squaredNorm();
    }
  }
  return loss;
}

inline ModelParams analytic_gradient(const ModelParams& params, const InteractionDataset& graph,
                                     const EmbeddingBundle& bundle, const AttentionMode& mode,
                                     std::span<const Triple> triples, Real lambda) {
  Scorer scorer(params, graph, bundle, mode);
  Gradients g(params.dims);
  detail::accumulate_batch(scorer, triples, lambda, 1.0, g);
  g.finalize(bundle);
  return std::move(g.params);
}

inline GradCheckReport gradient_check(const ModelParams& params, const InteractionDataset& graph,
                                      const EmbeddingBundle& bundle, const AttentionMode& mode,
                                      std::span<const Triple> triples, Real lambda, Real step = 1e-5) {
  const ModelParams analytic = analytic_gradient(params, graph, bundle, mode, triples, lambda);
  ModelParams probe = params;
  GradCheckReport report;
  zip_tensors(probe, analytic, [&](const char* name, auto& tensor, const auto& grad) {
    TensorCheck c;
    c.name = name;
    c.entries = tensor.size();
    for (Index k = 0; k < tensor.size(); ++k) {
      const Real saved = tensor.data()[k];
      tensor.data()[k] = saved + step;
      const Real up = triples_loss(probe, graph, bundle, mode, triples, lambda);
      tensor.data()[k] = saved - step;
      const Real down = triples_loss(probe, graph, bundle, mode, triples, lambda);
      tensor.data()[k] = saved;
      const Real numeric = (up - down) / (2.0 * step);
      const Real a = grad.data()[k];
      const Real abs_err = std::abs(a - numeric);
      const Real rel = abs_err / std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
      c.max_abs_error = std::max(c.max_abs_error, abs_err);
      c.max_rel_error = std::max(c.max_rel_error, rel);
    }
    report.tensors.push_back(std::move(c));
  });
  return report;
}

// Checks each user's triples as a separate objective and keeps the per-tensor
// worst case. Finite-difference round-off grows with the loss value, so small
// objectives give a much tighter check than one summed over every triple.
inline GradCheckReport gradient_check_by_user(const ModelParams& params, const InteractionDataset& graph,
                                              const EmbeddingBundle& bundle, const AttentionMode& mode,
                                              std::span<const Triple> triples, Real lambda, Real step = 1e-5) {
  GradCheckReport merged;
  std::vector<Triple> group;
  for (Index a = 0; a < graph.num_users(); ++a) {
    group.clear();
    for (const auto& t : triples) {
      if (t.user == a) group.push_back(t);
    }
    if (group.empty()) continue;
    const auto r = gradient_check(params, graph, bundle, mode, group, lambda, step);
    if (merged.tensors.empty()) {
      merged = r;
      continue;
    }
    for (std::size_t k = 0; k < r.tensors.size(); ++k) {
      merged.tensors[k].max_rel_error = std::max(merged.tensors[k].max_rel_error, r.tensors[k].max_rel_error);
      merged.tensors[k].max_abs_error = std::max(merged.tensors[k].max_abs_error, r.tensors[k].max_abs_error);
    }
  }
  return merged;
}

inline nlohmann::ordered_json to_json(const GradCheckReport& r) {
  nlohmann::ordered_json j;
  j["max_rel_error"] = r.max_rel_error();
  auto arr = nlohmann::ordered_json::array();
  for (const auto& t : r.tensors) {
    arr.push_back({{"tensor", t.name},
                   {"entries", t.entries},
                   {"max_rel_error", t.max_rel_error},
                   {"max_abs_error", t.max_abs_error}});
  }
  j["tensors"] = std::move(arr);
  return j;
}

}  // namespace hasc
