#pragma once

// Desk-scale datasets with planted aspect structure. Every user belongs to
// one of three groups:
//   1 (upload)  likes items close to the centroid of their own uploads,
//   2 (social)  likes items liked by the few users they follow on purpose,
//   3 (creator) likes items uploaded by one or two admired star creators.
// Items carry latent topic vectors; visual features are noisy random
// projections of them, so visual similarity tracks latent similarity.

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hasc/core.hpp"
#include "hasc/data/dataset.hpp"
#include "hasc/embed/bundle.hpp"
#include "hasc/embed/deepwalk.hpp"
#include "hasc/embed/profiles.hpp"

namespace hasc {

struct SyntheticConfig {
  Index users = 200;
  Index items = 1000;
  std::array<Real, 3> fractions = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  Index latent_dim = 8;
  Index topics = 10;
  Real noise = 0.05;  // share of each user's likes drawn uniformly at random
  std::uint64_t seed = 0;

  Index min_ratings = 3;
  Index max_ratings = 6;
  Index star_creators = 8;
  Index star_share_percent = 30;  // items uploaded by the star creators
  Index min_uploads = 3;          // per non-star user
  Index influencers = 8;
  Index influencer_ratings = 30;
  Index planted_followees = 1;
  Real random_link_probability = 0.02;

  Index social_dim = kSocialDim;
  Index content_dim = kContentDim;
  Index style_dim = kStyleDim;
  Index walks_per_vertex = 10;
  Index walk_length = 40;

  void validate() const {
    Real total = 0.0;
    for (Real f : fractions) {
      if (!(f >= 0.0 && f <= 1.0)) throw Error("group fractions must lie in [0, 1]");
      total += f;
    }
    if (std::abs(total - 1.0) > 1e-9) throw Error("group fractions must sum to 1");
    if (users < 2 || items < 2) throw Error("synthetic config needs at least 2 users and 2 items");
    if (latent_dim < 1 || topics < 1) throw Error("latent_dim and topics must be positive");
    if (!(noise >= 0.0 && noise <= 1.0)) throw Error("noise must lie in [0, 1]");
    if (min_ratings < 2 || max_ratings < min_ratings) throw Error("need 2 <= min_ratings <= max_ratings");
    if (influencers > users || star_creators > users) throw Error("more influencers or stars than users");
    if (star_share_percent < 0 || star_share_percent > 100) throw Error("star_share_percent must be in [0, 100]");
    const Index star_items = items * star_share_percent / 100;
    if (star_creators == 0 && (star_items > 0 || fractions[2] > 0.0)) {
      throw Error("creator group needs at least one star creator");
    }
    if ((users - star_creators) * min_uploads > items - star_items) {
      throw Error("infeasible synthetic config: " + std::to_string(items - star_items) +
                  " non-star items cannot give " + std::to_string(users - star_creators) + " users " +
                  std::to_string(min_uploads) + " uploads each");
    }
    if (std::max(max_ratings, influencer_ratings) > items / 2) {
      throw Error("infeasible synthetic config: " + std::to_string(items) + " items are too few for " +
                  std::to_string(std::max(max_ratings, influencer_ratings)) + " ratings per user");
    }
    if (planted_followees < 1 || (fractions[1] > 0.0 && influencers < 1)) {
      throw Error("social group needs influencers and planted followees");
    }
    if (social_dim < 1 || content_dim < 1 || style_dim < 1) throw Error("embedding dims must be positive");
  }
};

struct SyntheticData {
  InteractionDataset dataset;
  EmbeddingBundle bundle;  // user profiles over all ratings; recompute after splitting
  std::vector<int> groups;  // 1, 2 or 3 per user
  Matrix item_latent;       // N x latent_dim, unit rows
};

namespace detail {

inline void normalize_rows(Matrix& m) {
  for (Index r = 0; r < m.rows(); ++r) {
    const Real n = m.row(r).norm();
    if (n > 0.0) m.row(r) /= n;
  }
}

// Features = unit rows of (latent * A + noise) with A random.
inline Matrix visual_features(const Matrix& latent, Index dim, Rng& rng) {
  Matrix a(latent.cols(), dim);
  for (Index k = 0; k < a.size(); ++k) a.data()[k] = standard_normal(rng);
  Matrix f = latent * a;
  for (Index k = 0; k < f.size(); ++k) f.data()[k] += 0.3 * standard_normal(rng);
  normalize_rows(f);
  return f;
}

// `count` distinct items from `pool` (or everything when the pool is short).
inline std::vector<Index> pick(std::vector<Index> pool, Index count, Rng& rng) {
  shuffle(pool.begin(), pool.end(), rng);
  if (static_cast<Index>(pool.size()) > count) pool.resize(static_cast<std::size_t>(count));
  return pool;
}

}  // namespace detail

// Items in descending order of cosine similarity to `taste`.
inline std::vector<Index> items_by_similarity(const Matrix& item_latent, const Vector& taste) {
  const Vector sim = item_latent * taste;
  std::vector<Index> order(static_cast<std::size_t>(item_latent.rows()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) { return sim[x] > sim[y]; });
  return order;
}

inline Vector upload_centroid(const Matrix& item_latent, std::span<const Index> uploads) {
  Vector c = Vector::Zero(item_latent.cols());
  for (Index j : uploads) c += item_latent.row(j).transpose();
  const Real n = c.norm();
  if (n > 0.0) c /= n;
  return c;
}

inline SyntheticData generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const Index M = cfg.users, N = cfg.items, k = cfg.latent_dim;

  // Items: topic centre plus jitter.
  Matrix centres(cfg.topics, k);
  for (Index x = 0; x < centres.size(); ++x) centres.data()[x] = standard_normal(rng);
  detail::normalize_rows(centres);
  Matrix latent(N, k);
  for (Index i = 0; i < N; ++i) {
    const Index t = uniform_index(rng, cfg.topics);
    for (Index d = 0; d < k; ++d) latent(i, d) = centres(t, d) + 0.35 * standard_normal(rng);
  }
  detail::normalize_rows(latent);

  // Groups: exact counts from the fractions, shuffled over users.
  std::vector<int> groups;
  {
    std::array<Index, 3> counts{};
    counts[0] = static_cast<Index>(std::llround(cfg.fractions[0] * static_cast<Real>(M)));
    counts[1] = std::min(M - counts[0], static_cast<Index>(std::llround(cfg.fractions[1] * static_cast<Real>(M))));
    counts[2] = M - counts[0] - counts[1];
    for (int g = 0; g < 3; ++g) groups.insert(groups.end(), static_cast<std::size_t>(counts[static_cast<std::size_t>(g)]), g + 1);
    shuffle(groups.begin(), groups.end(), rng);
  }

  // Roles: star creators are any users; influencers are drawn from groups
  // 1 and 3 so that their likes never depend on other users.
  std::vector<Index> order(static_cast<std::size_t>(M));
  std::iota(order.begin(), order.end(), Index{0});
  shuffle(order.begin(), order.end(), rng);
  std::vector<Index> stars(order.begin(), order.begin() + cfg.star_creators);
  std::vector<Index> influencers;
  std::vector<bool> is_influencer(static_cast<std::size_t>(M), false);
  for (Index u : order) {
    if (static_cast<Index>(influencers.size()) == cfg.influencers) break;
    if (groups[static_cast<std::size_t>(u)] == 2) continue;
    influencers.push_back(u);
    is_influencer[static_cast<std::size_t>(u)] = true;
  }
  const bool has_social = std::find(groups.begin(), groups.end(), 2) != groups.end();
  if (has_social && influencers.empty()) throw Error("infeasible synthetic config: no users outside the social group to follow");

  // Creators: star items first, then every other user gets min_uploads, the
  // rest are spread uniformly over non-star users.
  std::vector<Index> creators(static_cast<std::size_t>(N), -1);
  std::vector<Index> item_order(static_cast<std::size_t>(N));
  std::iota(item_order.begin(), item_order.end(), Index{0});
  shuffle(item_order.begin(), item_order.end(), rng);
  const Index star_items = N * cfg.star_share_percent / 100;
  std::vector<Index> regular(order.begin() + cfg.star_creators, order.end());
  std::size_t next = 0;
  for (Index x = 0; x < star_items; ++x) creators[static_cast<std::size_t>(item_order[next++])] = stars[static_cast<std::size_t>(x % cfg.star_creators)];
  for (Index u : regular) {
    for (Index x = 0; x < cfg.min_uploads; ++x) creators[static_cast<std::size_t>(item_order[next++])] = u;
  }
  while (next < item_order.size()) {
    const auto& pool = regular.empty() ? stars : regular;
    creators[static_cast<std::size_t>(item_order[next++])] = pool[static_cast<std::size_t>(uniform_index(rng, static_cast<Index>(pool.size())))];
  }
  std::vector<std::vector<Index>> uploads(static_cast<std::size_t>(M));
  for (Index i = 0; i < N; ++i) uploads[static_cast<std::size_t>(creators[static_cast<std::size_t>(i)])].push_back(i);

  std::vector<Index> all_items(static_cast<std::size_t>(N));
  std::iota(all_items.begin(), all_items.end(), Index{0});
  const Index decile = std::max<Index>(1, N / 10);

  // Likes: influencers and group-1 users follow their upload centroid;
  // group-3 users their admired stars; group-2 users their planted followees.
  std::vector<std::set<Index>> likes(static_cast<std::size_t>(M));
  std::vector<std::vector<Index>> planted(static_cast<std::size_t>(M));
  const auto count_for = [&](Index u) {
    if (is_influencer[static_cast<std::size_t>(u)]) return cfg.influencer_ratings;
    return cfg.min_ratings + uniform_index(rng, cfg.max_ratings - cfg.min_ratings + 1);
  };
  const auto add_noise = [&](Index u, Index n) {
    for (Index x = 0; x < n; ++x) {
      Index i;
      do i = uniform_index(rng, N);
      while (likes[static_cast<std::size_t>(u)].count(i) || creators[static_cast<std::size_t>(i)] == u);
      likes[static_cast<std::size_t>(u)].insert(i);
    }
  };
  const auto like_from = [&](Index u, const std::vector<Index>& pool, Index n) {
    std::vector<Index> eligible;
    for (Index i : pool) {
      if (creators[static_cast<std::size_t>(i)] != u && !likes[static_cast<std::size_t>(u)].count(i)) eligible.push_back(i);
    }
    for (Index i : detail::pick(std::move(eligible), n, rng)) likes[static_cast<std::size_t>(u)].insert(i);
  };
  const auto centroid_likes = [&](Index u, Index n) {
    const auto ranked = items_by_similarity(latent, upload_centroid(latent, uploads[static_cast<std::size_t>(u)]));
    like_from(u, std::vector<Index>(ranked.begin(), ranked.begin() + decile), n);
  };
  const auto noisy = [&](Index n) { return static_cast<Index>(std::floor(cfg.noise * static_cast<Real>(n) + uniform_real(rng))); };

  std::vector<Index> pass1, pass2;
  for (Index u = 0; u < M; ++u) (groups[static_cast<std::size_t>(u)] == 2 ? pass2 : pass1).push_back(u);
  for (Index u : pass1) {
    const Index n = count_for(u);
    const Index n_noise = std::min(noisy(n), n);
    if (groups[static_cast<std::size_t>(u)] == 3) {
      const Index admired = 1 + uniform_index(rng, std::min<Index>(2, cfg.star_creators));
      std::vector<Index> pool;
      for (Index s : detail::pick(stars, admired, rng)) pool.insert(pool.end(), uploads[static_cast<std::size_t>(s)].begin(), uploads[static_cast<std::size_t>(s)].end());
      like_from(u, pool, n - n_noise);
    } else {
      centroid_likes(u, n - n_noise);
    }
    add_noise(u, n_noise);
  }
  for (Index u : pass2) {
    std::vector<Index> candidates;
    for (Index b : influencers) {
      if (b != u) candidates.push_back(b);
    }
    planted[static_cast<std::size_t>(u)] = detail::pick(candidates, cfg.planted_followees, rng);
    std::vector<Index> pool;
    for (Index b : planted[static_cast<std::size_t>(u)]) pool.insert(pool.end(), likes[static_cast<std::size_t>(b)].begin(), likes[static_cast<std::size_t>(b)].end());
    std::sort(pool.begin(), pool.end());
    pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
    const Index n = count_for(u);
    const Index n_noise = std::min(noisy(n), n);
    like_from(u, pool, n - n_noise);
    add_noise(u, n_noise);
  }

  // Follow edges: planted ones plus uniform background links.
  std::set<std::pair<Index, Index>> edges;
  for (Index u = 0; u < M; ++u) {
    for (Index b : planted[static_cast<std::size_t>(u)]) edges.insert({u, b});
    for (Index b = 0; b < M; ++b) {
      if (b != u && uniform_real(rng) < cfg.random_link_probability) edges.insert({u, b});
    }
  }

  Vocabulary users, items;
  for (Index u = 0; u < M; ++u) users.intern("u" + std::to_string(u));
  for (Index i = 0; i < N; ++i) items.intern("i" + std::to_string(i));
  std::vector<Rating> ratings;
  for (Index u = 0; u < M; ++u) {
    std::vector<Index> mine(likes[static_cast<std::size_t>(u)].begin(), likes[static_cast<std::size_t>(u)].end());
    shuffle(mine.begin(), mine.end(), rng);
    for (Index i : mine) ratings.push_back({u, i, std::nullopt});
  }
  std::vector<SocialEdge> social;
  for (const auto& [a, b] : edges) social.push_back({a, b});

  SyntheticData out;
  out.dataset = InteractionDataset(std::move(users), std::move(items), std::move(ratings), std::move(social),
                                   std::move(creators));
  out.groups = std::move(groups);
  out.bundle.item_content = detail::visual_features(latent, cfg.content_dim, rng);
  out.bundle.item_style = detail::visual_features(latent, cfg.style_dim, rng);
  std::tie(out.bundle.user_content, out.bundle.user_style) =
      user_visual_profiles(out.dataset, out.bundle.item_content, out.bundle.item_style);

  WalkConfig wc;
  wc.walks_per_vertex = cfg.walks_per_vertex;
  wc.walk_length = cfg.walk_length;
  wc.seed = derive_seed(cfg.seed, 1);
  SkipGramConfig sg;
  sg.dim = cfg.social_dim;
  sg.seed = derive_seed(cfg.seed, 2);
  const auto walks = deepwalk_walks(M, out.dataset.social_edges(), wc);
  out.bundle.social = skipgram_train(walks, M, sg);
  out.item_latent = std::move(latent);
  return out;
}

inline nlohmann::ordered_json to_json(const SyntheticConfig& c) {
  return {{"users", c.users},
          {"items", c.items},
          {"fractions", c.fractions},
          {"latent_dim", c.latent_dim},
          {"topics", c.topics},
          {"noise", c.noise},
          {"seed", c.seed},
          {"min_ratings", c.min_ratings},
          {"max_ratings", c.max_ratings},
          {"star_creators", c.star_creators},
          {"star_share_percent", c.star_share_percent},
          {"min_uploads", c.min_uploads},
          {"influencers", c.influencers},
          {"influencer_ratings", c.influencer_ratings},
          {"planted_followees", c.planted_followees},
          {"random_link_probability", c.random_link_probability},
          {"social_dim", c.social_dim},
          {"content_dim", c.content_dim},
          {"style_dim", c.style_dim},
          {"walks_per_vertex", c.walks_per_vertex},
          {"walk_length", c.walk_length}};
}

}  // namespace hasc
