#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "hasc/core.hpp"
#include "hasc/data/dataset.hpp"

namespace hasc {

namespace detail {

// Draws up to `count` distinct items from [0, num_items) that are not in the
// sorted list `excluded`, uniformly without replacement. If fewer than
// `count` items qualify, all of them are returned in ascending order.
inline std::vector<Index> sample_excluding(Index num_items, std::span<const Index> excluded,
                                           Index count, Rng& rng) {
  const auto is_excluded = [&](Index i) {
    return std::binary_search(excluded.begin(), excluded.end(), i);
  };
  const Index available = num_items - static_cast<Index>(excluded.size());
  std::vector<Index> out;
  if (count <= 0 || available <= 0) return out;

  if (available <= count) {
    out.reserve(static_cast<std::size_t>(available));
    for (Index i = 0; i < num_items; ++i) {
      if (!is_excluded(i)) out.push_back(i);
    }
    return out;
  }

  out.reserve(static_cast<std::size_t>(count));
  if (2 * static_cast<Index>(excluded.size()) < num_items && 4 * count < available) {
    // Sparse exclusion: rejection sampling stays cheap.
    while (static_cast<Index>(out.size()) < count) {
      const Index i = uniform_index(rng, num_items);
      if (is_excluded(i) || std::find(out.begin(), out.end(), i) != out.end()) continue;
      out.push_back(i);
    }
    return out;
  }

  std::vector<Index> pool;
  pool.reserve(static_cast<std::size_t>(available));
  for (Index i = 0; i < num_items; ++i) {
    if (!is_excluded(i)) pool.push_back(i);
  }
  for (Index k = 0; k < count; ++k) {
    const Index j = k + uniform_index(rng, available - k);
    std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(j)]);
    out.push_back(pool[static_cast<std::size_t>(k)]);
  }
  return out;
}

}  // namespace detail

// Pseudo-negatives for one positive: items the user has not rated in train.
inline std::vector<Index> sample_negatives(const InteractionDataset& train, Index user, Index count,
                                           Rng& rng) {
  return detail::sample_excluding(train.num_items(), train.rated_items(user), count, rng);
}

// Ranking candidates for a held-out pair: unrated in train and distinct from
// every item in `held_out` (the user's test / validation items).
inline std::vector<Index> sample_eval_candidates(const InteractionDataset& train, Index user, Index n,
                                                 Rng& rng, std::span<const Index> held_out = {}) {
  auto rated = train.rated_items(user);
  std::vector<Index> excluded(rated.begin(), rated.end());
  for (Index i : held_out) {
    if (!std::binary_search(rated.begin(), rated.end(), i)) excluded.push_back(i);
  }
  std::sort(excluded.begin(), excluded.end());
  excluded.erase(std::unique(excluded.begin(), excluded.end()), excluded.end());
  return detail::sample_excluding(train.num_items(), excluded, n, rng);
}

}  // namespace hasc
