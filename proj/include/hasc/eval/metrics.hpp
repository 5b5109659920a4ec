#pragma once

#include <cmath>
#include <span>

#include "hasc/core.hpp"

namespace hasc {

// 1-based rank of the held-out item among the candidates. Ties count against
// the held-out item.
inline Index rank_of_test_item(Real test_score, std::span<const Real> candidate_scores) {
  Index rank = 1;
  for (Real s : candidate_scores) {
    if (s >= test_score) ++rank;
  }
  return rank;
}

inline Real hr_at_k(Index rank, Index k) { return rank <= k ? 1.0 : 0.0; }

// Single relevant item, so the ideal DCG is 1.
inline Real ndcg_at_k(Index rank, Index k) {
  return rank <= k ? 1.0 / std::log2(static_cast<Real>(rank) + 1.0) : 0.0;
}

}  // namespace hasc
