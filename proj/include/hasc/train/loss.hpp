#pragma once

#include <cmath>

#include "hasc/core.hpp"

namespace hasc {

inline Real logistic(Real x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const Real e = std::exp(x);
  return e / (1.0 + e);
}

// -ln sigma(x), without overflow for large |x|.
inline Real neg_log_sigmoid(Real x) {
  return x >= 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

// Ranking part of the pairwise loss: -ln sigma(score_pos - score_neg).
inline Real ranking_loss(Real score_pos, Real score_neg) { return neg_log_sigmoid(score_pos - score_neg); }

// d ranking_loss / d(score_pos - score_neg) = -sigma(score_neg - score_pos).
inline Real ranking_loss_slope(Real score_pos, Real score_neg) { return -logistic(score_neg - score_pos); }

// Ranking loss plus lambda * ||theta_1||^2, where `reg_sq_norm` is the
// squared norm of the embedding rows the triple touched.
inline Real pairwise_loss(Real score_pos, Real score_neg, Real lambda, Real reg_sq_norm) {
  return ranking_loss(score_pos, score_neg) + lambda * reg_sq_norm;
}

}  // namespace hasc
