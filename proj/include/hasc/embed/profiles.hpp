#pragma once

#include <utility>

#include "hasc/core.hpp"
#include "hasc/data/dataset.hpp"

namespace hasc {

// Mean of the rows of `item_features` over each user's rated items in `train`;
// users without ratings get a zero row.
inline Matrix user_profiles(const InteractionDataset& train, const Matrix& item_features) {
  if (item_features.rows() != train.num_items()) {
    throw Error("user_profiles: feature rows (" + std::to_string(item_features.rows()) +
                ") do not match item count (" + std::to_string(train.num_items()) + ")");
  }
  Matrix out = Matrix::Zero(train.num_users(), item_features.cols());
  for (Index a = 0; a < train.num_users(); ++a) {
    const auto rated = train.rated_items(a);
    if (rated.empty()) continue;
    for (Index i : rated) out.row(a) += item_features.row(i);
    out.row(a) /= static_cast<Real>(rated.size());
  }
  return out;
}

// (user_content, user_style).
inline std::pair<Matrix, Matrix> user_visual_profiles(const InteractionDataset& train, const Matrix& content,
                                                      const Matrix& style) {
  return {user_profiles(train, content), user_profiles(train, style)};
}

}  // namespace hasc
