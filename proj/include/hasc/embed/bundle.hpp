#pragma once

#include <filesystem>
#include <string>

#include "hasc/core.hpp"
#include "hasc/io/dense_matrix.hpp"

namespace hasc {

inline constexpr Index kSocialDim = 128;
inline constexpr Index kContentDim = 4096;
inline constexpr Index kStyleDim = 5120;

// Pretrained inputs of the attention networks. Rows follow the dataset's
// dense user / item indices.
struct EmbeddingBundle {
  Matrix social;        // M x d      e_a
  Matrix item_content;  // N x 4096   f^c_i
  Matrix item_style;    // N x 5120   f^s_i
  Matrix user_content;  // M x 4096   f^c_a
  Matrix user_style;    // M x 5120   f^s_a

  Index social_dim() const { return social.cols(); }
  Index content_dim() const { return item_content.cols(); }
  Index style_dim() const { return item_style.cols(); }

  void check(Index num_users, Index num_items) const {
    const auto expect = [](const Matrix& m, Index rows, Index cols, const char* name) {
      if (m.rows() != rows || m.cols() != cols) {
        throw Error(std::string("embedding bundle: ") + name + " is " + std::to_string(m.rows()) + "x" +
                    std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                    std::to_string(cols));
      }
      if (!m.allFinite()) throw Error(std::string("embedding bundle: ") + name + " has non-finite entries");
    };
    expect(social, num_users, social.cols(), "social");
    expect(item_content, num_items, item_content.cols(), "item_content");
    expect(item_style, num_items, item_style.cols(), "item_style");
    expect(user_content, num_users, item_content.cols(), "user_content");
    expect(user_style, num_users, item_style.cols(), "user_style");
  }
};

}  // namespace hasc
