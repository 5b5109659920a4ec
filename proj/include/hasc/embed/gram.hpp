#pragma once

// Style descriptor of an image: Gram matrices of five convolutional layers,
// each pooled down to 32x32 and concatenated (5 x 1024 = 5120 values).

#include <array>
#include <map>
#include <string>
#include <string_view>

#include "hasc/core.hpp"

namespace hasc {

inline constexpr std::array<std::string_view, 5> kStyleLayers = {"conv1_1", "conv2_1", "conv3_1",
                                                                 "conv4_1", "conv5_1"};
inline constexpr Index kGramSide = 32;

// One image's feature maps: layer name -> (filters x positions).
using FeatureMaps = std::map<std::string, Matrix, std::less<>>;

// g_ij = sum_k b_ik b_jk.
inline Matrix gram_matrix(const Matrix& feature_map) {
  if (feature_map.rows() < 1 || feature_map.cols() < 1) throw Error("gram_matrix: empty feature map");
  if (!feature_map.allFinite()) throw Error("gram_matrix: non-finite feature map entry");
  Matrix g(feature_map.rows(), feature_map.rows());
  g.setZero();
  g.selfadjointView<Eigen::Lower>().rankUpdate(feature_map);
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  return g;
}

// Block-average pooling into target x target. Row/column groups are
// contiguous with sizes differing by at most one.
inline Matrix downsample_gram(const Matrix& g, Index target = kGramSide) {
  const Index n = g.rows();
  if (g.cols() != n) throw Error("downsample_gram: matrix is not square");
  if (n < target) {
    throw Error("downsample_gram: " + std::to_string(n) + " filters, need at least " + std::to_string(target));
  }
  const auto start = [&](Index k) { return k * n / target; };
  Matrix out(target, target);
  for (Index r = 0; r < target; ++r) {
    const Index r0 = start(r), rn = start(r + 1) - r0;
    for (Index c = 0; c < target; ++c) {
      const Index c0 = start(c), cn = start(c + 1) - c0;
      out(r, c) = g.block(r0, c0, rn, cn).mean();
    }
  }
  return out;
}

inline Vector style_vector(const FeatureMaps& maps) {
  const Index block = kGramSide * kGramSide;
  Vector out(static_cast<Index>(kStyleLayers.size()) * block);
  Index offset = 0;
  for (auto layer : kStyleLayers) {
    auto it = maps.find(layer);
    if (it == maps.end()) throw Error("style_vector: missing layer " + std::string(layer));
    const Matrix pooled = downsample_gram(gram_matrix(it->second));
    // Row-major storage makes the flat copy a row-major vectorization.
    out.segment(offset, block) = Eigen::Map<const Vector>(pooled.data(), block);
    offset += block;
  }
  return out;
}

}  // namespace hasc
