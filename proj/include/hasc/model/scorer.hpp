#pragma once

// Forward scoring and exact backward pass of the hierarchical attention
// predictor:
//
//   score(a, i) = w_i . (p_a + g_1 x~_a + g_2 q~_a + g_3 q_{C_i})
//   x~_a = sum_j alpha_aj x_j  over a's uploads
//   q~_a = sum_b beta_ab q_b   over the users a follows
//
// alpha, beta and g come from three small attention networks
// (score = w . leaky(W z + b)) normalized by softmax, or replaced by
// uniform (AVG) or one-hot argmax (MAX) pooling.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "hasc/core.hpp"
#include "hasc/data/dataset.hpp"
#include "hasc/embed/bundle.hpp"
#include "hasc/model/mode.hpp"
#include "hasc/model/params.hpp"

namespace hasc {

// Visual inputs after the shared projections W^c, W^s. Matrices for a
// disabled input stay empty.
struct VisualProjection {
  Matrix item_content;  // N x D
  Matrix item_style;    // N x D
  Matrix user_content;  // M x D
  Matrix user_style;    // M x D
};

inline VisualProjection project_visuals(const ModelParams& p, const EmbeddingBundle& b, const InputMask& m) {
  VisualProjection v;
  if (m.content) {
    v.item_content.noalias() = b.item_content * p.content_proj.transpose();
    v.user_content.noalias() = b.user_content * p.content_proj.transpose();
  }
  if (m.style) {
    v.item_style.noalias() = b.item_style * p.style_proj.transpose();
    v.user_style.noalias() = b.user_style * p.style_proj.transpose();
  }
  return v;
}

// One element of an attention set: an upload j, a followee b, or an aspect l.
struct AttentionUnit {
  Index id = -1;
  Vector input;     // z
  Vector pre;       // W z + b   (empty under AVG pooling)
  Real raw = 0.0;   // w . leaky(pre)
  Real weight = 0.0;
};

struct AttentionTrace {
  Index user = -1;
  Index item = -1;

  std::vector<AttentionUnit> uploads;
  bool upload_active = false;
  Vector upload_context;  // x~_a

  std::vector<AttentionUnit> followees;
  bool social_active = false;
  Vector social_context;  // q~_a

  // Active aspects only; unit.id is the Aspect.
  std::vector<AttentionUnit> aspects;

  Vector user_vector;  // p_a + sum_l g_l a_l
  Real score = 0.0;

  // g per aspect, zero for inactive ones.
  std::array<Real, kNumAspects> gamma() const {
    std::array<Real, kNumAspects> g = {0.0, 0.0, 0.0};
    for (const auto& u : aspects) g[static_cast<std::size_t>(u.id)] = u.weight;
    return g;
  }
};

// Dense gradient accumulator. Visual-projection gradients are collected per
// projected row and folded into W^c / W^s by finalize().
struct Gradients {
  ModelParams params;
  VisualProjection visual;

  explicit Gradients(const ModelDims& dims) : params(zeros_like(dims)) {
    visual.item_content = Matrix::Zero(dims.num_items, dims.latent);
    visual.item_style = Matrix::Zero(dims.num_items, dims.latent);
    visual.user_content = Matrix::Zero(dims.num_users, dims.latent);
    visual.user_style = Matrix::Zero(dims.num_users, dims.latent);
  }

  void reset() {
    set_zero(params);
    visual.item_content.setZero();
    visual.item_style.setZero();
    visual.user_content.setZero();
    visual.user_style.setZero();
  }

  void finalize(const EmbeddingBundle& b) {
    fold(visual.item_content, b.item_content, params.content_proj);
    fold(visual.user_content, b.user_content, params.content_proj);
    fold(visual.item_style, b.item_style, params.style_proj);
    fold(visual.user_style, b.user_style, params.style_proj);
  }

 private:
  // proj += d_rows^T features, skipped when no row received gradient.
  static void fold(Matrix& d_rows, const Matrix& features, Matrix& proj) {
    if (!(d_rows.array() != 0.0).any()) return;
    proj.noalias() += d_rows.transpose() * features;
    d_rows.setZero();
  }
};

namespace detail {

inline Real leaky(Real x, Real slope) { return x > 0.0 ? x : slope * x; }
inline Real leaky_slope_at(Real x, Real slope) { return x > 0.0 ? 1.0 : slope; }

}  // namespace detail

// Normalizes unit weights from raw scores. Softmax subtracts the max; MAX
// picks the first of the largest raw scores.
inline void pool_weights(std::span<AttentionUnit> units, Pooling pooling) {
  if (units.empty()) return;
  switch (pooling) {
    case Pooling::avg: {
      const Real w = 1.0 / static_cast<Real>(units.size());
      for (auto& u : units) u.weight = w;
      return;
    }
    case Pooling::max: {
      std::size_t best = 0;
      for (std::size_t k = 1; k < units.size(); ++k) {
        if (units[k].raw > units[best].raw) best = k;
      }
      for (std::size_t k = 0; k < units.size(); ++k) units[k].weight = k == best ? 1.0 : 0.0;
      return;
    }
    case Pooling::att: {
      Real hi = units[0].raw;
      for (const auto& u : units) hi = std::max(hi, u.raw);
      Real total = 0.0;
      for (auto& u : units) {
        u.weight = std::exp(u.raw - hi);
        total += u.weight;
      }
      for (auto& u : units) u.weight /= total;
      return;
    }
  }
}

// Scores (user, item) pairs against fixed parameters. Holds references: the
// parameters, graph and bundle must outlive the scorer, and refresh() must be
// called after the parameters change.
class Scorer {
 public:
  Scorer(const ModelParams& params, const InteractionDataset& graph, const EmbeddingBundle& bundle,
         AttentionMode mode)
      : params_(params), graph_(graph), bundle_(bundle), mode_(mode) {
    check_shapes();
    refresh();
  }

  void refresh() {
    if (mode_.aspects[kUpload] || mode_.aspects[kSocial]) {
      visual_ = project_visuals(params_, bundle_, mode_.inputs);
    }
  }

  const AttentionMode& mode() const { return mode_; }
  const ModelParams& params() const { return params_; }
  const InteractionDataset& graph() const { return graph_; }
  const VisualProjection& visual() const { return visual_; }

  // Upload-history attention for user a; `exclude_item` (the item being
  // scored) is left out of the support. Fills trace.uploads,
  // trace.upload_context and trace.upload_active.
  void upload_attention(Index a, Index exclude_item, AttentionTrace& t) const {
    const auto& d = params_.dims;
    t.uploads.clear();
    t.upload_context = Vector::Zero(d.latent);
    for (Index j : graph_.uploads(a)) {
      if (j == exclude_item) continue;
      AttentionUnit u;
      u.id = j;
      if (mode_.bottom != Pooling::avg) {
        u.input = upload_input(a, j);
        evaluate(params_.upload, u);
      }
      t.uploads.push_back(std::move(u));
    }
    t.upload_active = !t.uploads.empty();
    pool_weights(t.uploads, mode_.bottom);
    for (const auto& u : t.uploads) {
      if (u.weight != 0.0) t.upload_context.noalias() += u.weight * params_.item_aux.row(u.id).transpose();
    }
  }

  // Social-influence attention over the users a follows.
  void social_attention(Index a, AttentionTrace& t) const {
    const auto& d = params_.dims;
    t.followees.clear();
    t.social_context = Vector::Zero(d.latent);
    for (Index b : graph_.followees(a)) {
      AttentionUnit u;
      u.id = b;
      if (mode_.bottom != Pooling::avg) {
        u.input = social_input(a, b);
        evaluate(params_.social, u);
      }
      t.followees.push_back(std::move(u));
    }
    t.social_active = !t.followees.empty();
    pool_weights(t.followees, mode_.bottom);
    for (const auto& u : t.followees) {
      if (u.weight != 0.0) t.social_context.noalias() += u.weight * params_.user_aux.row(u.id).transpose();
    }
  }

  // Fills the upload and social parts of `t`; `exclude_item` is dropped
  // from the upload support.
  void bottom_layer(Index a, Index exclude_item, AttentionTrace& t) const {
    t.user = a;
    if (mode_.aspects[kUpload]) {
      upload_attention(a, exclude_item, t);
    } else {
      t.uploads.clear();
      t.upload_active = false;
      t.upload_context = Vector::Zero(params_.dims.latent);
    }
    if (mode_.aspects[kSocial]) {
      social_attention(a, t);
    } else {
      t.followees.clear();
      t.social_active = false;
      t.social_context = Vector::Zero(params_.dims.latent);
    }
  }

  // Aspect attention and final score for item i on top of a filled bottom layer.
  Real top_layer(Index a, Index i, AttentionTrace& t) const {
    t.item = i;
    aspect_attention(a, i, t);
    t.user_vector = params_.user_base.row(a).transpose();
    for (const auto& u : t.aspects) {
      if (u.weight != 0.0) t.user_vector.noalias() += u.weight * u.input;
    }
    t.score = params_.item_base.row(i).dot(t.user_vector);
    return t.score;
  }

  Vector creator_input(Index a, Index i) const {
    const Index who = mode_.creator_input_is_user ? a : graph_.creator(i);
    return params_.user_aux.row(who).transpose();
  }

  // Aspect-importance attention over the active aspects; expects the bottom
  // layer already filled in `t`.
  void aspect_attention(Index a, Index i, AttentionTrace& t) const {
    t.aspects.clear();
    for (int l = 0; l < kNumAspects; ++l) {
      if (!mode_.aspects[static_cast<std::size_t>(l)]) continue;
      AttentionUnit u;
      u.id = l;
      if (l == kUpload) {
        if (!t.upload_active) continue;
        u.input = t.upload_context;
      } else if (l == kSocial) {
        if (!t.social_active) continue;
        u.input = t.social_context;
      } else {
        u.input = creator_input(a, i);
      }
      if (mode_.top != Pooling::avg) evaluate(params_.aspect, u);
      t.aspects.push_back(std::move(u));
    }
    pool_weights(t.aspects, mode_.top);
  }

  Real predict(Index a, Index i, AttentionTrace& t) const {
    bottom_layer(a, i, t);
    return top_layer(a, i, t);
  }

  Real predict(Index a, Index i) const {
    AttentionTrace t;
    return predict(a, i, t);
  }

  // Scores two items for one user; the bottom layer is computed once when
  // neither item is among the user's uploads.
  void predict_pair(Index a, Index i, Index j, AttentionTrace& ti, AttentionTrace& tj) const {
    predict(a, i, ti);
    if (uploads_include(a, i) || uploads_include(a, j)) {
      predict(a, j, tj);
      return;
    }
    tj = ti;
    top_layer(a, j, tj);
  }

  // Scores many items for one user, sharing the bottom-layer work.
  std::vector<Real> score_items(Index a, std::span<const Index> items) const {
    std::vector<Real> out;
    out.reserve(items.size());
    AttentionTrace shared, own;
    bottom_layer(a, -1, shared);
    for (Index i : items) {
      out.push_back(uploads_include(a, i) ? predict(a, i, own) : top_layer(a, i, shared));
    }
    return out;
  }

  bool uploads_include(Index a, Index i) const {
    if (!mode_.aspects[kUpload]) return false;
    const auto up = graph_.uploads(a);
    return std::binary_search(up.begin(), up.end(), i);
  }

  // Accumulates upstream * d(score)/d(theta) into `g`. The trace must come
  // from predict() with the current parameters.
  void backward(const AttentionTrace& t, Real upstream, Gradients& g) const {
    const auto& p = params_;
    const Index a = t.user;
    const Index i = t.item;
    const auto w_i = p.item_base.row(i);

    g.params.item_base.row(i).noalias() += upstream * t.user_vector.transpose();
    g.params.user_base.row(a).noalias() += upstream * w_i;

    // Top layer.
    std::array<Vector, kNumAspects> d_aspect;
    std::vector<Real> d_weight(t.aspects.size());
    for (std::size_t k = 0; k < t.aspects.size(); ++k) {
      const auto& u = t.aspects[k];
      d_aspect[static_cast<std::size_t>(u.id)] = (upstream * u.weight) * w_i.transpose();
      d_weight[k] = upstream * w_i.dot(u.input);
    }
    if (mode_.top == Pooling::att) {
      const auto d_raw = softmax_backward(t.aspects, d_weight);
      for (std::size_t k = 0; k < t.aspects.size(); ++k) {
        const auto& u = t.aspects[k];
        unit_backward(p.aspect, g.params.aspect, u, d_raw[k],
                      [&](const Vector& dz) { d_aspect[static_cast<std::size_t>(u.id)] += dz; });
      }
    }

    for (const auto& u : t.aspects) {
      const Vector& dv = d_aspect[static_cast<std::size_t>(u.id)];
      if (u.id == kUpload) {
        upload_backward(t, dv, g);
      } else if (u.id == kSocial) {
        social_backward(t, dv, g);
      } else {
        const Index who = mode_.creator_input_is_user ? a : graph_.creator(i);
        g.params.user_aux.row(who).noalias() += dv.transpose();
      }
    }
  }

 private:
  void check_shapes() const {
    const auto& d = params_.dims;
    if (d.num_users != graph_.num_users() || d.num_items != graph_.num_items()) {
      throw Error("model dims (" + std::to_string(d.num_users) + " users, " + std::to_string(d.num_items) +
                  " items) do not match dataset (" + std::to_string(graph_.num_users()) + ", " +
                  std::to_string(graph_.num_items()) + ")");
    }
    if (bundle_.social.rows() != d.num_users || bundle_.social.cols() != d.social_dim) {
      throw Error("social embeddings are " + std::to_string(bundle_.social.rows()) + "x" +
                  std::to_string(bundle_.social.cols()) + ", model expects " + std::to_string(d.num_users) +
                  "x" + std::to_string(d.social_dim));
    }
    if (bundle_.item_content.rows() != d.num_items || bundle_.item_content.cols() != d.content_dim ||
        bundle_.user_content.rows() != d.num_users || bundle_.user_content.cols() != d.content_dim) {
      throw Error("content features do not match model dims");
    }
    if (bundle_.item_style.rows() != d.num_items || bundle_.item_style.cols() != d.style_dim ||
        bundle_.user_style.rows() != d.num_users || bundle_.user_style.cols() != d.style_dim) {
      throw Error("style features do not match model dims");
    }
  }

  void evaluate(const AttentionNet& net, AttentionUnit& u) const {
    const Real slope = params_.dims.negative_slope;
    u.pre.noalias() = net.weight * u.input;
    u.pre += net.bias;
    Real raw = 0.0;
    for (Index k = 0; k < u.pre.size(); ++k) raw += net.score[k] * detail::leaky(u.pre[k], slope);
    u.raw = raw;
  }

  // d_raw_k = w_k (dw_k - sum_j w_j dw_j)
  static std::vector<Real> softmax_backward(std::span<const AttentionUnit> units, std::span<const Real> d_weight) {
    Real dot = 0.0;
    for (std::size_t k = 0; k < units.size(); ++k) dot += units[k].weight * d_weight[k];
    std::vector<Real> d_raw(units.size());
    for (std::size_t k = 0; k < units.size(); ++k) d_raw[k] = units[k].weight * (d_weight[k] - dot);
    return d_raw;
  }

  // Backprop through raw = w . leaky(W z + b); hands dL/dz to `scatter`.
  template <typename Scatter>
  void unit_backward(const AttentionNet& net, AttentionNet& grad, const AttentionUnit& u, Real d_raw,
                     Scatter&& scatter) const {
    if (d_raw == 0.0) return;
    const Real slope = params_.dims.negative_slope;
    const Index h = u.pre.size();
    Vector d_pre(h);
    for (Index k = 0; k < h; ++k) {
      grad.score[k] += d_raw * detail::leaky(u.pre[k], slope);
      d_pre[k] = d_raw * net.score[k] * detail::leaky_slope_at(u.pre[k], slope);
    }
    grad.bias += d_pre;
    grad.weight.noalias() += d_pre * u.input.transpose();
    const Vector dz = net.weight.transpose() * d_pre;
    scatter(dz);
  }

  void upload_backward(const AttentionTrace& t, const Vector& d_ctx, Gradients& g) const {
    const auto& p = params_;
    std::vector<Real> d_weight(t.uploads.size());
    for (std::size_t k = 0; k < t.uploads.size(); ++k) {
      const auto& u = t.uploads[k];
      if (u.weight != 0.0) g.params.item_aux.row(u.id).noalias() += u.weight * d_ctx.transpose();
      d_weight[k] = d_ctx.dot(p.item_aux.row(u.id));
    }
    if (mode_.bottom != Pooling::att) return;
    const auto d_raw = softmax_backward(t.uploads, d_weight);
    for (std::size_t k = 0; k < t.uploads.size(); ++k) {
      const Index j = t.uploads[k].id;
      unit_backward(p.upload, g.params.upload, t.uploads[k], d_raw[k],
                    [&](const Vector& dz) { scatter_upload_input(t.user, j, dz, g); });
    }
  }

  void social_backward(const AttentionTrace& t, const Vector& d_ctx, Gradients& g) const {
    const auto& p = params_;
    std::vector<Real> d_weight(t.followees.size());
    for (std::size_t k = 0; k < t.followees.size(); ++k) {
      const auto& u = t.followees[k];
      if (u.weight != 0.0) g.params.user_aux.row(u.id).noalias() += u.weight * d_ctx.transpose();
      d_weight[k] = d_ctx.dot(p.user_aux.row(u.id));
    }
    if (mode_.bottom != Pooling::att) return;
    const auto d_raw = softmax_backward(t.followees, d_weight);
    for (std::size_t k = 0; k < t.followees.size(); ++k) {
      const Index b = t.followees[k].id;
      unit_backward(p.social, g.params.social, t.followees[k], d_raw[k],
                    [&](const Vector& dz) { scatter_social_input(t.user, b, dz, g); });
    }
  }

  // z = [p_a, q_a, x_j, w_j, e_a, Wc f_j, Ws f_j, Wc f_a, Ws f_a]
  Vector upload_input(Index a, Index j) const {
    const auto& p = params_;
    const auto& m = mode_.inputs;
    const Index D = p.dims.latent;
    const Index sd = p.dims.social_dim;
    Vector z = Vector::Zero(p.dims.upload_input());
    z.segment(0, D) = p.user_base.row(a);
    if (m.aux) z.segment(D, D) = p.user_aux.row(a);
    if (m.aux) z.segment(2 * D, D) = p.item_aux.row(j);
    z.segment(3 * D, D) = p.item_base.row(j);
    if (m.social) z.segment(4 * D, sd) = bundle_.social.row(a);
    const Index v = 4 * D + sd;
    if (m.content) z.segment(v, D) = visual_.item_content.row(j);
    if (m.style) z.segment(v + D, D) = visual_.item_style.row(j);
    if (m.content) z.segment(v + 2 * D, D) = visual_.user_content.row(a);
    if (m.style) z.segment(v + 3 * D, D) = visual_.user_style.row(a);
    return z;
  }

  void scatter_upload_input(Index a, Index j, const Vector& dz, Gradients& g) const {
    const auto& m = mode_.inputs;
    const Index D = params_.dims.latent;
    const Index v = 4 * D + params_.dims.social_dim;
    g.params.user_base.row(a).noalias() += dz.segment(0, D).transpose();
    if (m.aux) g.params.user_aux.row(a).noalias() += dz.segment(D, D).transpose();
    if (m.aux) g.params.item_aux.row(j).noalias() += dz.segment(2 * D, D).transpose();
    g.params.item_base.row(j).noalias() += dz.segment(3 * D, D).transpose();
    if (m.content) g.visual.item_content.row(j).noalias() += dz.segment(v, D).transpose();
    if (m.style) g.visual.item_style.row(j).noalias() += dz.segment(v + D, D).transpose();
    if (m.content) g.visual.user_content.row(a).noalias() += dz.segment(v + 2 * D, D).transpose();
    if (m.style) g.visual.user_style.row(a).noalias() += dz.segment(v + 3 * D, D).transpose();
  }

  // z = [p_a, p_b, q_a, q_b, e_a, e_b, Wc f_a, Ws f_a]
  Vector social_input(Index a, Index b) const {
    const auto& p = params_;
    const auto& m = mode_.inputs;
    const Index D = p.dims.latent;
    const Index sd = p.dims.social_dim;
    Vector z = Vector::Zero(p.dims.social_input());
    z.segment(0, D) = p.user_base.row(a);
    z.segment(D, D) = p.user_base.row(b);
    if (m.aux) z.segment(2 * D, D) = p.user_aux.row(a);
    if (m.aux) z.segment(3 * D, D) = p.user_aux.row(b);
    if (m.social) z.segment(4 * D, sd) = bundle_.social.row(a);
    if (m.social) z.segment(4 * D + sd, sd) = bundle_.social.row(b);
    const Index v = 4 * D + 2 * sd;
    if (m.content) z.segment(v, D) = visual_.user_content.row(a);
    if (m.style) z.segment(v + D, D) = visual_.user_style.row(a);
    return z;
  }

  void scatter_social_input(Index a, Index b, const Vector& dz, Gradients& g) const {
    const auto& m = mode_.inputs;
    const Index D = params_.dims.latent;
    const Index v = 4 * D + 2 * params_.dims.social_dim;
    g.params.user_base.row(a).noalias() += dz.segment(0, D).transpose();
    g.params.user_base.row(b).noalias() += dz.segment(D, D).transpose();
    if (m.aux) g.params.user_aux.row(a).noalias() += dz.segment(2 * D, D).transpose();
    if (m.aux) g.params.user_aux.row(b).noalias() += dz.segment(3 * D, D).transpose();
    if (m.content) g.visual.user_content.row(a).noalias() += dz.segment(v, D).transpose();
    if (m.style) g.visual.user_style.row(a).noalias() += dz.segment(v + D, D).transpose();
  }

  const ModelParams& params_;
  const InteractionDataset& graph_;
  const EmbeddingBundle& bundle_;
  AttentionMode mode_;
  VisualProjection visual_;
};

}  // namespace hasc
