#pragma once

#include <optional>
#include <string>

#include "hasc/core.hpp"

namespace hasc {

struct ModelDims {
  Index num_users = 0;
  Index num_items = 0;
  Index latent = 15;          // D
  Index hidden = 20;          // h, shared by the three attention networks
  Index social_dim = 128;     // d
  Index content_dim = 4096;
  Index style_dim = 5120;
  Real negative_slope = 0.01;  // leaky rectifier

  Index upload_input() const { return 8 * latent + social_dim; }
  Index social_input() const { return 6 * latent + 2 * social_dim; }
  Index aspect_input() const { return latent; }

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

// score = w . leaky(W z + b)
struct AttentionNet {
  Matrix weight;  // h x input
  Vector bias;    // h
  Vector score;   // h
};

// Also used as the gradient container: gradients are congruent to the
// parameters they belong to.
struct ModelParams {
  ModelDims dims;
  Matrix user_base;     // P  M x D
  Matrix user_aux;      // Q  M x D
  Matrix item_base;     // W  N x D
  Matrix item_aux;      // X  N x D
  Matrix content_proj;  // W^c  D x 4096
  Matrix style_proj;    // W^s  D x 5120
  AttentionNet upload;  // Theta_u
  AttentionNet social;  // Theta_s
  AttentionNet aspect;  // Theta_a
};

// Visits every tensor in a fixed order. `f(name, tensor)` receives either a
// Matrix or a Vector.
template <typename Params, typename Fn>
void for_each_tensor(Params& p, Fn&& f) {
  f("user_base", p.user_base);
  f("user_aux", p.user_aux);
  f("item_base", p.item_base);
  f("item_aux", p.item_aux);
  f("content_proj", p.content_proj);
  f("style_proj", p.style_proj);
  f("upload.weight", p.upload.weight);
  f("upload.bias", p.upload.bias);
  f("upload.score", p.upload.score);
  f("social.weight", p.social.weight);
  f("social.bias", p.social.bias);
  f("social.score", p.social.score);
  f("aspect.weight", p.aspect.weight);
  f("aspect.bias", p.aspect.bias);
  f("aspect.score", p.aspect.score);
}

// Applies `f(name, a, b)` to matching tensors of two congruent parameter sets.
template <typename A, typename B, typename Fn>
void zip_tensors(A& a, B& b, Fn&& f) {
  f("user_base", a.user_base, b.user_base);
  f("user_aux", a.user_aux, b.user_aux);
  f("item_base", a.item_base, b.item_base);
  f("item_aux", a.item_aux, b.item_aux);
  f("content_proj", a.content_proj, b.content_proj);
  f("style_proj", a.style_proj, b.style_proj);
  f("upload.weight", a.upload.weight, b.upload.weight);
  f("upload.bias", a.upload.bias, b.upload.bias);
  f("upload.score", a.upload.score, b.upload.score);
  f("social.weight", a.social.weight, b.social.weight);
  f("social.bias", a.social.bias, b.social.bias);
  f("social.score", a.social.score, b.social.score);
  f("aspect.weight", a.aspect.weight, b.aspect.weight);
  f("aspect.bias", a.aspect.bias, b.aspect.bias);
  f("aspect.score", a.aspect.score, b.aspect.score);
}

inline ModelParams zeros_like(const ModelDims& d) {
  ModelParams p;
  p.dims = d;
  p.user_base = Matrix::Zero(d.num_users, d.latent);
  p.user_aux = Matrix::Zero(d.num_users, d.latent);
  p.item_base = Matrix::Zero(d.num_items, d.latent);
  p.item_aux = Matrix::Zero(d.num_items, d.latent);
  p.content_proj = Matrix::Zero(d.latent, d.content_dim);
  p.style_proj = Matrix::Zero(d.latent, d.style_dim);
  const auto net = [&](Index input) {
    return AttentionNet{Matrix::Zero(d.hidden, input), Vector::Zero(d.hidden), Vector::Zero(d.hidden)};
  };
  p.upload = net(d.upload_input());
  p.social = net(d.social_input());
  p.aspect = net(d.aspect_input());
  return p;
}

inline ModelParams zeros_like(const ModelParams& p) { return zeros_like(p.dims); }

inline void set_zero(ModelParams& p) {
  for_each_tensor(p, [](const char*, auto& t) { t.setZero(); });
}

inline bool all_finite(const ModelParams& p) {
  bool ok = true;
  for_each_tensor(p, [&](const char*, const auto& t) { ok = ok && t.allFinite(); });
  return ok;
}

inline Index parameter_count(const ModelParams& p) {
  Index n = 0;
  for_each_tensor(p, [&](const char*, const auto& t) { n += t.size(); });
  return n;
}

struct WarmStart {
  Matrix user_base;  // P
  Matrix item_base;  // W
};

inline constexpr Real kInitStddev = 0.1;

// Every entry ~ Normal(0, 0.1), drawn tensor by tensor in for_each_tensor
// order from one seeded stream; P and W are then overwritten by the warm
// start when one is given.
inline ModelParams init_params(const ModelDims& dims, std::uint64_t seed,
                               const std::optional<WarmStart>& warm = std::nullopt) {
  ModelParams p = zeros_like(dims);
  Rng rng(seed);
  for_each_tensor(p, [&](const char*, auto& t) {
    for (Index k = 0; k < t.size(); ++k) t.data()[k] = kInitStddev * standard_normal(rng);
  });
  if (warm) {
    if (warm->user_base.rows() != dims.num_users || warm->user_base.cols() != dims.latent ||
        warm->item_base.rows() != dims.num_items || warm->item_base.cols() != dims.latent) {
      throw Error("warm start shape mismatch: got P " + std::to_string(warm->user_base.rows()) + "x" +
                  std::to_string(warm->user_base.cols()) + ", W " + std::to_string(warm->item_base.rows()) +
                  "x" + std::to_string(warm->item_base.cols()));
    }
    p.user_base = warm->user_base;
    p.item_base = warm->item_base;
  }
  return p;
}

}  // namespace hasc
