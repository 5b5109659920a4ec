#pragma once

#include <cmath>
#include <span>
#include <type_traits>
#include <vector>

#include "hasc/core.hpp"
#include "hasc/model/params.hpp"

namespace hasc {

struct AdamConfig {
  Real learning_rate = 0.0005;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real epsilon = 1e-8;
};

// Dense Adam with bias correction; moments are congruent to the parameters.
class Adam {
 public:
  Adam(const ModelDims& dims, AdamConfig cfg)
      : cfg_(cfg), first_(zeros_like(dims)), second_(zeros_like(dims)) {}

  void step(ModelParams& params, const ModelParams& grad) {
    ++steps_;
    const Real c1 = 1.0 - std::pow(cfg_.beta1, static_cast<Real>(steps_));
    const Real c2 = 1.0 - std::pow(cfg_.beta2, static_cast<Real>(steps_));
    const Real b1 = cfg_.beta1, b2 = cfg_.beta2, lr = cfg_.learning_rate, eps = cfg_.epsilon;
    const auto p = spans(params);
    const auto g = spans(grad);
    const auto m = spans(first_);
    const auto v = spans(second_);
    for (std::size_t t = 0; t < p.size(); ++t) {
      if (g[t].size() != p[t].size()) throw Error("adam: gradient does not match parameter layout");
      for (std::size_t k = 0; k < p[t].size(); ++k) {
        const Real gk = g[t][k];
        Real& mk = m[t][k];
        Real& vk = v[t][k];
        mk = b1 * mk + (1.0 - b1) * gk;
        vk = b2 * vk + (1.0 - b2) * gk * gk;
        p[t][k] -= lr * (mk / c1) / (std::sqrt(vk / c2) + eps);
      }
    }
  }

  Index steps() const { return steps_; }
  const ModelParams& first_moment() const { return first_; }
  const ModelParams& second_moment() const { return second_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  template <typename Params, typename T = std::conditional_t<std::is_const_v<Params>, const Real, Real>>
  static std::vector<std::span<T>> spans(Params& params) {
    std::vector<std::span<T>> out;
    for_each_tensor(params, [&](const char*, auto& t) {
      out.emplace_back(t.data(), static_cast<std::size_t>(t.size()));
    });
    return out;
  }

  AdamConfig cfg_;
  ModelParams first_;
  ModelParams second_;
  Index steps_ = 0;
};

}  // namespace hasc
