#pragma once

// DeepWalk: truncated uniform random walks over the (undirected) social
// graph, fed to skip-gram with negative sampling.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <span>
#include <thread>
#include <vector>

#include "hasc/core.hpp"
#include "hasc/data/dataset.hpp"

namespace hasc {

using Walk = std::vector<Index>;

// Undirected adjacency, sorted and deduplicated.
inline std::vector<std::vector<Index>> undirected_adjacency(Index num_vertices,
                                                            std::span<const SocialEdge> edges) {
  std::vector<std::vector<Index>> adj(static_cast<std::size_t>(num_vertices));
  for (const auto& e : edges) {
    if (e.follower < 0 || e.follower >= num_vertices || e.followee < 0 || e.followee >= num_vertices) {
      throw Error("social edge references a vertex out of range");
    }
    if (e.follower == e.followee) continue;
    adj[static_cast<std::size_t>(e.follower)].push_back(e.followee);
    adj[static_cast<std::size_t>(e.followee)].push_back(e.follower);
  }
  for (auto& nb : adj) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  return adj;
}

struct WalkConfig {
  Index walks_per_vertex = 80;
  Index walk_length = 40;
  std::uint64_t seed = 0;
};

// Walks are grouped by start vertex; each vertex draws from its own seeded
// stream, so the corpus does not depend on generation order.
inline std::vector<Walk> deepwalk_walks(Index num_vertices, std::span<const SocialEdge> edges,
                                        const WalkConfig& cfg) {
  const auto adj = undirected_adjacency(num_vertices, edges);
  std::vector<Walk> walks;
  walks.reserve(static_cast<std::size_t>(num_vertices * cfg.walks_per_vertex));
  for (Index v = 0; v < num_vertices; ++v) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(v)));
    for (Index w = 0; w < cfg.walks_per_vertex; ++w) {
      Walk walk{v};
      const auto& start_nb = adj[static_cast<std::size_t>(v)];
      if (!start_nb.empty()) {
        walk.reserve(static_cast<std::size_t>(cfg.walk_length));
        while (static_cast<Index>(walk.size()) < cfg.walk_length) {
          const auto& nb = adj[static_cast<std::size_t>(walk.back())];
          walk.push_back(nb[static_cast<std::size_t>(uniform_index(rng, static_cast<Index>(nb.size())))]);
        }
      }
      walks.push_back(std::move(walk));
    }
  }
  return walks;
}

struct SkipGramConfig {
  Index dim = 128;
  Index window = 10;
  Index negative_samples = 5;
  Index epochs = 1;
  Real learning_rate = 0.025;
  std::uint64_t seed = 0;
  // 1 = strict serial, bit-reproducible. >1 = lock-free concurrent updates.
  Index threads = 1;
};

namespace detail {

// Alias-free sampler over a fixed discrete distribution (inverse CDF).
class DiscreteSampler {
 public:
  explicit DiscreteSampler(std::span<const Real> weights) {
    cdf_.reserve(weights.size());
    Real total = 0.0;
    for (Real w : weights) {
      total += w;
      cdf_.push_back(total);
    }
    total_ = total;
  }
  bool empty() const { return total_ <= 0.0; }
  Index operator()(Rng& rng) const {
    const Real u = uniform_real(rng) * total_;
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) --it;
    return static_cast<Index>(it - cdf_.begin());
  }

 private:
  std::vector<Real> cdf_;
  Real total_ = 0.0;
};

inline Real logistic(Real x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const Real e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

// Input vectors are initialized uniformly in [-0.5/d, 0.5/d] and output
// vectors at zero, as in word2vec; the input vectors are returned.
// Learning rate decays linearly to 1e-4 of its start over all epochs.
inline Matrix skipgram_train(std::span<const Walk> walks, Index num_vertices, const SkipGramConfig& cfg) {
  if (walks.empty()) throw Error("skipgram_train: empty walk corpus");
  const Index d = cfg.dim;
  Matrix input(num_vertices, d);
  Matrix output = Matrix::Zero(num_vertices, d);
  {
    Rng rng(cfg.seed);
    for (Index k = 0; k < input.size(); ++k) input.data()[k] = (uniform_real(rng) - 0.5) / static_cast<Real>(d);
  }
  if (cfg.epochs <= 0) return input;

  // Negative distribution: degree^(3/4), where degree counts distinct
  // neighbours seen in the corpus.
  std::vector<Real> weights(static_cast<std::size_t>(num_vertices), 0.0);
  {
    std::vector<std::vector<Index>> nb(static_cast<std::size_t>(num_vertices));
    for (const auto& w : walks) {
      for (std::size_t k = 1; k < w.size(); ++k) {
        nb[static_cast<std::size_t>(w[k - 1])].push_back(w[k]);
        nb[static_cast<std::size_t>(w[k])].push_back(w[k - 1]);
      }
    }
    for (std::size_t v = 0; v < nb.size(); ++v) {
      std::sort(nb[v].begin(), nb[v].end());
      const auto deg = std::unique(nb[v].begin(), nb[v].end()) - nb[v].begin();
      weights[v] = std::pow(static_cast<Real>(deg), 0.75);
    }
  }
  const detail::DiscreteSampler negatives(weights);

  Index total_tokens = 0;
  for (const auto& w : walks) total_tokens += static_cast<Index>(w.size());
  const Index total_steps = total_tokens * cfg.epochs;
  const Real min_lr = cfg.learning_rate * 1e-4;

  // Walks arrive grouped by start vertex; visit them in a seeded random order.
  std::vector<std::size_t> order(walks.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  {
    Rng rng(derive_seed(cfg.seed, 0xFFFF));
    shuffle(order.begin(), order.end(), rng);
  }

  const auto train_range = [&](std::size_t begin, std::size_t end, std::uint64_t stream,
                               std::atomic<Index>& progress) {
    Rng rng(derive_seed(cfg.seed, stream));
    Vector grad_in(d);
    Index local = 0;
    for (Index epoch = 0; epoch < cfg.epochs; ++epoch) {
      for (std::size_t wi = begin; wi < end; ++wi) {
        const auto& walk = walks[order[wi]];
        const auto len = static_cast<Index>(walk.size());
        for (Index pos = 0; pos < len; ++pos) {
          const Index done = progress.load(std::memory_order_relaxed) + local;
          const Real lr = std::max(min_lr, cfg.learning_rate * (1.0 - static_cast<Real>(done) /
                                                                          static_cast<Real>(total_steps)));
          if (++local == 1024) {
            progress.fetch_add(local, std::memory_order_relaxed);
            local = 0;
          }
          const Index center = walk[static_cast<std::size_t>(pos)];
          const Index lo = std::max<Index>(0, pos - cfg.window);
          const Index hi = std::min<Index>(len - 1, pos + cfg.window);
          for (Index c = lo; c <= hi; ++c) {
            if (c == pos) continue;
            const Index context = walk[static_cast<std::size_t>(c)];
            grad_in.setZero();
            auto in_row = input.row(center);
            for (Index s = 0; s <= cfg.negative_samples; ++s) {
              Index target;
              Real label;
              if (s == 0) {
                target = context;
                label = 1.0;
              } else {
                if (negatives.empty()) break;
                target = negatives(rng);
                if (target == context) continue;
                label = 0.0;
              }
              auto out_row = output.row(target);
              const Real g = (label - detail::logistic(in_row.dot(out_row))) * lr;
              grad_in.noalias() += g * out_row.transpose();
              out_row.noalias() += g * in_row;
            }
            in_row.noalias() += grad_in.transpose();
          }
        }
      }
    }
    progress.fetch_add(local, std::memory_order_relaxed);
  };

  std::atomic<Index> progress{0};
  if (cfg.threads <= 1) {
    train_range(0, walks.size(), 0, progress);
  } else {
    std::vector<std::thread> pool;
    const auto n = walks.size();
    const auto t = static_cast<std::size_t>(cfg.threads);
    for (std::size_t k = 0; k < t; ++k) {
      pool.emplace_back(train_range, k * n / t, (k + 1) * n / t, k, std::ref(progress));
    }
    for (auto& th : pool) th.join();
  }
  return input;
}

}  // namespace hasc
