#pragma once

// Pairwise ranking training: each epoch pairs every train positive with fresh
// pseudo-negatives, shuffles the triples and takes one Adam step per
// minibatch on the batch-mean loss. fit() adds BPR warm start, per-epoch
// validation and early stopping.

#include <algorithm>
#include <chrono>
#include <functional>
#include <optional>
#include <thread>
#include <vector>

#include <json.hpp>

#include "hasc/core.hpp"
#include "hasc/data/sampling.hpp"
#include "hasc/data/split.hpp"
#include "hasc/embed/bundle.hpp"
#include "hasc/eval/evaluate.hpp"
#include "hasc/model/mode.hpp"
#include "hasc/model/params.hpp"
#include "hasc/model/scorer.hpp"
#include "hasc/train/adam.hpp"
#include "hasc/train/loss.hpp"

namespace hasc {

struct TrainConfig {
  Index latent = 15;
  Index hidden = 20;
  Real lambda = 0.01;
  Index batch_size = 512;
  Index negatives = 5;
  Index max_epochs = 50;
  AdamConfig adam;
  Index patience = 2;
  std::uint64_t seed = 0;
  AttentionMode mode;
  bool warm_start = true;
  Index bpr_epochs = 20;
  Index threads = 1;
  Index validation_candidates = 100;
  Real negative_slope = 0.01;

  void validate() const {
    if (latent < 1 || hidden < 1) throw Error("latent and hidden sizes must be positive");
    if (lambda < 0.0) throw Error("lambda must be >= 0");
    if (batch_size < 1) throw Error("batch size must be positive");
    if (negatives < 1) throw Error("negatives per positive must be positive");
    if (max_epochs < 0 || bpr_epochs < 0) throw Error("epoch counts must be >= 0");
    if (patience < 0) throw Error("patience must be >= 0");
    if (threads < 1) throw Error("threads must be >= 1");
    if (validation_candidates < 1) throw Error("validation candidates must be positive");
    if (!(adam.learning_rate > 0.0)) throw Error("learning rate must be positive");
    if (!(negative_slope >= 0.0 && negative_slope < 1.0)) throw Error("negative slope must lie in [0, 1)");
  }
};

// Independent RNG streams derived from the run seed.
namespace stream {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kBprInit = 2;
inline constexpr std::uint64_t kValidation = 3;
inline constexpr std::uint64_t kEpoch = 1000;
inline constexpr std::uint64_t kBprEpoch = 1'000'000;
}  // namespace stream

struct Triple {
  Index user = 0;
  Index pos = 0;
  Index neg = 0;
};

// All (a, i, j): i in R_a, `negatives` fresh j per positive, shuffled.
inline std::vector<Triple> build_triples(const InteractionDataset& train, Index negatives, Rng& rng) {
  std::vector<Triple> out;
  out.reserve(static_cast<std::size_t>(train.num_ratings() * negatives));
  for (Index a = 0; a < train.num_users(); ++a) {
    for (Index i : train.rated_items(a)) {
      for (Index j : sample_negatives(train, a, negatives, rng)) out.push_back({a, i, j});
    }
  }
  shuffle(out.begin(), out.end(), rng);
  return out;
}

inline ModelDims model_dims(const InteractionDataset& train, const EmbeddingBundle& bundle, Index latent,
                            Index hidden) {
  ModelDims d;
  d.num_users = train.num_users();
  d.num_items = train.num_items();
  d.latent = latent;
  d.hidden = hidden;
  d.social_dim = bundle.social_dim();
  d.content_dim = bundle.content_dim();
  d.style_dim = bundle.style_dim();
  return d;
}

// Embedding rows (of P, Q, W, X) that enter the forward computation of one
// training triple; each is regularized once per triple.
struct TouchedRows {
  std::vector<Index> user_base, user_aux, item_base, item_aux;

  void clear() {
    user_base.clear();
    user_aux.clear();
    item_base.clear();
    item_aux.clear();
  }

  void add(const AttentionTrace& t, const AttentionMode& mode, const InteractionDataset& graph) {
    user_base.push_back(t.user);
    item_base.push_back(t.item);
    const bool inputs = mode.bottom != Pooling::avg;
    for (const auto& u : t.uploads) {
      item_aux.push_back(u.id);
      if (inputs) item_base.push_back(u.id);
    }
    for (const auto& u : t.followees) {
      user_aux.push_back(u.id);
      if (inputs) user_base.push_back(u.id);
    }
    if (inputs && mode.inputs.aux && (!t.uploads.empty() || !t.followees.empty())) user_aux.push_back(t.user);
    for (const auto& u : t.aspects) {
      if (u.id == kCreator) user_aux.push_back(mode.creator_input_is_user ? t.user : graph.creator(t.item));
    }
  }

  void unique() {
    for (auto* v : {&user_base, &user_aux, &item_base, &item_aux}) {
      std::sort(v->begin(), v->end());
      v->erase(std::unique(v->begin(), v->end()), v->end());
    }
  }

  // Adds scale * d(lambda ||rows||^2) to `g` and returns lambda ||rows||^2.
  Real apply(const ModelParams& p, Real lambda, Real scale, ModelParams& g) const {
    Real sq = 0.0;
    const auto rows = [&](const std::vector<Index>& ids, const Matrix& m, Matrix& gm) {
      for (Index r : ids) {
        sq += m.row(r).squaredNorm();
        gm.row(r).noalias() += (2.0 * lambda * scale) * m.row(r);
      }
    };
    rows(user_base, p.user_base, g.user_base);
    rows(user_aux, p.user_aux, g.user_aux);
    rows(item_base, p.item_base, g.item_base);
    rows(item_aux, p.item_aux, g.item_aux);
    return lambda * sq;
  }
};

struct TrainState {
  ModelParams params;
  Adam adam;
  Index epoch = 0;

  TrainState(ModelParams p, const AdamConfig& cfg) : params(std::move(p)), adam(params.dims, cfg) {}
};

namespace detail {

// Forward/backward for triples[begin, end) into `g`; returns the summed loss.
inline Real accumulate_batch(const Scorer& scorer, std::span<const Triple> triples, Real lambda, Real scale,
                             Gradients& g) {
  AttentionTrace tp, tn;
  TouchedRows touched;
  Real loss = 0.0;
  for (const auto& tr : triples) {
    scorer.predict_pair(tr.user, tr.pos, tr.neg, tp, tn);
    loss += ranking_loss(tp.score, tn.score);
    const Real slope = ranking_loss_slope(tp.score, tn.score) * scale;
    scorer.backward(tp, slope, g);
    scorer.backward(tn, -slope, g);
    if (lambda > 0.0) {
      touched.clear();
      touched.add(tp, scorer.mode(), scorer.graph());
      touched.add(tn, scorer.mode(), scorer.graph());
      touched.unique();
      loss += touched.apply(scorer.params(), lambda, scale, g.params);
    }
  }
  return loss;
}

inline void add_into(Gradients& dst, const Gradients& src) {
  zip_tensors(dst.params, src.params, [](const char*, auto& a, const auto& b) { a += b; });
  dst.visual.item_content += src.visual.item_content;
  dst.visual.item_style += src.visual.item_style;
  dst.visual.user_content += src.visual.user_content;
  dst.visual.user_style += src.visual.user_style;
}

}  // namespace detail

// One pass over freshly sampled triples. Returns the mean per-triple loss.
// With threads > 1 each batch is cut into contiguous chunks whose gradients
// are summed in chunk order, so results depend only on the thread count.
inline Real train_epoch(TrainState& state, const InteractionDataset& train, const EmbeddingBundle& bundle,
                        const TrainConfig& cfg, std::uint64_t epoch_seed) {
  Rng rng(epoch_seed);
  const auto triples = build_triples(train, cfg.negatives, rng);
  Scorer scorer(state.params, train, bundle, cfg.mode);
  const auto threads = static_cast<std::size_t>(cfg.threads);
  std::vector<Gradients> grads;
  grads.reserve(threads);
  for (std::size_t k = 0; k < threads; ++k) grads.emplace_back(state.params.dims);
  std::vector<Real> losses(threads, 0.0);

  Real total = 0.0;
  const std::span<const Triple> all(triples);
  for (std::size_t begin = 0; begin < all.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
    const auto batch = all.subspan(begin, std::min(static_cast<std::size_t>(cfg.batch_size), all.size() - begin));
    const Real scale = 1.0 / static_cast<Real>(batch.size());
    for (auto& g : grads) g.reset();
    if (threads == 1 || batch.size() < threads) {
      total += detail::accumulate_batch(scorer, batch, cfg.lambda, scale, grads[0]);
    } else {
      std::vector<std::jthread> pool;
      const std::size_t chunk = (batch.size() + threads - 1) / threads;
      for (std::size_t k = 0; k < threads; ++k) {
        const std::size_t lo = std::min(batch.size(), k * chunk);
        const std::size_t hi = std::min(batch.size(), lo + chunk);
        pool.emplace_back([&, k, lo, hi] {
          losses[k] = detail::accumulate_batch(scorer, batch.subspan(lo, hi - lo), cfg.lambda, scale, grads[k]);
        });
      }
      pool.clear();
      for (std::size_t k = 0; k < threads; ++k) {
        total += losses[k];
        if (k > 0) detail::add_into(grads[0], grads[k]);
      }
    }
    grads[0].finalize(bundle);
    state.adam.step(state.params, grads[0].params);
    scorer.refresh();
  }
  ++state.epoch;
  return triples.empty() ? 0.0 : total / static_cast<Real>(triples.size());
}

// Plain matrix-factorization BPR (score = p_a . w_i) on the same machinery,
// without visual or social inputs. Returns (P, W).
inline WarmStart bpr_pretrain(const InteractionDataset& train, const TrainConfig& cfg) {
  if (train.num_ratings() == 0) throw Error("BPR pretraining needs a nonempty train set");
  ModelDims dims;
  dims.num_users = train.num_users();
  dims.num_items = train.num_items();
  dims.latent = cfg.latent;
  dims.hidden = cfg.hidden;
  dims.social_dim = 0;
  dims.content_dim = 0;
  dims.style_dim = 0;
  EmbeddingBundle empty;
  empty.social = Matrix(dims.num_users, 0);
  empty.item_content = Matrix(dims.num_items, 0);
  empty.item_style = Matrix(dims.num_items, 0);
  empty.user_content = Matrix(dims.num_users, 0);
  empty.user_style = Matrix(dims.num_users, 0);

  TrainConfig bpr = cfg;
  bpr.mode = AttentionMode::bpr();
  TrainState state(init_params(dims, derive_seed(cfg.seed, stream::kBprInit)), cfg.adam);
  for (Index e = 0; e < cfg.bpr_epochs; ++e) {
    train_epoch(state, train, empty, bpr, derive_seed(cfg.seed, stream::kBprEpoch + static_cast<std::uint64_t>(e)));
  }
  return {std::move(state.params.user_base), std::move(state.params.item_base)};
}

struct EpochRecord {
  Index epoch = 0;
  std::optional<Real> mean_loss;  // absent for the epoch-0 header
  std::optional<Real> val_hr5;
  std::optional<Real> val_ndcg5;
  double wall_ms = 0.0;
};

inline nlohmann::ordered_json to_json(const EpochRecord& r) {
  const auto opt = [](const std::optional<Real>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  return {{"epoch", r.epoch},
          {"mean_loss", opt(r.mean_loss)},
          {"val_hr5", opt(r.val_hr5)},
          {"val_ndcg5", opt(r.val_ndcg5)},
          {"wall_ms", r.wall_ms}};
}

struct FitResult {
  ModelParams params;  // best epoch
  Index best_epoch = 0;
  Index epochs_run = 0;
  std::vector<EpochRecord> log;  // header (epoch 0) + one record per epoch
};

// Validation HR@5 / NDCG@5 with a fixed candidate draw per run.
inline std::pair<Real, Real> validation_metrics(const ModelParams& params, const SplitDataset& split,
                                                const EmbeddingBundle& bundle, const TrainConfig& cfg) {
  Scorer scorer(params, split.train, bundle, cfg.mode);
  EvalConfig ec;
  ec.ks = {5};
  ec.candidates = cfg.validation_candidates;
  ec.repeats = 1;
  ec.seed = derive_seed(cfg.seed, stream::kValidation);
  const auto report = evaluate(score_fn(scorer), split, split.validation, ec);
  return {report.metrics[0].hr.mean, report.metrics[0].ndcg.mean};
}

// Trains up to max_epochs. An epoch is "bad" when validation HR@5 and NDCG@5
// both fall below their running best; training stops once more than
// `patience` consecutive epochs are bad, returning the last good epoch.
// Without validation pairs every epoch runs and the last one is returned.
inline FitResult fit(const SplitDataset& split, const EmbeddingBundle& bundle, const TrainConfig& cfg,
                     const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  cfg.validate();
  bundle.check(split.train.num_users(), split.train.num_items());
  auto dims = model_dims(split.train, bundle, cfg.latent, cfg.hidden);
  dims.negative_slope = cfg.negative_slope;
  const auto clock = std::chrono::steady_clock::now;
  const auto started = clock();
  const auto elapsed = [&] { return std::chrono::duration<double, std::milli>(clock() - started).count(); };

  std::optional<WarmStart> warm;
  if (cfg.warm_start && cfg.bpr_epochs > 0) warm = bpr_pretrain(split.train, cfg);
  TrainState state(init_params(dims, derive_seed(cfg.seed, stream::kInit), warm), cfg.adam);
  Scorer(state.params, split.train, bundle, cfg.mode);  // shape check before any epoch

  const bool validate = !split.validation.empty();
  FitResult result;
  const auto record = [&](EpochRecord r) {
    r.wall_ms = elapsed();
    if (on_epoch) on_epoch(r);
    result.log.push_back(r);
  };

  EpochRecord header;
  Real best_hr = 0.0, best_ndcg = 0.0;
  if (validate) {
    std::tie(best_hr, best_ndcg) = validation_metrics(state.params, split, bundle, cfg);
    header.val_hr5 = best_hr;
    header.val_ndcg5 = best_ndcg;
  }
  record(header);
  result.params = state.params;

  Index bad = 0;
  for (Index e = 1; e <= cfg.max_epochs; ++e) {
    EpochRecord r;
    r.epoch = e;
    r.mean_loss = train_epoch(state, split.train, bundle, cfg,
                              derive_seed(cfg.seed, stream::kEpoch + static_cast<std::uint64_t>(e)));
    if (!all_finite(state.params)) throw Error("training diverged at epoch " + std::to_string(e));
    result.epochs_run = e;
    if (!validate) {
      record(r);
      result.params = state.params;
      result.best_epoch = e;
      continue;
    }
    const auto [hr, ndcg] = validation_metrics(state.params, split, bundle, cfg);
    r.val_hr5 = hr;
    r.val_ndcg5 = ndcg;
    record(r);
    if (hr < best_hr && ndcg < best_ndcg) {
      if (++bad > cfg.patience) break;
      continue;
    }
    bad = 0;
    best_hr = std::max(best_hr, hr);
    best_ndcg = std::max(best_ndcg, ndcg);
    result.params = state.params;
    result.best_epoch = e;
  }
  return result;
}

}  // namespace hasc
