// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <Eigen/Eigenvalues>

#include "hasc/data/split.hpp"
#include "hasc/data/synthetic.hpp"
#include "hasc/embed/deepwalk.hpp"
#include "hasc/embed/gram.hpp"
#include "hasc/embed/profiles.hpp"
#include "hasc/eval/ablation.hpp"
#include "hasc/eval/attention_dump.hpp"
#include "hasc/eval/evaluate.hpp"
#include "hasc/io/dense_matrix.hpp"
#include "hasc/train/gradcheck.hpp"
#include "hasc/train/trainer.hpp"
#include "oracles.hpp"

using namespace hasc;
using namespace hasc::test;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1. Analytic gradients against central differences in all pooling pairs.
Outcome gradients() {
  TinySpec spec;  // M=8, N=12, D=4, h=5
  const auto start = std::chrono::steady_clock::now();
  const auto t = make_tiny_instance(spec, 2024);
  const auto triples = tiny_triples(t.graph, 2025);
  Real worst = 0.0;
  std::string worst_at;
  for (const char* pair : kPoolingPairs) {
    const auto r = gradient_check_by_user(t.params, t.graph, t.bundle, mode_of(pair), triples, 0.01, 1e-5);
    for (const auto& c : r.tensors) {
      if (c.max_rel_error > worst) {
        worst = c.max_rel_error;
        worst_at = std::string(pair) + " " + c.name;
      }
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {worst < 1e-4 && secs < 60.0,
          fmt("max rel error %.2e (%s), %.1f s", worst, worst_at.c_str(), secs)};
}

// 2. Normalization, shift invariance and MAX scale invariance.
Outcome invariants() {
  Real sum_dev = 0.0, shift_dev = 0.0;
  Index max_changes = 0;
  Rng rng(77);
  const auto total = [](const std::vector<AttentionUnit>& u) {
    Real s = 0.0;
    for (const auto& x : u) s += x.weight;
    return s;
  };
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto t = make_tiny_instance(TinySpec{}, 10'000 + seed);
    const Index a = uniform_index(rng, t.graph.num_users()), i = uniform_index(rng, t.graph.num_items());
    AttentionTrace tr;
    Scorer(t.params, t.graph, t.bundle, mode_of("att,att")).predict(a, i, tr);
    for (const auto* units : {&tr.uploads, &tr.followees, &tr.aspects}) {
      if (units->empty()) continue;
      sum_dev = std::max(sum_dev, std::abs(total(*units) - 1.0));
      auto shifted = *units;
      const Real c = 100.0 * standard_normal(rng);
      for (auto& u : shifted) u.raw += c;
      pool_weights(shifted, Pooling::att);
      for (std::size_t k = 0; k < shifted.size(); ++k) {
        shift_dev = std::max(shift_dev, std::abs(shifted[k].weight - (*units)[k].weight));
      }
    }
    // Scaling every scoring vector w by s > 0 scales each raw score by s.
    const auto mode = mode_of("max,max");
    ModelParams scaled = t.params;
    const Real s = std::exp(2.0 * standard_normal(rng));
    scaled.upload.score *= s;
    scaled.social.score *= s;
    scaled.aspect.score *= s;
    AttentionTrace before, after;
    Scorer(t.params, t.graph, t.bundle, mode).predict(a, i, before);
    Scorer(scaled, t.graph, t.bundle, mode).predict(a, i, after);
    const auto same = [](const std::vector<AttentionUnit>& x, const std::vector<AttentionUnit>& y) {
      if (x.size() != y.size()) return false;
      for (std::size_t k = 0; k < x.size(); ++k) {
        if (x[k].weight != y[k].weight) return false;
      }
      return true;
    };
    if (!same(before.uploads, after.uploads) || !same(before.followees, after.followees) ||
        !same(before.aspects, after.aspects)) {
      ++max_changes;
    }
  }
  return {sum_dev <= 1e-12 && shift_dev < 1e-10 && max_changes == 0,
          fmt("max |sum-1| %.1e, max shift change %.1e, MAX selections changed %lld/1000", sum_dev, shift_dev,
              static_cast<long long>(max_changes))};
}

// 3. Special cases of the predictor against independent formulas.
Outcome equivalences() {
  Real svdpp = 0.0, mf = 0.0, expanded = 0.0;
  Rng rng(78);
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto t = make_tiny_instance(TinySpec{}, 20'000 + seed);
    const auto& p = t.params;
    const Index a = uniform_index(rng, t.graph.num_users()), i = uniform_index(rng, t.graph.num_items());

    svdpp = std::max(svdpp, rel_diff(Scorer(p, t.graph, t.bundle, mode_of("avg,avg")).predict(a, i),
                                     svdpp_oracle(p, t.graph, a, i)));

    auto masked = mode_of(kPoolingPairs[seed % 7]);
    masked.aspects = parse_aspects("none");
    mf = std::max(mf, rel_diff(Scorer(p, t.graph, t.bundle, masked).predict(a, i),
                               p.user_base.row(a).dot(p.item_base.row(i))));

    AttentionTrace tr;
    Scorer(p, t.graph, t.bundle, mode_of(kPoolingPairs[seed % 7])).predict(a, i, tr);
    const auto g = tr.gamma();
    const auto w = p.item_base.row(i);
    Real sum = w.dot(p.user_base.row(a));
    for (const auto& u : tr.uploads) sum += g[kUpload] * u.weight * w.dot(p.item_aux.row(u.id));
    for (const auto& u : tr.followees) sum += g[kSocial] * u.weight * w.dot(p.user_aux.row(u.id));
    sum += g[kCreator] * w.dot(p.user_aux.row(t.graph.creator(i)));
    expanded = std::max(expanded, rel_diff(tr.score, sum));
  }
  return {svdpp <= 1e-10 && mf <= 1e-10 && expanded <= 1e-10,
          fmt("AVG/AVG vs SVD++ %.1e, masked vs p.w %.1e, hierarchical vs expanded %.1e", svdpp, mf, expanded)};
}

// 4. Ranking metrics against a sort-based oracle; chance and perfect scorers.
Outcome metric_oracle() {
  Rng rng(79);
  const int n = 10'000;
  Index mismatches = 0;
  Real uniform_hits = 0.0, perfect_hr = 0.0, perfect_ndcg = 0.0;
  std::vector<Real> c(100);
  std::vector<std::pair<Real, int>> order;
  for (int rep = 0; rep < n; ++rep) {
    // coarse scores so ties occur
    for (auto& x : c) x = std::floor(uniform_real(rng) * 50.0);
    const Real test = std::floor(uniform_real(rng) * 50.0);
    order.clear();
    order.push_back({test, 0});
    for (std::size_t k = 0; k < c.size(); ++k) order.push_back({c[k], 1});
    // descending score; ties put the held-out item last
    std::sort(order.begin(), order.end(), [](const auto& x, const auto& y) {
      return x.first != y.first ? x.first > y.first : x.second > y.second;
    });
    Index oracle_rank = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      if (order[k].second == 0) oracle_rank = static_cast<Index>(k) + 1;
    }
    const Index rank = rank_of_test_item(test, c);
    for (Index k = 1; k <= 10; ++k) {
      const Real hr = oracle_rank <= k ? 1.0 : 0.0;
      const Real ndcg = oracle_rank <= k ? 1.0 / std::log2(static_cast<Real>(oracle_rank) + 1.0) : 0.0;
      if (hr_at_k(rank, k) != hr || std::abs(ndcg_at_k(rank, k) - ndcg) > 1e-15) ++mismatches;
    }

    for (auto& x : c) x = uniform_real(rng);
    uniform_hits += hr_at_k(rank_of_test_item(uniform_real(rng), c), 5);
    const Index best = rank_of_test_item(2.0, c);
    perfect_hr += hr_at_k(best, 5);
    perfect_ndcg += ndcg_at_k(best, 5);
  }
  const Real p = 5.0 / 101.0, sigma = std::sqrt(p * (1.0 - p) / n), hr = uniform_hits / n;
  const bool ok = mismatches == 0 && std::abs(hr - p) <= 3.0 * sigma && perfect_hr == n && perfect_ndcg == n;
  return {ok, fmt("oracle mismatches %lld, uniform HR@5 %.4f vs %.4f +- %.4f (3 sigma), perfect HR %.0f NDCG %.0f",
                  static_cast<long long>(mismatches), hr, p, 3.0 * sigma, perfect_hr / n, perfect_ndcg / n)};
}

struct SynthRun {
  SyntheticData data;
  SplitDataset split;
  EmbeddingBundle bundle;
};

SynthRun synth_run(std::uint64_t seed, Index content_dim, Index style_dim) {
  SyntheticConfig sc;  // M=200, N=1000
  sc.seed = seed;
  sc.noise = 0.2;
  sc.content_dim = content_dim;
  sc.style_dim = style_dim;
  SynthRun r{generate_synthetic(sc), {}, {}};
  r.split = leave_one_out_split(r.data.dataset, 0.0, seed);
  r.bundle = r.data.bundle;
  std::tie(r.bundle.user_content, r.bundle.user_style) =
      user_visual_profiles(r.split.train, r.bundle.item_content, r.bundle.item_style);
  return r;
}

TrainConfig synth_train(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.adam.learning_rate = 0.005;
  cfg.max_epochs = 40;
  cfg.seed = seed;
  return cfg;
}

struct Fitted {
  ModelParams params;
  Real hr5 = 0.0, ndcg5 = 0.0;
};

Fitted fit_and_score(const SynthRun& run, TrainConfig cfg, const AttentionMode& mode) {
  cfg.mode = mode;
  if (!mode.any_aspect()) cfg.warm_start = false;
  auto fitted = fit(run.split, run.bundle, cfg);
  const Scorer s(fitted.params, run.split.train, run.bundle, mode);
  EvalConfig ec;
  ec.ks = {5};
  const auto report = evaluate(s, run.split, ec);
  return {std::move(fitted.params), report.at(5).hr.mean, report.at(5).ndcg.mean};
}

// 5. HASC beats plain BPR on the synthetic set and labels upload-driven users.
Outcome synthetic_recovery(Index content_dim, Index style_dim) {
  const auto start = std::chrono::steady_clock::now();
  const auto run = synth_run(1, content_dim, style_dim);
  const auto cfg = synth_train(1);
  const auto bpr = fit_and_score(run, cfg, AttentionMode::bpr());
  const auto full = fit_and_score(run, cfg, AttentionMode{});
  const Scorer s(full.params, run.split.train, run.bundle, AttentionMode{});
  const auto dump = export_attention(s, observed_pairs(run.split));
  std::array<Index, 4> members{}, upload{};
  for (const auto& u : dump.users) {
    const auto g = static_cast<std::size_t>(run.data.groups[static_cast<std::size_t>(u.user)]);
    ++members[g];
    if (u.dominant == kUpload) ++upload[g];
  }
  const auto share = [&](std::size_t g) {
    return members[g] ? static_cast<Real>(upload[g]) / static_cast<Real>(members[g]) : 0.0;
  };
  const Real gain = relative_improvement(full.hr5, bpr.hr5);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {gain >= 0.10 && share(1) >= 0.70 && secs < 600.0,
          fmt("HR@5 HASC %.4f vs BPR %.4f (%+.1f%%); group-1 upload-dominant %.0f%% (group 2 %.0f%%, group 3 "
              "%.0f%%); %.0f s",
              full.hr5, bpr.hr5, 100.0 * gain, 100.0 * share(1), 100.0 * share(2), 100.0 * share(3), secs)};
}

// 6. Ablation ordering by NDCG@5 averaged over three seeds.
Outcome ablation_ordering(Index content_dim, Index style_dim) {
  std::map<std::string, Real> mean;
  const std::vector<std::string> pools = {"avg,avg", "max,max", "avg,att", "max,att", "att,avg", "att,max", "att,att"};
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto run = synth_run(seed, content_dim, style_dim);
    const auto cfg = synth_train(seed);
    for (const auto& p : pools) mean[p] += fit_and_score(run, cfg, mode_of(p.c_str())).ndcg5 / 3.0;
    for (const char* a : {"u", "s", "c"}) {
      AttentionMode m;
      m.aspects = parse_aspects(a);
      mean[a] += fit_and_score(run, cfg, m).ndcg5 / 3.0;
    }
  }
  const Real full = mean["att,att"];
  std::vector<std::string> broken;
  for (const char* single : {"avg,att", "max,att", "att,avg", "att,max"}) {
    if (full < mean[single]) broken.push_back(std::string("ATT/ATT<") + single);
    if (mean[single] < mean["avg,avg"]) broken.push_back(std::string(single) + "<AVG/AVG");
  }
  for (const char* a : {"u", "s", "c"}) {
    if (full < mean[a]) broken.push_back(std::string("U+S+C<") + a);
  }
  std::ostringstream d;
  d.precision(4);
  d << std::fixed;
  for (const auto& p : pools) d << p << " " << mean[p] << "; ";
  d << "U " << mean["u"] << "; S " << mean["s"] << "; C " << mean["c"];
  if (!broken.empty()) {
    d << "; violated:";
    for (const auto& b : broken) d << " " << b;
  }
  return {broken.empty(), d.str()};
}

// 7. Style vectors from VGG-shaped random feature maps.
Outcome style_pipeline() {
  Rng rng(80);
  const std::array<Index, 5> filters = {64, 128, 256, 512, 512};
  const std::array<Index, 5> positions = {196, 49, 25, 9, 4};
  FeatureMaps maps;
  for (std::size_t l = 0; l < kStyleLayers.size(); ++l) {
    Matrix m(filters[l], positions[l]);
    // rectified activations
    for (Index k = 0; k < m.size(); ++k) m.data()[k] = std::max(0.0, standard_normal(rng));
    maps.emplace(std::string(kStyleLayers[l]), std::move(m));
  }
  const Vector v = style_vector(maps);
  Real asym = 0.0, min_eig = 0.0;
  for (const auto& [_, m] : maps) {
    const Matrix g = gram_matrix(m);
    asym = std::max(asym, (g - g.transpose()).cwiseAbs().maxCoeff());
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(g);
    min_eig = std::min(min_eig, eig.eigenvalues().minCoeff() / std::max(1.0, eig.eigenvalues().maxCoeff()));
  }
  FeatureMaps permuted = maps;
  for (auto& [_, m] : permuted) {
    std::vector<Index> perm(static_cast<std::size_t>(m.cols()));
    std::iota(perm.begin(), perm.end(), Index{0});
    shuffle(perm.begin(), perm.end(), rng);
    Matrix p(m.rows(), m.cols());
    for (Index c = 0; c < m.cols(); ++c) p.col(c) = m.col(perm[static_cast<std::size_t>(c)]);
    m = std::move(p);
  }
  const Real perm_dev = (style_vector(permuted) - v).cwiseAbs().maxCoeff() / v.cwiseAbs().maxCoeff();
  return {v.size() == 5120 && asym == 0.0 && min_eig > -1e-12 && perm_dev < 1e-12,
          fmt("length %lld, max asymmetry %.1e, min relative eigenvalue %.1e, permutation change %.1e",
              static_cast<long long>(v.size()), asym, min_eig, perm_dev)};
}

// 8. DeepWalk separates two cliques joined by one bridge edge.
Outcome deepwalk_sanity() {
  std::vector<SocialEdge> edges;
  for (Index base : {0, 10}) {
    for (Index a = 0; a < 10; ++a) {
      for (Index b = a + 1; b < 10; ++b) edges.push_back({base + a, base + b});
    }
  }
  edges.push_back({9, 10});
  WalkConfig wc;
  wc.seed = 81;
  SkipGramConfig sg;
  sg.seed = 82;
  sg.threads = 1;
  const Matrix e = skipgram_train(deepwalk_walks(20, edges, wc), 20, sg);
  Real intra = 0.0, inter = 0.0;
  Index n_intra = 0, n_inter = 0;
  for (Index a = 0; a < 20; ++a) {
    for (Index b = a + 1; b < 20; ++b) {
      const Real cos = e.row(a).dot(e.row(b)) / (e.row(a).norm() * e.row(b).norm());
      if ((a < 10) == (b < 10)) {
        intra += cos;
        ++n_intra;
      } else {
        inter += cos;
        ++n_inter;
      }
    }
  }
  intra /= static_cast<Real>(n_intra);
  inter /= static_cast<Real>(n_inter);
  return {intra - inter >= 0.2, fmt("intra %.3f, inter %.3f, gap %.3f", intra, inter, intra - inter)};
}

// 9. Every subcommand, run twice with --threads 1, writes identical bytes.
int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    files[fs::relative(entry.path(), root).string()] = {std::istreambuf_iterator<char>(in), {}};
  }
  return files;
}

void write_feature_maps(const fs::path& dir, const Vocabulary& items) {
  Rng rng(83);
  const std::array<Index, 5> filters = {64, 128, 256, 512, 512};
  for (const auto& id : items.ids()) {
    for (std::size_t l = 0; l < kStyleLayers.size(); ++l) {
      Matrix m(filters[l], 4);
      for (Index k = 0; k < m.size(); ++k) m.data()[k] = std::max(0.0, standard_normal(rng));
      fs::create_directories(dir / id);
      io::write_dense_matrix(dir / id / std::string(kStyleLayers[l]), m);
    }
  }
}

Outcome reproducibility(const fs::path& scratch) {
#ifndef HASC_CLI_PATH
  (void)scratch;
  return {false, "command-line tool not built"};
#else
  const std::string cli = HASC_CLI_PATH;
  const auto work = scratch / "work";
  const auto q = [](const fs::path& p) { return "\"" + p.string() + "\""; };
  const std::vector<std::string> steps = {
      "synth --out syn --seed 5 --users 30 --items 120 --star-creators 3 --influencers 4 --influencer-ratings 10 "
      "--social-dim 8 --content-dim 32 --style-dim 40 --walks-per-vertex 2 --walk-length 10",
      "prepare --out prep --ratings syn/ratings.tsv --social syn/social.tsv --uploads syn/uploads.tsv "
      "--validation-fraction 0.2",
      "embed social --out soc --data prep --dim 8 --walks 4 --walk-length 10",
      "embed style --out sty --data prep --maps maps",
      "embed profiles --out emb --data prep --content syn/features/item_content --style sty/item_style "
      "--social soc/social",
      "train --out run --data prep --embeddings emb --latent 6 --hidden 5 --epochs 3 --bpr-epochs 2 "
      "--batch-size 64 --negatives 2",
      "evaluate --out ev --data prep --embeddings emb --checkpoint run/checkpoint --repeats 2 --bins 1,4",
      "export-attention --out att --data prep --embeddings emb --checkpoint run/checkpoint --groups syn/groups.tsv",
      "ablate --out abl --data prep --embeddings emb --latent 6 --hidden 5 --epochs 1 --bpr-epochs 1 "
      "--batch-size 64 --negatives 2 --groups aspects --repeats 1",
      "gradcheck --out gc --modes att,att"};
  std::vector<std::map<std::string, std::string>> runs;
  for (int pass = 0; pass < 2; ++pass) {
    fs::remove_all(work);
    fs::create_directories(work);
    for (const auto& step : steps) {
      if (step.rfind("embed style", 0) == 0) {
        write_feature_maps(work / "maps", load_interactions(work / "prep/ratings.tsv", work / "prep/social.tsv",
                                                            work / "prep/uploads.tsv")
                                              .items());
      }
      const std::string cmd = "cd " + q(work) + " && " + q(cli) + " " + step + " --threads 1 > /dev/null 2>> " +
                              q(scratch / "cli_errors.txt");
      if (shell(cmd) != 0) return {false, "command failed: hasc " + step.substr(0, step.find(' '))};
    }
    fs::remove_all(work / "maps");
    runs.push_back(snapshot(work));
  }
  std::vector<std::string> differ;
  for (const auto& [name, bytes] : runs[0]) {
    auto it = runs[1].find(name);
    if (it == runs[1].end() || it->second != bytes) differ.push_back(name);
  }
  if (runs[0].size() != runs[1].size()) differ.push_back("(file sets differ)");
  std::string detail = fmt("%zu output files from %zu commands compared", runs[0].size(), steps.size());
  if (!differ.empty()) detail += "; differing: " + differ.front() + (differ.size() > 1 ? " ..." : "");
  return {differ.empty(), detail};
#endif
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HASC acceptance criteria"};
  std::vector<int> only;
  std::string scratch = (fs::temp_directory_path() / "hasc_acceptance").string();
  Index content_dim = kContentDim, style_dim = kStyleDim, ablation_content = kContentDim, ablation_style = kStyleDim;
  app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',');
  app.add_option("--scratch", scratch, "working directory for the command-line runs")->capture_default_str();
  app.add_option("--content-dim", content_dim, "synthetic content feature size for criterion 5")
      ->capture_default_str();
  app.add_option("--style-dim", style_dim, "synthetic style feature size for criterion 5")->capture_default_str();
  app.add_option("--ablation-content-dim", ablation_content)->capture_default_str();
  app.add_option("--ablation-style-dim", ablation_style)->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, gradients},
      {2, invariants},
      {3, equivalences},
      {4, metric_oracle},
      {5, [&] { return synthetic_recovery(content_dim, style_dim); }},
      {6, [&] { return ablation_ordering(ablation_content, ablation_style); }},
      {7, style_pipeline},
      {8, deepwalk_sanity},
      {9, [&] {
         fs::remove_all(scratch);
         fs::create_directories(scratch);
         return reproducibility(scratch);
       }},
  };
  bool all = true;
  for (const auto& [id, check] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %d %s: %s [%.1f s]\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
