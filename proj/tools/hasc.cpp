// hasc: command-line driver.
//
//   prepare -> embed {social,style,profiles} -> train -> evaluate
//   ablate, export-attention, synth, gradcheck
//
// Every command writes under --out, echoes its resolved options to
// config.txt (loadable with --config) and records run.json.
// Exit codes: 0 ok, 1 runtime failure, 2 usage or validation error.

#include <algorithm>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hasc/cli/config.hpp"
#include "hasc/core.hpp"
#include "hasc/data/dataset.hpp"
#include "hasc/data/split.hpp"
#include "hasc/data/synthetic.hpp"
#include "hasc/embed/bundle.hpp"
#include "hasc/embed/bundle_io.hpp"
#include "hasc/embed/deepwalk.hpp"
#include "hasc/embed/gram.hpp"
#include "hasc/embed/profiles.hpp"
#include "hasc/eval/ablation.hpp"
#include "hasc/eval/attention_dump.hpp"
#include "hasc/eval/evaluate.hpp"
#include "hasc/io/dense_matrix.hpp"
#include "hasc/model/checkpoint.hpp"
#include "hasc/model/mode.hpp"
#include "hasc/train/gradcheck.hpp"
#include "hasc/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace hasc;
using cli::UsageError;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  Index threads = 1;
  std::string out;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "key = value file; command-line flags override it");
  app->add_option("--seed", c.seed, "random seed")->capture_default_str();
  app->add_option("--threads", c.threads, "worker threads; 1 gives bit-identical reruns")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app->add_option("--out", c.out, "output directory")->required();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

// config.txt with every resolved option (minus --config itself) plus
// run.json. Neither carries timestamps, so reruns are byte-identical.
void record_run(const CLI::App* cmd, const std::string& command, const Common& c, json results = json::object()) {
  std::istringstream resolved(cmd->config_to_str(true, false));
  std::string text, line;
  while (std::getline(resolved, line)) {
    if (line.rfind("config=", 0) == 0) continue;
    text += line + "\n";
  }
  const fs::path out(c.out);
  write_text(out / "config.txt", text);
  std::istringstream again(text);
  json config = json::object();
  for (const auto& [k, v] : cli::parse_config(again, "config.txt")) config[k] = v;
  json run;
  run["tool"] = "hasc";
  run["version"] = kVersion;
  run["command"] = command;
  run["seed"] = c.seed;
  run["threads"] = c.threads;
  run["config"] = std::move(config);
  run["results"] = std::move(results);
  write_json(out / "run.json", run);
}

void require_path(const fs::path& p) {
  if (!fs::exists(p)) throw UsageError("file not found: " + p.string());
}

void require_matrix(const fs::path& p) { require_path(io::sidecar_path(io::matrix_base(p))); }

struct Prepared {
  InteractionDataset full;
  SplitDataset split;
};

Prepared load_prepared(const fs::path& dir) {
  for (const char* f : {"ratings.tsv", "social.tsv", "uploads.tsv", "split.json"}) require_path(dir / f);
  Prepared p;
  p.full = load_interactions(dir / "ratings.tsv", dir / "social.tsv", dir / "uploads.tsv");
  p.split = read_split_manifest(p.full, dir / "split.json");
  return p;
}

EmbeddingBundle load_embeddings(const fs::path& dir, const InteractionDataset& ds) {
  for (const char* f : {"social", "item_content", "item_style", "user_content", "user_style"}) {
    require_matrix(dir / f);
  }
  return load_bundle(dir, ds.users(), ds.items());
}

// ---------------------------------------------------------------- prepare

struct PrepareOpts {
  Common c;
  std::string ratings, social, uploads;
  Index min_user_ratings = 2;
  Index min_user_links = 0;
  Index min_item_ratings = 0;
  double validation_fraction = 0.05;
};

std::string stats_table(const std::vector<std::pair<std::string, DatasetStats>>& rows) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-9s %10s %10s %12s %10s %9s\n", "", "users", "images", "ratings", "links",
                "density");
  out << line;
  for (const auto& [name, s] : rows) {
    std::snprintf(line, sizeof line, "%-9s %10lld %10lld %12lld %10lld %8.2f%%\n", name.c_str(),
                  static_cast<long long>(s.users), static_cast<long long>(s.items),
                  static_cast<long long>(s.ratings), static_cast<long long>(s.links), 100.0 * s.density);
    out << line;
  }
  return out.str();
}

json to_json(const DatasetStats& s) {
  return {{"users", s.users}, {"images", s.items}, {"ratings", s.ratings}, {"links", s.links}, {"density", s.density}};
}

int run_prepare(const CLI::App* cmd, const PrepareOpts& o) {
  if (o.validation_fraction < 0.0 || o.validation_fraction > 1.0) {
    throw UsageError("--validation-fraction must lie in [0, 1]");
  }
  const auto raw = load_interactions(o.ratings, o.social, o.uploads);
  const auto filtered = filter_dataset(raw, {o.min_user_ratings, o.min_user_links, o.min_item_ratings});
  const auto split = leave_one_out_split(filtered, o.validation_fraction, o.c.seed);
  const fs::path out(o.c.out);
  fs::create_directories(out);
  write_interactions(filtered, out / "ratings.tsv", out / "social.tsv", out / "uploads.tsv");
  write_split_manifest(split, out / "split.json");
  const auto before = dataset_stats(raw), after = dataset_stats(filtered);
  const auto table = stats_table({{"input", before}, {"prepared", after}});
  std::cout << table;
  json stats = {{"input", to_json(before)},
                {"prepared", to_json(after)},
                {"test_pairs", split.test.size()},
                {"validation_pairs", split.validation.size()}};
  write_json(out / "stats.json", stats);
  record_run(cmd, "prepare", o.c, stats);
  return 0;
}

// ------------------------------------------------------------------ embed

struct SocialOpts {
  Common c;
  std::string data;
  Index dim = kSocialDim;
  Index window = 10;
  Index negatives = 5;
  Index walks = 80;
  Index walk_length = 40;
  Index epochs = 1;
  double lr = 0.025;
};

int run_embed_social(const CLI::App* cmd, const SocialOpts& o) {
  const auto p = load_prepared(o.data);
  const Index M = p.full.num_users();
  WalkConfig wc;
  wc.walks_per_vertex = o.walks;
  wc.walk_length = o.walk_length;
  wc.seed = derive_seed(o.c.seed, 1);
  SkipGramConfig sg;
  sg.dim = o.dim;
  sg.window = o.window;
  sg.negative_samples = o.negatives;
  sg.epochs = o.epochs;
  sg.learning_rate = o.lr;
  sg.seed = derive_seed(o.c.seed, 2);
  sg.threads = o.c.threads;
  const auto walks = deepwalk_walks(M, p.full.social_edges(), wc);
  const Matrix e = skipgram_train(walks, M, sg);
  fs::create_directories(o.c.out);
  io::write_dense_matrix(fs::path(o.c.out) / "social", e, p.full.users().ids());
  record_run(cmd, "embed social", o.c, {{"rows", e.rows()}, {"cols", e.cols()}, {"walks", walks.size()}});
  return 0;
}

struct StyleOpts {
  Common c;
  std::string data;
  std::string maps;
};

// Feature maps live at <maps>/<item_id>/<layer>.{json,bin}, one
// filters x positions matrix per layer.
FeatureMaps load_feature_maps(const fs::path& maps, const std::string& item) {
  FeatureMaps fm;
  for (auto layer : kStyleLayers) {
    const auto base = maps / item / std::string(layer);
    if (!fs::exists(io::sidecar_path(base))) {
      throw Error("missing feature map for layer " + std::string(layer) + " of item " + item + " (" +
                  io::sidecar_path(base).string() + ")");
    }
    fm.emplace(std::string(layer), io::read_dense_matrix(base).values);
  }
  return fm;
}

int run_embed_style(const CLI::App* cmd, const StyleOpts& o) {
  const auto p = load_prepared(o.data);
  require_path(o.maps);
  const auto& items = p.full.items();
  Matrix style(items.size(), kStyleDim);
  const auto threads = static_cast<Index>(std::min<Index>(o.c.threads, std::max<Index>(items.size(), 1)));
  std::exception_ptr failure;
  std::mutex guard;
  const auto work = [&](Index lo, Index hi) {
    try {
      for (Index i = lo; i < hi; ++i) style.row(i) = style_vector(load_feature_maps(o.maps, items.id(i))).transpose();
    } catch (...) {
      std::lock_guard lock(guard);
      if (!failure) failure = std::current_exception();
    }
  };
  {
    std::vector<std::jthread> pool;
    for (Index t = 0; t < threads; ++t) pool.emplace_back(work, t * items.size() / threads, (t + 1) * items.size() / threads);
  }
  if (failure) std::rethrow_exception(failure);
  fs::create_directories(o.c.out);
  io::write_dense_matrix(fs::path(o.c.out) / "item_style", style, items.ids());
  record_run(cmd, "embed style", o.c, {{"rows", style.rows()}, {"cols", style.cols()}});
  return 0;
}

struct ProfileOpts {
  Common c;
  std::string data;
  std::string content, style, social;
};

// Writes a complete embedding directory: item features aligned to the
// prepared item order, user profiles over train ratings, and optionally the
// social embeddings.
int run_embed_profiles(const CLI::App* cmd, const ProfileOpts& o) {
  const auto p = load_prepared(o.data);
  require_matrix(o.content);
  require_matrix(o.style);
  const auto& train = p.split.train;
  const Matrix content = load_aligned(io::matrix_base(o.content), train.items());
  const Matrix style = load_aligned(io::matrix_base(o.style), train.items());
  const auto [user_content, user_style] = user_visual_profiles(train, content, style);
  const fs::path out(o.c.out);
  fs::create_directories(out);
  io::write_dense_matrix(out / "item_content", content, train.items().ids());
  io::write_dense_matrix(out / "item_style", style, train.items().ids());
  io::write_dense_matrix(out / "user_content", user_content, train.users().ids());
  io::write_dense_matrix(out / "user_style", user_style, train.users().ids());
  if (!o.social.empty()) {
    require_matrix(o.social);
    io::write_dense_matrix(out / "social", load_aligned(io::matrix_base(o.social), train.users()), train.users().ids());
  }
  record_run(cmd, "embed profiles", o.c, {{"users", train.num_users()}, {"items", train.num_items()}});
  return 0;
}

// ------------------------------------------------------------------ train

struct TrainOpts {
  std::string data, embeddings;
  Index latent = 15;
  Index hidden = 20;
  double lambda = 0.01;
  Index batch_size = 512;
  Index negatives = 5;
  Index epochs = 50;
  double lr = 0.0005;
  Index patience = 2;
  bool warm_start = true;
  Index bpr_epochs = 20;
  std::string mode = "att,att";
  std::string aspects = "all";
  std::string inputs = "all";
  std::string creator_input = "creator";
  double negative_slope = 0.01;
  Index validation_candidates = 100;
};

void add_train_options(CLI::App* app, TrainOpts& o) {
  app->add_option("--data", o.data, "prepared dataset directory")->required();
  app->add_option("--embeddings", o.embeddings, "embedding directory")->required();
  app->add_option("--latent", o.latent, "latent dimension D")->capture_default_str();
  app->add_option("--hidden", o.hidden, "attention hidden size h")->capture_default_str();
  app->add_option("--lambda", o.lambda, "L2 weight")->capture_default_str();
  app->add_option("--batch-size", o.batch_size)->capture_default_str();
  app->add_option("--negatives", o.negatives, "negatives per positive")->capture_default_str();
  app->add_option("--epochs", o.epochs, "maximum epochs")->capture_default_str();
  app->add_option("--lr", o.lr, "Adam learning rate")->capture_default_str();
  app->add_option("--patience", o.patience, "bad validation epochs tolerated")->capture_default_str();
  app->add_option("--warm-start", o.warm_start, "initialize P, W from BPR (true/false)")->capture_default_str();
  app->add_option("--bpr-epochs", o.bpr_epochs, "BPR warm-start epochs")->capture_default_str();
  app->add_option("--mode", o.mode, "bottom,top pooling: att|avg|max")->capture_default_str();
  app->add_option("--aspects", o.aspects, "u+s+c subset, all or none")->capture_default_str();
  app->add_option("--inputs", o.inputs, "base+aux+soc+vis_c+vis_s, or all")->capture_default_str();
  app->add_option("--creator-input", o.creator_input, "creator aspect input: creator (q_C) or user (q_a)")
      ->capture_default_str()
      ->check(CLI::IsMember({"creator", "user"}));
  app->add_option("--negative-slope", o.negative_slope, "leaky rectifier slope")->capture_default_str();
  app->add_option("--validation-candidates", o.validation_candidates)->capture_default_str();
}

AttentionMode parse_mode(const TrainOpts& o) {
  try {
    AttentionMode m;
    parse_pooling_pair(o.mode, m);
    m.aspects = parse_aspects(o.aspects);
    m.inputs = parse_inputs(o.inputs);
    m.creator_input_is_user = o.creator_input == "user";
    return m;
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

TrainConfig train_config(const TrainOpts& o, const Common& c) {
  TrainConfig cfg;
  cfg.latent = o.latent;
  cfg.hidden = o.hidden;
  cfg.lambda = o.lambda;
  cfg.batch_size = o.batch_size;
  cfg.negatives = o.negatives;
  cfg.max_epochs = o.epochs;
  cfg.adam.learning_rate = o.lr;
  cfg.patience = o.patience;
  cfg.warm_start = o.warm_start;
  cfg.bpr_epochs = o.bpr_epochs;
  cfg.mode = parse_mode(o);
  cfg.negative_slope = o.negative_slope;
  cfg.validation_candidates = o.validation_candidates;
  cfg.seed = c.seed;
  cfg.threads = c.threads;
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

struct TrainCmd {
  Common c;
  TrainOpts t;
  bool log_timing = false;
};

int run_train(const CLI::App* cmd, const TrainCmd& o) {
  const auto cfg = train_config(o.t, o.c);
  const auto p = load_prepared(o.t.data);
  const auto bundle = load_embeddings(o.t.embeddings, p.split.train);
  const fs::path out(o.c.out);
  fs::create_directories(out);
  std::ofstream log(out / "log.jsonl", std::ios::binary);
  if (!log) throw Error("cannot write " + (out / "log.jsonl").string());
  const auto result = fit(p.split, bundle, cfg, [&](const EpochRecord& r) {
    auto j = to_json(r);
    if (!o.log_timing) j.erase("wall_ms");
    log << j.dump() << '\n';
    log.flush();
    std::cerr << "epoch " << r.epoch;
    if (r.mean_loss) std::cerr << " loss " << *r.mean_loss;
    if (r.val_hr5) std::cerr << " val HR@5 " << *r.val_hr5 << " NDCG@5 " << *r.val_ndcg5;
    std::cerr << " (" << static_cast<long long>(r.wall_ms) << " ms)\n";
  });
  Checkpoint ckpt;
  ckpt.params = result.params;
  ckpt.mode = cfg.mode;
  ckpt.seed = cfg.seed;
  ckpt.metadata = {{"best_epoch", result.best_epoch}, {"epochs_run", result.epochs_run}};
  save_checkpoint(ckpt, out / "checkpoint");
  record_run(cmd, "train", o.c, {{"best_epoch", result.best_epoch}, {"epochs_run", result.epochs_run}});
  return 0;
}

// --------------------------------------------------------------- evaluate

struct ScoredModel {
  Prepared data;
  EmbeddingBundle bundle;
  Checkpoint ckpt;
};

ScoredModel load_model(const std::string& data, const std::string& embeddings, const std::string& checkpoint) {
  require_path(fs::path(checkpoint) / "manifest.json");
  ScoredModel m{load_prepared(data), {}, {}};
  m.bundle = load_embeddings(embeddings, m.data.split.train);
  m.ckpt = load_checkpoint(checkpoint);
  const auto& t = m.data.split.train;
  check_compatible(m.ckpt.params.dims, t.num_users(), t.num_items(), m.bundle.social_dim(), m.bundle.content_dim(),
                   m.bundle.style_dim());
  return m;
}

struct EvalCmd {
  Common c;
  std::string data, embeddings, checkpoint;
  std::vector<Index> ks = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  Index candidates = 100;
  Index repeats = 10;
  std::vector<Index> bins;
};

int run_evaluate(const CLI::App* cmd, const EvalCmd& o) {
  if (o.ks.empty()) throw UsageError("--ks needs at least one K");
  for (Index k : o.ks) {
    if (k < 1) throw UsageError("--ks values must be >= 1");
  }
  if (o.candidates < 1 || o.repeats < 1) throw UsageError("--candidates and --repeats must be positive");
  const auto m = load_model(o.data, o.embeddings, o.checkpoint);
  const Scorer scorer(m.ckpt.params, m.data.split.train, m.bundle, m.ckpt.mode);
  EvalConfig ec;
  ec.ks = o.ks;
  ec.candidates = o.candidates;
  ec.repeats = o.repeats;
  ec.seed = o.c.seed;
  const auto report = evaluate(scorer, m.data.split, ec, o.bins);
  fs::create_directories(o.c.out);
  auto j = to_json(report);
  write_json(fs::path(o.c.out) / "report.json", j);
  for (const auto& mk : report.metrics) {
    std::printf("K=%-3lld HR %.4f  NDCG %.4f\n", static_cast<long long>(mk.k), mk.hr.mean, mk.ndcg.mean);
  }
  record_run(cmd, "evaluate", o.c, {{"users", report.users}});
  return 0;
}

// ----------------------------------------------------------------- ablate

struct AblateCmd {
  Common c;
  TrainOpts t;
  std::vector<std::string> groups = {"attention", "aspects", "inputs"};
  Index candidates = 100;
  Index repeats = 10;
  bool train_all = true;
};

int run_ablate(const CLI::App* cmd, const AblateCmd& o) {
  if (!o.train_all) throw UsageError("ablate trains every variant; pass --train-all");
  const auto has = [&](const char* g) { return std::find(o.groups.begin(), o.groups.end(), g) != o.groups.end(); };
  for (const auto& g : o.groups) {
    if (g != "attention" && g != "aspects" && g != "inputs") throw UsageError("unknown ablation group " + g);
  }
  const auto base = train_config(o.t, o.c);
  const auto p = load_prepared(o.t.data);
  const auto bundle = load_embeddings(o.t.embeddings, p.split.train);
  EvalConfig ec;
  ec.candidates = o.candidates;
  ec.repeats = o.repeats;
  ec.seed = o.c.seed;
  const auto rows = ablation_grid(has("attention"), has("aspects"), has("inputs"));
  const auto results = run_ablation(p.split, bundle, base, ec, rows, [](const AblationResult& r) {
    std::cerr << r.row.group << " " << r.row.label << ": HR@5 " << r.hr5 << " NDCG@5 " << r.ndcg5 << "\n";
  });
  const auto table = ablation_table(results);
  std::cout << table;
  const fs::path out(o.c.out);
  fs::create_directories(out);
  write_text(out / "ablation.txt", table);
  write_json(out / "ablation.json", to_json(results));
  record_run(cmd, "ablate", o.c, {{"rows", results.size()}});
  return 0;
}

// -------------------------------------------------------- export-attention

struct ExportCmd {
  Common c;
  std::string data, embeddings, checkpoint, groups;
};

// user_id<TAB>group per line.
std::map<std::string, std::string> read_groups(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("file not found: " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw Error(path.string() + ": expected user_id<TAB>group");
    const auto user = line.substr(0, tab);
    if (user == "user_id") continue;
    out[user] = line.substr(tab + 1);
  }
  return out;
}

int run_export(const CLI::App* cmd, const ExportCmd& o) {
  const auto m = load_model(o.data, o.embeddings, o.checkpoint);
  const auto& train = m.data.split.train;
  const Scorer scorer(m.ckpt.params, train, m.bundle, m.ckpt.mode);
  const auto dump = export_attention(scorer, observed_pairs(m.data.split));
  const fs::path out(o.c.out);
  fs::create_directories(out);
  write_attention_tsv(dump, train.users(), out / "attention.tsv");
  json results = {{"users", dump.users.size()}, {"omitted", dump.omitted}};
  if (!o.groups.empty()) {
    const auto labels = read_groups(o.groups);
    std::map<std::string, std::array<Index, kNumAspects>> counts;
    for (const auto& u : dump.users) {
      auto it = labels.find(train.users().id(u.user));
      if (it == labels.end()) continue;
      ++counts[it->second][static_cast<std::size_t>(u.dominant)];
    }
    json summary = json::object();
    for (const auto& [group, c] : counts) {
      Index total = 0;
      for (Index n : c) total += n;
      json g = {{"users", total}};
      for (int l = 0; l < kNumAspects; ++l) {
        g[std::string(kAspectNames[static_cast<std::size_t>(l)])] =
            static_cast<Real>(c[static_cast<std::size_t>(l)]) / static_cast<Real>(total);
      }
      std::printf("group %-8s users %4lld  upload %.3f  social %.3f  creator %.3f\n", group.c_str(),
                  static_cast<long long>(total), g["upload"].get<double>(), g["social"].get<double>(),
                  g["creator"].get<double>());
      summary[group] = std::move(g);
    }
    write_json(out / "attention_groups.json", summary);
    results["groups"] = summary;
  }
  record_run(cmd, "export-attention", o.c, results);
  return 0;
}

// ------------------------------------------------------------------ synth

struct SynthCmd {
  Common c;
  SyntheticConfig s;
  std::vector<double> fractions = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
};

void add_synth_options(CLI::App* app, SynthCmd& o) {
  auto& s = o.s;
  app->add_option("--users", s.users)->capture_default_str();
  app->add_option("--items", s.items)->capture_default_str();
  app->add_option("--fractions", o.fractions, "upload,social,creator group shares")
      ->delimiter(',')
      ->expected(3)
      ->capture_default_str();
  app->add_option("--latent-dim", s.latent_dim)->capture_default_str();
  app->add_option("--topics", s.topics)->capture_default_str();
  app->add_option("--noise", s.noise, "share of random likes")->capture_default_str();
  app->add_option("--min-ratings", s.min_ratings)->capture_default_str();
  app->add_option("--max-ratings", s.max_ratings)->capture_default_str();
  app->add_option("--star-creators", s.star_creators)->capture_default_str();
  app->add_option("--star-share-percent", s.star_share_percent)->capture_default_str();
  app->add_option("--min-uploads", s.min_uploads)->capture_default_str();
  app->add_option("--influencers", s.influencers)->capture_default_str();
  app->add_option("--influencer-ratings", s.influencer_ratings)->capture_default_str();
  app->add_option("--planted-followees", s.planted_followees)->capture_default_str();
  app->add_option("--random-link-probability", s.random_link_probability)->capture_default_str();
  app->add_option("--social-dim", s.social_dim)->capture_default_str();
  app->add_option("--content-dim", s.content_dim)->capture_default_str();
  app->add_option("--style-dim", s.style_dim)->capture_default_str();
  app->add_option("--walks-per-vertex", s.walks_per_vertex)->capture_default_str();
  app->add_option("--walk-length", s.walk_length)->capture_default_str();
}

int run_synth(const CLI::App* cmd, const SynthCmd& o) {
  SyntheticConfig s = o.s;
  s.seed = o.c.seed;
  std::copy(o.fractions.begin(), o.fractions.end(), s.fractions.begin());
  try {
    s.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  const auto data = generate_synthetic(s);
  const auto& ds = data.dataset;
  const fs::path out(o.c.out);
  fs::create_directories(out / "features");
  write_interactions(ds, out / "ratings.tsv", out / "social.tsv", out / "uploads.tsv");
  io::write_dense_matrix(out / "features" / "item_content", data.bundle.item_content, ds.items().ids());
  io::write_dense_matrix(out / "features" / "item_style", data.bundle.item_style, ds.items().ids());
  io::write_dense_matrix(out / "features" / "social", data.bundle.social, ds.users().ids());
  std::ostringstream groups;
  groups << "user_id\tgroup\n";
  for (Index a = 0; a < ds.num_users(); ++a) {
    groups << ds.users().id(a) << '\t' << data.groups[static_cast<std::size_t>(a)] << '\n';
  }
  write_text(out / "groups.tsv", groups.str());
  record_run(cmd, "synth", o.c, to_json(dataset_stats(ds)));
  std::cout << stats_table({{"synthetic", dataset_stats(ds)}});
  return 0;
}

// -------------------------------------------------------------- gradcheck

struct GradCmd {
  Common c;
  TinySpec spec;
  std::vector<std::string> modes = {"avg,avg", "max,max", "avg,att", "max,att", "att,avg", "att,max", "att,att"};
  double lambda = 0.01;
  double step = 1e-5;
  double tolerance = 1e-4;
};

int run_gradcheck(const CLI::App* cmd, const GradCmd& o) {
  std::vector<AttentionMode> modes;
  for (const auto& s : o.modes) {
    AttentionMode m;
    try {
      parse_pooling_pair(s, m);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    modes.push_back(m);
  }
  const auto inst = make_tiny_instance(o.spec, o.c.seed);
  const auto triples = tiny_triples(inst.graph, derive_seed(o.c.seed, 1));
  json reports = json::array();
  bool ok = true;
  for (std::size_t k = 0; k < modes.size(); ++k) {
    const auto r = gradient_check_by_user(inst.params, inst.graph, inst.bundle, modes[k], triples, o.lambda, o.step);
    const bool pass = r.max_rel_error() < o.tolerance;
    ok = ok && pass;
    std::printf("%-8s max rel error %.3e  %s\n", o.modes[k].c_str(), r.max_rel_error(), pass ? "PASS" : "FAIL");
    auto j = to_json(r);
    j["mode"] = o.modes[k];
    j["pass"] = pass;
    reports.push_back(std::move(j));
  }
  fs::create_directories(o.c.out);
  write_json(fs::path(o.c.out) / "gradcheck.json", reports);
  record_run(cmd, "gradcheck", o.c, {{"pass", ok}});
  return ok ? 0 : 1;
}

// Innermost subcommand named in the raw arguments.
CLI::App* selected_command(CLI::App& app, const std::vector<std::string>& args) {
  CLI::App* cur = &app;
  for (const auto& a : args) {
    if (a.empty() || a[0] == '-') continue;
    if (auto* sub = cur->get_subcommand_no_throw(a)) cur = sub;
  }
  return cur;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hasc: hierarchical attentive social-contextual image recommendation"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  PrepareOpts prep;
  auto* prepare = app.add_subcommand("prepare", "filter raw TSVs and write the leave-one-out split");
  add_common(prepare, prep.c);
  prepare->add_option("--ratings", prep.ratings, "user_id<TAB>item_id[<TAB>timestamp]")
      ->required()
      ->check(CLI::ExistingFile);
  prepare->add_option("--social", prep.social, "follower_id<TAB>followee_id")->required()->check(CLI::ExistingFile);
  prepare->add_option("--uploads", prep.uploads, "item_id<TAB>creator_id")->required()->check(CLI::ExistingFile);
  prepare->add_option("--min-user-ratings", prep.min_user_ratings)->capture_default_str();
  prepare->add_option("--min-user-links", prep.min_user_links)->capture_default_str();
  prepare->add_option("--min-item-ratings", prep.min_item_ratings)->capture_default_str();
  prepare->add_option("--validation-fraction", prep.validation_fraction)->capture_default_str();

  auto* embed = app.add_subcommand("embed", "pretrained inputs of the attention networks");
  embed->require_subcommand(1);
  SocialOpts soc;
  auto* social = embed->add_subcommand("social", "DeepWalk embeddings of the follow graph");
  add_common(social, soc.c);
  social->add_option("--data", soc.data, "prepared dataset directory")->required();
  social->add_option("--dim", soc.dim)->capture_default_str();
  social->add_option("--window", soc.window)->capture_default_str();
  social->add_option("--negatives", soc.negatives)->capture_default_str();
  social->add_option("--walks", soc.walks, "walks per vertex")->capture_default_str();
  social->add_option("--walk-length", soc.walk_length)->capture_default_str();
  social->add_option("--epochs", soc.epochs)->capture_default_str();
  social->add_option("--lr", soc.lr)->capture_default_str();
  StyleOpts sty;
  auto* style = embed->add_subcommand("style", "Gram style vectors from per-layer feature maps");
  add_common(style, sty.c);
  style->add_option("--data", sty.data, "prepared dataset directory")->required();
  style->add_option("--maps", sty.maps, "directory of <item_id>/<layer> feature maps")->required();
  ProfileOpts prof;
  auto* profiles = embed->add_subcommand("profiles", "user visual profiles over train ratings");
  add_common(profiles, prof.c);
  profiles->add_option("--data", prof.data, "prepared dataset directory")->required();
  profiles->add_option("--content", prof.content, "item content vectors")->required();
  profiles->add_option("--style", prof.style, "item style vectors")->required();
  profiles->add_option("--social", prof.social, "social embeddings to copy alongside");

  TrainCmd tr;
  auto* train = app.add_subcommand("train", "BPR warm start, then HASC with early stopping");
  add_common(train, tr.c);
  add_train_options(train, tr.t);
  train->add_option("--log-timing", tr.log_timing, "include wall_ms in log.jsonl; breaks byte-identical reruns")
      ->capture_default_str();

  EvalCmd ev;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "HR@K / NDCG@K on the held-out test pairs");
  add_common(evaluate_cmd, ev.c);
  evaluate_cmd->add_option("--data", ev.data, "prepared dataset directory")->required();
  evaluate_cmd->add_option("--embeddings", ev.embeddings, "embedding directory")->required();
  evaluate_cmd->add_option("--checkpoint", ev.checkpoint, "checkpoint directory")->required();
  evaluate_cmd->add_option("--ks", ev.ks)->delimiter(',')->capture_default_str();
  evaluate_cmd->add_option("--candidates", ev.candidates)->capture_default_str();
  evaluate_cmd->add_option("--repeats", ev.repeats)->capture_default_str();
  evaluate_cmd->add_option("--bins", ev.bins, "sparsity bin edges by train ratings, e.g. 1,5,10")->delimiter(',');

  AblateCmd ab;
  auto* ablate = app.add_subcommand("ablate", "train and compare pooling, aspect and input variants");
  add_common(ablate, ab.c);
  add_train_options(ablate, ab.t);
  ablate->add_option("--groups", ab.groups, "attention,aspects,inputs")->delimiter(',')->capture_default_str();
  ablate->add_option("--candidates", ab.candidates)->capture_default_str();
  ablate->add_option("--repeats", ab.repeats)->capture_default_str();
  ablate->add_option("--train-all", ab.train_all, "train every variant (true/false)")->capture_default_str();

  ExportCmd ex;
  auto* export_cmd = app.add_subcommand("export-attention", "per-user mean aspect weights");
  add_common(export_cmd, ex.c);
  export_cmd->add_option("--data", ex.data, "prepared dataset directory")->required();
  export_cmd->add_option("--embeddings", ex.embeddings, "embedding directory")->required();
  export_cmd->add_option("--checkpoint", ex.checkpoint, "checkpoint directory")->required();
  export_cmd->add_option("--groups", ex.groups, "user_id<TAB>group file for a per-group summary");

  SynthCmd sy;
  auto* synth = app.add_subcommand("synth", "synthetic dataset with planted user groups");
  add_common(synth, sy.c);
  add_synth_options(synth, sy);

  GradCmd gc;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the analytic gradients");
  add_common(gradcheck, gc.c);
  gradcheck->add_option("--users", gc.spec.users)->capture_default_str();
  gradcheck->add_option("--items", gc.spec.items)->capture_default_str();
  gradcheck->add_option("--latent", gc.spec.latent)->capture_default_str();
  gradcheck->add_option("--hidden", gc.spec.hidden)->capture_default_str();
  gradcheck->add_option("--modes", gc.modes, "bottom,top pairs separated by spaces")->capture_default_str();
  gradcheck->add_option("--lambda", gc.lambda)->capture_default_str();
  gradcheck->add_option("--step", gc.step)->capture_default_str();
  gradcheck->add_option("--tolerance", gc.tolerance)->capture_default_str();

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    const auto config_path = cli::find_config_path(args);
    if (!config_path.empty()) {
      CLI::App* target = selected_command(app, args);
      if (target == &app) throw UsageError("--config must follow a command");
      args = cli::merge_config(args, cli::read_config_file(config_path), [&](const std::string& key) {
        return target->get_option_no_throw("--" + key) != nullptr;
      });
    }
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const UsageError& e) {
    std::cerr << "hasc: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*prepare) return run_prepare(prepare, prep);
    if (*social) return run_embed_social(social, soc);
    if (*style) return run_embed_style(style, sty);
    if (*profiles) return run_embed_profiles(profiles, prof);
    if (*train) return run_train(train, tr);
    if (*evaluate_cmd) return run_evaluate(evaluate_cmd, ev);
    if (*ablate) return run_ablate(ablate, ab);
    if (*export_cmd) return run_export(export_cmd, ex);
    if (*synth) return run_synth(synth, sy);
    if (*gradcheck) return run_gradcheck(gradcheck, gc);
  } catch (const UsageError& e) {
    std::cerr << "hasc: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "hasc: error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
