#pragma once

// Ablation grid: pooling combinations of the two attention levels, aspect
// subsets and input-embedding subsets, each trained from scratch and
// compared with plain BPR on HR@5 / NDCG@5.

#include <cctype>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hasc/core.hpp"
#include "hasc/data/split.hpp"
#include "hasc/embed/bundle.hpp"
#include "hasc/eval/evaluate.hpp"
#include "hasc/model/mode.hpp"
#include "hasc/model/scorer.hpp"
#include "hasc/train/trainer.hpp"

namespace hasc {

struct AblationRow {
  std::string group;  // "baseline", "attention", "aspects" or "inputs"
  std::string label;
  AttentionMode mode;
};

inline std::vector<AblationRow> attention_rows() {
  std::vector<AblationRow> rows;
  for (const char* p : {"avg,avg", "max,max", "avg,att", "max,att", "att,avg", "att,max", "att,att"}) {
    AttentionMode m;
    parse_pooling_pair(p, m);
    std::string label = p;
    for (auto& c : label) c = static_cast<char>(c == ',' ? '/' : std::toupper(static_cast<unsigned char>(c)));
    rows.push_back({"attention", label, m});
  }
  return rows;
}

inline std::vector<AblationRow> aspect_rows() {
  std::vector<AblationRow> rows;
  for (const char* a : {"u", "s", "c", "u+s+c"}) {
    AttentionMode m;
    m.aspects = parse_aspects(a);
    rows.push_back({"aspects", aspects_label(m.aspects), m});
  }
  return rows;
}

inline std::vector<AblationRow> input_rows() {
  std::vector<AblationRow> rows;
  for (const char* s : {"base", "base+aux", "base+aux+soc", "base+aux+vis_c", "base+aux+vis_s", "base+aux+vis_cs",
                        "base+aux+soc+vis_cs"}) {
    AttentionMode m;
    m.inputs = parse_inputs(s);
    rows.push_back({"inputs", s, m});
  }
  return rows;
}

inline AblationRow baseline_row() { return {"baseline", "BPR", AttentionMode::bpr()}; }

// Baseline first, then the three groups.
inline std::vector<AblationRow> ablation_grid(bool attention = true, bool aspects = true, bool inputs = true) {
  std::vector<AblationRow> rows{baseline_row()};
  const auto append = [&](std::vector<AblationRow> more) { rows.insert(rows.end(), more.begin(), more.end()); };
  if (attention) append(attention_rows());
  if (aspects) append(aspect_rows());
  if (inputs) append(input_rows());
  return rows;
}

struct AblationResult {
  AblationRow row;
  Real hr5 = 0.0;
  Real ndcg5 = 0.0;
  Real hr5_gain = 0.0;    // relative to the baseline
  Real ndcg5_gain = 0.0;
  Index best_epoch = 0;
};

inline Real relative_improvement(Real value, Real baseline) {
  if (baseline == 0.0) return value == 0.0 ? 0.0 : std::numeric_limits<Real>::infinity();
  return (value - baseline) / baseline;
}

// Trains every row with `train` (mode replaced by the row's) and evaluates
// on the test pairs. rows[0] is the reference for the relative gains.
inline std::vector<AblationResult> run_ablation(
    const SplitDataset& split, const EmbeddingBundle& bundle, const TrainConfig& train,
    const EvalConfig& eval, const std::vector<AblationRow>& rows,
    const std::function<void(const AblationResult&)>& on_row = {}) {
  if (rows.empty()) throw Error("ablation grid is empty");
  EvalConfig ec = eval;
  ec.ks = {5};
  std::vector<AblationResult> out;
  for (const auto& row : rows) {
    TrainConfig cfg = train;
    cfg.mode = row.mode;
    const auto fitted = fit(split, bundle, cfg);
    const Scorer scorer(fitted.params, split.train, bundle, row.mode);
    const auto report = evaluate(scorer, split, ec);
    AblationResult r;
    r.row = row;
    r.hr5 = report.at(5).hr.mean;
    r.ndcg5 = report.at(5).ndcg.mean;
    r.best_epoch = fitted.best_epoch;
    r.hr5_gain = relative_improvement(r.hr5, out.empty() ? r.hr5 : out.front().hr5);
    r.ndcg5_gain = relative_improvement(r.ndcg5, out.empty() ? r.ndcg5 : out.front().ndcg5);
    if (on_row) on_row(r);
    out.push_back(std::move(r));
  }
  return out;
}

inline std::string format_gain(Real g) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.2f%%", 100.0 * g);
  // "+0.00%" reads oddly for the baseline itself
  if (std::string(buf) == "+0.00%" || std::string(buf) == "-0.00%") return "0.00%";
  return buf;
}

inline std::string ablation_table(const std::vector<AblationResult>& results) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-10s %-22s %8s %8s %10s %10s\n", "group", "variant", "HR@5", "NDCG@5",
                "dHR@5", "dNDCG@5");
  out << line;
  for (const auto& r : results) {
    std::snprintf(line, sizeof line, "%-10s %-22s %8.4f %8.4f %10s %10s\n", r.row.group.c_str(),
                  r.row.label.c_str(), r.hr5, r.ndcg5, format_gain(r.hr5_gain).c_str(),
                  format_gain(r.ndcg5_gain).c_str());
    out << line;
  }
  return out.str();
}

inline nlohmann::ordered_json to_json(const std::vector<AblationResult>& results) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : results) {
    arr.push_back({{"group", r.row.group},
                   {"variant", r.row.label},
                   {"mode", to_json(r.row.mode)},
                   {"hr5", r.hr5},
                   {"ndcg5", r.ndcg5},
                   {"hr5_improvement", r.hr5_gain},
                   {"ndcg5_improvement", r.ndcg5_gain},
                   {"best_epoch", r.best_epoch}});
  }
  return arr;
}

}  // namespace hasc
