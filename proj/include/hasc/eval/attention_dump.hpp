#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hasc/core.hpp"
#include "hasc/data/split.hpp"
#include "hasc/model/scorer.hpp"

namespace hasc {

struct UserAttention {
  Index user = 0;
  std::array<Real, kNumAspects> gamma = {0.0, 0.0, 0.0};  // mean over the user's pairs
  int dominant = kUpload;
};

struct AttentionDump {
  std::vector<UserAttention> users;  // ascending user index
  Index omitted = 0;                 // users whose pairs had no active aspect
};

// Mean aspect weights per user over `pairs`. A pair with no active aspect
// contributes nothing; a user left with no contributing pair is omitted.
inline AttentionDump export_attention(const Scorer& scorer, std::span<const UserItem> pairs) {
  std::map<Index, std::pair<std::array<Real, kNumAspects>, Index>> acc;
  std::map<Index, bool> seen;
  AttentionTrace t;
  for (const auto& p : pairs) {
    seen[p.user] = true;
    scorer.predict(p.user, p.item, t);
    if (t.aspects.empty()) continue;
    auto& [sum, count] = acc[p.user];
    const auto g = t.gamma();
    for (int l = 0; l < kNumAspects; ++l) sum[static_cast<std::size_t>(l)] += g[static_cast<std::size_t>(l)];
    ++count;
  }
  AttentionDump dump;
  for (const auto& [user, _] : seen) {
    auto it = acc.find(user);
    if (it == acc.end()) {
      ++dump.omitted;
      continue;
    }
    UserAttention ua;
    ua.user = user;
    const auto& [sum, count] = it->second;
    for (int l = 0; l < kNumAspects; ++l) {
      ua.gamma[static_cast<std::size_t>(l)] = sum[static_cast<std::size_t>(l)] / static_cast<Real>(count);
      if (ua.gamma[static_cast<std::size_t>(l)] > ua.gamma[static_cast<std::size_t>(ua.dominant)]) ua.dominant = l;
    }
    dump.users.push_back(ua);
  }
  return dump;
}

// Every observed pair of each user: train ratings plus the held-out test item.
inline std::vector<UserItem> observed_pairs(const SplitDataset& split) {
  std::vector<UserItem> pairs;
  for (Index a = 0; a < split.train.num_users(); ++a) {
    for (Index i : split.train.rated_items(a)) pairs.push_back({a, i});
  }
  pairs.insert(pairs.end(), split.test.begin(), split.test.end());
  return pairs;
}

inline void write_attention_tsv(const AttentionDump& dump, const Vocabulary& users,
                                const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  out << "user_id\tgamma_upload\tgamma_social\tgamma_creator\tdominant\n";
  for (const auto& u : dump.users) {
    out << users.id(u.user);
    for (Real g : u.gamma) out << '\t' << g;
    out << '\t' << kAspectNames[static_cast<std::size_t>(u.dominant)] << '\n';
  }
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace hasc
