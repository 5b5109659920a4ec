#pragma once

// Leave-one-out split: each user's last rating is held out for test, and a
// seeded sample of the remaining pairs becomes the validation set.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "hasc/core.hpp"
#include "hasc/data/dataset.hpp"

namespace hasc {

struct UserItem {
  Index user = 0;
  Index item = 0;
  friend bool operator==(const UserItem&, const UserItem&) = default;
};

struct SplitDataset {
  InteractionDataset train;
  std::vector<UserItem> validation;  // at most one per user
  std::vector<UserItem> test;        // one per user with >= 2 ratings
  std::uint64_t seed = 0;
  Real validation_fraction = 0.0;
};

namespace detail {

// Position (within ds.ratings()) of the user's "last" rating: largest
// timestamp when every rating carries one, otherwise last in file order.
inline std::vector<std::vector<std::size_t>> ratings_by_user(const InteractionDataset& ds) {
  std::vector<std::vector<std::size_t>> by_user(static_cast<std::size_t>(ds.num_users()));
  for (std::size_t k = 0; k < ds.ratings().size(); ++k) {
    by_user[static_cast<std::size_t>(ds.ratings()[k].user)].push_back(k);
  }
  return by_user;
}

inline std::size_t last_rating(const InteractionDataset& ds, const std::vector<std::size_t>& rows) {
  const auto& r = ds.ratings();
  const bool all_stamped =
      std::all_of(rows.begin(), rows.end(), [&](std::size_t k) { return r[k].timestamp.has_value(); });
  std::size_t best = rows.front();
  for (std::size_t k : rows) {
    if (!all_stamped || *r[k].timestamp >= *r[best].timestamp) best = k;
  }
  return best;
}

}  // namespace detail

inline SplitDataset leave_one_out_split(const InteractionDataset& ds, Real validation_fraction,
                                        std::uint64_t seed) {
  if (validation_fraction < 0.0 || validation_fraction > 1.0) {
    throw Error("validation fraction must lie in [0, 1]");
  }
  const auto by_user = detail::ratings_by_user(ds);
  std::vector<bool> held_out(ds.ratings().size(), false);

  SplitDataset split;
  split.seed = seed;
  split.validation_fraction = validation_fraction;
  for (std::size_t u = 0; u < by_user.size(); ++u) {
    if (by_user[u].size() < 2) continue;
    const auto k = detail::last_rating(ds, by_user[u]);
    held_out[k] = true;
    split.test.push_back({static_cast<Index>(u), ds.ratings()[k].item});
  }

  // Validation takes one pair from each of `target` users, drawn among users
  // that keep at least one other training rating.
  Index remaining = 0;
  std::vector<Index> eligible;
  for (std::size_t u = 0; u < by_user.size(); ++u) {
    const auto left = static_cast<Index>(by_user[u].size()) - (by_user[u].size() >= 2 ? 1 : 0);
    remaining += left;
    if (left >= 2) eligible.push_back(static_cast<Index>(u));
  }
  const auto target = std::min<Index>(
      static_cast<Index>(std::llround(validation_fraction * static_cast<Real>(remaining))),
      static_cast<Index>(eligible.size()));
  Rng rng(seed);
  shuffle(eligible.begin(), eligible.end(), rng);
  eligible.resize(static_cast<std::size_t>(target));
  std::sort(eligible.begin(), eligible.end());
  for (Index u : eligible) {
    std::vector<std::size_t> candidates;
    for (std::size_t k : by_user[static_cast<std::size_t>(u)]) {
      if (!held_out[k]) candidates.push_back(k);
    }
    const auto k = candidates[static_cast<std::size_t>(uniform_index(rng, static_cast<Index>(candidates.size())))];
    held_out[k] = true;
    split.validation.push_back({u, ds.ratings()[k].item});
  }

  std::vector<Rating> train;
  for (std::size_t k = 0; k < ds.ratings().size(); ++k) {
    if (!held_out[k]) train.push_back(ds.ratings()[k]);
  }
  split.train = ds.with_ratings(std::move(train));
  return split;
}

inline nlohmann::ordered_json split_manifest(const SplitDataset& split) {
  const auto& users = split.train.users();
  const auto& items = split.train.items();
  const auto pairs = [&](const std::vector<UserItem>& v) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& p : v) arr.push_back({users.id(p.user), items.id(p.item)});
    return arr;
  };
  nlohmann::ordered_json j;
  j["seed"] = split.seed;
  j["validation_fraction"] = split.validation_fraction;
  j["test"] = pairs(split.test);
  j["validation"] = pairs(split.validation);
  return j;
}

inline void write_split_manifest(const SplitDataset& split, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << split_manifest(split).dump(2) << '\n';
}

// Rebuilds a split from the full dataset and a manifest written earlier.
inline SplitDataset read_split_manifest(const InteractionDataset& full, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
  SplitDataset split;
  split.seed = j.at("seed").get<std::uint64_t>();
  split.validation_fraction = j.value("validation_fraction", 0.0);
  const auto read_pairs = [&](const char* key, std::vector<UserItem>& out) {
    for (const auto& p : j.at(key)) {
      UserItem ui{full.users().at(p.at(0).get<std::string>()), full.items().at(p.at(1).get<std::string>())};
      if (!full.has_rating(ui.user, ui.item)) {
        throw Error(path.string() + ": held-out pair is not a rating in the dataset");
      }
      out.push_back(ui);
    }
  };
  read_pairs("test", split.test);
  read_pairs("validation", split.validation);

  std::unordered_set<Index> held;
  const auto key = [&](Index u, Index i) { return u * full.num_items() + i; };
  for (const auto& p : split.test) held.insert(key(p.user, p.item));
  for (const auto& p : split.validation) held.insert(key(p.user, p.item));
  std::vector<Rating> train;
  for (const auto& r : full.ratings()) {
    if (!held.contains(key(r.user, r.item))) train.push_back(r);
  }
  split.train = full.with_ratings(std::move(train));
  return split;
}

}  // namespace hasc
