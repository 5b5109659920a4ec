#pragma once

// Implicit-feedback interaction data: ratings R, follow edges S, and the
// item -> creator upload map L, over dense user and item indices.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hasc/core.hpp"

namespace hasc {

// External id <-> dense index, assigned in first-appearance order.
class Vocabulary {
 public:
  Index size() const { return static_cast<Index>(ids_.size()); }

  Index intern(const std::string& id) {
    auto [it, inserted] = index_.try_emplace(id, size());
    if (inserted) ids_.push_back(id);
    return it->second;
  }

  std::optional<Index> find(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  Index at(const std::string& id) const {
    auto idx = find(id);
    if (!idx) throw Error("unknown id \"" + id + "\"");
    return *idx;
  }

  const std::string& id(Index idx) const { return ids_.at(static_cast<std::size_t>(idx)); }
  const std::vector<std::string>& ids() const { return ids_; }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, Index> index_;
};

struct Rating {
  Index user = 0;
  Index item = 0;
  std::optional<std::int64_t> timestamp;
};

// "follower follows followee".
struct SocialEdge {
  Index follower = 0;
  Index followee = 0;
};

// Immutable after construction. All adjacency lists are sorted ascending.
class InteractionDataset {
 public:
  InteractionDataset() = default;

  // `creators[i]` is the uploader of item i. `creator_only` may be empty
  // (no user is creator-only) or sized to the user vocabulary.
  InteractionDataset(Vocabulary users, Vocabulary items, std::vector<Rating> ratings,
                     std::vector<SocialEdge> social, std::vector<Index> creators,
                     std::vector<bool> creator_only = {})
      : users_(std::move(users)),
        items_(std::move(items)),
        ratings_(std::move(ratings)),
        social_(std::move(social)),
        creator_(std::move(creators)),
        creator_only_(std::move(creator_only)) {
    if (creator_only_.empty()) creator_only_.assign(static_cast<std::size_t>(num_users()), false);
    build_indexes();
  }

  Index num_users() const { return users_.size(); }
  Index num_items() const { return items_.size(); }
  Index num_ratings() const { return static_cast<Index>(ratings_.size()); }
  Index num_social_edges() const { return static_cast<Index>(social_.size()); }

  const Vocabulary& users() const { return users_; }
  const Vocabulary& items() const { return items_; }
  const std::vector<Rating>& ratings() const { return ratings_; }
  const std::vector<SocialEdge>& social_edges() const { return social_; }
  const std::vector<Index>& creators() const { return creator_; }

  Index creator(Index item) const { return creator_[static_cast<std::size_t>(item)]; }
  bool creator_only(Index user) const { return creator_only_[static_cast<std::size_t>(user)]; }

  std::span<const Index> rated_items(Index user) const { return rated_[static_cast<std::size_t>(user)]; }
  std::span<const Index> uploads(Index user) const { return uploads_[static_cast<std::size_t>(user)]; }
  std::span<const Index> followees(Index user) const { return followees_[static_cast<std::size_t>(user)]; }
  std::span<const Index> followers(Index user) const { return followers_[static_cast<std::size_t>(user)]; }
  // Users this user follows or is followed by, deduplicated.
  std::span<const Index> neighbors(Index user) const { return neighbors_[static_cast<std::size_t>(user)]; }

  bool has_rating(Index user, Index item) const {
    auto r = rated_items(user);
    return std::binary_search(r.begin(), r.end(), item);
  }

  Real density() const {
    if (num_users() == 0 || num_items() == 0) return 0.0;
    return static_cast<Real>(num_ratings()) /
           (static_cast<Real>(num_users()) * static_cast<Real>(num_items()));
  }

  // Same users, items, social edges and uploads; different ratings.
  InteractionDataset with_ratings(std::vector<Rating> ratings) const {
    return InteractionDataset(users_, items_, std::move(ratings), social_, creator_, creator_only_);
  }

 private:
  void build_indexes() {
    const auto M = static_cast<std::size_t>(num_users());
    const auto N = static_cast<std::size_t>(num_items());
    if (creator_.size() != N) {
      throw Error("upload map covers " + std::to_string(creator_.size()) + " of " +
                  std::to_string(N) + " items");
    }
    if (creator_only_.size() != M) throw Error("creator-only flags do not match user count");

    rated_.assign(M, {});
    uploads_.assign(M, {});
    followees_.assign(M, {});
    followers_.assign(M, {});
    neighbors_.assign(M, {});

    for (const auto& r : ratings_) {
      check_user(r.user);
      check_item(r.item);
      rated_[static_cast<std::size_t>(r.user)].push_back(r.item);
    }
    for (std::size_t i = 0; i < N; ++i) {
      check_user(creator_[i]);
      uploads_[static_cast<std::size_t>(creator_[i])].push_back(static_cast<Index>(i));
    }
    for (const auto& e : social_) {
      check_user(e.follower);
      check_user(e.followee);
      if (e.follower == e.followee) {
        throw Error("self-loop social edge on user \"" + users_.id(e.follower) + "\"");
      }
      followees_[static_cast<std::size_t>(e.follower)].push_back(e.followee);
      followers_[static_cast<std::size_t>(e.followee)].push_back(e.follower);
    }

    for (std::size_t a = 0; a < M; ++a) {
      auto& r = rated_[a];
      std::sort(r.begin(), r.end());
      if (std::adjacent_find(r.begin(), r.end()) != r.end()) {
        throw Error("duplicate rating for user \"" + users_.id(static_cast<Index>(a)) + "\"");
      }
      auto& fe = followees_[a];
      std::sort(fe.begin(), fe.end());
      if (std::adjacent_find(fe.begin(), fe.end()) != fe.end()) {
        throw Error("duplicate social edge from user \"" + users_.id(static_cast<Index>(a)) + "\"");
      }
      std::sort(followers_[a].begin(), followers_[a].end());
      auto& nb = neighbors_[a];
      std::set_union(fe.begin(), fe.end(), followers_[a].begin(), followers_[a].end(),
                     std::back_inserter(nb));
    }
  }

  void check_user(Index u) const {
    if (u < 0 || u >= num_users()) throw Error("user index out of range: " + std::to_string(u));
  }
  void check_item(Index i) const {
    if (i < 0 || i >= num_items()) throw Error("item index out of range: " + std::to_string(i));
  }

  Vocabulary users_;
  Vocabulary items_;
  std::vector<Rating> ratings_;
  std::vector<SocialEdge> social_;
  std::vector<Index> creator_;
  std::vector<bool> creator_only_;

  std::vector<std::vector<Index>> rated_;
  std::vector<std::vector<Index>> uploads_;
  std::vector<std::vector<Index>> followees_;
  std::vector<std::vector<Index>> followers_;
  std::vector<std::vector<Index>> neighbors_;
};

namespace detail {

// Splits a TSV line; returns false for blank and '#' comment lines.
inline bool split_tsv(const std::string& raw, std::vector<std::string>& fields) {
  std::string line = raw;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  fields.clear();
  if (line.empty() || line.front() == '#') return false;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return true;
}

inline std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

template <typename Fn>
void for_each_tsv_row(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::vector<std::string> fields;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!split_tsv(line, fields)) continue;
    for (const auto& f : fields) {
      if (f.empty()) throw Error(where(path, lineno) + ": malformed line (empty field)");
    }
    fn(fields, lineno);
  }
}

}  // namespace detail

// Reads the three TSV files. Users are numbered in order of first appearance
// in the ratings file, then the uploads file (creators); items likewise.
// Social edges may only reference users already known from those two files.
inline InteractionDataset load_interactions(const std::filesystem::path& ratings_path,
                                            const std::filesystem::path& social_path,
                                            const std::filesystem::path& uploads_path) {
  for (const auto& p : {ratings_path, social_path, uploads_path}) {
    if (!std::filesystem::exists(p)) throw Error("file not found: " + p.string());
  }

  Vocabulary users;
  Vocabulary items;
  std::vector<Rating> ratings;
  detail::for_each_tsv_row(ratings_path, [&](const std::vector<std::string>& f, std::size_t ln) {
    if (f.size() != 2 && f.size() != 3) {
      throw Error(detail::where(ratings_path, ln) + ": malformed line (expected 2 or 3 fields)");
    }
    Rating r;
    r.user = users.intern(f[0]);
    r.item = items.intern(f[1]);
    if (f.size() == 3) {
      std::int64_t ts = 0;
      std::istringstream ss(f[2]);
      if (!(ss >> ts) || !ss.eof()) {
        throw Error(detail::where(ratings_path, ln) + ": malformed timestamp \"" + f[2] + "\"");
      }
      r.timestamp = ts;
    }
    ratings.push_back(r);
  });

  std::vector<std::pair<std::string, std::string>> upload_rows;
  detail::for_each_tsv_row(uploads_path, [&](const std::vector<std::string>& f, std::size_t ln) {
    if (f.size() != 2) {
      throw Error(detail::where(uploads_path, ln) + ": malformed line (expected 2 fields)");
    }
    items.intern(f[0]);
    users.intern(f[1]);
    upload_rows.emplace_back(f[0], f[1]);
  });

  std::vector<Index> creators(static_cast<std::size_t>(items.size()), -1);
  for (const auto& [item_id, user_id] : upload_rows) {
    auto& slot = creators[static_cast<std::size_t>(items.at(item_id))];
    if (slot != -1) throw Error("item \"" + item_id + "\" has multiple creators");
    slot = users.at(user_id);
  }
  for (Index i = 0; i < items.size(); ++i) {
    if (creators[static_cast<std::size_t>(i)] == -1) {
      throw Error("item \"" + items.id(i) + "\" has no creator in " + uploads_path.string());
    }
  }

  std::vector<SocialEdge> social;
  detail::for_each_tsv_row(social_path, [&](const std::vector<std::string>& f, std::size_t ln) {
    if (f.size() != 2) {
      throw Error(detail::where(social_path, ln) + ": malformed line (expected 2 fields)");
    }
    auto follower = users.find(f[0]);
    auto followee = users.find(f[1]);
    if (!follower || !followee) {
      throw Error(detail::where(social_path, ln) + ": unknown user \"" +
                  (follower ? f[1] : f[0]) + "\"");
    }
    if (*follower == *followee) {
      throw Error(detail::where(social_path, ln) + ": self-loop on user \"" + f[0] + "\"");
    }
    social.push_back({*follower, *followee});
  });

  return InteractionDataset(std::move(users), std::move(items), std::move(ratings),
                            std::move(social), std::move(creators));
}

inline void write_interactions(const InteractionDataset& ds, const std::filesystem::path& ratings_path,
                               const std::filesystem::path& social_path,
                               const std::filesystem::path& uploads_path) {
  for (const auto& p : {ratings_path, social_path, uploads_path}) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  }
  std::ofstream r(ratings_path);
  for (const auto& x : ds.ratings()) {
    r << ds.users().id(x.user) << '\t' << ds.items().id(x.item);
    if (x.timestamp) r << '\t' << *x.timestamp;
    r << '\n';
  }
  std::ofstream s(social_path);
  for (const auto& e : ds.social_edges()) {
    s << ds.users().id(e.follower) << '\t' << ds.users().id(e.followee) << '\n';
  }
  std::ofstream u(uploads_path);
  for (Index i = 0; i < ds.num_items(); ++i) {
    u << ds.items().id(i) << '\t' << ds.users().id(ds.creator(i)) << '\n';
  }
  if (!r || !s || !u) throw Error("failed writing dataset files");
}

struct FilterThresholds {
  Index min_user_ratings = 0;
  Index min_user_links = 0;
  Index min_item_ratings = 0;
};

// Iteratively drops users and items below the thresholds until nothing
// changes. Users failing the thresholds lose their ratings; those that still
// created a surviving item stay on as creator-only users.
inline InteractionDataset filter_dataset(const InteractionDataset& ds, const FilterThresholds& t) {
  if (t.min_user_ratings < 0 || t.min_user_links < 0 || t.min_item_ratings < 0) {
    throw Error("filter thresholds must be >= 0");
  }
  const auto M = static_cast<std::size_t>(ds.num_users());
  const auto N = static_cast<std::size_t>(ds.num_items());
  std::vector<bool> user_alive(M, true);
  std::vector<bool> item_alive(N, true);

  const auto retained = [&](const std::vector<bool>& creator_of_alive, std::size_t u) {
    return user_alive[u] || creator_of_alive[u];
  };

  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<Index> user_count(M, 0), item_count(N, 0), degree(M, 0);
    std::vector<bool> creator_of_alive(M, false);
    for (std::size_t i = 0; i < N; ++i) {
      if (item_alive[i]) creator_of_alive[static_cast<std::size_t>(ds.creator(static_cast<Index>(i)))] = true;
    }
    for (const auto& r : ds.ratings()) {
      const auto u = static_cast<std::size_t>(r.user);
      const auto i = static_cast<std::size_t>(r.item);
      if (user_alive[u] && item_alive[i]) {
        ++user_count[u];
        ++item_count[i];
      }
    }
    for (std::size_t u = 0; u < M; ++u) {
      if (!retained(creator_of_alive, u)) continue;
      for (Index v : ds.neighbors(static_cast<Index>(u))) {
        if (retained(creator_of_alive, static_cast<std::size_t>(v))) ++degree[u];
      }
    }
    for (std::size_t u = 0; u < M; ++u) {
      if (user_alive[u] && (user_count[u] < t.min_user_ratings || degree[u] < t.min_user_links)) {
        user_alive[u] = false;
        changed = true;
      }
    }
    for (std::size_t i = 0; i < N; ++i) {
      if (item_alive[i] && item_count[i] < t.min_item_ratings) {
        item_alive[i] = false;
        changed = true;
      }
    }
  }

  std::vector<bool> keep_user(M, false);
  for (std::size_t u = 0; u < M; ++u) keep_user[u] = user_alive[u];
  for (std::size_t i = 0; i < N; ++i) {
    if (item_alive[i]) keep_user[static_cast<std::size_t>(ds.creator(static_cast<Index>(i)))] = true;
  }

  Vocabulary users, items;
  std::vector<Index> user_map(M, -1), item_map(N, -1);
  std::vector<bool> creator_only;
  for (std::size_t u = 0; u < M; ++u) {
    if (!keep_user[u]) continue;
    user_map[u] = users.intern(ds.users().id(static_cast<Index>(u)));
    creator_only.push_back(!user_alive[u] || ds.creator_only(static_cast<Index>(u)));
  }
  std::vector<Index> creators;
  for (std::size_t i = 0; i < N; ++i) {
    if (!item_alive[i]) continue;
    item_map[i] = items.intern(ds.items().id(static_cast<Index>(i)));
    creators.push_back(user_map[static_cast<std::size_t>(ds.creator(static_cast<Index>(i)))]);
  }
  std::vector<Rating> ratings;
  for (const auto& r : ds.ratings()) {
    const auto u = static_cast<std::size_t>(r.user);
    const auto i = static_cast<std::size_t>(r.item);
    if (user_alive[u] && item_alive[i]) ratings.push_back({user_map[u], item_map[i], r.timestamp});
  }
  if (ratings.empty()) throw Error("dataset exhausted by filtering");
  std::vector<SocialEdge> social;
  for (const auto& e : ds.social_edges()) {
    const auto a = user_map[static_cast<std::size_t>(e.follower)];
    const auto b = user_map[static_cast<std::size_t>(e.followee)];
    if (a >= 0 && b >= 0) social.push_back({a, b});
  }
  return InteractionDataset(std::move(users), std::move(items), std::move(ratings), std::move(social),
                            std::move(creators), std::move(creator_only));
}

struct DatasetStats {
  Index users = 0;
  Index items = 0;
  Index ratings = 0;
  Index links = 0;
  Real density = 0.0;
};

inline DatasetStats dataset_stats(const InteractionDataset& ds) {
  return {ds.num_users(), ds.num_items(), ds.num_ratings(), ds.num_social_edges(), ds.density()};
}

}  // namespace hasc
