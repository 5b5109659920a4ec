#pragma once

// Loading an EmbeddingBundle from a directory of interchange files:
//   social, item_content, item_style, user_content, user_style
// Rows are matched to the dataset through the sidecar ids when present.

#include <filesystem>
#include <string>
#include <unordered_map>

#include "hasc/data/dataset.hpp"
#include "hasc/embed/bundle.hpp"
#include "hasc/io/dense_matrix.hpp"

namespace hasc {

// Reorders rows so row k belongs to vocab id k. Extra rows (e.g. features of
// items dropped by filtering) are ignored; a missing id is an error.
inline Matrix align_rows(const io::DenseMatrixFile& f, const Vocabulary& vocab, const std::string& what) {
  if (f.ids.empty()) {
    if (f.values.rows() != vocab.size()) {
      throw Error(what + ": " + std::to_string(f.values.rows()) + " rows without ids, expected " +
                  std::to_string(vocab.size()));
    }
    return f.values;
  }
  std::unordered_map<std::string, Index> row_of;
  for (std::size_t k = 0; k < f.ids.size(); ++k) row_of.emplace(f.ids[k], static_cast<Index>(k));
  Matrix out(vocab.size(), f.values.cols());
  for (Index k = 0; k < vocab.size(); ++k) {
    auto it = row_of.find(vocab.id(k));
    if (it == row_of.end()) throw Error(what + ": no row for id \"" + vocab.id(k) + "\"");
    out.row(k) = f.values.row(it->second);
  }
  return out;
}

inline Matrix load_aligned(const std::filesystem::path& base, const Vocabulary& vocab) {
  if (!std::filesystem::exists(io::sidecar_path(base))) {
    throw Error("file not found: " + io::sidecar_path(base).string());
  }
  return align_rows(io::read_dense_matrix(base), vocab, base.string());
}

inline EmbeddingBundle load_bundle(const std::filesystem::path& dir, const Vocabulary& users,
                                   const Vocabulary& items) {
  EmbeddingBundle b;
  b.social = load_aligned(dir / "social", users);
  b.item_content = load_aligned(dir / "item_content", items);
  b.item_style = load_aligned(dir / "item_style", items);
  b.user_content = load_aligned(dir / "user_content", users);
  b.user_style = load_aligned(dir / "user_style", users);
  b.check(users.size(), items.size());
  return b;
}

inline void save_bundle(const EmbeddingBundle& b, const std::filesystem::path& dir, const Vocabulary& users,
                        const Vocabulary& items) {
  std::filesystem::create_directories(dir);
  io::write_dense_matrix(dir / "social", b.social, users.ids());
  io::write_dense_matrix(dir / "item_content", b.item_content, items.ids());
  io::write_dense_matrix(dir / "item_style", b.item_style, items.ids());
  io::write_dense_matrix(dir / "user_content", b.user_content, users.ids());
  io::write_dense_matrix(dir / "user_style", b.user_style, users.ids());
}

}  // namespace hasc
