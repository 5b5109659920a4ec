#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "hasc/core.hpp"
#include "hasc/data/dataset.hpp"

namespace hasc::test {

namespace fs = std::filesystem;

// Fresh directory per test, removed afterwards.
class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    std::string name = info ? std::string(info->test_suite_name()) + "_" + info->name() : "hasc";
    for (auto& c : name) {
      if (c == '/') c = '_';
    }
    path_ = fs::temp_directory_path() / ("hasc_" + name + "_" + std::to_string(std::random_device{}()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

inline void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 3 users, 4 items, 5 ratings, 2 follow edges.
struct ToyFiles {
  fs::path ratings, social, uploads;
};

inline ToyFiles write_toy(const fs::path& dir) {
  ToyFiles f{dir / "ratings.tsv", dir / "social.tsv", dir / "uploads.tsv"};
  write_file(f.ratings, "# user item time\nu1\ti1\t1\nu1\ti2\t2\nu2\ti2\t1\nu2\ti3\t5\nu3\ti4\t3\n");
  write_file(f.social, "u1\tu2\nu3\tu1\n");
  write_file(f.uploads, "i1\tu2\ni2\tu3\ni3\tu1\ni4\tu1\n");
  return f;
}

}  // namespace hasc::test
