#pragma once

// key=value run configuration files, merged under command-line flags.
//
//   # comment
//   epochs = 40
//   mode = "att,att"
//   ks = [1, 5, 10]
//
// Quotes are stripped and [a, b] lists become "a,b", so the config.txt each
// command echoes into its output directory reads back unchanged.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <string>
#include <utility>
#include <vector>

#include "hasc/core.hpp"

namespace hasc::cli {

// Bad invocation or configuration, as opposed to a failure while running.
class UsageError : public Error {
 public:
  using Error::Error;
};

using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

inline std::string trim(std::string s) {
  const auto blank = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), blank));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), blank).base(), s.end());
  return s;
}

inline std::string config_value(std::string v) {
  v = trim(std::move(v));
  if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front()) {
    return v.substr(1, v.size() - 2);
  }
  if (v.size() >= 2 && v.front() == '[' && v.back() == ']') {
    std::string out;
    for (char c : v.substr(1, v.size() - 2)) {
      if (c != ' ' && c != '"' && c != '\'') out += c;
    }
    return out;
  }
  return v;
}

inline ConfigEntries parse_config(std::istream& in, const std::string& source) {
  ConfigEntries out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || trim(line.substr(0, eq)).empty()) {
      throw UsageError(source + ":" + std::to_string(number) + ": expected key = value");
    }
    auto key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    for (const auto& [k, _] : out) {
      if (k == key) throw UsageError(source + ":" + std::to_string(number) + ": duplicate key " + key);
    }
    out.emplace_back(std::move(key), config_value(line.substr(eq + 1)));
  }
  return out;
}

inline ConfigEntries read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("config file not found: " + path.string());
  return parse_config(in, path.string());
}

// Appends "--key=value" for every entry whose flag is not already on the
// command line, so explicit flags win. `known` says whether a key names an
// option of the selected command.
inline std::vector<std::string> merge_config(std::vector<std::string> args, const ConfigEntries& entries,
                                             const std::function<bool(const std::string&)>& known) {
  const auto given = [&](const std::string& key) {
    const std::string flag = "--" + key;
    return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
  };
  std::vector<std::string> extra;
  for (const auto& [key, value] : entries) {
    if (key == "config") throw UsageError("config files cannot include other config files");
    if (!known(key)) throw UsageError("unknown config key: " + key);
    if (!given(key)) extra.push_back("--" + key + "=" + value);
  }
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

// Value of --config in raw arguments, if any.
inline std::string find_config_path(const std::vector<std::string>& args) {
  for (std::size_t k = 0; k < args.size(); ++k) {
    if (args[k] == "--config" && k + 1 < args.size()) return args[k + 1];
    if (args[k].rfind("--config=", 0) == 0) return args[k].substr(9);
  }
  return {};
}

}  // namespace hasc::cli
