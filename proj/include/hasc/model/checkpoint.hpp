#pragma once

// Checkpoint layout: a directory holding manifest.json plus one f64 dense
// matrix pair (<name>.json / <name>.bin) per tensor. f64 keeps the round
// trip bit-exact.

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "hasc/core.hpp"
#include "hasc/io/dense_matrix.hpp"
#include "hasc/model/mode.hpp"
#include "hasc/model/params.hpp"

namespace hasc {

inline constexpr const char* kCheckpointMagic = "HASC-CHECKPOINT";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams params;
  AttentionMode mode;
  std::uint64_t seed = 0;
  nlohmann::ordered_json metadata = nlohmann::ordered_json::object();
};

inline nlohmann::ordered_json dims_to_json(const ModelDims& d) {
  return {{"num_users", d.num_users},     {"num_items", d.num_items},     {"latent", d.latent},
          {"hidden", d.hidden},           {"social_dim", d.social_dim},   {"content_dim", d.content_dim},
          {"style_dim", d.style_dim},     {"negative_slope", d.negative_slope}};
}

inline ModelDims dims_from_json(const nlohmann::json& j) {
  ModelDims d;
  d.num_users = j.at("num_users").get<Index>();
  d.num_items = j.at("num_items").get<Index>();
  d.latent = j.at("latent").get<Index>();
  d.hidden = j.at("hidden").get<Index>();
  d.social_dim = j.at("social_dim").get<Index>();
  d.content_dim = j.at("content_dim").get<Index>();
  d.style_dim = j.at("style_dim").get<Index>();
  d.negative_slope = j.at("negative_slope").get<Real>();
  return d;
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["magic"] = kCheckpointMagic;
  manifest["version"] = kCheckpointVersion;
  manifest["dims"] = dims_to_json(ckpt.params.dims);
  manifest["mode"] = to_json(ckpt.mode);
  manifest["seed"] = ckpt.seed;
  manifest["metadata"] = ckpt.metadata;
  auto names = nlohmann::ordered_json::array();
  for_each_tensor(ckpt.params, [&](const char* name, const auto& t) {
    names.push_back(name);
    const Matrix m = Eigen::Map<const Matrix>(t.data(), t.rows(), t.cols());
    io::write_dense_matrix(dir / name, m, {}, io::DType::f64);
  });
  manifest["tensors"] = names;
  std::ofstream out(dir / "manifest.json");
  if (!out) throw Error("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

inline Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint manifest " + path.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": not a checkpoint manifest (" + e.what() + ")");
  }
  if (!manifest.is_object() || manifest.value("magic", std::string()) != kCheckpointMagic) {
    throw Error(path.string() + ": bad checkpoint magic");
  }
  if (manifest.value("version", -1) != kCheckpointVersion) {
    throw Error(path.string() + ": unsupported checkpoint version");
  }
  Checkpoint ckpt;
  ckpt.params = zeros_like(dims_from_json(manifest.at("dims")));
  ckpt.mode = attention_mode_from_json(manifest.at("mode"));
  ckpt.seed = manifest.value("seed", std::uint64_t{0});
  if (manifest.contains("metadata")) ckpt.metadata = manifest["metadata"];
  for_each_tensor(ckpt.params, [&](const char* name, auto& t) {
    const auto file = io::read_dense_matrix(dir / name);
    if (file.values.rows() != t.rows() || file.values.cols() != t.cols()) {
      throw Error("checkpoint tensor " + std::string(name) + " is " + std::to_string(file.values.rows()) +
                  "x" + std::to_string(file.values.cols()) + ", expected " + std::to_string(t.rows()) + "x" +
                  std::to_string(t.cols()));
    }
    std::copy(file.values.data(), file.values.data() + file.values.size(), t.data());
  });
  return ckpt;
}

// Throws unless the checkpoint was trained on data with these dimensions.
inline void check_compatible(const ModelDims& dims, Index num_users, Index num_items, Index social_dim,
                             Index content_dim, Index style_dim) {
  const auto mismatch = [](const char* what, Index got, Index want) {
    return Error(std::string("checkpoint/dataset mismatch: ") + what + " " + std::to_string(got) +
                 " in checkpoint, " + std::to_string(want) + " in data");
  };
  if (dims.num_users != num_users) throw mismatch("users", dims.num_users, num_users);
  if (dims.num_items != num_items) throw mismatch("items", dims.num_items, num_items);
  if (dims.social_dim != social_dim) throw mismatch("social dim", dims.social_dim, social_dim);
  if (dims.content_dim != content_dim) throw mismatch("content dim", dims.content_dim, content_dim);
  if (dims.style_dim != style_dim) throw mismatch("style dim", dims.style_dim, style_dim);
}

}  // namespace hasc
