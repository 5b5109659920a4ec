#pragma once

// Dense matrix interchange format: a JSON sidecar describing shape, dtype
// and row ids, next to a raw little-endian blob of rows*cols values.
//
//   <base>.json  {"rows":R,"cols":C,"dtype":"f32","order":"row-major","ids":[...]}
//   <base>.bin   R*C little-endian values, row-major
//
// f32 is the exchange dtype; f64 is accepted as well and used by checkpoints,
// which must round-trip bit-exactly.

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hasc/core.hpp"

namespace hasc::io {

static_assert(std::endian::native == std::endian::little,
              "interchange blobs are read and written as native little-endian");

enum class DType { f32, f64 };

inline std::string to_string(DType t) { return t == DType::f32 ? "f32" : "f64"; }

struct DenseMatrixFile {
  Matrix values;
  std::vector<std::string> ids;  // optional; empty or one per row
};

inline std::filesystem::path sidecar_path(const std::filesystem::path& base) {
  return std::filesystem::path(base.string() + ".json");
}
inline std::filesystem::path blob_path(const std::filesystem::path& base) {
  return std::filesystem::path(base.string() + ".bin");
}

// Strips a trailing ".json" or ".bin" so either file can name the pair.
inline std::filesystem::path matrix_base(const std::filesystem::path& p) {
  const auto ext = p.extension();
  if (ext == ".json" || ext == ".bin") {
    return p.parent_path() / p.stem();
  }
  return p;
}

inline void write_dense_matrix(const std::filesystem::path& base_in, const Matrix& m,
                               const std::vector<std::string>& ids = {},
                               DType dtype = DType::f32) {
  const auto base = matrix_base(base_in);
  if (!ids.empty() && static_cast<Index>(ids.size()) != m.rows()) {
    throw Error("write_dense_matrix: " + std::to_string(ids.size()) + " ids for " +
                std::to_string(m.rows()) + " rows");
  }
  if (base.has_parent_path()) std::filesystem::create_directories(base.parent_path());

  nlohmann::ordered_json meta;
  meta["rows"] = m.rows();
  meta["cols"] = m.cols();
  meta["dtype"] = to_string(dtype);
  meta["order"] = "row-major";
  meta["ids"] = ids;
  {
    std::ofstream out(sidecar_path(base));
    if (!out) throw Error("cannot write " + sidecar_path(base).string());
    out << meta.dump() << '\n';
  }

  std::ofstream out(blob_path(base), std::ios::binary);
  if (!out) throw Error("cannot write " + blob_path(base).string());
  const auto count = static_cast<std::size_t>(m.size());
  if (dtype == DType::f64) {
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(count * sizeof(double)));
  } else {
    std::vector<float> buf(count);
    for (std::size_t k = 0; k < count; ++k) buf[k] = static_cast<float>(m.data()[k]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(count * sizeof(float)));
  }
  if (!out) throw Error("short write to " + blob_path(base).string());
}

inline DenseMatrixFile read_dense_matrix(const std::filesystem::path& base_in) {
  const auto base = matrix_base(base_in);
  std::ifstream meta_in(sidecar_path(base));
  if (!meta_in) throw Error("cannot open " + sidecar_path(base).string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(sidecar_path(base).string() + ": " + e.what());
  }

  const auto field = [&](const char* key) -> const nlohmann::json& {
    if (!meta.contains(key)) throw Error(sidecar_path(base).string() + ": missing \"" + key + "\"");
    return meta.at(key);
  };
  const Index rows = field("rows").get<Index>();
  const Index cols = field("cols").get<Index>();
  const auto dtype_name = field("dtype").get<std::string>();
  const auto order = field("order").get<std::string>();
  if (rows < 0 || cols < 0) throw Error(sidecar_path(base).string() + ": negative shape");
  if (order != "row-major") {
    throw Error(sidecar_path(base).string() + ": unsupported order \"" + order + "\"");
  }
  DType dtype;
  if (dtype_name == "f32") {
    dtype = DType::f32;
  } else if (dtype_name == "f64") {
    dtype = DType::f64;
  } else {
    throw Error(sidecar_path(base).string() + ": unsupported dtype \"" + dtype_name + "\"");
  }

  DenseMatrixFile result;
  if (meta.contains("ids") && !meta["ids"].is_null()) {
    result.ids = meta["ids"].get<std::vector<std::string>>();
    if (!result.ids.empty() && static_cast<Index>(result.ids.size()) != rows) {
      throw Error(sidecar_path(base).string() + ": ids length does not match rows");
    }
  }

  const auto count = static_cast<std::size_t>(rows * cols);
  const std::size_t width = dtype == DType::f32 ? sizeof(float) : sizeof(double);
  std::error_code ec;
  const auto size = std::filesystem::file_size(blob_path(base), ec);
  if (ec) throw Error("cannot open " + blob_path(base).string());
  if (size != count * width) {
    throw Error(blob_path(base).string() + ": expected " + std::to_string(count * width) +
                " bytes, found " + std::to_string(size));
  }

  std::ifstream in(blob_path(base), std::ios::binary);
  result.values.resize(rows, cols);
  if (dtype == DType::f64) {
    in.read(reinterpret_cast<char*>(result.values.data()),
            static_cast<std::streamsize>(count * width));
  } else {
    std::vector<float> buf(count);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count * width));
    for (std::size_t k = 0; k < count; ++k) result.values.data()[k] = buf[k];
  }
  if (!in) throw Error("short read from " + blob_path(base).string());
  return result;
}

}  // namespace hasc::io
