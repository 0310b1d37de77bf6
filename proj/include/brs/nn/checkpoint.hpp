#pragma once

// Binary checkpoint format:
//   "BRSCKPT1"            8-byte magic
//   u32 format version
//   u32 metadata length, then UTF-8 JSON metadata
//   u32 entry count, then per entry:
//     u32 name length, name bytes, u32 rows, u32 cols,
//     rows*cols little-endian float64 in column-major order
// All integers are little-endian.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "brs/common.hpp"
#include "brs/nn/params.hpp"

namespace brs::nn {

inline constexpr char kCheckpointMagic[8] = {'B', 'R', 'S', 'C', 'K', 'P', 'T', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string kind;  // ipd-mlp | ipd-memory-one | coin-agent | coin-detective
  nlohmann::json metadata = nlohmann::json::object();
  ParameterVector params;
};

namespace detail {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

inline void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }

inline std::uint32_t get_u32(std::istream& is, const std::string& what) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 4)) throw ConfigError("corrupt checkpoint: truncated " + what);
  return v;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const Checkpoint& ck) {
  nlohmann::json meta = ck.metadata;
  meta["kind"] = ck.kind;
  const std::string m = meta.dump();
  os.write(kCheckpointMagic, 8);
  detail::put_u32(os, kCheckpointVersion);
  detail::put_u32(os, static_cast<std::uint32_t>(m.size()));
  os.write(m.data(), static_cast<std::streamsize>(m.size()));
  detail::put_u32(os, static_cast<std::uint32_t>(ck.params.size()));
  for (const auto& e : ck.params.entries()) {
    detail::put_u32(os, static_cast<std::uint32_t>(e.name.size()));
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    detail::put_u32(os, static_cast<std::uint32_t>(e.value.rows()));
    detail::put_u32(os, static_cast<std::uint32_t>(e.value.cols()));
    os.write(reinterpret_cast<const char*>(e.value.data()), static_cast<std::streamsize>(e.value.size() * 8));
  }
  if (!os) throw ConfigError("failed writing checkpoint");
}

inline Checkpoint read_checkpoint(std::istream& is) {
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw ConfigError("corrupt checkpoint: bad magic (expected BRSCKPT1)");
  }
  const std::uint32_t version = detail::get_u32(is, "version");
  if (version != kCheckpointVersion) {
    throw ConfigError("unsupported checkpoint version " + std::to_string(version) + " (reader supports " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint32_t mlen = detail::get_u32(is, "metadata length");
  std::string m(mlen, '\0');
  if (!is.read(m.data(), mlen)) throw ConfigError("corrupt checkpoint: truncated metadata");
  Checkpoint ck;
  try {
    ck.metadata = nlohmann::json::parse(m);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("corrupt checkpoint: metadata is not JSON: ") + e.what());
  }
  ck.kind = ck.metadata.value("kind", "");
  const std::uint32_t count = detail::get_u32(is, "entry count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t nlen = detail::get_u32(is, "name length");
    if (nlen > 4096) throw ConfigError("corrupt checkpoint: implausible name length");
    std::string name(nlen, '\0');
    if (!is.read(name.data(), nlen)) throw ConfigError("corrupt checkpoint: truncated name");
    const std::uint32_t rows = detail::get_u32(is, "rows");
    const std::uint32_t cols = detail::get_u32(is, "cols");
    if (static_cast<std::uint64_t>(rows) * cols > (1ULL << 28)) throw ConfigError("corrupt checkpoint: implausible shape");
    Matrix v(rows, cols);
    if (!is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * 8))) {
      throw ConfigError("corrupt checkpoint: truncated payload for '" + name + "'");
    }
    ck.params.add(std::move(name), std::move(v));
  }
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open '" + path.string() + "' for writing");
  write_checkpoint(os, ck);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open checkpoint '" + path.string() + "'");
  return read_checkpoint(is);
}

/// Human-readable dump: metadata plus every array as nested row lists.
inline nlohmann::json to_json(const Checkpoint& ck) {
  nlohmann::json j;
  j["kind"] = ck.kind;
  j["metadata"] = ck.metadata;
  nlohmann::json arrays = nlohmann::json::array();
  for (const auto& e : ck.params.entries()) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < e.value.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < e.value.cols(); ++c) row.push_back(e.value(r, c));
      rows.push_back(std::move(row));
    }
    arrays.push_back({{"name", e.name}, {"rows", e.value.rows()}, {"cols", e.value.cols()}, {"value", rows}});
  }
  j["arrays"] = std::move(arrays);
  return j;
}

}  // namespace brs::nn
