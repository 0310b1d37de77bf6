#pragma once

// Run directories, manifests and JSON-lines logs shared by all commands.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "brs/cli/config.hpp"
#include "brs/nn/checkpoint.hpp"

namespace brs::cli {

namespace fs = std::filesystem;

/// Root for relative output paths: $BRS_OUTPUT_ROOT, else ./runs.
inline fs::path output_root() {
  const char* env = std::getenv("BRS_OUTPUT_ROOT");
  return env && *env ? fs::path(env) : fs::path("runs");
}

inline fs::path run_directory(const RunConfig& c) {
  fs::path out = c.output.empty() ? fs::path(c.command + "-" + c.variant + "-seed" + std::to_string(c.seed))
                                  : fs::path(c.output);
  return out.is_absolute() ? out : output_root() / out;
}

inline void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open '" + path.string() + "' for writing");
  os << j.dump(2) << "\n";
}

/// Everything needed to replay the run: the full config, its hash, the root
/// seed and the library version. Written before any work starts.
inline void write_manifest(const fs::path& dir, const RunConfig& c, const json& extra = json::object()) {
  json m = {{"version", kVersion},
            {"command", c.command},
            {"config_hash", config_hash(c)},
            {"seed", c.seed},
            {"workers", c.workers},
            {"config", to_json(c)},
            {"provenance", provenance(c)},
            {"created_unix", static_cast<long long>(std::time(nullptr))}};
  for (const auto& [k, v] : extra.items()) m[k] = v;
  write_json(dir / "manifest.json", m);
  write_json(dir / "config.json", to_json(c));
}

/// Append-only JSON-lines log, flushed per record so a killed run keeps
/// every completed iteration.
class JsonLog {
 public:
  explicit JsonLog(const fs::path& path, bool append = false) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    os_.open(path, append ? std::ios::app : std::ios::trunc);
    if (!os_) throw ConfigError("cannot open log '" + path.string() + "'");
  }
  void write(const json& j) {
    os_ << j.dump() << "\n";
    os_.flush();
  }

 private:
  std::ofstream os_;
};

inline nn::Checkpoint make_checkpoint(std::string kind, const nn::ParameterVector& params, json meta) {
  nn::Checkpoint ck;
  ck.kind = std::move(kind);
  ck.metadata = std::move(meta);
  ck.params = params;
  return ck;
}

}  // namespace brs::cli
