#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "embprobe/error.hpp"
#include "embprobe/rng.hpp"

#ifndef EMBPROBE_VERSION
#define EMBPROBE_VERSION "0.0.0"
#endif

namespace embprobe {

inline constexpr const char* kManifestSchema = "embprobe.manifest/1";

/// FNV-1a over the file bytes, as 16 hex digits.
inline std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for hashing");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Reproducibility envelope written next to every set of outputs. The
/// "config" object holds every resolved option and is enough to re-run.
class RunManifest {
 public:
  RunManifest(std::string command, std::uint64_t seed)
      : doc_({{"schema", kManifestSchema},
              {"tool", "embprobe"},
              {"version", EMBPROBE_VERSION},
              {"command", std::move(command)},
              {"rng", kRngName},
              {"seed", seed},
              {"config", nlohmann::json::object()},
              {"inputs", nlohmann::json::object()},
              {"outputs", nlohmann::json::array()},
              {"started_at", utc_timestamp()}}) {}

  nlohmann::json& config() { return doc_["config"]; }

  void add_input(const std::string& role, const std::filesystem::path& path) {
    doc_["inputs"][role] = {{"path", path.string()},
                            {"fnv1a64", file_digest(path)},
                            {"bytes", std::filesystem::file_size(path)}};
  }

  void add_output(const std::filesystem::path& path) { doc_["outputs"].push_back(path.string()); }

  void note(const std::string& key, nlohmann::json value) { doc_["notes"][key] = std::move(value); }

  void write(const std::filesystem::path& path) {
    doc_["finished_at"] = utc_timestamp();
    std::ofstream out(path);
    if (!out) throw Error("cannot write manifest '" + path.string() + "'");
    out << doc_.dump(2) << '\n';
  }

  const nlohmann::json& json() const { return doc_; }

 private:
  nlohmann::json doc_;
};

inline nlohmann::json read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest '" + path.string() + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error("manifest '" + path.string() + "' is not valid JSON: " + e.what());
  }
  if (doc.value("schema", "") != kManifestSchema) {
    throw Error("manifest '" + path.string() + "' has unsupported schema");
  }
  return doc;
}

}  // namespace embprobe
