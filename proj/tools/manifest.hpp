#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace ibkd::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);
std::string utc_now();

struct FileEntry {
  std::string path;
  std::string sha256;
  /// False for outputs that carry wall-clock data (training history).
  bool reproducible = true;
};

/// Everything needed to re-run a command: the command name, its flags, the
/// resolved config, and digests of what went in and came out.
struct RunManifest {
  std::string command;
  std::string tool_version = kToolVersion;
  std::uint64_t seed = 0;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::map<std::string, std::string> args;
  std::map<std::string, FileEntry> inputs;
  std::map<std::string, FileEntry> outputs;
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();
  std::string started_at;
  std::string finished_at;
  std::string status = "running";

  void add_input(const std::string& name, const std::string& path);
  /// Records an output path; the digest is filled in by finalize().
  void add_output(const std::string& name, const std::string& path, bool reproducible = true);
  /// Hashes every output and stamps the finish time.
  void finalize();

  nlohmann::ordered_json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
  void write(const std::string& path) const;
  static RunManifest read(const std::string& path);
};

/// Inputs whose current digest differs from the recorded one.
std::vector<std::string> changed_inputs(const RunManifest& m);

}  // namespace ibkd::cli
