#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace tdcr {

inline constexpr const char* kToolVersion = "0.1.0";

// Lowercase hex SHA-256.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

// Record of one CLI run: enough to rebuild every output from the inputs.
struct Manifest {
  std::string subcommand;
  std::vector<std::string> arguments;
  std::string config_path;
  std::string effective_config;  // INI text
  std::uint64_t seed = 0;
  std::map<std::string, std::string> inputs;   // path -> sha256
  std::map<std::string, std::string> outputs;  // path -> sha256
  std::string tool_version = kToolVersion;

  void add_input(const std::string& path);
  void add_output(const std::string& path);

  std::string to_json() const;
  static Manifest from_json(const std::string& text);
  void save(const std::string& path) const;
  static Manifest load(const std::string& path);

  // Paths whose current content no longer matches the recorded hash (missing files included).
  std::vector<std::string> mismatched_files() const;
};

}  // namespace tdcr
