#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "json.hpp"

namespace cpo::cli {

/// FNV-1a over the file bytes, as 16 hex digits.
std::string file_hash(const std::filesystem::path& path);

/// Resolves an output path against CPO_OUTPUT_DIR when that variable is set
/// and the path is relative, creating parent directories.
std::filesystem::path output_path(const std::string& requested);

/// Written once per run next to the primary output as `<output>.manifest.json`.
class RunManifest {
 public:
  explicit RunManifest(std::string subcommand);

  void set_seed(std::uint64_t seed) { seed_ = seed; }
  nlohmann::ordered_json& config() { return config_; }
  void add_input(const std::string& role, const std::filesystem::path& path);
  void add_output(const std::string& role, const std::filesystem::path& path);

  /// Hashes every registered file and writes the manifest beside `primary`.
  std::filesystem::path write(const std::filesystem::path& primary) const;

 private:
  std::string subcommand_;
  std::uint64_t seed_ = 0;
  std::string started_at_;
  nlohmann::ordered_json config_ = nlohmann::ordered_json::object();
  std::map<std::string, std::filesystem::path> inputs_;
  std::map<std::string, std::filesystem::path> outputs_;
};

}  // namespace cpo::cli
