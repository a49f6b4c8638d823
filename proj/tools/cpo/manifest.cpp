#include "manifest.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "cpo/error.hpp"

namespace cpo::cli {
namespace {

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm parts{};
  gmtime_r(&now, &parts);
  std::ostringstream out;
  out << std::put_time(&parts, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

}  // namespace

std::string file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buffer[1 << 14];
  while (in.read(buffer, sizeof buffer) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buffer[i]);
      h *= 0x100000001b3ULL;
    }
  }
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << h;
  return hex.str();
}

std::filesystem::path output_path(const std::string& requested) {
  std::filesystem::path path(requested);
  if (const char* dir = std::getenv("CPO_OUTPUT_DIR"); dir != nullptr && *dir != '\0' &&
                                                       path.is_relative()) {
    path = std::filesystem::path(dir) / path;
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  return path;
}

RunManifest::RunManifest(std::string subcommand)
    : subcommand_(std::move(subcommand)), started_at_(utc_now()) {}

void RunManifest::add_input(const std::string& role, const std::filesystem::path& path) {
  inputs_[role] = path;
}

void RunManifest::add_output(const std::string& role, const std::filesystem::path& path) {
  outputs_[role] = path;
}

std::filesystem::path RunManifest::write(const std::filesystem::path& primary) const {
  nlohmann::ordered_json doc;
  doc["subcommand"] = subcommand_;
  doc["seed"] = seed_;
  doc["config"] = config_;
  auto describe = [](const std::map<std::string, std::filesystem::path>& files) {
    nlohmann::ordered_json out = nlohmann::ordered_json::object();
    for (const auto& [role, path] : files) {
      out[role] = {{"path", path.string()}, {"fnv1a64", file_hash(path)}};
    }
    return out;
  };
  doc["inputs"] = describe(inputs_);
  doc["outputs"] = describe(outputs_);
  doc["started_at"] = started_at_;
  doc["finished_at"] = utc_now();

  std::filesystem::path path = primary;
  path += ".manifest.json";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
  return path;
}

}  // namespace cpo::cli
