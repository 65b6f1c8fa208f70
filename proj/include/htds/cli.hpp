#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace htds::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericError = 3 };

// Record written as manifest.json into every run directory.
struct RunManifest {
  std::string command;
  std::vector<std::string> args;  // full argument vector, subcommand first
  std::string config;             // resolved config text, empty if none
  std::uint64_t seed = 0;
  std::map<std::string, std::string> inputs;   // path -> sha256
  std::map<std::string, std::string> outputs;  // file name -> sha256
  std::string started_at, finished_at;         // UTC, ISO 8601

  nlohmann::ordered_json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& dir) const;
  static RunManifest load(const std::filesystem::path& file);
};

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kConfigFile = "config.txt";
inline constexpr const char* kVocabFile = "vocab.txt";
inline constexpr const char* kLabelSpaceFile = "labels.txt";
inline constexpr const char* kCategoriesFile = "categories.txt";
inline constexpr const char* kCheckpointFile = "checkpoint.bin";
inline constexpr const char* kTrainLogFile = "train_log.jsonl";

std::string sha256_hex(const std::filesystem::path& file);
std::string utc_now();

// Hashes every regular file directly inside `dir` except the manifest.
std::map<std::string, std::string> hash_outputs(const std::filesystem::path& dir);

// "<split>_metrics.txt" / "<split>_metrics.json".
std::string metrics_file(const std::string& split, bool json);

// Parses args (subcommand first, no program name) and runs the command.
// Never throws; errors go to `err` and map onto ExitCode.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace htds::cli
