#include <chrono>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "htds/cli.hpp"
#include "htds/corpus.hpp"

namespace htds::cli {

std::string sha256_hex(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot read " + file.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 15];
  }
  return out;
}

std::string utc_now() {
  const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  return format_timestamp(now) + "Z";
}

std::map<std::string, std::string> hash_outputs(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().filename() == kManifestFile) continue;
    out[e.path().filename().string()] = sha256_hex(e.path());
  }
  return out;
}

std::string metrics_file(const std::string& split, bool json) {
  return split + (json ? "_metrics.json" : "_metrics.txt");
}

nlohmann::ordered_json RunManifest::to_json() const {
  return {{"command", command}, {"args", args},       {"config", config},
          {"seed", seed},       {"inputs", inputs},   {"outputs", outputs},
          {"started_at", started_at}, {"finished_at", finished_at}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.args = j.at("args").get<std::vector<std::string>>();
  m.config = j.at("config").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
  m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
  m.started_at = j.at("started_at").get<std::string>();
  m.finished_at = j.at("finished_at").get<std::string>();
  return m;
}

void RunManifest::save(const std::filesystem::path& dir) const {
  std::ofstream out(dir / kManifestFile, std::ios::binary);
  if (!out) throw DataError("cannot write manifest in " + dir.string());
  out << to_json().dump(2) << '\n';
}

RunManifest RunManifest::load(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot read manifest " + file.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(file.string() + ": " + e.what());
  }
}

}  // namespace htds::cli
