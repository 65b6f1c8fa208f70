#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "htds/config.hpp"
#include "htds/corpus.hpp"
#include "htds/rng.hpp"
#include "htds/tokenizer.hpp"

namespace htds::testing {

// H=8, T_c=4, N_c=3, N_l=5, V=50, one layer in each transformer.
ModelConfig grad_check_config();

// Small config suitable for short training runs.
ModelConfig tiny_config(std::size_t vocab, std::size_t labels, std::size_t categories);

// 1..N_c meta-indexed chunks with random lengths, tokens and categories.
std::vector<Chunk> random_chunks(Rng& rng, const ModelConfig& cfg);
std::vector<double> random_targets(Rng& rng, std::size_t labels);

// A stay whose notes carry random categories and distinct times, with a
// chunk list built directly (1..max_chunks_per_note chunks per note).
struct StayWithChunks {
  HospitalStay stay;
  std::vector<Chunk> chunks;
};

StayWithChunks random_stay_with_chunks(Rng& rng, const std::vector<std::string>& categories,
                                       std::size_t max_notes, std::size_t max_chunks_per_note);

}  // namespace htds::testing

namespace htds::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace htds::testing
