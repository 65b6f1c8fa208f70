#pragma once

#include <cstdint>
#include <filesystem>

#include "htds/config.hpp"
#include "htds/model.hpp"

namespace htds {

// On-disk layout: a text header of "key = value" lines (format version, every
// ModelConfig field, seed, decision threshold) closed by a "---" line, then
// one record per tensor: u32 name length, name bytes, u32 rows, u32 cols,
// rows*cols little-endian float32 values.
struct Checkpoint {
  ModelConfig config;
  std::uint64_t seed = 0;
  double threshold = 0.5;
  ModelParams params;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

// Throws ConfigError when `expected` is given and differs from the stored config.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig* expected = nullptr);

}  // namespace htds
