#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "htds/selection.hpp"

namespace htds {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Which meta embedding families are added to the token encodings.
struct MetaFlags {
  bool pe = true;
  bool rev_pe = true;
  bool te = true;
  bool rev_te = true;
  bool ce = true;

  friend bool operator==(const MetaFlags&, const MetaFlags&) = default;
};

struct ModelConfig {
  std::size_t tokens_per_chunk = 512;
  std::size_t max_chunks = 32;
  std::size_t hidden = 64;
  std::size_t vocab_size = 0;      // from the vocabulary
  std::size_t num_labels = 50;
  std::size_t num_categories = 0;  // from the category table
  std::size_t enc_layers = 1;
  std::size_t enc_heads = 4;
  std::size_t second_layers = 1;   // 0 disables the cross-chunk transformer
  std::size_t second_heads = 8;
  std::size_t ffn_mult = 4;
  bool cls_only = false;
  MetaFlags meta;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ThresholdGrid {
  double lo = 0.05;
  double hi = 0.95;
  double step = 0.01;

  // lo + i * step for i = 0 .. round((hi - lo) / step).
  std::vector<double> points() const;
  friend bool operator==(const ThresholdGrid&, const ThresholdGrid&) = default;
};

struct TrainConfig {
  double peak_lr = 5e-5;
  std::size_t epochs_max = 20;
  std::size_t patience = 5;
  std::size_t effective_batch = 16;
  std::size_t micro_batch = 1;
  std::array<double, 3> phase_fracs = {0.30, 0.30, 0.40};
  double lr_div_start = 25.0;
  double lr_div_final = 1000.0;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  ThresholdGrid threshold_grid;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Shortest decimal form that parses back to the same double.
std::string format_real(double v);

enum class NotesMode { kAll, kDischargeOnly };
NotesMode parse_notes_mode(std::string_view s);
std::string_view to_string(NotesMode m);

// Everything a training run needs besides data: the flat key=value file.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  SelectionStrategy strategy;
  NotesMode notes = NotesMode::kAll;
  std::size_t vocab_max = 30000;

  // num_labels caps the label space; vocab_size and num_categories are
  // filled in from data and are not read from the file.
  static RunConfig parse(std::string_view text);
  static RunConfig load(const std::filesystem::path& path);
  std::string serialize() const;
  void set(std::string_view key, std::string_view value);

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

}  // namespace htds
