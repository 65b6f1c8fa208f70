#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "htds/corpus.hpp"

namespace htds {

struct IntRange {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
};

// Parameters of the synthetic stand-in corpus. Every stay has one discharge
// summary (its last note) plus notes of the other categories. Each label of a
// stay plants its keywords once; a discharge_signal_fraction share of the
// stay's (label, keyword) pairs lands in the discharge summary, the rest in
// other notes, and every label keeps at least one keyword outside it.
struct SyntheticSpec {
  std::uint64_t seed = 1;
  std::size_t n_stays = 100;
  std::size_t n_labels = 10;
  std::vector<std::string> categories = {std::string(kDischargeCategory), "ECG", "Nursing",
                                         "Physician", "Radiology"};
  IntRange notes_per_stay{3, 6};
  IntRange words_per_note{10, 25};
  IntRange labels_per_stay{1, 4};
  std::size_t keywords_per_label = 3;
  double discharge_signal_fraction = 0.5;
  std::size_t filler_vocab = 400;
  // Train and dev shares; test takes the rest. Defaults follow the
  // 8066 / 1573 / 1729 record split.
  double train_fraction = 8066.0 / 11368.0;
  double dev_fraction = 1573.0 / 11368.0;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

inline constexpr std::size_t kKeywordCapacity = 70 * 70 * 70;
inline constexpr std::size_t kFillerCapacity = 70 * 70;

// Keyword word j of label `label`; disjoint from every filler word.
std::string synthetic_keyword(std::size_t label, std::size_t j, std::size_t keywords_per_label);
std::string synthetic_filler(std::size_t i);
std::string synthetic_label_code(std::size_t label, std::size_t n_labels);

Corpus generate_synthetic(const SyntheticSpec& spec);

}  // namespace htds
