#pragma once

#include <string>
#include <vector>

#include "htds/corpus.hpp"
#include "htds/tokenizer.hpp"

namespace htds {

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // population
};

struct TextAmount {
  MeanSd documents;
  MeanSd words;   // whitespace-split
  MeanSd tokens;  // vocabulary tokenizer, no CLS
};

// Per-stay text amounts, discharge summaries only and all notes.
struct StatsReport {
  std::size_t n_stays = 0;
  TextAmount discharge;
  TextAmount all_notes;

  std::string render() const;
};

StatsReport corpus_stats(const std::vector<HospitalStay>& corpus, const Vocabulary& vocab);

}  // namespace htds
