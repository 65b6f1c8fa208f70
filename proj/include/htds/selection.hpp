#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "htds/corpus.hpp"
#include "htds/tokenizer.hpp"

namespace htds {

enum class StrategyKind { kDiversity, kFirst, kLast, kCategoryPriority };

struct SelectionStrategy {
  StrategyKind kind = StrategyKind::kDiversity;
  std::string priority_category;  // only for kCategoryPriority

  // "diversity" | "first" | "last" | "category:<name>"
  static SelectionStrategy parse(std::string_view text);
  std::string to_string() const;

  friend bool operator==(const SelectionStrategy&, const SelectionStrategy&) = default;
};

// Picks at most max_chunks chunks by admitting whole notes in the strategy's
// priority order; the note that overflows the budget keeps only its leading
// chunks. Output is in canonical (document, within-document) order.
//
//   diversity          rounds over categories; round r takes the r-th latest
//                      note of every category, latest first
//   first / last       ascending / descending charttime
//   category:<name>    discharge summaries, then <name>, then the rest;
//                      each tier latest first
std::vector<Chunk> select_chunks(const std::vector<Chunk>& chunks, const HospitalStay& stay,
                                 std::size_t max_chunks, const SelectionStrategy& strategy);

// Note indices in admission priority order (only notes that produced chunks).
std::vector<std::size_t> note_priority(const std::vector<Chunk>& chunks, const HospitalStay& stay,
                                       const SelectionStrategy& strategy);

// Fills pe / rev_pe / te / rev_te / ce for a selected, canonically ordered
// sequence. te is the dense rank of the chunk's document among the selected
// documents.
std::vector<Chunk> assign_meta_indices(std::vector<Chunk> selected);

}  // namespace htds
