#include "htds/selection.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <stdexcept>

namespace htds {

SelectionStrategy SelectionStrategy::parse(std::string_view text) {
  if (text == "diversity") return {StrategyKind::kDiversity, {}};
  if (text == "first") return {StrategyKind::kFirst, {}};
  if (text == "last") return {StrategyKind::kLast, {}};
  constexpr std::string_view prefix = "category:";
  if (text.starts_with(prefix) && text.size() > prefix.size()) {
    return {StrategyKind::kCategoryPriority, std::string(text.substr(prefix.size()))};
  }
  throw std::invalid_argument("unknown selection strategy '" + std::string(text) + "'");
}

std::string SelectionStrategy::to_string() const {
  switch (kind) {
    case StrategyKind::kDiversity:
      return "diversity";
    case StrategyKind::kFirst:
      return "first";
    case StrategyKind::kLast:
      return "last";
    case StrategyKind::kCategoryPriority:
      return "category:" + priority_category;
  }
  return "?";
}

std::vector<std::size_t> note_priority(const std::vector<Chunk>& chunks, const HospitalStay& stay,
                                       const SelectionStrategy& strategy) {
  // Documents that produced chunks, in canonical (chronological) order.
  std::vector<std::size_t> docs;
  for (const auto& c : chunks) {
    if (docs.empty() || docs.back() != c.doc_index) docs.push_back(c.doc_index);
  }
  auto category = [&](std::size_t d) -> const std::string& { return stay.notes.at(d).category; };

  std::vector<std::size_t> order;
  switch (strategy.kind) {
    case StrategyKind::kFirst:
      order = docs;
      break;
    case StrategyKind::kLast:
      order.assign(docs.rbegin(), docs.rend());
      break;
    case StrategyKind::kDiversity: {
      std::map<std::string, std::vector<std::size_t>> latest_first;
      for (auto it = docs.rbegin(); it != docs.rend(); ++it) latest_first[category(*it)].push_back(*it);
      for (std::size_t round = 0; order.size() < docs.size(); ++round) {
        const std::size_t begin = order.size();
        for (const auto& [name, list] : latest_first) {
          if (round < list.size()) order.push_back(list[round]);
        }
        // latest first within a round
        std::sort(order.begin() + static_cast<std::ptrdiff_t>(begin), order.end(), std::greater<>());
      }
      break;
    }
    case StrategyKind::kCategoryPriority: {
      std::vector<std::size_t> tiers[3];
      for (auto it = docs.rbegin(); it != docs.rend(); ++it) {
        const auto& c = category(*it);
        const int tier = c == kDischargeCategory ? 0 : (c == strategy.priority_category ? 1 : 2);
        tiers[tier].push_back(*it);
      }
      for (const auto& t : tiers) order.insert(order.end(), t.begin(), t.end());
      break;
    }
  }
  return order;
}

std::vector<Chunk> select_chunks(const std::vector<Chunk>& chunks, const HospitalStay& stay,
                                 std::size_t max_chunks, const SelectionStrategy& strategy) {
  if (max_chunks == 0) throw std::invalid_argument("select_chunks: max_chunks must be >= 1");
  if (chunks.size() <= max_chunks) return chunks;

  std::map<std::size_t, std::vector<std::size_t>> by_doc;
  for (std::size_t i = 0; i < chunks.size(); ++i) by_doc[chunks[i].doc_index].push_back(i);

  std::vector<std::size_t> picked;
  for (std::size_t doc : note_priority(chunks, stay, strategy)) {
    const auto& members = by_doc[doc];
    const std::size_t room = max_chunks - picked.size();
    const std::size_t take = std::min(room, members.size());
    picked.insert(picked.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
    if (picked.size() == max_chunks) break;
  }
  std::sort(picked.begin(), picked.end());
  std::vector<Chunk> out;
  out.reserve(picked.size());
  for (auto i : picked) out.push_back(chunks[i]);
  return out;
}

std::vector<Chunk> assign_meta_indices(std::vector<Chunk> selected) {
  std::vector<std::size_t> docs;
  for (const auto& c : selected) docs.push_back(c.doc_index);
  std::sort(docs.begin(), docs.end());
  docs.erase(std::unique(docs.begin(), docs.end()), docs.end());
  const std::size_t n = selected.size();
  const std::size_t d = docs.size();
  for (std::size_t i = 0; i < n; ++i) {
    auto& c = selected[i];
    const auto rank = static_cast<std::size_t>(
        std::lower_bound(docs.begin(), docs.end(), c.doc_index) - docs.begin());
    c.meta = {i, n - 1 - i, rank, d - 1 - rank, c.category_id};
  }
  return selected;
}

}  // namespace htds
