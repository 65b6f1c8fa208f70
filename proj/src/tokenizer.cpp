#include "htds/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <stdexcept>

namespace htds {
namespace {

constexpr std::string_view kVocabHeader = "htds-vocab 1 [PAD] [UNK] [CLS]";

bool is_space(unsigned char c) { return std::isspace(c) != 0; }
bool is_punct(unsigned char c) { return c < 0x80 && std::ispunct(c) != 0; }

}  // namespace

std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_space(c)) {
      flush();
    } else if (is_punct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  flush();
  return out;
}

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) {
  tokens_ = {"[PAD]", "[UNK]", "[CLS]"};
  tokens_.insert(tokens_.end(), std::make_move_iterator(tokens.begin()),
                 std::make_move_iterator(tokens.end()));
  for (std::size_t i = kReservedTokens; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw DataError("duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnkId : it->second;
}

std::vector<TokenId> Vocabulary::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const auto& t : split_tokens(text)) ids.push_back(id(t));
  return ids;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << kVocabHeader << '\n';
  for (std::size_t i = kReservedTokens; i < tokens_.size(); ++i) out << tokens_[i] << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kVocabHeader) {
    throw DataError(path.string() + ": missing or unsupported vocabulary header");
  }
  std::vector<std::string> tokens;
  while (std::getline(in, line)) tokens.push_back(line);
  return Vocabulary(std::move(tokens));
}

Vocabulary build_vocab(const std::vector<HospitalStay>& corpus, std::size_t max_size) {
  std::vector<const HospitalStay*> ptrs;
  for (const auto& st : corpus) ptrs.push_back(&st);
  return build_vocab(ptrs, max_size);
}

Vocabulary build_vocab(const std::vector<const HospitalStay*>& corpus, std::size_t max_size) {
  if (max_size < kReservedTokens + 1) throw std::invalid_argument("vocabulary max_size must be >= 4");
  std::map<std::string, std::size_t> freq;
  for (const HospitalStay* st : corpus) {
    for (const auto& n : st->notes) {
      for (auto& t : split_tokens(n.text)) ++freq[std::move(t)];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  const std::size_t keep = std::min(ranked.size(), max_size - kReservedTokens);
  std::vector<std::string> tokens;
  tokens.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) tokens.push_back(std::move(ranked[i].first));
  return Vocabulary(std::move(tokens));
}

std::vector<Chunk> chunk_stay(const HospitalStay& stay, const Vocabulary& vocab,
                              const CategoryTable& categories, std::size_t tokens_per_chunk,
                              ChunkingReport* report) {
  if (tokens_per_chunk < 2) throw std::invalid_argument("tokens_per_chunk must be >= 2");
  const std::size_t content = tokens_per_chunk - 1;
  std::vector<Chunk> chunks;
  for (std::size_t d = 0; d < stay.notes.size(); ++d) {
    const auto& note = stay.notes[d];
    const auto ids = vocab.encode(note.text);
    if (ids.empty()) {
      if (report) ++report->empty_documents;
      continue;
    }
    const auto cat = categories.find(note.category);
    if (!cat) throw DataError("unknown note category '" + note.category + "'");
    for (std::size_t start = 0; start < ids.size(); start += content) {
      const std::size_t n = std::min(content, ids.size() - start);
      Chunk c;
      c.token_ids.assign(tokens_per_chunk, kPadId);
      c.token_ids[0] = kClsId;
      std::copy_n(ids.begin() + static_cast<std::ptrdiff_t>(start), n, c.token_ids.begin() + 1);
      c.real_len = n + 1;
      c.doc_index = d;
      c.category_id = static_cast<std::size_t>(*cat);
      chunks.push_back(std::move(c));
    }
  }
  return chunks;
}

}  // namespace htds
