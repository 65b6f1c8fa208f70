#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "htds/corpus.hpp"

namespace htds {

using TokenId = std::int32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr TokenId kClsId = 2;
inline constexpr std::size_t kReservedTokens = 3;

// Lowercases and splits on whitespace; every ASCII punctuation character
// becomes its own token. Punctuation is kept.
std::vector<std::string> split_tokens(std::string_view text);

class Vocabulary {
 public:
  Vocabulary();
  // Builds from explicit non-reserved tokens, in id order.
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  TokenId id(std::string_view token) const;  // kUnkId if absent
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::vector<TokenId> encode(std::string_view text) const;

  // Header line, then one non-reserved token per line (id = line index + 3).
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// Most frequent tokens up to max_size - 3 (ties lexicographic).
Vocabulary build_vocab(const std::vector<HospitalStay>& corpus, std::size_t max_size);
Vocabulary build_vocab(const std::vector<const HospitalStay*>& corpus, std::size_t max_size);

struct MetaIndices {
  std::size_t pe = 0;
  std::size_t rev_pe = 0;
  std::size_t te = 0;
  std::size_t rev_te = 0;
  std::size_t ce = 0;

  friend bool operator==(const MetaIndices&, const MetaIndices&) = default;
};

struct Chunk {
  std::vector<TokenId> token_ids;  // exactly T_c, CLS first, PAD right-padded
  std::size_t real_len = 0;
  std::size_t doc_index = 0;
  std::size_t category_id = 0;
  MetaIndices meta;

  friend bool operator==(const Chunk&, const Chunk&) = default;
};

struct ChunkingReport {
  std::size_t empty_documents = 0;
};

// Greedy per-document chunking: each chunk is CLS plus up to T_c - 1 tokens of
// one document, and each document starts a new chunk.
std::vector<Chunk> chunk_stay(const HospitalStay& stay, const Vocabulary& vocab,
                              const CategoryTable& categories, std::size_t tokens_per_chunk,
                              ChunkingReport* report = nullptr);

}  // namespace htds
