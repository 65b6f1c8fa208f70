#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "htds/tokenizer.hpp"

namespace htds {
namespace {

HospitalStay stay_with(std::vector<std::pair<std::string, std::string>> docs) {
  HospitalStay st;
  st.stay_id = "A";
  for (auto& [cat, text] : docs) {
    ClinicalNote n;
    n.category = cat;
    n.text = text;
    st.notes.push_back(n);
  }
  return st;
}

std::string repeat_words(std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += (i ? " w" : "w") + std::to_string(i % 7);
  return s;
}

TEST(SplitTokens, KeepsPunctuationAndLowercases) {
  EXPECT_EQ(split_tokens("Pt. denies CP,SOB!"),
            (std::vector<std::string>{"pt", ".", "denies", "cp", ",", "sob", "!"}));
  EXPECT_EQ(split_tokens("  \t\n"), std::vector<std::string>{});
  EXPECT_EQ(split_tokens("b/p 120/80"),
            (std::vector<std::string>{"b", "/", "p", "120", "/", "80"}));
}

TEST(Vocab, ReservedIdsAndUnknown) {
  const Vocabulary v({"alpha", "beta"});
  EXPECT_EQ(v.size(), 5u);
  EXPECT_EQ(v.id("alpha"), 3);
  EXPECT_EQ(v.id("gamma"), kUnkId);
  EXPECT_EQ(v.token(kPadId), "[PAD]");
  EXPECT_EQ(v.encode("Beta gamma"), (std::vector<TokenId>{4, kUnkId}));
}

TEST(Vocab, BuildCountsDistinctTokens) {
  const std::vector<HospitalStay> c = {stay_with({{"ECG", "a b c a"}})};
  EXPECT_EQ(build_vocab(c, 100).size(), 6u);
}

TEST(Vocab, TruncationTieBreaksLexicographically) {
  // a:2, b:1, c:1 -> keep a, then b over c.
  const std::vector<HospitalStay> c = {stay_with({{"ECG", "c b a a"}})};
  const auto v = build_vocab(c, 5);
  EXPECT_EQ(v.size(), 5u);
  EXPECT_EQ(v.id("a"), 3);
  EXPECT_EQ(v.id("b"), 4);
  EXPECT_EQ(v.id("c"), kUnkId);
  EXPECT_THROW(build_vocab(c, 3), std::invalid_argument);
}

TEST(Vocab, SaveLoadRoundTrip) {
  testing::TempDir d("vocab");
  const std::vector<HospitalStay> c = {stay_with({{"ECG", "Hello, world. hello!"}})};
  const auto v = build_vocab(c, 50);
  v.save(d / "vocab.txt");
  const auto back = Vocabulary::load(d / "vocab.txt");
  EXPECT_EQ(back, v);
  EXPECT_EQ(back.id("hello"), v.id("hello"));
  testing::write_text(d / "bad.txt", "not a vocab\n");
  EXPECT_THROW(Vocabulary::load(d / "bad.txt"), DataError);
}

class ChunkTest : public ::testing::Test {
 protected:
  Vocabulary vocab_{{"w0", "w1", "w2", "w3", "w4", "w5", "w6"}};
  CategoryTable cats_{{"Discharge summary", "ECG"}};
};

TEST_F(ChunkTest, LongDocumentSplitsGreedily) {
  const auto chunks = chunk_stay(stay_with({{"ECG", repeat_words(1022)}}), vocab_, cats_, 512);
  ASSERT_EQ(chunks.size(), 2u);
  EXPECT_EQ(chunks[0].real_len, 512u);
  EXPECT_EQ(chunks[1].real_len, 512u);
  EXPECT_EQ(chunks[0].token_ids[0], kClsId);
  EXPECT_EQ(chunks[1].token_ids[0], kClsId);
}

TEST_F(ChunkTest, DocumentsNeverShareAChunk) {
  const auto chunks =
      chunk_stay(stay_with({{"ECG", repeat_words(300)}, {"Discharge summary", repeat_words(300)}}), vocab_, cats_, 512);
  ASSERT_EQ(chunks.size(), 2u);
  EXPECT_EQ(chunks[0].doc_index, 0u);
  EXPECT_EQ(chunks[1].doc_index, 1u);
  EXPECT_EQ(chunks[0].category_id, 1u);
  EXPECT_EQ(chunks[1].category_id, 0u);
  EXPECT_EQ(chunks[0].token_ids.size(), 512u);
  EXPECT_EQ(chunks[0].token_ids[301], kPadId);
}

TEST_F(ChunkTest, ReconstructsDocumentTokens) {
  for (std::size_t n : {1u, 6u, 7u, 8u, 20u}) {
    const std::string text = repeat_words(n);
    const auto chunks = chunk_stay(stay_with({{"ECG", text}}), vocab_, cats_, 7);
    EXPECT_EQ(chunks.size(), (n + 5) / 6);
    std::vector<TokenId> joined;
    for (const auto& c : chunks) {
      for (std::size_t i = 1; i < c.real_len; ++i) joined.push_back(c.token_ids[i]);
      for (std::size_t i = c.real_len; i < c.token_ids.size(); ++i) EXPECT_EQ(c.token_ids[i], kPadId);
    }
    EXPECT_EQ(joined, vocab_.encode(text));
  }
}

TEST_F(ChunkTest, EmptyDocumentsSkippedAndCounted) {
  ChunkingReport rep;
  const auto chunks = chunk_stay(stay_with({{"ECG", "   "}, {"ECG", "w1"}}), vocab_, cats_, 4, &rep);
  ASSERT_EQ(chunks.size(), 1u);
  EXPECT_EQ(chunks[0].doc_index, 1u);
  EXPECT_EQ(rep.empty_documents, 1u);
}

TEST_F(ChunkTest, Errors) {
  EXPECT_THROW(chunk_stay(stay_with({{"ECG", "w1"}}), vocab_, cats_, 1), std::invalid_argument);
  EXPECT_THROW(chunk_stay(stay_with({{"Radiology", "w1"}}), vocab_, cats_, 4), DataError);
}

}  // namespace
}  // namespace htds
