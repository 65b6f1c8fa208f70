#include <gtest/gtest.h>

#include <map>
#include <set>

#include "fixtures.hpp"
#include "htds/selection.hpp"
#include "oracles.hpp"

namespace htds {
namespace {

const std::vector<std::string> kCats = {"Discharge summary", "ECG", "Nursing", "Physician", "Radiology"};

// Notes {Discharge t=10 (2 chunks), Radiology t=3 (1), Radiology t=5 (1), Nursing t=4 (1)}.
testing::StayWithChunks worked_example() {
  testing::StayWithChunks out;
  const Timestamp base = parse_timestamp("2130-01-01T00:00:00");
  const std::vector<std::tuple<std::string, int, int>> notes = {
      {"Radiology", 3, 1}, {"Nursing", 4, 1}, {"Radiology", 5, 1}, {"Discharge summary", 10, 2}};
  for (std::size_t d = 0; d < notes.size(); ++d) {
    const auto& [cat, hour, n] = notes[d];
    ClinicalNote note;
    note.note_id = "N" + std::to_string(d);
    note.category = cat;
    note.charttime = base + std::chrono::hours(hour);
    out.stay.notes.push_back(note);
    for (int j = 0; j < n; ++j) {
      Chunk c;
      c.token_ids = {kClsId, static_cast<TokenId>(10 * d + j)};
      c.real_len = 2;
      c.doc_index = d;
      out.chunks.push_back(c);
    }
  }
  return out;
}

std::vector<std::pair<std::size_t, TokenId>> ids(const std::vector<Chunk>& cs) {
  std::vector<std::pair<std::size_t, TokenId>> out;
  for (const auto& c : cs) out.emplace_back(c.doc_index, c.token_ids[1]);
  return out;
}

TEST(Strategy, ParseAndPrint) {
  for (const char* s : {"diversity", "first", "last", "category:Radiology"}) {
    EXPECT_EQ(SelectionStrategy::parse(s).to_string(), s);
  }
  EXPECT_THROW(SelectionStrategy::parse("random"), std::invalid_argument);
  EXPECT_THROW(SelectionStrategy::parse("category:"), std::invalid_argument);
}

TEST(Select, WorkedExampleDiversity) {
  const auto ex = worked_example();
  const auto sel = select_chunks(ex.chunks, ex.stay, 4, SelectionStrategy::parse("diversity"));
  using P = std::pair<std::size_t, TokenId>;
  EXPECT_EQ(ids(sel), (std::vector<P>{{1, 10}, {2, 20}, {3, 30}, {3, 31}}));
}

TEST(Select, WorkedExampleFirst) {
  const auto ex = worked_example();
  const auto sel = select_chunks(ex.chunks, ex.stay, 4, SelectionStrategy::parse("first"));
  using P = std::pair<std::size_t, TokenId>;
  EXPECT_EQ(ids(sel), (std::vector<P>{{0, 0}, {1, 10}, {2, 20}, {3, 30}}));
}

TEST(Select, WorkedExampleLastAndCategory) {
  const auto ex = worked_example();
  using P = std::pair<std::size_t, TokenId>;
  EXPECT_EQ(ids(select_chunks(ex.chunks, ex.stay, 3, SelectionStrategy::parse("last"))),
            (std::vector<P>{{2, 20}, {3, 30}, {3, 31}}));
  EXPECT_EQ(ids(select_chunks(ex.chunks, ex.stay, 3, SelectionStrategy::parse("category:Nursing"))),
            (std::vector<P>{{1, 10}, {3, 30}, {3, 31}}));
  EXPECT_EQ(ids(select_chunks(ex.chunks, ex.stay, 4, SelectionStrategy::parse("category:Radiology"))),
            (std::vector<P>{{0, 0}, {2, 20}, {3, 30}, {3, 31}}));
  EXPECT_EQ(ids(select_chunks(ex.chunks, ex.stay, 1, SelectionStrategy::parse("category:Unknown"))),
            (std::vector<P>{{3, 30}}));
}

TEST(Select, UnderBudgetIsIdentity) {
  const auto ex = worked_example();
  for (const char* s : {"diversity", "first", "last", "category:ECG"}) {
    EXPECT_EQ(select_chunks(ex.chunks, ex.stay, 32, SelectionStrategy::parse(s)), ex.chunks);
  }
  EXPECT_TRUE(select_chunks({}, ex.stay, 4, SelectionStrategy{}).empty());
  EXPECT_THROW(select_chunks(ex.chunks, ex.stay, 0, SelectionStrategy{}), std::invalid_argument);
}

TEST(Select, MatchesOracleOnRandomStays) {
  Rng rng(31);
  const std::vector<std::string> strategies = {"diversity", "first", "last", "category:Radiology",
                                               "category:Nursing"};
  for (int trial = 0; trial < 300; ++trial) {
    const auto s = testing::random_stay_with_chunks(rng, kCats, 10, 4);
    const auto budget = static_cast<std::size_t>(rng.uniform_int(1, 16));
    for (const auto& name : strategies) {
      const auto strat = SelectionStrategy::parse(name);
      const auto got = select_chunks(s.chunks, s.stay, budget, strat);
      ASSERT_EQ(got, testing::oracle_select(s.chunks, s.stay, budget, strat)) << name << " trial " << trial;
      ASSERT_EQ(got.size(), std::min(budget, s.chunks.size()));
    }
  }
}

TEST(Select, DiversityEqualsLastWhenCategoriesDistinct) {
  Rng rng(32);
  for (int trial = 0; trial < 200; ++trial) {
    auto cats = kCats;
    rng.shuffle(std::span(cats));
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, 5));
    testing::StayWithChunks distinct;
    const Timestamp base = parse_timestamp("2130-01-01T00:00:00");
    for (std::size_t d = 0; d < n; ++d) {
      ClinicalNote note;
      note.note_id = "N" + std::to_string(d);
      note.category = cats[d];
      note.charttime = base + std::chrono::hours(d);
      distinct.stay.notes.push_back(note);
      const auto k = rng.uniform_int(1, 4);
      for (std::int64_t j = 0; j < k; ++j) {
        Chunk c;
        c.token_ids = {kClsId, static_cast<TokenId>(distinct.chunks.size())};
        c.real_len = 2;
        c.doc_index = d;
        distinct.chunks.push_back(c);
      }
    }
    const auto budget = static_cast<std::size_t>(rng.uniform_int(1, 10));
    EXPECT_EQ(select_chunks(distinct.chunks, distinct.stay, budget, SelectionStrategy::parse("diversity")),
              select_chunks(distinct.chunks, distinct.stay, budget, SelectionStrategy::parse("last")));
  }
}

TEST(Select, DiversityKeepsLatestNoteOfEachCategoryWhenTheyFit) {
  Rng rng(33);
  int checked = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const auto s = testing::random_stay_with_chunks(rng, kCats, 12, 3);
    const auto budget = static_cast<std::size_t>(rng.uniform_int(1, 20));
    std::map<std::string, std::size_t> latest;  // category -> doc
    for (std::size_t d = 0; d < s.stay.notes.size(); ++d) latest[s.stay.notes[d].category] = d;
    std::map<std::size_t, std::size_t> per_doc;
    for (const auto& c : s.chunks) ++per_doc[c.doc_index];
    std::size_t need = 0;
    for (const auto& [cat, d] : latest) need += per_doc[d];
    if (need > budget) continue;
    ++checked;
    const auto sel = select_chunks(s.chunks, s.stay, budget, SelectionStrategy::parse("diversity"));
    std::map<std::size_t, std::size_t> got;
    for (const auto& c : sel) ++got[c.doc_index];
    for (const auto& [cat, d] : latest) EXPECT_EQ(got[d], per_doc[d]) << cat;
  }
  EXPECT_GT(checked, 50);
}

TEST(Select, OutputIsCanonicallyOrdered) {
  Rng rng(34);
  for (int trial = 0; trial < 100; ++trial) {
    const auto s = testing::random_stay_with_chunks(rng, kCats, 8, 3);
    const auto sel = select_chunks(s.chunks, s.stay, 5, SelectionStrategy::parse("last"));
    for (std::size_t i = 1; i < sel.size(); ++i) {
      EXPECT_LT(std::make_pair(sel[i - 1].doc_index, sel[i - 1].token_ids[1]),
                std::make_pair(sel[i].doc_index, sel[i].token_ids[1]));
    }
  }
}

TEST(MetaIndices, WorkedExample) {
  std::vector<Chunk> cs(3);
  cs[0].doc_index = 4;
  cs[1].doc_index = 4;
  cs[2].doc_index = 7;
  cs[2].category_id = 2;
  const auto m = assign_meta_indices(cs);
  EXPECT_EQ(m[0].meta, (MetaIndices{0, 2, 0, 1, 0}));
  EXPECT_EQ(m[1].meta, (MetaIndices{1, 1, 0, 1, 0}));
  EXPECT_EQ(m[2].meta, (MetaIndices{2, 0, 1, 0, 2}));
}

TEST(MetaIndices, SingleChunk) {
  const auto m = assign_meta_indices(std::vector<Chunk>(1));
  EXPECT_EQ(m[0].meta, MetaIndices{});
}

TEST(MetaIndices, ReversedIdentities) {
  Rng rng(35);
  for (int trial = 0; trial < 300; ++trial) {
    const auto s = testing::random_stay_with_chunks(rng, kCats, 10, 4);
    const auto sel = assign_meta_indices(
        select_chunks(s.chunks, s.stay, static_cast<std::size_t>(rng.uniform_int(1, 12)), SelectionStrategy{}));
    std::set<std::size_t> docs;
    for (const auto& c : sel) docs.insert(c.doc_index);
    for (const auto& c : sel) {
      ASSERT_EQ(c.meta.pe + c.meta.rev_pe, sel.size() - 1);
      ASSERT_EQ(c.meta.te + c.meta.rev_te, docs.size() - 1);
      ASSERT_EQ(c.meta.ce, c.category_id);
    }
  }
}

}  // namespace
}  // namespace htds
