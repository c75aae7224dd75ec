#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

#include "support.hpp"
#include "topeval/cooccurrence.hpp"
#include "topeval/index.hpp"

using namespace topeval;
using topeval::test::docs_from;
using topeval::test::id;
using topeval::test::TempDir;

namespace {

std::vector<Document> random_docs(std::size_t n, std::size_t vocab, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> len(0, 40), word(0, vocab - 1);
  std::vector<std::string> texts;
  for (std::size_t d = 0; d < n; ++d) {
    std::string t;
    const auto l = len(rng);
    for (std::size_t i = 0; i < l; ++i) t += "w" + std::to_string(word(rng)) + " ";
    texts.push_back(t);
  }
  return docs_from(texts);
}

}  // namespace

TEST(Index, PostingsAndLengthsForTinyCorpus) {
  auto docs = docs_from({"a a b"});
  docs[0].id = "d1";
  const auto v = make_vocabulary(docs);
  const auto ix = build_index(docs, v.size());
  EXPECT_EQ(ix.postings(id(v, "a")), (std::vector<Posting>{{0, 2}}));
  EXPECT_EQ(ix.postings(id(v, "b")), (std::vector<Posting>{{0, 1}}));
  EXPECT_EQ(ix.doc_len(*ix.find_doc("d1")), 3);
  EXPECT_EQ(ix.doc_id(0), "d1");
  EXPECT_EQ(ix.total_tokens(), 3);
  EXPECT_EQ(ix.coll_freq(id(v, "a")), 2);
  EXPECT_EQ(ix.tf(id(v, "b"), 0), 1);
}

TEST(Index, EmptyCorpus) {
  const auto ix = build_index({}, 3);
  EXPECT_EQ(ix.num_docs(), 0u);
  for (TypeId t = 0; t < 3; ++t) EXPECT_TRUE(ix.postings(t).empty());
  EXPECT_FALSE(ix.find_doc("x"));
}

TEST(Index, PostingsEqualBruteForceRecount) {
  auto docs = docs_from({"x y z x", "y y", "", "z q x", "q q q y"});
  const auto v = make_vocabulary(docs);
  const auto ix = build_index(docs, v.size());
  for (std::size_t t = 0; t < v.size(); ++t) {
    std::vector<Posting> expect;
    for (std::size_t d = 0; d < docs.size(); ++d) {
      int tf = 0;
      for (const auto& tok : docs[d].tokens) tf += tok == v.types[t] ? 1 : 0;
      if (tf) expect.push_back({static_cast<std::int32_t>(d), tf});
      EXPECT_EQ(ix.tf(static_cast<TypeId>(t), d), tf);
    }
    EXPECT_EQ(ix.postings(static_cast<TypeId>(t)), expect) << v.types[t];
  }
  for (std::size_t d = 0; d < docs.size(); ++d)
    EXPECT_EQ(ix.doc_len(d), static_cast<std::int64_t>(docs[d].tokens.size()));
}

TEST(Index, DuplicateDocumentIdsThrow) {
  auto docs = docs_from({"a", "b"});
  docs[1].id = docs[0].id;
  const auto v = make_vocabulary(docs);
  EXPECT_THROW(build_index(docs, v.size()), Error);
}

TEST(Index, SaveLoadRoundTrip) {
  TempDir dir;
  auto docs = random_docs(30, 25, 3);
  const auto v = make_vocabulary(docs);
  const auto ix = build_index(docs, v.size());
  save_index(dir / "ix.tsv", ix, "h");
  EXPECT_EQ(load_index(dir / "ix.tsv"), ix);
}

TEST(Cooccurrence, DocumentModeCountsUnits) {
  auto docs = docs_from({"a b", "a b"});
  const auto v = make_vocabulary(docs);
  const auto s = count_cooccurrence(docs, v.size(), CountMode::document);
  EXPECT_EQ(s.pair_count(id(v, "a"), id(v, "b")), 2);
  EXPECT_EQ(s.unit_count(), 2);
}

TEST(Cooccurrence, WindowModeHandEnumeration) {
  // Windows of two over [a,b,c,a]: {a,b} {b,c} {c,a}.
  auto docs = docs_from({"a b c a"});
  const auto v = make_vocabulary(docs);
  const auto s = count_cooccurrence(docs, v.size(), CountMode::window, 2);
  const auto a = id(v, "a"), b = id(v, "b"), c = id(v, "c");
  EXPECT_EQ(s.unit_count(), 3);
  EXPECT_EQ(s.pair_count(a, b), 1);
  EXPECT_EQ(s.pair_count(b, c), 1);
  EXPECT_EQ(s.pair_count(c, a), 1);
  EXPECT_EQ(s.pair_count(b, a), s.pair_count(a, b));
  EXPECT_EQ(s.single_count(a), 2);
  EXPECT_EQ(s.single_count(b), 2);
}

TEST(Cooccurrence, ShortDocumentIsOneWindow) {
  auto docs = docs_from({"a b c", ""});
  const auto v = make_vocabulary(docs);
  const auto s = count_cooccurrence(docs, v.size(), CountMode::window, 20);
  EXPECT_EQ(s.unit_count(), 1);
  EXPECT_EQ(s.pair_count(id(v, "a"), id(v, "c")), 1);
}

TEST(Cooccurrence, RepeatedWordCountsOncePerUnit) {
  auto docs = docs_from({"a a a b"});
  const auto v = make_vocabulary(docs);
  const auto s = count_cooccurrence(docs, v.size(), CountMode::document);
  EXPECT_EQ(s.single_count(id(v, "a")), 1);
  EXPECT_EQ(s.pair_count(id(v, "a"), id(v, "b")), 1);
}

TEST(Cooccurrence, WindowCountsMatchBruteForce) {
  auto docs = random_docs(40, 15, 11);
  const auto v = make_vocabulary(docs);
  const int w = 5;
  const auto s = count_cooccurrence(docs, v.size(), CountMode::window, w);
  std::map<std::pair<TypeId, TypeId>, std::int64_t> pairs;
  std::map<TypeId, std::int64_t> singles;
  std::int64_t units = 0;
  for (const auto& d : docs) {
    const auto n = d.token_ids.size();
    if (n == 0) continue;
    const std::size_t n_windows = n < static_cast<std::size_t>(w) ? 1 : n - w + 1;
    for (std::size_t start = 0; start < n_windows; ++start) {
      ++units;
      std::set<TypeId> in(d.token_ids.begin() + static_cast<std::ptrdiff_t>(start),
                          d.token_ids.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + w)));
      for (auto x : in) {
        ++singles[x];
        for (auto y : in)
          if (x < y) ++pairs[{x, y}];
      }
    }
  }
  EXPECT_EQ(s.unit_count(), units);
  for (std::size_t t = 0; t < v.size(); ++t)
    EXPECT_EQ(s.single_count(static_cast<TypeId>(t)), singles[static_cast<TypeId>(t)]);
  for (TypeId x = 0; x < static_cast<TypeId>(v.size()); ++x)
    for (TypeId y = x + 1; y < static_cast<TypeId>(v.size()); ++y)
      EXPECT_EQ(s.pair_count(x, y), (pairs[{x, y}]));
}

TEST(Cooccurrence, PairNeverExceedsSingle) {
  for (auto mode : {CountMode::window, CountMode::document}) {
    auto docs = random_docs(60, 20, 5);
    const auto v = make_vocabulary(docs);
    const auto s = count_cooccurrence(docs, v.size(), mode, 4);
    for (TypeId x = 0; x < static_cast<TypeId>(v.size()); ++x)
      for (TypeId y = 0; y < static_cast<TypeId>(v.size()); ++y) {
        EXPECT_LE(s.pair_count(x, y), s.single_count(x));
        EXPECT_LE(s.single_count(x), s.unit_count());
      }
  }
}

TEST(Cooccurrence, SaveLoadRoundTrip) {
  TempDir dir;
  auto docs = random_docs(25, 12, 9);
  const auto v = make_vocabulary(docs);
  const auto s = count_cooccurrence(docs, v.size(), CountMode::window, 3);
  save_cooccurrence(dir / "c.tsv", s, "h");
  const auto back = load_cooccurrence(dir / "c.tsv");
  EXPECT_EQ(back, s);
  EXPECT_EQ(back.mode(), CountMode::window);
  EXPECT_EQ(back.window_size(), 3);
}

TEST(Cooccurrence, MergeEqualsCountingTogether) {
  auto docs = random_docs(30, 10, 2);
  const auto v = make_vocabulary(docs);
  std::vector<Document> a(docs.begin(), docs.begin() + 12), b(docs.begin() + 12, docs.end());
  auto s = count_cooccurrence(a, v.size(), CountMode::document);
  s.merge(count_cooccurrence(b, v.size(), CountMode::document));
  EXPECT_EQ(s, count_cooccurrence(docs, v.size(), CountMode::document));
}

TEST(Cooccurrence, RejectsTinyWindow) {
  EXPECT_THROW(CooccurrenceStats(CountMode::window, 1, 4), Error);
  EXPECT_EQ(parse_count_mode("document"), CountMode::document);
  EXPECT_THROW(parse_count_mode("sentence"), Error);
}
