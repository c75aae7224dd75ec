#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "support.hpp"
#include "topeval/cluster.hpp"
#include "topeval/embedding.hpp"

using namespace topeval;
using topeval::test::TempDir;

namespace {

struct Fixture {
  Vocabulary vocab;
  EmbeddingTable emb;
};

Fixture make(const std::vector<std::pair<std::string, std::vector<double>>>& words) {
  Fixture f{{}, EmbeddingTable(words.front().second.size())};
  std::vector<Document> docs(1);
  for (const auto& [w, v] : words) {
    docs[0].tokens.push_back(w);
    f.emb.add(w, v);
  }
  f.vocab = make_vocabulary(docs);
  return f;
}

double cos_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

}  // namespace

TEST(KMeans, SeparatesTwoPointClouds) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 0.1);
  std::vector<std::pair<std::string, std::vector<double>>> words;
  for (int i = 0; i < 20; ++i) words.push_back({"a" + std::to_string(i), {5 + n(rng), 5 + n(rng)}});
  for (int i = 0; i < 20; ++i) words.push_back({"b" + std::to_string(i), {-5 + n(rng), -5 + n(rng)}});
  const auto f = make(words);
  const auto km = kmeans_clusters(f.emb, f.vocab, 2, 7);
  ASSERT_EQ(km.clusters.size(), 2u);
  EXPECT_TRUE(km.converged);
  for (const auto& c : km.clusters) {
    ASSERT_EQ(c.members.size(), 20u);
    const char cloud = f.vocab.types[static_cast<std::size_t>(c.members[0])][0];
    for (TypeId t : c.members) EXPECT_EQ(f.vocab.types[static_cast<std::size_t>(t)][0], cloud);
  }
}

TEST(KMeans, KEqualToVocabularyGivesSingletons) {
  const auto f = make({{"p", {1, 0}}, {"q", {0, 1}}, {"r", {1, 1}}, {"s", {-1, 2}}});
  const auto km = kmeans_clusters(f.emb, f.vocab, 4, 3);
  std::set<TypeId> seen;
  for (const auto& c : km.clusters) {
    ASSERT_EQ(c.members.size(), 1u);
    seen.insert(c.members[0]);
    const auto v = *f.emb.vector_of(f.vocab.types[static_cast<std::size_t>(c.members[0])]);
    EXPECT_EQ(c.centroid, std::vector<double>(v.begin(), v.end()));
  }
  EXPECT_EQ(seen.size(), 4u);
}

TEST(KMeans, FixedSeedIsDeterministic) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<std::pair<std::string, std::vector<double>>> words;
  for (int i = 0; i < 200; ++i) words.push_back({"w" + std::to_string(i), {u(rng), u(rng), u(rng)}});
  const auto f = make(words);
  const auto a = kmeans_clusters(f.emb, f.vocab, 8, 42), b = kmeans_clusters(f.emb, f.vocab, 8, 42);
  for (std::size_t c = 0; c < 8; ++c) {
    EXPECT_EQ(a.clusters[c].members, b.clusters[c].members);
    EXPECT_EQ(a.clusters[c].centroid, b.clusters[c].centroid);
  }
}

TEST(KMeans, DropsUnembeddedTypesAndChecksK) {
  auto f = make({{"p", {1, 0}}, {"q", {0, 1}}});
  std::vector<Document> docs(1);
  docs[0].tokens = {"p", "q", "zz"};
  f.vocab = make_vocabulary(docs);
  const auto km = kmeans_clusters(f.emb, f.vocab, 2, 1);
  EXPECT_EQ(km.dropped, (std::vector<TypeId>{*f.vocab.find("zz")}));
  EXPECT_THROW(kmeans_clusters(f.emb, f.vocab, 3, 1), Error);
}

TEST(ClusterTopicDist, LinearNormalizationOfCosines) {
  const auto f = make({{"a", {0.8, 0.6}}, {"b", {0.2, std::sqrt(0.96)}}});
  const std::vector<double> centroid{1.0, 0.0};
  const auto d = cluster_topic_dist(centroid, f.emb, f.vocab);
  EXPECT_NEAR(d.probs[0], 0.8, 1e-12);
  EXPECT_NEAR(d.probs[1], 0.2, 1e-12);
}

TEST(ClusterTopicDist, OrthogonalTypeGetsZero) {
  const auto f = make({{"a", {1.0, 0.0}}, {"b", {0.0, 3.0}}, {"c", {-1.0, 0.2}}});
  const auto d = cluster_topic_dist(std::vector<double>{2.0, 0.0}, f.emb, f.vocab);
  EXPECT_DOUBLE_EQ(d.probs[1], 0.0);
  EXPECT_DOUBLE_EQ(d.probs[2], 0.0);  // negative cosine clamps to zero
  EXPECT_DOUBLE_EQ(d.probs[0], 1.0);
}

TEST(ClusterTopicDist, FiveTypeOracle) {
  const std::vector<std::pair<std::string, std::vector<double>>> words{
      {"a", {1, 2, 0}}, {"b", {0, 1, 1}}, {"c", {3, 0, 1}}, {"d", {-1, -1, 0}}, {"e", {1, 1, 1}}};
  const auto f = make(words);
  const std::vector<double> centroid{0.5, 1.0, 0.25};
  std::vector<double> expect;
  double sum = 0;
  for (const auto& [w, v] : words) {
    expect.push_back(std::max(0.0, cos_oracle(v, centroid)));
    sum += expect.back();
  }
  const auto d = cluster_topic_dist(centroid, f.emb, f.vocab);
  for (std::size_t i = 0; i < words.size(); ++i)
    EXPECT_NEAR(d.probs[*f.vocab.find(words[i].first)], expect[i] / sum, 1e-9);

  // The distance reading inverts the ranking.
  const auto dd = cluster_topic_dist(centroid, f.emb, f.vocab, CosineScore::distance);
  EXPECT_GT(dd.probs[*f.vocab.find("d")], dd.probs[*f.vocab.find("a")]);
}

TEST(ClusterAllocation, SingleTopicIsCertain) {
  const auto f = make({{"a", {1, 0}}, {"b", {0.5, 0.5}}});
  Document doc;
  doc.id = "x";
  doc.tokens = {"a", "b"};
  const auto r = cluster_allocation(doc, std::vector<std::vector<double>>{{1.0, 0.2}}, f.emb);
  EXPECT_EQ(r.dist.theta, (std::vector<double>{1.0}));
  EXPECT_FALSE(r.degenerate);
}

TEST(ClusterAllocation, EquidistantDocumentIsUniform) {
  const auto f = make({{"a", {1, 1}}});
  Document doc;
  doc.id = "x";
  doc.tokens = {"a"};
  const auto r = cluster_allocation(doc, {{1.0, 0.0}, {0.0, 1.0}}, f.emb);
  EXPECT_NEAR(r.dist.theta[0], 0.5, 1e-15);
  EXPECT_NEAR(r.dist.theta[1], 0.5, 1e-15);
}

TEST(ClusterAllocation, ThreeTopicOracle) {
  const auto f = make({{"a", {1, 0, 0}}, {"b", {0, 2, 1}}, {"c", {1, 1, 1}}});
  Document doc;
  doc.id = "x";
  doc.tokens = {"a", "b", "b", "c", "oov"};
  const std::vector<std::vector<double>> topics{{1, 0, 0}, {0, 1, 0}, {-1, 0, 0.1}};
  std::vector<double> mean(3, 0.0);
  const std::vector<std::vector<double>> toks{{1, 0, 0}, {0, 2, 1}, {0, 2, 1}, {1, 1, 1}};
  for (const auto& t : toks)
    for (int i = 0; i < 3; ++i) mean[static_cast<std::size_t>(i)] += t[static_cast<std::size_t>(i)] / 4.0;
  std::vector<double> s;
  double sum = 0;
  for (const auto& t : topics) {
    s.push_back(std::max(0.0, cos_oracle(mean, t)));
    sum += s.back();
  }
  const auto r = cluster_allocation(doc, topics, f.emb);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(r.dist.theta[k], s[k] / sum, 1e-9);
}

TEST(ClusterAllocation, NoEmbeddedTokensIsFlaggedUniform) {
  const auto f = make({{"a", {1, 0}}});
  Document doc;
  doc.id = "x";
  doc.tokens = {"zzz"};
  const auto r = cluster_allocation(doc, {{1.0, 0.0}, {0.0, 1.0}}, f.emb);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.dist.theta, (std::vector<double>{0.5, 0.5}));
}

TEST(Embeddings, TextFormatRoundTrip) {
  TempDir dir;
  const auto f = make({{"a", {1.5, -2}}, {"b", {0.25, 3}}});
  save_embeddings(dir / "e.txt", f.emb, {"a", "b"});
  const auto back = load_embeddings(dir / "e.txt");
  EXPECT_EQ(back.dim(), 2u);
  EXPECT_EQ(back.size(), 2u);
  const auto v = *back.vector_of("b");
  EXPECT_DOUBLE_EQ(v[0], 0.25);
  EXPECT_DOUBLE_EQ(v[1], 3.0);
  EXPECT_FALSE(back.vector_of("c"));
}

TEST(Embeddings, ShortRowIsAnError) {
  TempDir dir;
  test::spit(dir / "e.txt", "2 3\na 1 2 3\nb 1 2\n");
  EXPECT_THROW(load_embeddings(dir / "e.txt"), Error);
}
