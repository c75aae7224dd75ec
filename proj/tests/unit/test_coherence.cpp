#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"
#include "topeval/coherence.hpp"
#include "topeval/synthetic.hpp"

using namespace topeval;
using topeval::test::TempDir;

namespace {

// Window-mode statistics built unit by unit over types 0..v-1.
CooccurrenceStats units(std::size_t v, const std::vector<std::vector<TypeId>>& us) {
  CooccurrenceStats s(CountMode::window, 20, v);
  for (auto u : us) {
    std::sort(u.begin(), u.end());
    s.add_unit(u);
  }
  return s;
}

double hand_npmi(double c1, double c2, double c12, double n) {
  const double p1 = c1 / n, p2 = c2 / n, p12 = c12 / n;
  return std::log(p12 / (p1 * p2)) / -std::log(p12);
}

TopicWordDist topic_over(std::size_t v, const std::vector<TypeId>& words) {
  TopicWordDist t;
  t.probs.assign(v, 0.0);
  // Descending weights keep the listed order as the top-word order.
  double w = static_cast<double>(words.size());
  double sum = 0;
  for (TypeId x : words) {
    t.probs[static_cast<std::size_t>(x)] = w;
    sum += w--;
  }
  for (double& p : t.probs) p /= sum;
  return t;
}

}  // namespace

TEST(Npmi, PerfectAssociationIsOne) { EXPECT_DOUBLE_EQ(npmi_from_probs(0.1, 0.1, 0.1), 1.0); }

TEST(Npmi, IndependenceIsZero) { EXPECT_NEAR(npmi_from_probs(0.5, 0.5, 0.25), 0.0, 1e-15); }

TEST(Npmi, NeverTogetherIsMinusOne) {
  EXPECT_EQ(npmi_from_probs(0.5, 0.5, 0.0), -1.0);
  const auto s = units(3, {{0}, {1}, {0, 2}});
  EXPECT_EQ(npmi_pair(0, 1, s), -1.0);
}

TEST(Npmi, FourWindowFixture) {
  // Counts {w1:2, w2:2, both:1} over four windows.
  const auto s = units(3, {{0, 1}, {0}, {1}, {2}});
  EXPECT_NEAR(npmi_pair(0, 1, s), hand_npmi(2, 2, 1, 4), 1e-15);
  EXPECT_NEAR(npmi_pair(0, 1, s), 0.0, 1e-15);
}

TEST(Npmi, AsymmetricFixture) {
  const auto s = units(3, {{0, 1}, {0}, {1}, {1}, {2}});
  EXPECT_NEAR(npmi_pair(0, 1, s), hand_npmi(2, 3, 1, 5), 1e-15);
  EXPECT_LT(npmi_pair(0, 1, s), 0.0);
  EXPECT_EQ(npmi_pair(0, 1, s), npmi_pair(1, 0, s));
}

TEST(Npmi, AlwaysPresentPairIsOne) {
  const auto s = units(2, {{0, 1}, {0, 1}});
  EXPECT_EQ(npmi_pair(0, 1, s), 1.0);
}

TEST(TopicCoherence, PerfectlyCooccurringTopWordsScoreOne) {
  std::vector<TypeId> top;
  for (TypeId i = 0; i < 10; ++i) top.push_back(i);
  std::vector<TypeId> all_top = top;
  const auto s = units(12, {all_top, all_top, {10}, {11}, {10, 11}});
  const auto c = topic_coherence(topic_over(12, top), s, 10);
  EXPECT_NEAR(c.value, 1.0, 1e-15);
  EXPECT_EQ(c.words_used, 10u);
  EXPECT_FALSE(c.short_topic);
}

TEST(TopicCoherence, IndependentPairsScoreZero) {
  // Every pair among {0,1,2} has p1 = p2 = 1/2 and p12 = 1/4.
  const auto s = units(3, {{0, 1, 2}, {0}, {1}, {2}});
  EXPECT_NEAR(topic_coherence(topic_over(3, {0, 1, 2}), s, 3).value, 0.0, 1e-15);
}

TEST(TopicCoherence, ThreeWordTopicIsMeanOfPairs) {
  const auto s = units(4, {{0, 1}, {0, 2}, {1, 2}, {2}});
  const double expect =
      (hand_npmi(2, 2, 1, 4) + hand_npmi(2, 3, 1, 4) + hand_npmi(2, 3, 1, 4)) / 3.0;
  EXPECT_NEAR(topic_coherence(topic_over(4, {0, 1, 2}), s, 3).value, expect, 1e-15);
}

TEST(TopicCoherence, ShortTopicIsFlagged) {
  const auto s = units(4, {{0, 1}, {2, 3}});
  const auto c = topic_coherence(topic_over(4, {0, 1}), s, 10);
  EXPECT_TRUE(c.short_topic);
  EXPECT_EQ(c.words_used, 2u);
}

TEST(ModelCoherence, MeanOverTopics) {
  // Topic 0 words {2,3} always together (NPMI 1); topic 1 words {0,1} independent (NPMI 0).
  const auto s = units(5, {{0, 1, 2, 3}, {0}, {1}, {4}});
  TopicModelArtifact m;
  m.name = "m";
  m.topics = {topic_over(5, {2, 3}), topic_over(5, {0, 1})};
  const auto r = model_coherence(m, s, 2);
  EXPECT_NEAR(r.per_topic[0], 1.0, 1e-15);
  EXPECT_NEAR(r.per_topic[1], 0.0, 1e-15);
  EXPECT_NEAR(r.model_mean, 0.5, 1e-15);
}

TEST(ModelCoherence, IdenticalTopicsScoreIdentically) {
  const auto s = units(5, {{0, 1, 2}, {0, 3}, {1, 4}, {2, 3, 4}});
  TopicModelArtifact m;
  m.name = "m";
  m.topics = {topic_over(5, {0, 3, 4}), topic_over(5, {0, 3, 4})};
  const auto r = model_coherence(m, s, 3);
  EXPECT_EQ(r.per_topic[0], r.per_topic[1]);
}

TEST(ModelCoherence, RequiresWindowStatistics) {
  CooccurrenceStats doc(CountMode::document, 20, 2);
  TopicModelArtifact m;
  m.name = "m";
  m.topics = {topic_over(2, {0, 1})};
  EXPECT_THROW(model_coherence(m, doc, 2), Error);
}

TEST(ModelCoherence, SynonymClustersBeatRandomWords) {
  synth::WorldSpec spec;
  spec.n_docs = 200;
  const auto world = synth::make_world(spec);
  const auto stats = count_cooccurrence(world.docs, world.vocab.size(), CountMode::window, 20);
  const auto cluster = model_coherence(synth::cluster_model(world, 3).model, stats);
  const auto random = model_coherence(synth::random_model(world, 3, "random"), stats);
  EXPECT_GT(cluster.model_mean, random.model_mean);
}

TEST(CoherenceOutput, TableAndRecords) {
  TempDir dir;
  std::vector<Document> docs(1);
  docs[0].tokens = {"a", "b", "c"};
  const auto vocab = make_vocabulary(docs);
  CoherenceReport r;
  r.model_name = "m";
  r.per_topic = {0.5, -0.25};
  r.top_words = {{0, 1}, {2}};
  r.model_mean = 0.125;
  write_coherence_table(dir / "c.tsv", {r}, vocab, "h1");
  EXPECT_EQ(test::slurp(dir / "c.tsv"),
            "#topeval.coherence-table\t1\th1\n"
            "model\ttopic\tnpmi\ttop_words\n"
            "m\t0\t0.500000\ta b\n"
            "m\t1\t-0.250000\tc\n"
            "m\tmean\t0.125000\t\n");
  write_coherence_records(dir / "c.jsonl", {r}, "toy", "h1");
  const auto text = test::slurp(dir / "c.jsonl");
  EXPECT_EQ(text.rfind("{\"format\":\"topeval.coherence\",\"version\":1,\"config_hash\":\"h1\"}\n", 0), 0u);
  EXPECT_NE(text.find("\"dataset\":\"toy\""), std::string::npos);
}
