#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "topeval/cluster.hpp"
#include "topeval/corpus.hpp"
#include "topeval/embedding.hpp"
#include "topeval/intrusion.hpp"
#include "topeval/topicmodel.hpp"

namespace topeval::synth {

// Planted-topic generator. Each true topic owns `groups` synonym groups of
// `synonyms` words; a document mixes `topics_per_doc` topics and emits
// tokens in bursts drawn from one synonym group, so synonyms share windows
// far more often than words of different groups. The first synonym of each
// group (its head) is emitted most often.
struct WorldSpec {
  int topics = 10;
  int groups = 10;
  int synonyms = 10;
  int n_docs = 400;
  int doc_bursts = 40;
  int burst_len = 6;
  int topics_per_doc = 3;
  double head_weight = 4.0;  // relative emission weight of a group's head word
  // embedding geometry: vec = generic_scale * beta_g * c + u_g + noise
  int emb_dim = 48;
  double generic_scale = 3.0;
  double beta_spread = 0.1;
  double emb_noise = 0.05;
  std::uint64_t seed = 7;
};

struct World {
  WorldSpec spec;
  std::vector<Document> docs;
  Vocabulary vocab;
  std::vector<std::vector<double>> theta;  // generating mixture per document
  std::vector<std::vector<TypeId>> group_words;  // group -> types, head first
  std::vector<int> group_topic;
  EmbeddingTable emb;
};

World make_world(const WorldSpec& spec);

// Planted truth: topic word distributions from the generating process and
// the generating mixtures, lightly smoothed.
TopicModelArtifact truth_model(const World& world, std::string name = "truth");
// Truth topics with allocations mixed toward random Dirichlet draws.
TopicModelArtifact noisy_model(const World& world, double noise, std::uint64_t seed,
                               std::string name);
// Truth topics with each document's allocation taken from another document.
TopicModelArtifact shuffled_model(const World& world, std::uint64_t seed, std::string name);
// Random-word topics with random allocations.
TopicModelArtifact random_model(const World& world, std::uint64_t seed, std::string name);
ClusterModelResult cluster_model(const World& world, std::uint64_t seed,
                                 std::string name = "cluster");

// truth, noisy, shuffled, random, cluster.
std::vector<TopicModelArtifact> model_suite(const World& world, std::uint64_t seed);

// Raw text rendering (sentences of ~10 words) for exercising ingestion.
std::vector<RawDocument> raw_corpus(const World& world);

// Simulated annotators: each picks the shown topic whose top words overlap
// the document least, after adding uniform noise of the given amplitude to
// the overlap scores.
std::vector<AnnotationRecord> simulate_annotations(const std::vector<IntrusionItem>& items,
                                                   const std::vector<Document>& docs,
                                                   int annotators_per_item,
                                                   double noise, std::uint64_t seed);

// Writes corpus.jsonl, stopwords.txt (empty), models/{truth,noisy,shuffled,
// random}.model, embeddings.txt and toy.conf (cluster baseline enabled) into
// dir. Returns the path of toy.conf.
std::filesystem::path write_toy_world(const std::filesystem::path& dir, int n_docs,
                                      std::uint64_t seed);

}  // namespace topeval::synth
