#pragma once

#include <cstdint>
#include <vector>

#include "topeval/corpus.hpp"
#include "topeval/embedding.hpp"
#include "topeval/topicmodel.hpp"

namespace topeval {

struct Cluster {
  std::vector<double> centroid;
  std::vector<TypeId> members;
};

struct KMeansResult {
  std::vector<Cluster> clusters;
  std::vector<TypeId> dropped;  // vocabulary types with no embedding
  int iterations = 0;
  bool converged = false;
};

// Lloyd's algorithm on Euclidean distance with greedy k-means++ seeding. Each run
// stops at an assignment fixpoint or after max_iterations; of n_init seeded
// runs the one with the lowest within-cluster sum of squares is kept.
KMeansResult kmeans_clusters(const EmbeddingTable& emb, const Vocabulary& vocab, std::size_t k,
                             std::uint64_t seed, int max_iterations = 200, int n_init = 10);

// How a word's score against a centroid is derived before linear
// normalization. Similarity clamps negative cosines to zero; distance uses
// 1 - cosine (the literal reading, which inverts the ranking).
enum class CosineScore { similarity, distance };

TopicWordDist cluster_topic_dist(std::span<const double> centroid, const EmbeddingTable& emb,
                                 const Vocabulary& vocab,
                                 CosineScore score = CosineScore::similarity);

struct AllocationResult {
  DocTopicDist dist;
  bool degenerate = false;  // no embedded tokens or all scores zero: uniform
};

// Mean embedding of the top-10 words of topic; empty if none are embedded.
std::vector<double> topic_vector(const TopicWordDist& topic, const EmbeddingTable& emb,
                                 const Vocabulary& vocab, std::size_t top_n = 10);

AllocationResult cluster_allocation(const Document& doc,
                                    const std::vector<std::vector<double>>& topic_vectors,
                                    const EmbeddingTable& emb);
AllocationResult cluster_allocation(const Document& doc, const std::vector<TopicWordDist>& topics,
                                    const EmbeddingTable& emb, const Vocabulary& vocab);

struct ClusterModelResult {
  TopicModelArtifact model;
  Flags flags;
};

// The full adversarial baseline: k-means topics, cosine word distributions,
// and cosine document allocations.
ClusterModelResult build_cluster_model(const EmbeddingTable& emb, const Vocabulary& vocab,
                                       const std::vector<Document>& docs, std::size_t k,
                                       std::uint64_t seed,
                                       CosineScore score = CosineScore::similarity);

}  // namespace topeval
