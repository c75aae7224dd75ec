#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "topeval/cooccurrence.hpp"
#include "topeval/topicmodel.hpp"

namespace topeval {

inline constexpr double kNpmiEps = 1e-12;

// Normalised PMI from window counts, clamped to [-1, 1]. A zero joint count
// (including a word never seen) yields -1. Both words present in every unit
// yields the PMI 0 / 0 case, reported as 1 when they always co-occur.
double npmi_pair(TypeId w1, TypeId w2, const CooccurrenceStats& stats, double eps = kNpmiEps);

// Same formula from raw probabilities; exposed for fixtures stated in
// probability space.
double npmi_from_probs(double p1, double p2, double p12, double eps = kNpmiEps);

struct TopicCoherence {
  double value = 0.0;
  std::size_t words_used = 0;
  bool short_topic = false;  // fewer than n nonzero words available
};

// Mean NPMI over every unordered pair of the topic's top-n words.
TopicCoherence topic_coherence(const TopicWordDist& topic, const CooccurrenceStats& stats,
                               std::size_t n = 10);
double word_set_coherence(const std::vector<TypeId>& words, const CooccurrenceStats& stats);

struct CoherenceReport {
  std::string model_name;
  std::vector<double> per_topic;
  std::vector<std::vector<TypeId>> top_words;
  double model_mean = 0.0;
  std::size_t n_words = 10;
  std::string stats_ref;
  Flags flags;
};

CoherenceReport model_coherence(const TopicModelArtifact& model, const CooccurrenceStats& stats,
                                std::size_t n = 10, std::string stats_ref = {});

// Tab-separated per-topic table (model, topic, npmi, top words).
void write_coherence_table(const std::filesystem::path& path,
                           const std::vector<CoherenceReport>& reports, const Vocabulary& vocab,
                           const std::string& config_hash);
// Record file: one line per (model, dataset) with the mean.
void write_coherence_records(const std::filesystem::path& path,
                             const std::vector<CoherenceReport>& reports,
                             const std::string& dataset, const std::string& config_hash);

}  // namespace topeval
