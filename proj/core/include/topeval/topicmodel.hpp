#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "topeval/corpus.hpp"
#include "topeval/error.hpp"

namespace topeval {

using TopicId = std::int32_t;

// Dense distribution over the vocabulary.
struct TopicWordDist {
  TopicId topic_id = 0;
  std::vector<double> probs;

  // The n highest-probability types, ties broken by lower type id. Zero
  // probability types are never returned.
  std::vector<TypeId> top_words(std::size_t n) const;
};

struct DocTopicDist {
  std::string doc_id;
  std::vector<double> theta;

  // Topic ids ordered by decreasing theta, ties by lower topic id.
  std::vector<TopicId> ranked() const;
};

struct TopicModelArtifact {
  std::string name;
  std::vector<TopicWordDist> topics;
  std::map<std::string, DocTopicDist, std::less<>> allocations;

  std::size_t num_topics() const { return topics.size(); }
  const DocTopicDist* allocation(std::string_view doc_id) const;
};

inline constexpr double kSumTolerance = 1e-6;
inline constexpr double kRenormalizeTolerance = 1e-4;

// Checks nonnegativity and unit sums, renormalizing rows whose sum is within
// kRenormalizeTolerance of 1 and throwing on anything worse.
void validate_model(TopicModelArtifact& model, std::size_t vocab_size);

struct SaveOptions {
  // Per-topic entry cap; the rest of the mass goes to a remainder bucket
  // spread uniformly over the omitted types on load. 0 writes full rows.
  std::size_t max_topic_entries = 1000;
  std::string config_hash;
};

void save_model(const std::filesystem::path& path, const TopicModelArtifact& model,
                const Vocabulary& vocab, const SaveOptions& options = {});

// Loads and validates a model file. Type ids are remapped onto `vocab`; the
// model's vocabulary must be the same set of words.
TopicModelArtifact load_model(const std::filesystem::path& path, const Vocabulary& vocab);

}  // namespace topeval
