#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "topeval/cooccurrence.hpp"
#include "topeval/index.hpp"
#include "topeval/intrusion.hpp"
#include "topeval/topicmodel.hpp"

namespace topeval {

inline constexpr double kDirichletMu = 2500.0;

struct QueryLikelihood {
  double value = 0.0;
  std::size_t dropped = 0;  // query words absent from the collection
  bool empty_query = false;
};

// Dirichlet-smoothed log P(d | w1..wN) = sum_i log((tf + mu P(w|C)) / (|d| + mu)).
QueryLikelihood query_likelihood(std::size_t doc, const std::vector<TypeId>& words,
                                 const InvertedIndex& index, double mu = kDirichletMu);

struct PairwiseLogprob {
  double value = 0.0;
  std::size_t words_used = 0;
  bool short_topic = false;
};

// sum_{i<j<=m} log(max(#(wi,wj), min_count) / #(.)) from document-mode stats.
PairwiseLogprob pairwise_logprob(const std::vector<TypeId>& words, std::size_t m,
                                 const CooccurrenceStats& stats, double min_count = 1.0);

inline constexpr std::size_t kNumFeatures = 3;
using FeatureVector = std::array<double, kNumFeatures>;  // f_ir, f_pair5, f_pair10

struct FeatureOptions {
  std::size_t query_words = 10;
  std::size_t pair_m_small = 5;
  std::size_t pair_m_large = 10;
  double mu = kDirichletMu;
  double min_pair_count = 1.0;
};

// Feature extraction over an immutable index and document-mode stats.
class FeatureExtractor {
 public:
  FeatureExtractor(const InvertedIndex& index, const CooccurrenceStats& doc_stats,
                   FeatureOptions options = {});

  FeatureVector features(std::size_t doc, const std::vector<TypeId>& topic_words) const;
  FeatureVector features(std::size_t doc, const TopicWordDist& topic) const;
  const InvertedIndex& index() const { return *index_; }
  const FeatureOptions& options() const { return options_; }

 private:
  const InvertedIndex* index_;
  const CooccurrenceStats* stats_;
  FeatureOptions options_;
};

struct RankInstance {
  TopicId topic_id = 0;
  FeatureVector features{};
  int label = 0;  // 1 for the intruder
};

struct RankGroup {
  std::string doc_id;
  std::string model_name;
  std::string item_id;  // set when built from an intrusion item
  std::vector<RankInstance> instances;
};

struct TrainingSetOptions {
  std::size_t n_train_docs = 1600;
  std::size_t n_test_docs = 100;
  std::size_t n_dev_docs = 0;  // drawn after training documents; not used by training
  std::uint64_t seed = 1;
  SamplerOptions sampler;
  // When non-empty these documents form the test split (e.g. the documents
  // annotated by humans) and are excluded from training.
  std::vector<std::string> test_doc_ids;
};

struct TrainingSet {
  std::vector<RankGroup> train;
  std::vector<RankGroup> dev;
  std::vector<RankGroup> test;
  std::vector<std::string> train_doc_ids;
  std::vector<std::string> dev_doc_ids;
  std::vector<std::string> test_doc_ids;
  Flags flags;
};

// Per document and per model: the document's top three topics plus one
// sampled intruder. Documents that lack an intruder (or an allocation) under
// any model are skipped and replaced, so split sizes are exact when enough
// documents exist. Splitting is by document.
TrainingSet build_training_set(const std::vector<const TopicModelArtifact*>& models,
                               const std::vector<Document>& docs, const FeatureExtractor& fx,
                               const TrainingSetOptions& options);

// Groups aligned with existing intrusion items (control items skipped).
std::vector<RankGroup> groups_from_items(
    const std::vector<IntrusionItem>& items,
    const std::map<std::string, const TopicModelArtifact*, std::less<>>& models,
    const FeatureExtractor& fx, Flags* flags = nullptr);

struct FeatureScaling {
  FeatureVector mean{};
  FeatureVector stddev{1.0, 1.0, 1.0};
};

struct TrainerOptions {
  double c = 0.01;  // L2 regularization strength
  std::uint64_t seed = 1;
  int epochs = 60;
  double learning_rate = 0.1;  // step at iteration t: lr / sqrt(t)
};

struct LinearRankModel {
  FeatureVector weights{};
  double bias = 0.0;
  FeatureScaling scaling;
  TrainerOptions trainer;
  std::size_t train_groups = 0;
  std::size_t train_pairs = 0;
  bool degenerate = false;

  double score(const FeatureVector& raw) const;
};

FeatureScaling fit_scaling(const std::vector<RankGroup>& groups);

// Pairwise hinge ranking (rank-SVM objective): minimizes
//   c/2 |w|^2 + mean over within-group (positive, negative) pairs of
//   max(0, 1 - w . (z_pos - z_neg))
// on z-normalized features, by seeded averaged subgradient descent.
LinearRankModel train_ranker(const std::vector<RankGroup>& train, const TrainerOptions& options);

// Highest-scoring topic; ties go to the lowest topic id.
TopicId predict_intruder(const LinearRankModel& model, const RankGroup& group);

struct SystemPrecision {
  std::string model_name;
  std::vector<DocScore> per_doc;  // binary
  double mean = 0.0;
};

std::vector<SystemPrecision> system_model_precision(const LinearRankModel& model,
                                                    const std::vector<RankGroup>& groups);
double group_accuracy(const LinearRankModel& model, const std::vector<RankGroup>& groups);

// Pearson product-moment correlation; nullopt for fewer than 3 points or
// zero variance.
std::optional<double> correlate(const std::vector<double>& x, const std::vector<double>& y);

void save_ranker(const std::filesystem::path& path, const LinearRankModel& model,
                 std::string_view config_hash);
LinearRankModel load_ranker(const std::filesystem::path& path);

}  // namespace topeval
