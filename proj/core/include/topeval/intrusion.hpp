#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "topeval/corpus.hpp"
#include "topeval/error.hpp"
#include "topeval/topicmodel.hpp"

namespace topeval {

// Topic id used in shown_topics for a control item's pseudo-topic.
inline constexpr TopicId kControlTopic = -1;

struct IntrusionItem {
  std::string item_id;
  std::string doc_id;
  std::string model_name;
  std::array<TopicId, 4> shown_topics{};  // display order
  int intruder_pos = 0;                   // hidden
  std::array<TopicId, 3> top3{};
  bool is_control = false;
  std::string snippet;
  std::string full_text;
  // Top-10 words per shown topic, aligned with shown_topics.
  std::array<std::vector<std::string>, 4> topic_words;
  double low_tau = 0.0;  // threshold actually used when sampling
  int high_rank = 0;
  bool relaxed = false;

  TopicId intruder() const { return shown_topics[static_cast<std::size_t>(intruder_pos)]; }
};

struct Hit {
  std::string hit_id;
  std::vector<std::string> item_ids;  // 5 items, exactly one control
};

struct AnnotationRecord {
  std::string worker_id;
  std::string item_id;
  int chosen_pos = 0;
  std::int64_t timestamp = 0;
  bool operator==(const AnnotationRecord&) const = default;
};

struct RatingRecord {
  std::string worker_id;
  std::string doc_id;
  std::string model_name;
  TopicId topic_id = 0;
  int rating = 0;
  std::int64_t timestamp = 0;
  bool operator==(const RatingRecord&) const = default;
};

struct SamplerOptions {
  double low_tau = 0.05;
  int high_rank = 3;
  // Each relaxation step doubles low_tau (capped at 1).
  int max_relax_steps = 5;
};

struct IntruderSample {
  TopicId topic = 0;
  double low_tau = 0.0;
  bool relaxed = false;
};

// Precomputed per-model view used by the sampler: per-document ranking and,
// per topic, the number of documents ranking it within high_rank.
class IntruderSampler {
 public:
  IntruderSampler(const TopicModelArtifact& model, SamplerOptions options = {});

  // Candidate set for doc at the given low_tau: not among the document's top
  // three, theta below low_tau, and within high_rank for some other document.
  std::vector<TopicId> candidates(std::string_view doc_id, double low_tau) const;
  std::optional<IntruderSample> sample(std::string_view doc_id, std::uint64_t seed) const;

  const SamplerOptions& options() const { return options_; }
  const TopicModelArtifact& model() const { return *model_; }

 private:
  const TopicModelArtifact* model_;
  SamplerOptions options_;
  std::vector<int> high_rank_docs_;  // per topic
};

std::optional<IntruderSample> sample_intruder(std::string_view doc_id,
                                              const TopicModelArtifact& model,
                                              std::uint64_t seed, SamplerOptions options = {});

struct ControlTopic {
  std::vector<TypeId> words;   // 10 distinct types
  TopicWordDist dist;          // uniform over words
};

ControlTopic make_control(const Vocabulary& vocab, std::uint64_t seed, std::size_t n_words = 10);

struct GenerationOptions {
  SamplerOptions sampler;
  std::uint64_t seed = 1;
  std::size_t n_control_docs = 50;
  std::size_t items_per_hit = 4;  // plus one control
};

struct IntrusionSet {
  std::vector<IntrusionItem> items;  // content items then control items
  std::vector<Hit> hits;
  Flags flags;
};

// Builds one intrusion item per (document, model) for the given documents and
// packs them into hits of four model items plus one control item. Control
// items use the documents with the most concentrated top-3 mass under the
// first model unless control_doc_ids is given.
IntrusionSet generate_intrusion(const std::vector<const TopicModelArtifact*>& models,
                                const std::vector<Document>& docs,
                                const std::vector<std::string>& doc_ids, const Vocabulary& vocab,
                                const GenerationOptions& options,
                                const std::vector<std::string>& control_doc_ids = {});

// ---- human-side metrics -------------------------------------------------

struct WorkerQc {
  std::string worker_id;
  int control_total = 0;
  int control_correct = 0;
  double accuracy = 0.0;
  bool kept = false;
  bool no_controls = false;
};

struct QcResult {
  std::vector<AnnotationRecord> kept;
  std::vector<WorkerQc> workers;  // sorted by worker id
};

// Keeps every annotation of workers whose control accuracy is strictly above
// threshold. Workers with no control answers are dropped.
QcResult quality_filter(const std::vector<AnnotationRecord>& annotations,
                        const std::vector<IntrusionItem>& items, double threshold = 0.6);

struct DocScore {
  std::string doc_id;
  std::string item_id;
  double value = 0.0;
  int annotators = 0;
};

struct ModelMetrics {
  std::string model_name;
  std::vector<DocScore> precision;  // per document
  double mean_precision = 0.0;
  std::vector<DocScore> log_odds;   // per document
  double mean_log_odds = 0.0;
  std::optional<double> mean_rating;
  std::size_t rating_count = 0;
};

struct MetricReport {
  std::vector<ModelMetrics> models;  // sorted by model name
  Flags flags;
  ModelMetrics* find(std::string_view name);
  const ModelMetrics* find(std::string_view name) const;
};

// Per-document fraction of annotators choosing the intruder, averaged over
// documents per model. Control items are ignored.
MetricReport model_precision(const std::vector<AnnotationRecord>& annotations,
                             const std::vector<IntrusionItem>& items);

inline constexpr double kLogFloor = 1e-10;

// Adds per-document and mean topic log odds to `report` (creating model
// entries as needed). allocations maps model name to its artifact.
void topic_log_odds(const std::vector<AnnotationRecord>& annotations,
                    const std::vector<IntrusionItem>& items,
                    const std::map<std::string, const TopicModelArtifact*, std::less<>>& models,
                    MetricReport& report);

// Unweighted mean rating per model.
std::map<std::string, double, std::less<>> direct_rating_report(
    const std::vector<RatingRecord>& ratings);

// Items with fewer than min_valid annotations among `kept`.
std::vector<std::string> under_annotated(const std::vector<AnnotationRecord>& kept,
                                         const std::vector<IntrusionItem>& items,
                                         int min_valid = 3);

}  // namespace topeval
