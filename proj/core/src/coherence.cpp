#include "topeval/coherence.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "topeval/parallel.hpp"
#include "topeval/records.hpp"

namespace topeval {

double npmi_from_probs(double p1, double p2, double p12, double eps) {
  if (p12 <= 0.0 || p1 <= 0.0 || p2 <= 0.0) return -1.0;
  if (p12 >= 1.0) return 1.0;
  const double joint = std::max(p12, eps);
  const double pmi = std::log(joint / (p1 * p2));
  return std::clamp(pmi / -std::log(joint), -1.0, 1.0);
}

double npmi_pair(TypeId w1, TypeId w2, const CooccurrenceStats& stats, double eps) {
  const auto n = static_cast<double>(stats.unit_count());
  if (n <= 0.0) return -1.0;
  const auto c12 = stats.pair_count(w1, w2);
  if (c12 == 0) return -1.0;
  return npmi_from_probs(static_cast<double>(stats.single_count(w1)) / n,
                         static_cast<double>(stats.single_count(w2)) / n,
                         static_cast<double>(c12) / n, eps);
}

double word_set_coherence(const std::vector<TypeId>& words, const CooccurrenceStats& stats) {
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < words.size(); ++i)
    for (std::size_t j = i + 1; j < words.size(); ++j) {
      sum += npmi_pair(words[i], words[j], stats);
      ++pairs;
    }
  return pairs ? sum / static_cast<double>(pairs) : 0.0;
}

TopicCoherence topic_coherence(const TopicWordDist& topic, const CooccurrenceStats& stats,
                               std::size_t n) {
  if (n < 2) throw Error("topic_coherence: n must be at least 2");
  const auto words = topic.top_words(n);
  TopicCoherence out;
  out.words_used = words.size();
  out.short_topic = words.size() < n;
  out.value = word_set_coherence(words, stats);
  return out;
}

CoherenceReport model_coherence(const TopicModelArtifact& model, const CooccurrenceStats& stats,
                                std::size_t n, std::string stats_ref) {
  if (stats.mode() != CountMode::window)
    throw Error("model_coherence: coherence needs window-mode statistics");
  CoherenceReport report;
  report.model_name = model.name;
  report.n_words = n;
  report.stats_ref = std::move(stats_ref);
  const std::size_t k = model.topics.size();
  std::vector<TopicCoherence> per(k);
  parallel_for(k, [&](std::size_t t) { per[t] = topic_coherence(model.topics[t], stats, n); });
  double sum = 0.0;
  std::size_t short_topics = 0, unseen_words = 0;
  for (std::size_t t = 0; t < k; ++t) {
    report.per_topic.push_back(per[t].value);
    report.top_words.push_back(model.topics[t].top_words(n));
    sum += per[t].value;
    if (per[t].short_topic) ++short_topics;
    for (TypeId w : report.top_words.back())
      if (stats.single_count(w) == 0) ++unseen_words;
  }
  report.model_mean = k ? sum / static_cast<double>(k) : 0.0;
  if (short_topics)
    report.flags.push_back(std::to_string(short_topics) + " topics have fewer than " +
                           std::to_string(n) + " nonzero words");
  if (unseen_words)
    report.flags.push_back(std::to_string(unseen_words) +
                           " top words never occur in the reference statistics");
  return report;
}

void write_coherence_table(const std::filesystem::path& path,
                           const std::vector<CoherenceReport>& reports, const Vocabulary& vocab,
                           const std::string& config_hash) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(6);
  out << tsv_header("topeval.coherence-table", config_hash);
  out << "model\ttopic\tnpmi\ttop_words\n";
  for (const auto& r : reports) {
    for (std::size_t t = 0; t < r.per_topic.size(); ++t) {
      out << r.model_name << '\t' << t << '\t' << r.per_topic[t] << '\t';
      const auto& words = r.top_words.at(t);
      for (std::size_t i = 0; i < words.size(); ++i)
        out << (i ? " " : "") << vocab.types.at(static_cast<std::size_t>(words[i]));
      out << '\n';
    }
    out << r.model_name << "\tmean\t" << r.model_mean << "\t\n";
  }
  write_file_atomic(path, out.str());
}

void write_coherence_records(const std::filesystem::path& path,
                             const std::vector<CoherenceReport>& reports,
                             const std::string& dataset, const std::string& config_hash) {
  std::string out = header_line("topeval.coherence", config_hash);
  for (const auto& r : reports) {
    nlohmann::json j;
    j["model"] = r.model_name;
    j["dataset"] = dataset;
    j["mean_npmi"] = r.model_mean;
    j["n_words"] = r.n_words;
    j["stats"] = r.stats_ref;
    j["topics"] = r.per_topic.size();
    out += j.dump() + "\n";
  }
  write_file_atomic(path, out);
}

}  // namespace topeval
