#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace topeval {

inline constexpr std::string_view kEnvPrefix = "TOPEVAL_";

// Every pipeline parameter. Serialized canonically (sorted key = value lines)
// and hashed into the header of each artifact.
struct RunConfig {
  // paths
  std::string corpus;
  std::string models;      // comma-separated model files
  std::string embeddings;
  std::string stop_words;  // empty: bundled list
  std::string annotations;
  std::string ratings;
  std::string output_dir = "out";
  std::string dataset = "corpus";

  // seeds
  std::uint64_t seed = 1;

  // corpus
  std::int64_t min_count = 10;
  double top_exclude = 0.001;
  int window_size = 20;

  // coherence
  int n_words = 10;

  // topicmodel / cluster baseline
  bool cluster_baseline = false;
  int cluster_k = 100;
  std::string cluster_score = "similarity";

  // intrusion
  double low_tau = 0.05;
  int high_rank = 3;
  double qc_threshold = 0.6;
  int n_intrusion_docs = 100;
  int n_control_docs = 50;

  // autoeval
  double mu = 2500.0;
  double c = 0.01;
  int n_train_docs = 1600;
  int n_test_docs = 100;
  int n_dev_docs = 0;
  int m_small = 5;
  int m_large = 10;
  int epochs = 60;

  // annotation service
  int lease_seconds = 600;
  int max_annotators = 10;

  // Applies one key/value; throws Error on unknown keys or bad values.
  void set(std::string_view key, std::string_view value);
  std::map<std::string, std::string> to_map() const;
  std::string canonical() const;
  std::string hash() const;  // 16 hex digits; output_dir excluded
};

// "key = value" lines; '#' starts a comment. Keys use snake_case.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});
// Makes relative path fields (including each listed model) relative to base.
RunConfig resolve_paths(RunConfig config, const std::filesystem::path& base);
// Overrides from TOPEVAL_<KEY> environment variables (upper-cased keys).
void apply_env_overrides(RunConfig& config);

std::vector<std::string> split_list(std::string_view s, char sep = ',');

}  // namespace topeval
